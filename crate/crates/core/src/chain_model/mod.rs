//! Letters, templates, propagation rules and the template graph.

mod graph;
mod rules;
mod symbol;
mod template;

pub use graph::{build_template_graph, ChainReport, GraphNode, TemplateGraph};
pub use rules::{
    apply_backward, apply_forward, enumerate_chain, forward_rules, ChainTrace, Outcome, Rule,
    RuleKind, RuleSet, Step, Variant,
};
pub use symbol::{identify_10, Alphabet, AlphabetKind, Letter, Symbol};
pub use template::{
    g_of_t, is_boundary, label, last_index, legality_penalty, pair_allowed, pair_illegal,
    valid_templates, validity_penalty, Template, TemplateLabel, ALLOWED_PAIRS,
    BOUNDARY_FORBIDDEN, INTERIOR_FORBIDDEN,
};
