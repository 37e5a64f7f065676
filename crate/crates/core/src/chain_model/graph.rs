//! The template graph: valid templates joined by forward rules.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::rules::{apply_backward, apply_forward, forward_rules, Outcome, RuleSet, Variant};
use super::template::{label, last_index, legality_penalty, valid_templates, validity_penalty, Template};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct GraphNode {
    pub template: Template,
    pub valid: bool,
    pub legal: bool,
    /// Index of the forward successor, if any.
    pub next: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub m: usize,
    /// Node indices in forward order.
    pub nodes: Vec<usize>,
    pub start: Template,
    pub end: Template,
    pub starts_initial: bool,
    pub ends_final: bool,
    pub invalid_nodes: usize,
    pub illegal_nodes: usize,
}

impl ChainReport {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Every node valid and legal.
    pub fn is_clean(&self) -> bool {
        self.invalid_nodes == 0 && self.illegal_nodes == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TemplateGraph {
    pub n: usize,
    pub l: usize,
    pub nodes: Vec<GraphNode>,
    pub chains: Vec<ChainReport>,
}

impl TemplateGraph {
    pub fn clean_chains(&self) -> impl Iterator<Item = &ChainReport> {
        self.chains.iter().filter(|c| c.is_clean())
    }

    pub fn templates(&self, chain: &ChainReport) -> Vec<Template> {
        chain.nodes.iter().map(|&k| self.nodes[k].template.clone()).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.valid).count()
    }
}

fn neighbours(t: &Template, rs: &RuleSet) -> Result<(Option<Template>, Option<Template>)> {
    let pick = |o: Outcome, dir: &str| -> Result<Option<Template>> {
        match o {
            Outcome::None => Ok(None),
            Outcome::One(s) => Ok(Some(s.template)),
            Outcome::Ambiguous(h) => Err(Error::Integrity(format!(
                "template {t} has {} {dir} rules",
                h.len()
            ))),
        }
    };
    Ok((
        pick(apply_forward(t, rs), "forward")?,
        pick(apply_backward(t, rs), "backward")?,
    ))
}

/// Builds the graph on all valid templates of the QMA rule set, closed under
/// single forward/backward steps so that chains leaving the valid set show up
/// with their invalid endpoints, and splits it into maximal chains.
pub fn build_template_graph(n: usize, l: usize) -> Result<TemplateGraph> {
    let rs = forward_rules(n, l, Variant::Qma)?;
    let mut seen: BTreeSet<Template> = valid_templates(l).into_iter().collect();
    let mut frontier: Vec<Template> = seen.iter().cloned().collect();
    while let Some(t) = frontier.pop() {
        let (fwd, bwd) = neighbours(&t, &rs)?;
        for nb in [fwd, bwd].into_iter().flatten() {
            if seen.insert(nb.clone()) {
                frontier.push(nb);
            }
        }
    }

    let index: BTreeMap<Template, usize> =
        seen.iter().cloned().enumerate().map(|(k, t)| (t, k)).collect();
    let mut nodes: Vec<GraphNode> = seen
        .into_iter()
        .map(|t| GraphNode {
            valid: validity_penalty(&t) == 0,
            legal: legality_penalty(&t, n) == 0,
            template: t,
            next: None,
        })
        .collect();
    let mut prev: Vec<Option<usize>> = vec![None; nodes.len()];
    for k in 0..nodes.len() {
        let (fwd, _) = neighbours(&nodes[k].template, &rs)?;
        if let Some(f) = fwd {
            let j = index[&f];
            if let Some(other) = prev[j] {
                return Err(Error::Integrity(format!(
                    "template {} has two predecessors: {} and {}",
                    nodes[j].template, nodes[other].template, nodes[k].template
                )));
            }
            prev[j] = Some(k);
            nodes[k].next = Some(j);
        }
    }

    let mut chains = Vec::new();
    let mut visited = vec![false; nodes.len()];
    for start in 0..nodes.len() {
        if prev[start].is_some() {
            continue;
        }
        let mut members = Vec::new();
        let mut cur = Some(start);
        while let Some(k) = cur {
            visited[k] = true;
            members.push(k);
            cur = nodes[k].next;
        }
        chains.push(chain_report(&nodes, members));
    }
    if let Some(k) = visited.iter().position(|v| !v) {
        return Err(Error::Integrity(format!(
            "template {} lies on a cycle of forward rules",
            nodes[k].template
        )));
    }
    Ok(TemplateGraph { n, l, nodes, chains })
}

fn chain_report(nodes: &[GraphNode], members: Vec<usize>) -> ChainReport {
    let first = &nodes[members[0]].template;
    let last = &nodes[*members.last().unwrap()].template;
    let m = first.m();
    let lab_t = |t: &Template| label(t).ok().map(|x| x.t);
    ChainReport {
        m,
        start: first.clone(),
        end: last.clone(),
        starts_initial: lab_t(first) == Some(0),
        ends_final: m <= first.chain_l() && lab_t(last) == Some(last_index(m, first.chain_l())),
        invalid_nodes: members.iter().filter(|&&k| !nodes[k].valid).count(),
        illegal_nodes: members.iter().filter(|&&k| !nodes[k].legal).count(),
        nodes: members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{enumerate_chain, Letter};

    #[test]
    fn unique_clean_chain_for_n2_l4() {
        let g = build_template_graph(2, 4).unwrap();
        let clean: Vec<_> = g.clean_chains().collect();
        assert_eq!(clean.len(), 1);
        let c = clean[0];
        assert_eq!(c.m, 2);
        assert!(c.starts_initial && c.ends_final);
        let rs = forward_rules(2, 4, Variant::Qma).unwrap();
        assert_eq!(g.templates(c), enumerate_chain(&rs).unwrap().templates);
    }

    #[test]
    fn short_register_chain_hits_an_illegal_node() {
        let g = build_template_graph(2, 4).unwrap();
        let start: Template = "T_R Q N N N N".parse().unwrap();
        let c = g.chains.iter().find(|c| c.start == start).unwrap();
        assert_eq!(c.m, 1);
        assert!(c.illegal_nodes > 0);
        let bad = c
            .nodes
            .iter()
            .map(|&k| &g.nodes[k])
            .find(|n| !n.legal)
            .unwrap();
        assert!(bad
            .template
            .letters()
            .windows(2)
            .any(|w| w == [Letter::G, Letter::N]));
    }
}
