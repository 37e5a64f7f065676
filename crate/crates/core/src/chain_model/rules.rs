//! Propagation rules and the forward/backward rewriting they induce on
//! templates.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::symbol::Letter::{self, *};
use super::template::{g_of_t, is_boundary, last_index, Template};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Initial template `T_R S^n N^(L-n+1)`, used with `H_init`.
    AdiabaticWithS,
    /// Initial template `T_R Q^n N^(L-n+1)`, used by the QMA reduction.
    Qma,
}

/// How a rule maps the bits of its left-hand side to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleKind {
    /// Bits carried over unchanged.
    Carry,
    /// Bits pass through gate `U_g` (1-based).
    Gate(usize),
    /// A fresh `0` bit is appended as the lowest bit; counts as gate `g`.
    Seed(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub site: usize,
    pub lhs: (Letter, Letter),
    pub rhs: (Letter, Letter),
    pub kind: RuleKind,
}

impl Rule {
    fn new(site: usize, lhs: (Letter, Letter), rhs: (Letter, Letter), kind: RuleKind) -> Self {
        Rule {
            site,
            lhs,
            rhs,
            kind,
        }
    }

    pub fn tag(&self) -> String {
        format!(
            "{}{}<->{}{}@{}",
            self.lhs.0, self.lhs.1, self.rhs.0, self.rhs.1, self.site
        )
    }

    pub fn lhs_bits(&self) -> usize {
        self.lhs.0.has_bit() as usize + self.lhs.1.has_bit() as usize
    }

    pub fn rhs_bits(&self) -> usize {
        self.rhs.0.has_bit() as usize + self.rhs.1.has_bit() as usize
    }

    /// Gate index this rule advances the computation by, if any.
    pub fn gate_index(&self) -> Option<usize> {
        match self.kind {
            RuleKind::Gate(g) | RuleKind::Seed(g) => Some(g),
            RuleKind::Carry => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// All propagation rules of one chain, indexed by site.
#[derive(Debug, Clone, Serialize)]
pub struct RuleSet {
    pub n: usize,
    pub l: usize,
    pub variant: Variant,
    pub identified: bool,
    pub rules: Vec<Rule>,
    #[serde(skip)]
    by_site: Vec<Vec<usize>>,
}

/// Builds the rule list for block size `n` and `L` gates.
///
/// Gate `U_(i+1)` is attached to `T_R Q -> F G` at boundary sites and to
/// `G Q -> B G` at interior sites. Where no gate of the right arity exists
/// (site `L`, or `G Q` on a boundary, which legality forbids anyway) the
/// rule just carries its bits.
pub fn forward_rules(n: usize, l: usize, variant: Variant) -> Result<RuleSet> {
    super::template::check_chain_params(n, l)?;
    let mut rules = Vec::new();
    let one_qubit_gate = |i: usize| i < l && i % n == 0;
    let two_qubit_gate = |i: usize| i < l && i % n != 0;
    for i in 0..=l {
        let boundary = is_boundary(i, n);
        let seed_site = variant == Variant::AdiabaticWithS && i < n;
        if boundary {
            if seed_site {
                rules.push(Rule::new(i, (TR, S), (F, G), RuleKind::Seed(i + 1)));
            } else {
                let kind = if one_qubit_gate(i) {
                    RuleKind::Gate(i + 1)
                } else {
                    RuleKind::Carry
                };
                rules.push(Rule::new(i, (TR, Q), (F, G), kind));
            }
        } else {
            rules.push(Rule::new(i, (TR, Q), (F, R), RuleKind::Carry));
        }
        rules.push(Rule::new(i, (R, Q), (B, R), RuleKind::Carry));
        if !boundary {
            rules.push(Rule::new(i, (R, N), (B, TL), RuleKind::Carry));
        } else if i != l {
            rules.push(Rule::new(i, (G, N), (B, TL), RuleKind::Carry));
        }
        rules.push(Rule::new(i, (TL, N), (L, N), RuleKind::Carry));
        rules.push(Rule::new(i, (B, L), (L, Q), RuleKind::Carry));
        if seed_site && !boundary {
            rules.push(Rule::new(i, (G, S), (B, G), RuleKind::Seed(i + 1)));
        } else {
            let kind = if two_qubit_gate(i) {
                RuleKind::Gate(i + 1)
            } else {
                RuleKind::Carry
            };
            rules.push(Rule::new(i, (G, Q), (B, G), kind));
        }
        rules.push(Rule::new(i, (F, L), (F, TR), RuleKind::Carry));
    }
    Ok(RuleSet::from_rules(n, l, variant, false, rules))
}

impl RuleSet {
    fn from_rules(n: usize, l: usize, variant: Variant, identified: bool, rules: Vec<Rule>) -> Self {
        let mut by_site = vec![Vec::new(); l + 1];
        for (k, r) in rules.iter().enumerate() {
            by_site[r.site].push(k);
        }
        RuleSet {
            n,
            l,
            variant,
            identified,
            rules,
            by_site,
        }
    }

    /// The same rules with every letter mapped through the 14-to-10 identification.
    pub fn identified(&self) -> RuleSet {
        let rules = self
            .rules
            .iter()
            .map(|r| Rule {
                lhs: (r.lhs.0.identify(), r.lhs.1.identify()),
                rhs: (r.rhs.0.identify(), r.rhs.1.identify()),
                ..r.clone()
            })
            .collect();
        RuleSet::from_rules(self.n, self.l, self.variant, true, rules)
    }

    pub fn rules_at(&self, site: usize) -> impl Iterator<Item = (usize, &Rule)> {
        self.by_site[site].iter().map(move |&k| (k, &self.rules[k]))
    }

    pub fn initial_template(&self) -> Template {
        let t = Template::initial(self.n, self.l, self.variant == Variant::AdiabaticWithS);
        if self.identified {
            t.map(Letter::identify)
        } else {
            t
        }
    }

    /// Index of the last template, `T = (2n+3)(L-n)+n`.
    pub fn last_step(&self) -> usize {
        last_index(self.n, self.l)
    }
}

/// One rewriting step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub template: Template,
    pub rule: usize,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    None,
    One(Step),
    /// More than one rule matched, listed as `(rule index, site)`.
    Ambiguous(Vec<(usize, usize)>),
}

impl Outcome {
    pub fn step(self) -> Option<Step> {
        match self {
            Outcome::One(s) => Some(s),
            _ => None,
        }
    }

    pub fn multiplicity(&self) -> usize {
        match self {
            Outcome::None => 0,
            Outcome::One(_) => 1,
            Outcome::Ambiguous(v) => v.len(),
        }
    }
}

fn apply(t: &Template, rs: &RuleSet, forward: bool) -> Outcome {
    let letters = t.letters();
    let mut hits = Vec::new();
    for site in 0..letters.len().saturating_sub(1).min(rs.l + 1) {
        let pair = (letters[site], letters[site + 1]);
        for (k, r) in rs.rules_at(site) {
            let from = if forward { r.lhs } else { r.rhs };
            if from == pair {
                hits.push((k, site));
            }
        }
    }
    match hits.as_slice() {
        [] => Outcome::None,
        [(k, site)] => {
            let r = &rs.rules[*k];
            let to = if forward { r.rhs } else { r.lhs };
            let mut v = letters.to_vec();
            v[*site] = to.0;
            v[*site + 1] = to.1;
            Outcome::One(Step {
                template: Template::new(v),
                rule: *k,
                site: *site,
            })
        }
        _ => Outcome::Ambiguous(hits),
    }
}

pub fn apply_forward(t: &Template, rs: &RuleSet) -> Outcome {
    apply(t, rs, true)
}

pub fn apply_backward(t: &Template, rs: &RuleSet) -> Outcome {
    apply(t, rs, false)
}

/// The template sequence from the initial template, with the rule applied
/// between consecutive entries.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub templates: Vec<Template>,
    pub rules: Vec<usize>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn last_step(&self) -> usize {
        self.templates.len() - 1
    }
}

/// Runs the forward rules from the initial template and checks the chain:
/// one rule per step, backward inverts forward, `T + 1` templates, `L` gate
/// rules, and `g` agreeing with the gate rules seen so far.
pub fn enumerate_chain(rs: &RuleSet) -> Result<ChainTrace> {
    let big_t = rs.last_step();
    let mut templates = vec![rs.initial_template()];
    let mut rules = Vec::new();
    let mut gates = 0usize;
    if apply_backward(&templates[0], rs) != Outcome::None {
        return Err(Error::Integrity(format!(
            "initial template {} admits a backward rule",
            templates[0]
        )));
    }
    loop {
        let cur = templates.last().unwrap().clone();
        let t = templates.len() - 1;
        let expected_g = g_of_t(rs.n, rs.l, t.min(big_t))?;
        if t <= big_t && gates != expected_g {
            return Err(Error::Integrity(format!(
                "after step {t} ({cur}) {gates} gates were applied but g({t}) = {expected_g}"
            )));
        }
        match apply_forward(&cur, rs) {
            Outcome::None => break,
            Outcome::Ambiguous(hits) => {
                return Err(Error::Integrity(format!(
                    "template {t} ({cur}) admits {} forward rules",
                    hits.len()
                )))
            }
            Outcome::One(step) => {
                match apply_backward(&step.template, rs) {
                    Outcome::One(back) if back.template == cur && back.rule == step.rule => {}
                    other => {
                        return Err(Error::Integrity(format!(
                            "backward step from {} does not return to {cur} ({} matches)",
                            step.template,
                            other.multiplicity()
                        )))
                    }
                }
                if rs.rules[step.rule].gate_index().is_some() {
                    gates += 1;
                }
                rules.push(step.rule);
                templates.push(step.template);
                if templates.len() > big_t + 2 {
                    return Err(Error::Integrity(format!(
                        "chain exceeds the expected {} templates",
                        big_t + 1
                    )));
                }
            }
        }
    }
    if templates.len() != big_t + 1 {
        return Err(Error::Integrity(format!(
            "chain has {} templates, expected T + 1 = {}",
            templates.len(),
            big_t + 1
        )));
    }
    if gates != rs.l {
        return Err(Error::Integrity(format!(
            "chain applied {gates} gate rules, expected L = {}",
            rs.l
        )));
    }
    Ok(ChainTrace { templates, rules })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Template {
        s.parse().unwrap()
    }

    // Hand trace of one full run for n = 2, L = 4.
    const HAND_TRACE: [&str; 17] = [
        "T_R Q Q N N N",
        "F G Q N N N",
        "F B G N N N",
        "F B B T_L N N",
        "F B B L N N",
        "F B L Q N N",
        "F L Q Q N N",
        "F T_R Q Q N N",
        "F F R Q N N",
        "F F B R N N",
        "F F B B T_L N",
        "F F B B L N",
        "F F B L Q N",
        "F F L Q Q N",
        "F F T_R Q Q N",
        "F F F G Q N",
        "F F F B G N",
    ];

    #[test]
    fn chain_matches_hand_trace() {
        let rs = forward_rules(2, 4, Variant::Qma).unwrap();
        let chain = enumerate_chain(&rs).unwrap();
        let want: Vec<Template> = HAND_TRACE.iter().map(|s| t(s)).collect();
        assert_eq!(chain.templates, want);
    }

    #[test]
    fn s_variant_seeds_the_first_block() {
        let rs = forward_rules(2, 4, Variant::AdiabaticWithS).unwrap();
        let chain = enumerate_chain(&rs).unwrap();
        assert_eq!(chain.templates[0], t("T_R S S N N N"));
        assert_eq!(chain.templates[1], t("F G S N N N"));
        assert_eq!(chain.templates[2], t("F B G N N N"));
        assert_eq!(chain.len(), 17);
    }

    #[test]
    fn boundary_variants() {
        let rs = forward_rules(2, 4, Variant::Qma).unwrap();
        let has = |site, lhs: (Letter, Letter), rhs: (Letter, Letter)| {
            rs.rules_at(site).any(|(_, r)| r.lhs == lhs && r.rhs == rhs)
        };
        for site in [0, 2, 4] {
            assert!(has(site, (TR, Q), (F, G)));
            assert!(!has(site, (TR, Q), (F, R)));
            assert!(!has(site, (R, N), (B, TL)));
        }
        assert!(has(0, (G, N), (B, TL)) && has(2, (G, N), (B, TL)));
        assert!(!has(4, (G, N), (B, TL)));
        assert!(matches!(forward_rules(2, 3, Variant::Qma), Err(Error::Input(_))));
    }

    #[test]
    fn forward_and_backward_examples() {
        let rs = forward_rules(2, 4, Variant::Qma).unwrap();
        let step = apply_forward(&t("T_R Q Q N N N"), &rs).step().unwrap();
        assert_eq!(step.template, t("F G Q N N N"));
        assert_eq!(rs.rules[step.rule].kind, RuleKind::Gate(1));
        assert_eq!(apply_forward(&t("F F B B T_R N"), &rs), Outcome::None);
        assert_eq!(apply_forward(&t("F F F B G N"), &rs), Outcome::None);
        assert_eq!(apply_forward(&t("F F F F F F"), &rs), Outcome::None);
        let back = apply_backward(&t("F G Q N N N"), &rs).step().unwrap();
        assert_eq!(back.template, t("T_R Q Q N N N"));
        assert_eq!(apply_backward(&t("T_R Q Q N N N"), &rs), Outcome::None);
        assert_eq!(apply_backward(&t("N N N N N N"), &rs), Outcome::None);
    }

    #[test]
    fn ambiguity_is_reported() {
        let rs = forward_rules(2, 4, Variant::Qma).unwrap();
        // two control letters, each with a rule
        let out = apply_forward(&t("T_R Q R Q N N"), &rs);
        assert_eq!(out.multiplicity(), 2);
    }

    #[test]
    fn integrity_across_sizes() {
        for n in [2, 3] {
            for r in 1..=4 {
                for variant in [Variant::Qma, Variant::AdiabaticWithS] {
                    let rs = forward_rules(n, n * r, variant).unwrap();
                    let chain = enumerate_chain(&rs).unwrap();
                    assert_eq!(chain.len(), last_index(n, n * r) + 1);
                    let ident = enumerate_chain(&rs.identified()).unwrap();
                    assert_eq!(ident.len(), chain.len());
                }
            }
        }
    }
}
