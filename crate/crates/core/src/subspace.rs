//! History-state bases `|phi_t>` and restriction of Hamiltonians to them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain_model::{enumerate_chain, g_of_t, Letter, Template, Variant};
use crate::circuit::{apply_on_qubits, CanonicalCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    forward_operator, template_config, ChainContext, HamiltonianSpec, SparseState,
    TransitionOperator,
};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};

const ORTHO_TOL: f64 = 1e-10;
const CLOSURE_TOL: f64 = 1e-10;

/// A state living in a single template: amplitudes over the subscript bits,
/// high bit on the leftmost bit-carrying site.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredState {
    pub template: Template,
    pub amps: Vec<C64>,
}

impl FactoredState {
    pub fn to_sparse(&self, ctx: &ChainContext) -> Result<SparseState> {
        let nb = self.template.bit_count();
        let mut out = SparseState::new();
        for (u, &a) in self.amps.iter().enumerate() {
            if a != ZERO {
                out.insert(template_config(&ctx.alphabet, self.template.letters(), u, nb)?, a);
            }
        }
        Ok(out)
    }

    pub fn from_sparse(ctx: &ChainContext, s: &SparseState) -> Result<Self> {
        let mut template: Option<Template> = None;
        let mut amps = Vec::new();
        for (cfg, &a) in s {
            let syms: Vec<_> = cfg.iter().map(|&k| ctx.alphabet.symbol(k as usize)).collect();
            let t = Template::new(syms.iter().map(|s| s.letter).collect());
            let bits = syms
                .iter()
                .filter_map(|s| s.bit)
                .fold(0usize, |acc, b| (acc << 1) | b as usize);
            match &template {
                None => {
                    amps = vec![ZERO; 1 << t.bit_count()];
                    template = Some(t);
                }
                Some(prev) if *prev != t => {
                    return Err(Error::Integrity(format!(
                        "state spreads over templates {prev} and {t}"
                    )))
                }
                _ => {}
            }
            amps[bits] += a;
        }
        let template =
            template.ok_or_else(|| Error::Integrity("hop produced the zero vector".into()))?;
        Ok(FactoredState { template, amps })
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    /// The n-qubit register: bits read left to right, `S` sites read as `0`.
    pub fn register(&self, n: usize) -> Vec<C64> {
        let comp: Vec<bool> = self
            .template
            .letters()
            .iter()
            .filter(|l| l.is_computation())
            .map(|l| *l != Letter::S)
            .collect();
        let mut reg = vec![ZERO; 1 << n];
        let nb = self.template.bit_count();
        for (u, &a) in self.amps.iter().enumerate() {
            let mut idx = 0usize;
            let mut taken = 0;
            for &has in &comp {
                let bit = if has {
                    taken += 1;
                    (u >> (nb - taken)) & 1
                } else {
                    0
                };
                idx = (idx << 1) | bit;
            }
            reg[idx] += a;
        }
        reg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisMode {
    /// One history started from the all-zero input; dimension `T + 1`.
    SingleInput,
    /// Every input string `z` on the register; dimension `2^n (T + 1)`.
    FullLegal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhiLabel {
    /// Input register value (ancilla bits high, witness bits low).
    pub input: usize,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct PhiBasis {
    pub mode: BasisMode,
    pub ctx: ChainContext,
    pub circuit: CanonicalCircuit,
    pub vectors: Vec<FactoredState>,
    pub labels: Vec<PhiLabel>,
    /// `T`, the last step of each history.
    pub last_step: usize,
}

/// Applies `F` to a factored state.
pub fn hop(ctx: &ChainContext, f: &TransitionOperator, s: &FactoredState) -> Result<FactoredState> {
    FactoredState::from_sparse(ctx, &f.apply_sparse(&s.to_sparse(ctx)?))
}

pub fn build_phi_basis(ctx: &ChainContext, c: &CanonicalCircuit, mode: BasisMode) -> Result<PhiBasis> {
    let trace = enumerate_chain(&ctx.rules)?;
    let big_t = trace.last_step();
    let f = forward_operator(ctx, c)?;
    let initial = ctx.rules.initial_template();
    let inputs: Vec<usize> = match mode {
        BasisMode::SingleInput => vec![0],
        BasisMode::FullLegal => {
            if ctx.variant != Variant::Qma {
                return Err(Error::Input("the full legal basis uses the QMA variant".into()));
            }
            if ctx.n > 10 {
                return Err(Error::Resource(format!("n = {} exceeds 10 for the full basis", ctx.n)));
            }
            (0..1usize << ctx.n).collect()
        }
    };
    let mut vectors = Vec::with_capacity(inputs.len() * (big_t + 1));
    let mut labels = Vec::with_capacity(vectors.capacity());
    for &z in &inputs {
        let mut amps = vec![ZERO; 1 << initial.bit_count()];
        amps[z] = ONE;
        let mut cur = FactoredState {
            template: initial.clone(),
            amps,
        };
        for t in 0..=big_t {
            if cur.template != trace.templates[t] {
                return Err(Error::Integrity(format!(
                    "history state {t} sits in {} instead of {}",
                    cur.template, trace.templates[t]
                )));
            }
            let next = if t < big_t { Some(hop(ctx, &f, &cur)?) } else { None };
            vectors.push(cur);
            labels.push(PhiLabel { input: z, t });
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
        let end = f.apply_sparse(&vectors.last().unwrap().to_sparse(ctx)?);
        if !end.is_empty() {
            return Err(Error::Integrity("F does not annihilate the final history state".into()));
        }
    }
    let basis = PhiBasis {
        mode,
        ctx: ctx.clone(),
        circuit: c.clone(),
        vectors,
        labels,
        last_step: big_t,
    };
    let dev = basis.orthonormality_error()?;
    if dev > ORTHO_TOL {
        return Err(Error::Integrity(format!("history basis is not orthonormal (error {dev:.3e})")));
    }
    Ok(basis)
}

impl PhiBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest `|<b_i|b_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> Result<f64> {
        let mut by_template: BTreeMap<&Template, Vec<usize>> = BTreeMap::new();
        for (k, v) in self.vectors.iter().enumerate() {
            by_template.entry(&v.template).or_default().push(k);
        }
        let mut worst = 0.0f64;
        for idx in by_template.values() {
            for &i in idx {
                for &j in idx {
                    let ov = linalg::dot(&self.vectors[i].amps, &self.vectors[j].amps);
                    let want = if i == j { ONE } else { ZERO };
                    worst = worst.max((ov - want).norm());
                }
            }
        }
        Ok(worst)
    }

    fn config_index(&self) -> Result<BTreeMap<Vec<u8>, Vec<(usize, C64)>>> {
        let mut map: BTreeMap<Vec<u8>, Vec<(usize, C64)>> = BTreeMap::new();
        for (i, v) in self.vectors.iter().enumerate() {
            for (cfg, a) in v.to_sparse(&self.ctx)? {
                map.entry(cfg).or_default().push((i, a));
            }
        }
        Ok(map)
    }

    fn project(
        &self,
        index: &BTreeMap<Vec<u8>, Vec<(usize, C64)>>,
        s: &SparseState,
    ) -> (Vec<C64>, f64) {
        let mut coeffs = vec![ZERO; self.len()];
        let mut total = 0.0;
        for (cfg, &a) in s {
            total += a.norm_sqr();
            if let Some(list) = index.get(cfg) {
                for &(i, b) in list {
                    coeffs[i] += b.conj() * a;
                }
            }
        }
        let inside: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        (coeffs, (total - inside).max(0.0).sqrt())
    }

    /// `<b_i|H|b_j>`, after checking that `H` keeps the span invariant.
    pub fn restrict(&self, h: &HamiltonianSpec) -> Result<CMat> {
        if h.local_dim != self.ctx.d() || h.sites != self.ctx.sites() {
            return Err(Error::DimensionMismatch {
                expected: self.ctx.d(),
                got: h.local_dim,
            });
        }
        let index = self.config_index()?;
        let cols: Vec<Result<Vec<C64>>> = (0..self.len())
            .into_par_iter()
            .map(|j| {
                let s = self.vectors[j].to_sparse(&self.ctx)?;
                let (coeffs, outside) = self.project(&index, &h.apply_sparse(&s));
                if outside > CLOSURE_TOL {
                    return Err(self.closure_error(h, &index, &s, outside));
                }
                Ok(coeffs)
            })
            .collect();
        let mut m = CMat::zeros(self.len(), self.len());
        for (j, col) in cols.into_iter().enumerate() {
            for (i, v) in col?.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(linalg::hermitize(&m))
    }

    fn closure_error(
        &self,
        h: &HamiltonianSpec,
        index: &BTreeMap<Vec<u8>, Vec<(usize, C64)>>,
        s: &SparseState,
        total: f64,
    ) -> Error {
        for k in 0..h.terms.len() {
            let (_, out) = self.project(index, &h.apply_term_sparse(k, s));
            if out > CLOSURE_TOL {
                return Error::Closure {
                    tag: h.terms[k].tag.clone(),
                    residual: out,
                };
            }
        }
        Error::Closure {
            tag: "<sum of terms>".into(),
            residual: total,
        }
    }

    /// Uniform superposition of a single history, in basis coordinates.
    pub fn ground_state_target(&self) -> Vec<C64> {
        let r = self.last_step + 1;
        let w = c(1.0 / (r as f64).sqrt(), 0.0);
        self.labels
            .iter()
            .map(|l| if l.input == 0 { w } else { ZERO })
            .collect()
    }

    /// Largest deviation between each history state's register and the
    /// circuit applied for `g(t)` gates, checking also that every increment
    /// of `g` matches one embedded gate.
    pub fn gate_faithfulness(&self) -> Result<f64> {
        let n = self.ctx.n;
        let mut worst = 0.0f64;
        for (k, (v, lab)) in self.vectors.iter().zip(&self.labels).enumerate() {
            let g = g_of_t(n, self.ctx.l, lab.t)?;
            let mut want = vec![ZERO; 1 << n];
            want[lab.input] = ONE;
            self.circuit.apply_prefix(&mut want, g);
            let reg = v.register(n);
            worst = worst.max(max_diff(&reg, &want));
            if lab.t > 0 {
                let g_prev = g_of_t(n, self.ctx.l, lab.t - 1)?;
                if g == g_prev + 1 {
                    let mut stepped = self.vectors[k - 1].register(n);
                    let u = self.circuit.gate_unitary(g)?;
                    apply_on_qubits(&mut stepped, n, &self.circuit.qubits_of(g), u.matrix());
                    worst = worst.max(max_diff(&reg, &stepped));
                } else if g != g_prev {
                    return Err(Error::Integrity(format!("g jumps from {g_prev} to {g} at t = {}", lab.t)));
                }
            }
        }
        Ok(worst)
    }

    /// The basis vector as a sparse full-space state.
    pub fn embed(&self, i: usize) -> Result<SparseState> {
        self.vectors[i].to_sparse(&self.ctx)
    }

    /// A combination `sum_i coeffs[i] b_i` as a sparse full-space state.
    pub fn embed_combination(&self, coeffs: &[C64]) -> Result<SparseState> {
        let mut out = SparseState::new();
        for (i, &a) in coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (cfg, b) in self.embed(i)? {
                *out.entry(cfg).or_insert(ZERO) += a * b;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let items: Vec<serde_json::Value> = self
            .vectors
            .iter()
            .zip(&self.labels)
            .map(|(v, l)| {
                let amps: Vec<serde_json::Value> = v
                    .amps
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.norm() > 0.0)
                    .map(|(u, a)| serde_json::json!([u, a.re, a.im]))
                    .collect();
                serde_json::json!({
                    "t": l.t,
                    "input": l.input,
                    "template": v.template.to_string(),
                    "amplitudes": amps,
                })
            })
            .collect();
        serde_json::json!({ "mode": self.mode, "last_step": self.last_step, "vectors": items })
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{canonicalize, RawCircuit};
    use crate::hamiltonian::{build_h_init, build_h_prop};
    use crate::spectral::p_matrix;

    fn s_ctx() -> ChainContext {
        ChainContext::new(2, 4, Variant::AdiabaticWithS, false).unwrap()
    }

    fn x_then_cnot() -> CanonicalCircuit {
        let raw = RawCircuit::new(2)
            .push_named("X", &[1])
            .unwrap()
            .push_named("CNOT", &[1, 2])
            .unwrap();
        canonicalize(&raw).unwrap()
    }

    #[test]
    fn identity_history_is_orthonormal_and_all_zero() {
        let c = CanonicalCircuit::identity(2, 2).unwrap();
        let b = build_phi_basis(&s_ctx(), &c, BasisMode::SingleInput).unwrap();
        assert_eq!(b.len(), 17);
        assert!(b.orthonormality_error().unwrap() < 1e-12);
        let last = b.vectors.last().unwrap().register(2);
        assert_eq!(last[0], ONE);
    }

    #[test]
    fn x_then_cnot_ends_in_one_one() {
        let c = x_then_cnot();
        assert_eq!(c.len(), 4);
        let ctx = ChainContext::new(2, 4, Variant::Qma, false).unwrap();
        let b = build_phi_basis(&ctx, &c, BasisMode::SingleInput).unwrap();
        let reg = b.vectors.last().unwrap().register(2);
        assert!((reg[3] - ONE).norm() < 1e-12);
        assert!(b.gate_faithfulness().unwrap() < 1e-12);
    }

    #[test]
    fn restricted_prop_is_the_path_matrix() {
        let ctx = s_ctx();
        let c = x_then_cnot();
        let b = build_phi_basis(&ctx, &c, BasisMode::SingleInput).unwrap();
        let hp = b.restrict(&build_h_prop(&ctx, &c).unwrap()).unwrap();
        assert!(linalg::max_abs_diff(&hp, &p_matrix(b.len())) <= 1e-10);
        let hi = b.restrict(&build_h_init(&ctx).unwrap()).unwrap();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j && i > 0 { 1.0 } else { 0.0 };
                assert_eq!(hi[(i, j)], c64(want));
            }
        }
        let phi = b.ground_state_target();
        assert!((linalg::norm(&phi) - 1.0).abs() < 1e-14);
        let e = linalg::dot(&phi, &hp.apply_vec(&phi));
        assert!(e.norm() < 1e-14);
    }

    fn c64(x: f64) -> C64 {
        c(x, 0.0)
    }

    use crate::linalg::LinearOperator;

    #[test]
    fn closure_violation_names_the_term() {
        let ctx = ChainContext::new(2, 4, Variant::Qma, false).unwrap();
        let c = CanonicalCircuit::identity(2, 2).unwrap();
        let b = build_phi_basis(&ctx, &c, BasisMode::SingleInput).unwrap();
        // a hop that leaves the chain: Q N -> N N at site 2
        let mut h = HamiltonianSpec::empty(ctx.d(), ctx.sites());
        let term = crate::hamiltonian::swap_term(&ctx.alphabet, (Letter::TR, Letter::Q), (Letter::F, Letter::F), 0);
        assert!(term.is_err(), "bit count mismatch is rejected");
        let t = crate::hamiltonian::swap_term(&ctx.alphabet, (Letter::Q, Letter::Q), (Letter::B, Letter::B), 1).unwrap();
        h.push(t).unwrap();
        match b.restrict(&h) {
            Err(Error::Closure { tag, .. }) => assert_eq!(tag, "QQ<->BB@1"),
            other => panic!("expected closure error, got {other:?}"),
        }
    }

    #[test]
    fn full_legal_basis_has_every_input() {
        let ctx = ChainContext::new(2, 4, Variant::Qma, false).unwrap();
        let c = x_then_cnot();
        let b = build_phi_basis(&ctx, &c, BasisMode::FullLegal).unwrap();
        assert_eq!(b.len(), 4 * 17);
        assert!(b.orthonormality_error().unwrap() < 1e-12);
        assert!(b.gate_faithfulness().unwrap() < 1e-12);
        let hp = b.restrict(&build_h_prop(&ctx, &c).unwrap()).unwrap();
        let p = p_matrix(17);
        for z in 0..4 {
            for i in 0..17 {
                for j in 0..17 {
                    assert!((hp[(z * 17 + i, z * 17 + j)] - p[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }
}
