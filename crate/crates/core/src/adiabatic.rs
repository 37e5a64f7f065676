//! Time evolution under the linear interpolation `H(s) = (1-s) H_init + s H_final`.

use serde::Serialize;

use crate::chain_model::{g_of_t, last_index, Template};
use crate::circuit::{circuit_unitary, CanonicalCircuit};
use crate::error::{Error, Result};
use crate::hamiltonian::{ChainContext, SparseState};
use crate::linalg::{self, c, CsrMatrix, Interpolated, LinearOperator, C64, ONE, ZERO};
use crate::spectral::{lowest_eigs, EigOptions};
use crate::subspace::{FactoredState, PhiBasis};

/// Norm tolerance of a single Taylor step and of the initial ground state.
pub const STEP_TOL: f64 = 1e-12;
pub const MAX_NORM_DRIFT: f64 = 1e-6;
const MAX_TAYLOR_ORDER: usize = 80;

/// `sum_k w_k A_k`.
pub struct LinComb<'a> {
    pub terms: Vec<(f64, &'a dyn LinearOperator)>,
}

impl LinearOperator for LinComb<'_> {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        let mut tmp = vec![ZERO; self.dim()];
        for &(w, a) in &self.terms {
            a.apply(x, &mut tmp);
            for (yi, ti) in y.iter_mut().zip(&tmp) {
                *yi += ti * w;
            }
        }
    }
}

/// Spectral norm of a Hermitian operator from its extreme eigenvalues.
pub fn operator_norm(op: &dyn LinearOperator, opts: &EigOptions) -> Result<f64> {
    let low = lowest_eigs(op, 1, opts)?.eigenvalues[0];
    let neg = LinComb {
        terms: vec![(-1.0, op)],
    };
    let high = -lowest_eigs(&neg, 1, opts)?.eigenvalues[0];
    Ok(low.abs().max(high.abs()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleParams {
    pub t_total: f64,
    pub steps: usize,
    pub delta: f64,
    pub epsilon: f64,
    /// Number of instantaneous-ground overlaps recorded along the run.
    pub checkpoints: usize,
}

impl ScheduleParams {
    /// Picks the smallest step count allowed by the resolution rule
    /// `steps >= 10 T max_s ||H(s)||`.
    pub fn resolved(t_total: f64, h_norm: f64, delta: f64, epsilon: f64) -> Self {
        let steps = ((10.0 * t_total * h_norm).ceil() as usize).max(10);
        ScheduleParams {
            t_total,
            steps,
            delta,
            epsilon,
            checkpoints: 10,
        }
    }

    pub fn validate(&self, h_norm: f64) -> Result<()> {
        if !(self.t_total >= 0.0) || !self.t_total.is_finite() {
            return Err(Error::Input(format!("evolution time {} is invalid", self.t_total)));
        }
        if (self.steps as f64) < 10.0 * self.t_total * h_norm {
            return Err(Error::Validation(format!(
                "{} steps violate the resolution rule for T = {} and ||H|| = {h_norm}",
                self.steps, self.t_total
            )));
        }
        Ok(())
    }
}

/// `||H_final - H_init||^(1+delta) / (eps^delta gap^(2+delta))` with unit constant.
pub fn required_time(
    h_init: &dyn LinearOperator,
    h_final: &dyn LinearOperator,
    gap_min: f64,
    delta: f64,
    epsilon: f64,
    opts: &EigOptions,
) -> Result<f64> {
    if !(gap_min > 0.0) {
        return Err(Error::Input(format!("minimum gap must be positive, got {gap_min}")));
    }
    if !(epsilon > 0.0) || delta < 0.0 {
        return Err(Error::Input("need epsilon > 0 and delta >= 0".into()));
    }
    let diff = LinComb {
        terms: vec![(1.0, h_final), (-1.0, h_init)],
    };
    let dn = operator_norm(&diff, opts)?;
    Ok(time_estimate(dn, gap_min, delta, epsilon))
}

pub fn time_estimate(diff_norm: f64, gap_min: f64, delta: f64, epsilon: f64) -> f64 {
    diff_norm.powf(1.0 + delta) / (epsilon.powf(delta) * gap_min.powf(2.0 + delta))
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub s: f64,
    pub ground_overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionResult {
    #[serde(skip)]
    pub state: Vec<C64>,
    pub t_total: f64,
    pub steps: usize,
    pub fidelity: f64,
    pub norm_drift: f64,
    pub max_taylor_order: usize,
    pub trace: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Default)]
pub struct EvolveOptions {
    /// Start here instead of at the computed ground state of `H_init`.
    pub initial: Option<Vec<C64>>,
    /// Measure fidelity against this state instead of the ground state of `H_final`.
    pub target: Option<Vec<C64>>,
    pub eig: EigOptions,
}

fn ground(op: &dyn LinearOperator, opts: &EigOptions) -> Result<Vec<C64>> {
    let rep = lowest_eigs(op, 1, opts)?;
    let v = rep.eigenvectors[0].clone();
    let hv = op.apply_vec(&v);
    let energy = linalg::dot(&v, &hv).re;
    if energy - rep.eigenvalues[0] > STEP_TOL.max(1e-10) {
        return Err(Error::Integrity(format!(
            "ground vector energy {energy} above eigenvalue {}",
            rep.eigenvalues[0]
        )));
    }
    Ok(v)
}

/// One step `psi <- exp(-i dt H) psi` by a Taylor series truncated once the
/// next term drops below `STEP_TOL`. Returns the order used.
fn taylor_step(h: &dyn LinearOperator, psi: &mut [C64], dt: f64, scratch: &mut [Vec<C64>; 2]) -> Result<usize> {
    let [term, next] = scratch;
    term.clear();
    term.extend_from_slice(psi);
    next.resize(psi.len(), ZERO);
    for order in 1..=MAX_TAYLOR_ORDER {
        h.apply(term, next);
        let f = c(0.0, -dt / order as f64);
        for (t, n) in term.iter_mut().zip(next.iter()) {
            *t = n * f;
        }
        for (p, t) in psi.iter_mut().zip(term.iter()) {
            *p += t;
        }
        if linalg::norm(term) <= STEP_TOL {
            return Ok(order);
        }
    }
    Err(Error::StepSize {
        drift: linalg::norm(term),
    })
}

/// Operators up to this size are densified once and stepped as one sparse
/// matrix on the union pattern of both endpoints.
const PENCIL_MAX_DIM: usize = 2048;

struct Pencil {
    pattern: CsrMatrix,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl Pencil {
    fn new(h_init: &dyn LinearOperator, h_final: &dyn LinearOperator) -> Self {
        let (da, db) = (h_init.to_dense(), h_final.to_dense());
        let (sa, sb) = (CsrMatrix::from_dense(&da), CsrMatrix::from_dense(&db));
        let mut trip = Vec::with_capacity(sa.nnz() + sb.nnz());
        for m in [&sa, &sb] {
            for r in 0..m.dim {
                for k in m.indptr[r]..m.indptr[r + 1] {
                    trip.push((r, m.indices[k], ONE));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(da.nrows(), trip);
        let mut a = Vec::with_capacity(pattern.nnz());
        let mut b = Vec::with_capacity(pattern.nnz());
        for r in 0..pattern.dim {
            for k in pattern.indptr[r]..pattern.indptr[r + 1] {
                a.push(da[(r, pattern.indices[k])]);
                b.push(db[(r, pattern.indices[k])]);
            }
        }
        Pencil { pattern, a, b }
    }

    fn at(&self, s: f64) -> CsrMatrix {
        let mut m = self.pattern.clone();
        for ((v, a), b) in m.values.iter_mut().zip(&self.a).zip(&self.b) {
            *v = *a * (1.0 - s) + *b * s;
        }
        m
    }
}

/// Integrates `i dpsi/dt = H(t/T) psi` with midpoint exponential steps.
pub fn evolve(
    h_init: &dyn LinearOperator,
    h_final: &dyn LinearOperator,
    params: &ScheduleParams,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if h_init.dim() != h_final.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_init.dim(),
            got: h_final.dim(),
        });
    }
    let dim = h_init.dim();
    let mut psi = match &opts.initial {
        Some(v) if v.len() != dim => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            })
        }
        Some(v) => {
            let mut v = v.clone();
            linalg::normalize(&mut v);
            v
        }
        None => ground(h_init, &opts.eig)?,
    };
    let target = match &opts.target {
        Some(v) => v.clone(),
        None => ground(h_final, &opts.eig)?,
    };
    if params.t_total > 0.0 && params.steps == 0 {
        return Err(Error::Input("a positive evolution time needs at least one step".into()));
    }

    let steps = if params.t_total > 0.0 { params.steps } else { 0 };
    let dt = if steps > 0 { params.t_total / steps as f64 } else { 0.0 };
    let every = if params.checkpoints > 0 {
        (steps / params.checkpoints).max(1)
    } else {
        usize::MAX
    };
    let mut trace = Vec::new();
    let mut max_order = 0;
    let pencil = (dim <= PENCIL_MAX_DIM).then(|| Pencil::new(h_init, h_final));
    let mut scratch = [Vec::new(), Vec::new()];
    for k in 0..steps {
        let s = (k as f64 + 0.5) / steps as f64;
        let order = match &pencil {
            Some(p) => taylor_step(&p.at(s), &mut psi, dt, &mut scratch)?,
            None => {
                let h = Interpolated {
                    a: h_init,
                    b: h_final,
                    s,
                };
                taylor_step(&h, &mut psi, dt, &mut scratch)?
            }
        };
        max_order = max_order.max(order);
        let drift = (linalg::norm(&psi) - 1.0).abs();
        if drift > MAX_NORM_DRIFT {
            return Err(Error::StepSize { drift });
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            if params.checkpoints > 0 {
                let s_end = (k + 1) as f64 / steps as f64;
                let hs = Interpolated {
                    a: h_init,
                    b: h_final,
                    s: s_end,
                };
                let g = ground(&hs, &opts.eig)?;
                trace.push(Checkpoint {
                    s: s_end,
                    ground_overlap: linalg::dot(&g, &psi).norm(),
                });
            }
        }
    }
    let norm_drift = (linalg::norm(&psi) - 1.0).abs();
    Ok(EvolutionResult {
        fidelity: linalg::dot(&target, &psi).norm(),
        state: psi,
        t_total: params.t_total,
        steps,
        norm_drift,
        max_taylor_order: max_order,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingRun {
    /// `(T, fidelity)` for every attempt.
    pub attempts: Vec<(f64, f64)>,
    pub succeeded: bool,
    /// Fidelity never decreased along the doubling sequence.
    pub monotone: bool,
    pub result: EvolutionResult,
}

/// Doubles `T` from `t_start` until the fidelity reaches `target` or `T`
/// exceeds `t_max`.
pub fn evolve_doubling(
    h_init: &dyn LinearOperator,
    h_final: &dyn LinearOperator,
    target: f64,
    t_start: f64,
    t_max: f64,
    opts: &EvolveOptions,
) -> Result<DoublingRun> {
    if !(t_start > 0.0) || t_max < t_start {
        return Err(Error::Input("need 0 < t_start <= t_max".into()));
    }
    let h_norm = operator_norm(h_init, &opts.eig)?.max(operator_norm(h_final, &opts.eig)?);
    let mut opts = opts.clone();
    if opts.initial.is_none() {
        opts.initial = Some(ground(h_init, &opts.eig)?);
    }
    if opts.target.is_none() {
        opts.target = Some(ground(h_final, &opts.eig)?);
    }
    let mut attempts = Vec::new();
    let mut t = t_start;
    loop {
        let mut params = ScheduleParams::resolved(t, h_norm, 0.0, 1.0 - target);
        params.checkpoints = 0;
        let res = evolve(h_init, h_final, &params, &opts)?;
        attempts.push((t, res.fidelity));
        let done = res.fidelity >= target;
        if done || 2.0 * t > t_max {
            let monotone = attempts.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
            return Ok(DoublingRun {
                attempts,
                succeeded: done,
                monotone,
                result: res,
            });
        }
        t *= 2.0;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Readout {
    /// Weight of the final template.
    pub template_probability: f64,
    /// Register conditioned on the final template.
    pub register: Vec<(f64, f64)>,
    /// `|<U 0^n | register>|`.
    pub fidelity: f64,
    /// Distribution of the last computation qubit.
    pub output_distribution: [f64; 2],
}

/// Conditions a full-space state on the final template and reads the register.
pub fn readout_sparse(
    ctx: &ChainContext,
    state: &SparseState,
    final_template: &Template,
    c: &CanonicalCircuit,
) -> Result<Readout> {
    let mut part = SparseState::new();
    let mut total = 0.0;
    for (cfg, &a) in state {
        total += a.norm_sqr();
        let letters: Vec<_> = cfg
            .iter()
            .map(|&k| ctx.alphabet.symbol(k as usize).letter)
            .collect();
        if letters == final_template.letters() {
            part.insert(cfg.clone(), a);
        }
    }
    let n = c.n();
    let weight: f64 = part.values().map(|a| a.norm_sqr()).sum();
    if weight == 0.0 {
        return Err(Error::Validation(format!("state has no weight on template {final_template}")));
    }
    let mut reg = FactoredState::from_sparse(ctx, &part)?.register(n);
    linalg::normalize(&mut reg);
    let u = circuit_unitary(c)?;
    let want: Vec<C64> = (0..1usize << n).map(|i| u[(i, 0)]).collect();
    let p1: f64 = reg
        .iter()
        .enumerate()
        .filter(|(i, _)| i & 1 == 1)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    Ok(Readout {
        template_probability: weight / total,
        fidelity: linalg::dot(&want, &reg).norm(),
        register: reg.iter().map(|a| (a.re, a.im)).collect(),
        output_distribution: [1.0 - p1, p1],
    })
}

/// Readout of a state given in coordinates of a history basis.
pub fn readout(coeffs: &[C64], basis: &PhiBasis) -> Result<Readout> {
    if coeffs.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: coeffs.len(),
        });
    }
    let state = basis.embed_combination(coeffs)?;
    let last = basis
        .labels
        .iter()
        .position(|l| l.t == basis.last_step)
        .ok_or_else(|| Error::Integrity("basis lacks its final vector".into()))?;
    readout_sparse(&basis.ctx, &state, &basis.vectors[last].template, &basis.circuit)
}

#[derive(Debug, Clone, Serialize)]
pub struct Padding {
    #[serde(skip)]
    pub circuit: CanonicalCircuit,
    pub extra_gates: usize,
    pub extra_rounds: usize,
    pub no_padding_needed: bool,
    /// Fraction of chain steps with `g(t) < L` (original `L`).
    pub incomplete_fraction: f64,
}

/// Appends `ceil(L / eps)` identity gates, rounded up to whole rounds.
pub fn pad_identities(c: &CanonicalCircuit, epsilon: f64) -> Result<Padding> {
    if !(epsilon > 0.0) {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    let (n, l) = (c.n(), c.len());
    let t_last = last_index(n, l);
    let (circuit, extra_gates, extra_rounds, none) = if epsilon >= (t_last + 1) as f64 {
        (c.clone(), 0, 0, true)
    } else {
        let extra = (l as f64 / epsilon).ceil() as usize;
        let rounds = extra.div_ceil(n);
        (c.with_identity_rounds(rounds), extra, rounds, false)
    };
    let padded_last = last_index(n, circuit.len());
    let mut incomplete = 0usize;
    for t in 0..=padded_last {
        if g_of_t(n, circuit.len(), t)? < l {
            incomplete += 1;
        }
    }
    Ok(Padding {
        circuit,
        extra_gates,
        extra_rounds,
        no_padding_needed: none,
        incomplete_fraction: incomplete as f64 / (padded_last + 1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::Variant;
    use crate::circuit::{canonicalize, RawCircuit};
    use crate::hamiltonian::{build_h_init, build_h_prop};
    use crate::linalg::CMat;
    use crate::spectral::p_matrix;
    use crate::subspace::{build_phi_basis, BasisMode};

    fn init_diag(r: usize) -> CMat {
        let mut m = CMat::identity(r, r);
        m[(0, 0)] = ZERO;
        m
    }

    #[test]
    fn required_time_limits() {
        let a = init_diag(5);
        let b = p_matrix(5);
        let opts = EigOptions::default();
        let t = required_time(&a, &b, 0.25, 0.0, 0.1, &opts).unwrap();
        let dn = linalg::hermitian_norm(&(&b - &a));
        assert!((t - dn / 0.0625).abs() < 1e-9);
        assert!(required_time(&a, &b, 0.0, 0.0, 0.1, &opts).is_err());
    }

    #[test]
    fn stationary_and_zero_time() {
        let b = p_matrix(6);
        let params = ScheduleParams::resolved(3.0, 2.0, 0.0, 0.1);
        let same = evolve(&b, &b, &params, &EvolveOptions::default()).unwrap();
        assert!((same.fidelity - 1.0).abs() < 1e-9);
        assert!(same.norm_drift < 1e-9);

        let r = 17;
        let zero = ScheduleParams {
            t_total: 0.0,
            steps: 0,
            delta: 0.0,
            epsilon: 0.1,
            checkpoints: 0,
        };
        let res = evolve(&init_diag(r), &p_matrix(r), &zero, &EvolveOptions::default()).unwrap();
        assert!((res.fidelity - 1.0 / (r as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn resolution_rule_enforced() {
        let p = ScheduleParams {
            t_total: 10.0,
            steps: 5,
            delta: 0.0,
            epsilon: 0.1,
            checkpoints: 0,
        };
        assert!(p.validate(1.0).is_err());
        assert!(ScheduleParams::resolved(10.0, 1.0, 0.0, 0.1).validate(1.0).is_ok());
    }

    #[test]
    fn halving_the_step_barely_moves_fidelity() {
        let r = 9;
        let (a, b) = (init_diag(r), p_matrix(r));
        let p = ScheduleParams {
            checkpoints: 0,
            ..ScheduleParams::resolved(40.0, 2.0, 0.0, 0.1)
        };
        let fine = ScheduleParams { steps: 2 * p.steps, ..p };
        let f1 = evolve(&a, &b, &p, &EvolveOptions::default()).unwrap().fidelity;
        let f2 = evolve(&a, &b, &fine, &EvolveOptions::default()).unwrap().fidelity;
        assert!((f1 - f2).abs() <= 1e-6, "{f1} vs {f2}");
    }

    #[test]
    fn doubling_reaches_target_on_small_chain() {
        let r = 9;
        let run = evolve_doubling(&init_diag(r), &p_matrix(r), 0.9, 1.0, 4096.0, &EvolveOptions::default()).unwrap();
        assert!(run.succeeded, "{:?}", run.attempts);
        assert!(run.result.fidelity >= 0.9);
    }

    #[test]
    fn padding_counts() {
        let c = CanonicalCircuit::identity(2, 2).unwrap();
        let one = pad_identities(&c, 1.0).unwrap();
        assert_eq!(one.extra_gates, 4);
        assert_eq!(one.circuit.len(), 8);
        let half = pad_identities(&c, 0.5).unwrap();
        assert_eq!(half.circuit.len(), 12);
        assert!(half.incomplete_fraction <= 0.5);
        let huge = pad_identities(&c, 1e6).unwrap();
        assert!(huge.no_padding_needed && huge.circuit.len() == 4);
        assert!(pad_identities(&c, 0.0).is_err());
    }

    #[test]
    fn readout_of_exact_history() {
        let raw = RawCircuit::new(2).push_named("X", &[1]).unwrap();
        let c = canonicalize(&raw).unwrap();
        let ctx = ChainContext::new(2, c.len(), Variant::AdiabaticWithS, false).unwrap();
        let basis = build_phi_basis(&ctx, &c, BasisMode::SingleInput).unwrap();
        let target = basis.ground_state_target();
        let ro = readout(&target, &basis).unwrap();
        assert!((ro.template_probability - 1.0 / basis.len() as f64).abs() < 1e-12);
        assert!(ro.fidelity > 1.0 - 1e-12);
        // qubit 1 is the high bit: |10>
        assert!((ro.register[2].0.powi(2) + ro.register[2].1.powi(2) - 1.0).abs() < 1e-12);

        let id = CanonicalCircuit::identity(2, 2).unwrap();
        let ctx = ChainContext::new(2, 4, Variant::AdiabaticWithS, false).unwrap();
        let b = build_phi_basis(&ctx, &id, BasisMode::SingleInput).unwrap();
        let ro = readout(&b.ground_state_target(), &b).unwrap();
        assert_eq!(ro.register[0], (1.0, 0.0));
    }

    #[test]
    fn restricted_and_full_space_evolution_agree() {
        // smallest chain: n = 2, one identity round, full space 14^4
        let circ = CanonicalCircuit::identity(2, 1).unwrap();
        let ctx = ChainContext::new(2, 2, Variant::AdiabaticWithS, false).unwrap();
        let hp = build_h_prop(&ctx, &circ).unwrap();
        let hi = build_h_init(&ctx).unwrap();
        let basis = build_phi_basis(&ctx, &circ, BasisMode::SingleInput).unwrap();
        let (ri, rp) = (basis.restrict(&hi).unwrap(), basis.restrict(&hp).unwrap());

        let params = ScheduleParams {
            checkpoints: 0,
            ..ScheduleParams::resolved(6.0, 2.0, 0.0, 0.1)
        };
        let mut e0 = vec![ZERO; basis.len()];
        e0[0] = c(1.0, 0.0);
        let target = basis.ground_state_target();
        let restricted = evolve(
            &ri,
            &rp,
            &params,
            &EvolveOptions {
                initial: Some(e0.clone()),
                target: Some(target),
                ..Default::default()
            },
        )
        .unwrap();

        let full_i = hi.materialize(1 << 20).unwrap();
        let full_p = hp.materialize(1 << 20).unwrap();
        let dim = full_i.dim;
        let to_full = |coeffs: &[C64]| {
            let mut v = vec![ZERO; dim];
            for (cfg, a) in basis.embed_combination(coeffs).unwrap() {
                v[hp.config_to_index(&cfg)] += a;
            }
            v
        };
        let full = evolve(
            &full_i,
            &full_p,
            &params,
            &EvolveOptions {
                initial: Some(to_full(&e0)),
                target: Some(to_full(&restricted.state)),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(full.fidelity >= 1.0 - 1e-6, "{}", full.fidelity);
    }
}
