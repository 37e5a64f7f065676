//! The QMA chain Hamiltonian of a verifier circuit: witness energies,
//! minimum eigenvalues, sector decomposition and YES/NO decisions.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::chain_model::{Letter, Symbol, Template, Variant};
use crate::circuit::{circuit_unitary, CanonicalCircuit, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_h_input, build_h_legal, build_h_out, build_h_prop, build_h_valid, ChainContext,
    ChainOperator, HamiltonianSpec, SparseState, DEFAULT_MAX_DIM,
};
use crate::linalg::{self, c, CMat, C64, ZERO};
use crate::spectral::{lowest_eigs, EigOptions, SpectralReport};
use crate::subspace::{build_phi_basis, BasisMode, PhiBasis};

#[derive(Debug, Clone)]
pub struct VerifierSpec {
    pub n1: usize,
    pub n2: usize,
    pub circuit: CanonicalCircuit,
}

impl VerifierSpec {
    pub fn new(n1: usize, n2: usize, circuit: CanonicalCircuit) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Input(format!("need n1, n2 >= 1, got n1 = {n1}, n2 = {n2}")));
        }
        if n1 + n2 != circuit.n() {
            return Err(Error::Input(format!(
                "n1 + n2 = {} but the circuit acts on {} qubits",
                n1 + n2,
                circuit.n()
            )));
        }
        Ok(VerifierSpec { n1, n2, circuit })
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn l(&self) -> usize {
        self.circuit.len()
    }

    /// Register index of `|x, xi>` with the ancilla bits high.
    pub fn input_index(&self, x: usize, xi: usize) -> usize {
        (x << self.n2) | xi
    }

    /// Two rounds on two qubits: identity, then `X` on the ancilla and a SWAP,
    /// so the output qubit reads `1` for every witness.
    pub fn accept_all() -> Result<Self> {
        Self::two_round(Gate::named("X")?)
    }

    /// Same layout with the `X` replaced by the identity: output is always `0`.
    pub fn reject_all() -> Result<Self> {
        Self::two_round(Gate::identity(1))
    }

    fn two_round(first: Gate) -> Result<Self> {
        let round1 = vec![Gate::identity(1), Gate::identity(2)];
        let round2 = vec![first, Gate::named("SWAP")?];
        Self::new(1, 1, CanonicalCircuit::from_rounds(2, vec![round1, round2])?)
    }
}

/// Probability that the circuit applied to `|0^n1, xi>` leaves the last qubit in `1`.
pub fn acceptance_probability(v: &VerifierSpec, xi: usize) -> Result<f64> {
    input_acceptance(v, v.input_index(0, xi))
}

fn input_acceptance(v: &VerifierSpec, input: usize) -> Result<f64> {
    let u = circuit_unitary(&v.circuit)?;
    Ok((0..u.nrows())
        .filter(|i| i & 1 == 1)
        .map(|i| u[(i, input)].norm_sqr())
        .sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentCount {
    pub name: &'static str,
    pub terms: usize,
}

#[derive(Debug, Clone)]
pub struct QMAInstance {
    pub verifier: VerifierSpec,
    pub ctx: ChainContext,
    pub hamiltonian: HamiltonianSpec,
    /// `H_input + H_out`, kept for the soundness overlap check.
    pub h_io: HamiltonianSpec,
    pub components: Vec<ComponentCount>,
    pub thresholds: Option<(f64, f64)>,
}

impl QMAInstance {
    pub fn set_thresholds(&mut self, a: f64, b: f64) -> Result<()> {
        if !(a < b) {
            return Err(Error::Validation(format!("thresholds need a < b, got a = {a}, b = {b}")));
        }
        self.thresholds = Some((a, b));
        Ok(())
    }

    pub fn last_step(&self) -> usize {
        self.ctx.rules.last_step()
    }

    pub fn legal_basis(&self) -> Result<PhiBasis> {
        build_phi_basis(&self.ctx, &self.verifier.circuit, BasisMode::FullLegal)
    }

    pub fn sidecar(&self) -> serde_json::Value {
        let (a, b) = self.thresholds.unzip();
        serde_json::json!({
            "a": a,
            "b": b,
            "n1": self.verifier.n1,
            "n2": self.verifier.n2,
            "n": self.verifier.n(),
            "L": self.verifier.l(),
            "d": self.ctx.d(),
            "components": self.components,
        })
    }
}

/// `H_prop + H_valid + H_legal + H_input + H_out` on the 13-letter alphabet.
pub fn build_qma_hamiltonian(v: &VerifierSpec) -> Result<QMAInstance> {
    let ctx = ChainContext::new(v.n(), v.l(), Variant::Qma, false)?;
    let parts = [
        ("prop", build_h_prop(&ctx, &v.circuit)?),
        ("valid", build_h_valid(&ctx)?),
        ("legal", build_h_legal(&ctx)?),
        ("input", build_h_input(&ctx, v.n1)?),
        ("out", build_h_out(&ctx)?),
    ];
    let refs: Vec<&HamiltonianSpec> = parts.iter().map(|p| &p.1).collect();
    let hamiltonian = HamiltonianSpec::sum(&refs)?;
    let h_io = HamiltonianSpec::sum(&[&parts[3].1, &parts[4].1])?;
    let components = parts
        .iter()
        .map(|(name, h)| ComponentCount {
            name,
            terms: h.terms.len(),
        })
        .collect();
    Ok(QMAInstance {
        verifier: v.clone(),
        ctx,
        hamiltonian,
        h_io,
        components,
        thresholds: None,
    })
}

/// `|nu_{x,xi}>` in coordinates of the full legal basis.
#[derive(Debug, Clone)]
pub struct NuState {
    pub x: usize,
    pub xi: usize,
    pub coeffs: Vec<C64>,
}

pub fn nu_state(inst: &QMAInstance, basis: &PhiBasis, x: usize, xi: usize) -> Result<NuState> {
    let v = &inst.verifier;
    if x >= 1 << v.n1 || xi >= 1 << v.n2 {
        return Err(Error::Input(format!("x = {x} or xi = {xi} out of range")));
    }
    let input = v.input_index(x, xi);
    let w = c(1.0 / ((basis.last_step + 1) as f64).sqrt(), 0.0);
    let coeffs = basis
        .labels
        .iter()
        .map(|l| if l.input == input { w } else { ZERO })
        .collect();
    Ok(NuState { x, xi, coeffs })
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessEnergy {
    pub xi: usize,
    pub energy: f64,
    /// `<nu| H_prop + H_valid + H_legal + H_input |nu>`.
    pub non_output_energy: f64,
    pub acceptance: f64,
}

/// `<nu_{0,xi}|H|nu_{0,xi}>`, evaluated on full-space configurations.
pub fn witness_energy(inst: &QMAInstance, xi_bits: &str) -> Result<WitnessEnergy> {
    let v = &inst.verifier;
    if xi_bits.len() != v.n2 || !xi_bits.chars().all(|ch| ch == '0' || ch == '1') {
        return Err(Error::Input(format!(
            "witness must be {} bits, got {xi_bits:?}",
            v.n2
        )));
    }
    let xi = usize::from_str_radix(xi_bits, 2).unwrap();
    let basis = inst.legal_basis()?;
    let nu = nu_state(inst, &basis, 0, xi)?;
    let state = basis.embed_combination(&nu.coeffs)?;
    let energy = sparse_expectation(&inst.hamiltonian, &state);
    let out = sparse_expectation(&build_h_out(&inst.ctx)?, &state);
    Ok(WitnessEnergy {
        xi,
        energy,
        non_output_energy: energy - out,
        acceptance: acceptance_probability(v, xi)?,
    })
}

fn sparse_expectation(h: &HamiltonianSpec, s: &SparseState) -> f64 {
    let hs = h.apply_sparse(s);
    s.iter()
        .map(|(cfg, a)| (a.conj() * hs.get(cfg).copied().unwrap_or(ZERO)).re)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EigenMode {
    RestrictedLegal,
    FullSpace,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinEigenReport {
    pub mode: EigenMode,
    pub lambda_min: f64,
    pub spectral: SpectralReport,
    /// Weight of the ground vector inside the legal subspace (full mode only).
    pub legal_weight: Option<f64>,
}

/// Restricted mode diagonalizes `H` on the legal subspace; full mode runs the
/// sparse solver on the materialized matrix and measures the ground vector's
/// weight inside the legal subspace.
pub fn min_eigen(inst: &QMAInstance, mode: EigenMode, max_dim: usize, opts: &EigOptions) -> Result<MinEigenReport> {
    let basis = inst.legal_basis()?;
    match mode {
        EigenMode::RestrictedLegal => {
            let m = basis.restrict(&inst.hamiltonian)?;
            let spectral = lowest_eigs(&m, 1, opts)?;
            Ok(MinEigenReport {
                mode,
                lambda_min: spectral.eigenvalues[0],
                spectral,
                legal_weight: None,
            })
        }
        EigenMode::FullSpace => {
            let h = inst.hamiltonian.materialize(max_dim)?;
            let spectral = lowest_eigs(&h, 1, opts)?;
            let g = &spectral.eigenvectors[0];
            let mut weight = 0.0;
            for i in 0..basis.len() {
                let mut ov = ZERO;
                for (cfg, b) in basis.embed(i)? {
                    ov += b.conj() * g[inst.hamiltonian.config_to_index(&cfg)];
                }
                weight += ov.norm_sqr();
            }
            Ok(MinEigenReport {
                mode,
                lambda_min: spectral.eigenvalues[0],
                spectral,
                legal_weight: Some(weight),
            })
        }
    }
}

pub fn full_space_default_cap() -> usize {
    DEFAULT_MAX_DIM
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Yes,
    No,
    PromiseViolated,
}

pub fn decide(inst: &QMAInstance, lambda_min: f64) -> Result<Decision> {
    let (a, b) = inst
        .thresholds
        .ok_or_else(|| Error::Validation("instance has no (a, b) thresholds".into()))?;
    Ok(if lambda_min <= a {
        Decision::Yes
    } else if lambda_min > b {
        Decision::No
    } else {
        Decision::PromiseViolated
    })
}

/// `a` is the largest best-witness energy over YES verifiers, `b` the
/// smallest restricted `lambda_min` over NO verifiers. Both are nudged by
/// `CALIBRATION_SLACK` (relative to `b`) so the calibrating instances
/// themselves land strictly inside YES and NO.
pub const CALIBRATION_SLACK: f64 = 1e-6;

pub fn calibrate_thresholds(yes: &[QMAInstance], no: &[QMAInstance], opts: &EigOptions) -> Result<(f64, f64)> {
    let mut a = 0.0f64;
    for inst in yes {
        let mut best = f64::INFINITY;
        for xi in 0..1usize << inst.verifier.n2 {
            let bits = format!("{xi:0w$b}", w = inst.verifier.n2);
            best = best.min(witness_energy(inst, &bits)?.energy);
        }
        a = a.max(best);
    }
    let mut b = f64::INFINITY;
    for inst in no {
        b = b.min(min_eigen(inst, EigenMode::RestrictedLegal, 0, opts)?.lambda_min);
    }
    if !(a < b) {
        return Err(Error::Integrity(format!("calibration gives a = {a} >= b = {b}")));
    }
    let slack = CALIBRATION_SLACK * b;
    Ok((a + slack, b - slack))
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapCheck {
    pub x: usize,
    pub xi: usize,
    pub overlap: f64,
    /// `1 - (1 - eps)/(T + 1)`.
    pub bound: f64,
    /// `1 - (1 - eps)/T`, the tighter variant with `T` in the denominator.
    pub bound_t: f64,
    pub holds: bool,
}

/// `<nu|P_2|nu>` against `1 - (1 - eps)/(T + 1)` for every `x, xi`, with
/// `P_2` the kernel projector of `H_input + H_out` on the legal subspace and
/// `eps` the acceptance probability of the input.
pub fn p2_overlap_check(inst: &QMAInstance) -> Result<Vec<OverlapCheck>> {
    let basis = inst.legal_basis()?;
    let m = basis.restrict(&inst.h_io)?;
    let (vals, vecs) = linalg::hermitian_eigh(&m);
    let kernel: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() < 1e-10).collect();
    let t1 = (basis.last_step + 1) as f64;
    let v = &inst.verifier;
    let mut out = Vec::new();
    for x in 0..1usize << v.n1 {
        for xi in 0..1usize << v.n2 {
            let nu = nu_state(inst, &basis, x, xi)?;
            let overlap: f64 = kernel
                .iter()
                .map(|&k| {
                    let col: Vec<C64> = vecs.column(k).iter().copied().collect();
                    linalg::dot(&col, &nu.coeffs).norm_sqr()
                })
                .sum();
            let eps = input_acceptance(v, v.input_index(x, xi))?;
            let bound = 1.0 - (1.0 - eps) / t1;
            out.push(OverlapCheck {
                x,
                xi,
                overlap,
                bound,
                bound_t: 1.0 - (1.0 - eps) / (t1 - 1.0),
                holds: overlap <= bound + 1e-10,
            });
        }
    }
    Ok(out)
}

/// A block of the full space left invariant by `H`: all configurations over
/// a set of letter strings joined by the propagation rules.
#[derive(Debug, Clone, Serialize)]
pub struct Sector {
    pub strings: Vec<Template>,
    pub bits: usize,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.strings.len() << self.bits
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorSpectrum {
    pub sectors: usize,
    pub full_dim: usize,
    pub largest_sector: usize,
    /// Lowest eigenvalue on the sector holding the legal chain.
    pub legal_min: f64,
    /// Lowest eigenvalue on the orthogonal complement of the legal subspace.
    pub perp_min: f64,
    pub perp_min_at: Template,
    pub full_min: f64,
}

fn letters_of(ctx: &ChainContext) -> Vec<Letter> {
    let mut ls: Vec<Letter> = ctx.alphabet.symbols().iter().map(|s| s.letter).collect();
    ls.dedup();
    ls
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// Splits the letter strings of length `L + 2` into rule-connected components.
pub fn decompose_sectors(ctx: &ChainContext) -> Result<Vec<Sector>> {
    if ctx.alphabet.is_identified() {
        return Err(Error::Input("sector decomposition needs an unidentified alphabet".into()));
    }
    let letters = letters_of(ctx);
    let base = letters.len();
    let sites = ctx.sites();
    let total = base
        .checked_pow(sites as u32)
        .filter(|&t| t <= u32::MAX as usize)
        .ok_or_else(|| Error::Resource(format!("{base}^{sites} letter strings")))?;
    let pos = |l: Letter| letters.iter().position(|&x| x == l).unwrap();
    let decode = |mut k: usize| {
        let mut out = vec![Letter::N; sites];
        for p in (0..sites).rev() {
            out[p] = letters[k % base];
            k /= base;
        }
        out
    };
    let mut pow = vec![1usize; sites];
    for p in (0..sites.saturating_sub(1)).rev() {
        pow[p] = pow[p + 1] * base;
    }
    let mut parent: Vec<u32> = (0..total as u32).collect();
    for k in 0..total {
        let s = decode(k);
        for r in &ctx.rules.rules {
            let i = r.site;
            if (s[i], s[i + 1]) == r.lhs {
                let j = k - pos(s[i]) * pow[i] - pos(s[i + 1]) * pow[i + 1]
                    + pos(r.rhs.0) * pow[i]
                    + pos(r.rhs.1) * pow[i + 1];
                let (a, b) = (find(&mut parent, k as u32), find(&mut parent, j as u32));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<u32, Vec<Template>> = BTreeMap::new();
    for k in 0..total {
        let root = find(&mut parent, k as u32);
        groups.entry(root).or_default().push(Template::new(decode(k)));
    }
    groups
        .into_values()
        .map(|strings| {
            let bits = strings[0].bit_count();
            if strings.iter().any(|t| t.bit_count() != bits) {
                return Err(Error::Integrity(format!(
                    "sector of {} mixes subscript counts",
                    strings[0]
                )));
            }
            Ok(Sector { strings, bits })
        })
        .collect()
}

fn sector_configs(ctx: &ChainContext, sector: &Sector) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::with_capacity(sector.dim());
    for t in &sector.strings {
        for u in 0..1usize << sector.bits {
            let mut remaining = sector.bits;
            let cfg = t
                .letters()
                .iter()
                .map(|&l| {
                    let s = if l.has_bit() {
                        remaining -= 1;
                        Symbol::with_bit(l, ((u >> remaining) & 1) as u8)
                    } else {
                        Symbol::plain(l)
                    };
                    ctx.alphabet.require(s).map(|k| k as u8)
                })
                .collect::<Result<Vec<u8>>>()?;
            out.push(cfg);
        }
    }
    Ok(out)
}

/// Lowest eigenvalue of `H` on one sector, by dense diagonalization of
/// each block that `H` connects.
pub fn sector_min(h: &HamiltonianSpec, op: &ChainOperator, ctx: &ChainContext, sector: &Sector, max_sector: usize) -> Result<f64> {
    let configs: Vec<usize> = sector_configs(ctx, sector)?
        .iter()
        .map(|cfg| h.config_to_index(cfg))
        .collect();
    if sector.strings.len() == 1 {
        // no rule touches the string, so H acts diagonally
        return Ok(configs
            .iter()
            .map(|&y| op.row(y).iter().find(|e| e.0 == y).map_or(0.0, |e| e.1.re))
            .fold(f64::INFINITY, f64::min));
    }
    if configs.len() > max_sector {
        return Err(Error::Resource(format!(
            "sector of {} has dimension {} > {max_sector}",
            sector.strings[0],
            configs.len()
        )));
    }
    let index: HashMap<usize, usize> = configs.iter().enumerate().map(|(k, &y)| (y, k)).collect();
    let dim = configs.len();
    let mut entries = Vec::new();
    let mut parent: Vec<u32> = (0..dim as u32).collect();
    for (i, &y) in configs.iter().enumerate() {
        for (col, a) in op.row(y) {
            let j = *index.get(&col).ok_or_else(|| {
                Error::Integrity(format!("H leaks out of the sector of {}", sector.strings[0]))
            })?;
            let (x, z) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
            parent[x.max(z) as usize] = x.min(z);
            entries.push((i, j, a));
        }
    }
    // configurations split further into blocks that H never connects
    let mut slot = vec![0usize; dim];
    let mut blocks: BTreeMap<u32, usize> = BTreeMap::new();
    let mut sizes = Vec::new();
    for k in 0..dim {
        let root = find(&mut parent, k as u32);
        let b = *blocks.entry(root).or_insert_with(|| {
            sizes.push(0);
            sizes.len() - 1
        });
        slot[k] = sizes[b];
        sizes[b] += 1;
    }
    let mut mats: Vec<CMat> = sizes.iter().map(|&n| CMat::zeros(n, n)).collect();
    for (i, j, a) in entries {
        let b = blocks[&find(&mut parent, j as u32)];
        mats[b][(slot[i], slot[j])] += a;
    }
    Ok(mats
        .par_iter()
        .map(|m| linalg::hermitian_eigenvalues(&linalg::hermitize(m))[0])
        .reduce(|| f64::INFINITY, f64::min))
}

/// Exact lowest energies on the legal sector and on its complement.
pub fn sector_spectrum(inst: &QMAInstance, max_sector: usize) -> Result<SectorSpectrum> {
    let sectors = decompose_sectors(&inst.ctx)?;
    let chain = crate::chain_model::enumerate_chain(&inst.ctx.rules)?;
    let legal: std::collections::BTreeSet<&Template> = chain.templates.iter().collect();
    let legal_idx = sectors
        .iter()
        .position(|s| s.strings.iter().any(|t| legal.contains(t)))
        .ok_or_else(|| Error::Integrity("no sector holds the legal chain".into()))?;
    if sectors[legal_idx].strings.len() != chain.templates.len() {
        return Err(Error::Integrity(format!(
            "the legal sector has {} strings, the chain {}",
            sectors[legal_idx].strings.len(),
            chain.templates.len()
        )));
    }
    let op = inst.hamiltonian.operator()?;
    let mins: Vec<Result<f64>> = sectors
        .par_iter()
        .map(|s| sector_min(&inst.hamiltonian, &op, &inst.ctx, s, max_sector))
        .collect();
    let mins = mins.into_iter().collect::<Result<Vec<f64>>>()?;
    let (perp_k, perp_min) = mins
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != legal_idx)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, &v)| (k, v))
        .unwrap();
    Ok(SectorSpectrum {
        sectors: sectors.len(),
        full_dim: sectors.iter().map(Sector::dim).sum(),
        largest_sector: sectors.iter().map(Sector::dim).max().unwrap_or(0),
        legal_min: mins[legal_idx],
        perp_min,
        perp_min_at: sectors[perp_k].strings[0].clone(),
        full_min: mins.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_verifier() -> VerifierSpec {
        VerifierSpec::new(1, 1, CanonicalCircuit::identity(2, 1).unwrap()).unwrap()
    }

    #[test]
    fn verifier_shape_checks() {
        let c = CanonicalCircuit::identity(2, 2).unwrap();
        assert!(VerifierSpec::new(0, 2, c.clone()).is_err());
        assert!(VerifierSpec::new(1, 2, c).is_err());
    }

    #[test]
    fn acceptance_examples() {
        let id = identity_verifier();
        assert_eq!(acceptance_probability(&id, 1).unwrap(), 1.0);
        assert_eq!(acceptance_probability(&id, 0).unwrap(), 0.0);
        let h = Gate::named("H").unwrap();
        let round2 = vec![Gate::identity(1), Gate::new(linalg::kron(&linalg::identity(2), h.matrix())).unwrap()];
        let c = CanonicalCircuit::from_rounds(2, vec![vec![Gate::identity(1), Gate::identity(2)], round2]).unwrap();
        let v = VerifierSpec::new(1, 1, c).unwrap();
        assert!((acceptance_probability(&v, 0).unwrap() - 0.5).abs() < 1e-12);
        for xi in 0..2 {
            assert_eq!(acceptance_probability(&VerifierSpec::accept_all().unwrap(), xi).unwrap(), 1.0);
            assert_eq!(acceptance_probability(&VerifierSpec::reject_all().unwrap(), xi).unwrap(), 0.0);
        }
    }

    #[test]
    fn term_count_is_component_sum() {
        let inst = build_qma_hamiltonian(&VerifierSpec::accept_all().unwrap()).unwrap();
        let total: usize = inst.components.iter().map(|c| c.terms).sum();
        assert_eq!(inst.hamiltonian.terms.len(), total);
    }

    #[test]
    fn witness_energies_match_acceptance() {
        for v in [VerifierSpec::accept_all().unwrap(), VerifierSpec::reject_all().unwrap()] {
            let inst = build_qma_hamiltonian(&v).unwrap();
            let t1 = (inst.last_step() + 1) as f64;
            for xi in ["0", "1"] {
                let w = witness_energy(&inst, xi).unwrap();
                assert!(w.non_output_energy.abs() < 1e-12);
                assert!((w.energy - (1.0 - w.acceptance) / t1).abs() < 1e-12, "{w:?}");
            }
        }
        let inst = build_qma_hamiltonian(&VerifierSpec::accept_all().unwrap()).unwrap();
        assert!(witness_energy(&inst, "01").is_err());
    }

    #[test]
    fn decisions() {
        let mut inst = build_qma_hamiltonian(&VerifierSpec::accept_all().unwrap()).unwrap();
        assert!(decide(&inst, 0.0).is_err());
        assert!(inst.set_thresholds(0.2, 0.1).is_err());
        inst.set_thresholds(0.1, 0.3).unwrap();
        assert_eq!(decide(&inst, 0.0).unwrap(), Decision::Yes);
        assert_eq!(decide(&inst, 0.31).unwrap(), Decision::No);
        assert_eq!(decide(&inst, 0.2).unwrap(), Decision::PromiseViolated);
    }

    #[test]
    fn restricted_spectra_separate() {
        let opts = EigOptions::default();
        let mut yes = build_qma_hamiltonian(&VerifierSpec::accept_all().unwrap()).unwrap();
        let mut no = build_qma_hamiltonian(&VerifierSpec::reject_all().unwrap()).unwrap();
        let ly = min_eigen(&yes, EigenMode::RestrictedLegal, 0, &opts).unwrap().lambda_min;
        let ln = min_eigen(&no, EigenMode::RestrictedLegal, 0, &opts).unwrap().lambda_min;
        assert!(ly.abs() < 1e-10);
        assert!(ln > 1e-6);
        let (a, b) = calibrate_thresholds(std::slice::from_ref(&yes), std::slice::from_ref(&no), &opts).unwrap();
        assert!(a < b && (b - ln * (1.0 - CALIBRATION_SLACK)).abs() < 1e-12);
        yes.set_thresholds(a, b).unwrap();
        no.set_thresholds(a, b).unwrap();
        assert_eq!(decide(&yes, ly).unwrap(), Decision::Yes);
        assert_eq!(decide(&no, ln).unwrap(), Decision::No);
    }

    #[test]
    fn p2_overlaps_respect_bound() {
        let inst = build_qma_hamiltonian(&VerifierSpec::reject_all().unwrap()).unwrap();
        for ch in p2_overlap_check(&inst).unwrap() {
            assert!(ch.holds, "{ch:?}");
        }
    }

    #[test]
    fn tiny_chain_full_space_agrees_by_two_routes() {
        let inst = build_qma_hamiltonian(&identity_verifier()).unwrap();
        let opts = EigOptions::default();
        let full = min_eigen(&inst, EigenMode::FullSpace, 100_000, &opts).unwrap();
        let restricted = min_eigen(&inst, EigenMode::RestrictedLegal, 0, &opts).unwrap();
        assert!((full.lambda_min - restricted.lambda_min).abs() < 1e-8);
        let sec = sector_spectrum(&inst, 4096).unwrap();
        assert_eq!(sec.full_dim, 13usize.pow(4));
        assert!((sec.full_min - full.lambda_min).abs() < 1e-8);
        assert!((sec.legal_min - restricted.lambda_min).abs() < 1e-10);
    }
}
