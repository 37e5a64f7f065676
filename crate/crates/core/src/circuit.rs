//! Quantum circuits in the round layout used by the chain construction.
//!
//! A canonical circuit on `n` qubits is a sequence of `R` rounds. Each round
//! holds `n` gates: a one-qubit gate on qubit 1 followed by two-qubit gates on
//! the pairs `(1,2), (2,3), ..., (n-1,n)`. The first round is all identities.
//! Qubits are numbered from 1 and qubit 1 is the most significant bit of a
//! basis index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};

const UNITARY_TOL: f64 = 1e-12;
const DENSE_QUBIT_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    label: Option<String>,
    matrix: CMat,
}

impl Gate {
    /// Wraps a 2×2 or 4×4 matrix, rejecting anything that is not unitary.
    pub fn new(matrix: CMat) -> Result<Self> {
        Self::with_label(None, matrix)
    }

    fn with_label(label: Option<String>, matrix: CMat) -> Result<Self> {
        let (r, cols) = matrix.shape();
        if r != cols || !(r == 2 || r == 4) {
            return Err(Error::Validation(format!(
                "gate matrix must be 2x2 or 4x4, got {r}x{cols}"
            )));
        }
        let res = linalg::unitarity_residual(&matrix);
        if res > UNITARY_TOL {
            return Err(Error::Validation(format!(
                "gate matrix is not unitary (|U†U - I| = {res:.3e})"
            )));
        }
        Ok(Gate { label, matrix })
    }

    pub fn named(name: &str) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = match name.to_ascii_uppercase().as_str() {
            "I" | "ID" => linalg::identity(2),
            "I2" => linalg::identity(4),
            "X" => linalg::real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            "Y" => CMat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]),
            "Z" => linalg::real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            "H" => linalg::real_matrix(2, 2, &[h, h, h, -h]),
            "T" => CMat::from_row_slice(
                2,
                2,
                &[ONE, ZERO, ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
            ),
            "CNOT" | "CX" => linalg::real_matrix(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0, //
                    0.0, 0.0, 0.0, 1.0, //
                    0.0, 0.0, 1.0, 0.0,
                ],
            ),
            "CZ" => linalg::real_matrix(
                4,
                4,
                &[
                    1.0, 0.0, 0.0, 0.0, //
                    0.0, 1.0, 0.0, 0.0, //
                    0.0, 0.0, 1.0, 0.0, //
                    0.0, 0.0, 0.0, -1.0,
                ],
            ),
            "SWAP" => swap_matrix(),
            other => return Err(Error::Input(format!("unknown gate name `{other}`"))),
        };
        Self::with_label(Some(name.to_ascii_uppercase()), m)
    }

    pub fn identity(arity: usize) -> Self {
        let (label, dim) = if arity == 1 { ("I", 2) } else { ("I2", 4) };
        Gate {
            label: Some(label.into()),
            matrix: linalg::identity(dim),
        }
    }

    pub fn arity(&self) -> usize {
        if self.matrix.nrows() == 2 {
            1
        } else {
            2
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn is_exact_identity(&self) -> bool {
        self.matrix == linalg::identity(self.matrix.nrows())
    }
}

fn swap_matrix() -> CMat {
    linalg::real_matrix(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

/// A gate acting on explicit (1-based) qubits of an unconstrained circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGate {
    pub gate: Gate,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCircuit {
    pub n: usize,
    pub gates: Vec<RawGate>,
}

impl RawCircuit {
    pub fn new(n: usize) -> Self {
        RawCircuit {
            n,
            gates: Vec::new(),
        }
    }

    pub fn push(mut self, gate: Gate, qubits: &[usize]) -> Self {
        self.gates.push(RawGate {
            gate,
            qubits: qubits.to_vec(),
        });
        self
    }

    pub fn push_named(self, name: &str, qubits: &[usize]) -> Result<Self> {
        Ok(self.push(Gate::named(name)?, qubits))
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Input(format!("circuits need n >= 2 qubits, got {}", self.n)));
        }
        for (k, g) in self.gates.iter().enumerate() {
            if g.qubits.len() != g.gate.arity() {
                return Err(Error::Input(format!(
                    "gate {k}: arity {} but {} target qubits",
                    g.gate.arity(),
                    g.qubits.len()
                )));
            }
            if let Some(&q) = g.qubits.iter().find(|&&q| q == 0 || q > self.n) {
                return Err(Error::Input(format!(
                    "gate {k}: qubit {q} outside 1..={}",
                    self.n
                )));
            }
            if g.qubits.len() == 2 && g.qubits[0] == g.qubits[1] {
                return Err(Error::Input(format!("gate {k}: repeated target qubit")));
            }
        }
        Ok(())
    }

    /// Unitary of the raw gate sequence, computed without the round layout.
    pub fn unitary(&self) -> Result<CMat> {
        self.validate()?;
        check_dense_size(self.n)?;
        let dim = 1usize << self.n;
        let mut u = linalg::identity(dim);
        for g in &self.gates {
            for col in 0..dim {
                let mut v: Vec<C64> = u.column(col).iter().copied().collect();
                apply_on_qubits(&mut v, self.n, &g.qubits, g.gate.matrix());
                u.set_column(col, &nalgebra::DVector::from_vec(v));
            }
        }
        Ok(u)
    }
}

fn check_dense_size(n: usize) -> Result<()> {
    if n > DENSE_QUBIT_LIMIT {
        return Err(Error::Resource(format!(
            "dense unitary for {n} qubits exceeds the {DENSE_QUBIT_LIMIT}-qubit limit"
        )));
    }
    Ok(())
}

/// Applies a 1- or 2-qubit matrix to a state vector of `n` qubits.
pub fn apply_on_qubits(state: &mut [C64], n: usize, qubits: &[usize], m: &CMat) {
    match qubits {
        [q] => {
            let bit = 1usize << (n - q);
            for idx in 0..state.len() {
                if idx & bit == 0 {
                    let (a, b) = (state[idx], state[idx | bit]);
                    state[idx] = m[(0, 0)] * a + m[(0, 1)] * b;
                    state[idx | bit] = m[(1, 0)] * a + m[(1, 1)] * b;
                }
            }
        }
        [q1, q2] => {
            let (b1, b2) = (1usize << (n - q1), 1usize << (n - q2));
            for idx in 0..state.len() {
                if idx & b1 == 0 && idx & b2 == 0 {
                    let slots = [idx, idx | b2, idx | b1, idx | b1 | b2];
                    let amps = slots.map(|s| state[s]);
                    for (r, &s) in slots.iter().enumerate() {
                        state[s] = (0..4).map(|k| m[(r, k)] * amps[k]).sum();
                    }
                }
            }
        }
        _ => unreachable!("gates act on one or two qubits"),
    }
}

/// A circuit in the round layout, `L = n·R` gates in round-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCircuit {
    n: usize,
    rounds: usize,
    gates: Vec<Gate>,
}

impl CanonicalCircuit {
    /// Builds a canonical circuit from explicit rounds; checks the layout rules.
    pub fn from_rounds(n: usize, rounds: Vec<Vec<Gate>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Input(format!("n must be >= 2, got {n}")));
        }
        if rounds.is_empty() {
            return Err(Error::Validation("a canonical circuit has at least one round".into()));
        }
        let mut gates = Vec::with_capacity(n * rounds.len());
        for (r, round) in rounds.into_iter().enumerate() {
            if round.len() != n {
                return Err(Error::Validation(format!(
                    "round {} has {} gates, expected {n}",
                    r + 1,
                    round.len()
                )));
            }
            for (k, g) in round.into_iter().enumerate() {
                let want = if k == 0 { 1 } else { 2 };
                if g.arity() != want {
                    return Err(Error::Validation(format!(
                        "round {} slot {} needs a {want}-qubit gate",
                        r + 1,
                        k + 1
                    )));
                }
                if r == 0 && !g.is_exact_identity() {
                    return Err(Error::Validation("round 1 must consist of identity gates".into()));
                }
                gates.push(g);
            }
        }
        Ok(CanonicalCircuit {
            n,
            rounds: gates.len() / n,
            gates,
        })
    }

    pub fn identity(n: usize, rounds: usize) -> Result<Self> {
        let round = |_| (0..n).map(|k| Gate::identity(if k == 0 { 1 } else { 2 })).collect();
        Self::from_rounds(n, (0..rounds).map(round).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Total gate count `L = n·R`.
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// The `i`-th gate, counting from 1.
    pub fn gate_unitary(&self, i: usize) -> Result<&Gate> {
        if i == 0 || i > self.len() {
            return Err(Error::Input(format!(
                "gate index {i} outside 1..={}",
                self.len()
            )));
        }
        Ok(&self.gates[i - 1])
    }

    /// Qubits touched by gate `i` (1-based) in the round layout.
    pub fn qubits_of(&self, i: usize) -> Vec<usize> {
        let slot = (i - 1) % self.n + 1;
        if slot == 1 {
            vec![1]
        } else {
            vec![slot - 1, slot]
        }
    }

    /// Appends `extra` identity rounds.
    pub fn with_identity_rounds(&self, extra: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..extra {
            for k in 0..self.n {
                out.gates.push(Gate::identity(if k == 0 { 1 } else { 2 }));
            }
        }
        out.rounds += extra;
        out
    }

    /// Product of the first `count` gates, each embedded at its layout position.
    pub fn prefix_unitary(&self, count: usize) -> Result<CMat> {
        check_dense_size(self.n)?;
        let dim = 1usize << self.n;
        let mut u = linalg::identity(dim);
        for col in 0..dim {
            let mut v: Vec<C64> = u.column(col).iter().copied().collect();
            for (k, g) in self.gates.iter().take(count).enumerate() {
                apply_on_qubits(&mut v, self.n, &self.qubits_of(k + 1), g.matrix());
            }
            u.set_column(col, &nalgebra::DVector::from_vec(v));
        }
        Ok(u)
    }

    /// Applies the first `count` gates to a state vector.
    pub fn apply_prefix(&self, state: &mut [C64], count: usize) {
        for (k, g) in self.gates.iter().take(count).enumerate() {
            apply_on_qubits(state, self.n, &self.qubits_of(k + 1), g.matrix());
        }
    }

    pub fn to_file(&self) -> CircuitFile {
        let gates = self
            .gates
            .iter()
            .enumerate()
            .map(|(k, g)| GateEntry {
                name: g.label().map(str::to_string),
                matrix: Some(encode_matrix(g.matrix())),
                qubits: self.qubits_of(k + 1),
            })
            .collect();
        CircuitFile {
            n: self.n,
            gates,
            rounds: Some(self.rounds),
        }
    }
}

/// Product of all `L` gates of the canonical circuit.
pub fn circuit_unitary(c: &CanonicalCircuit) -> Result<CMat> {
    c.prefix_unitary(c.len())
}

/// Rewrites an arbitrary circuit into the round layout.
///
/// Non-adjacent two-qubit gates are routed with a SWAP ladder that walks the
/// farther qubit next to the nearer one and back. Gates are packed greedily:
/// a gate joins the current round when its slot lies to the right of every
/// slot already used there.
pub fn canonicalize(raw: &RawCircuit) -> Result<CanonicalCircuit> {
    raw.validate()?;
    let n = raw.n;
    let mut ops: Vec<(usize, CMat)> = Vec::new();
    let swap = swap_matrix();
    for g in &raw.gates {
        match g.qubits.as_slice() {
            [1] => ops.push((1, g.gate.matrix().clone())),
            [q] => ops.push((*q, linalg::kron(&linalg::identity(2), g.gate.matrix()))),
            [a, b] => {
                let (a, b) = (*a, *b);
                let (lo, hi) = (a.min(b), a.max(b));
                let oriented = if a < b {
                    g.gate.matrix().clone()
                } else {
                    &swap * g.gate.matrix() * &swap
                };
                let ladder: Vec<usize> = (lo + 2..=hi).rev().collect();
                for &p in &ladder {
                    ops.push((p, swap.clone()));
                }
                ops.push((lo + 1, oriented));
                for &p in ladder.iter().rev() {
                    ops.push((p, swap.clone()));
                }
            }
            _ => unreachable!(),
        }
    }

    let identity_round = || -> Vec<Gate> {
        (0..n)
            .map(|k| Gate::identity(if k == 0 { 1 } else { 2 }))
            .collect()
    };
    let mut rounds = vec![identity_round()];
    let mut last_slot = usize::MAX;
    for (slot, m) in ops {
        if last_slot == usize::MAX || slot <= last_slot {
            rounds.push(identity_round());
        }
        let round = rounds.last_mut().unwrap();
        round[slot - 1] = Gate::new(m)?;
        last_slot = slot;
    }
    CanonicalCircuit::from_rounds(n, rounds)
}

/// JSON circuit description shared by input and canonicalized output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CircuitFile {
    pub n: usize,
    pub gates: Vec<GateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GateEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    pub qubits: Vec<usize>,
}

fn encode_matrix(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| [m[(r, k)].re, m[(r, k)].im]).collect())
        .collect()
}

fn decode_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Input("gate matrix must be square".into()));
    }
    Ok(CMat::from_fn(dim, dim, |r, k| c(rows[r][k][0], rows[r][k][1])))
}

impl CircuitFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_raw(&self) -> Result<RawCircuit> {
        let mut raw = RawCircuit::new(self.n);
        for (k, e) in self.gates.iter().enumerate() {
            let gate = match (&e.name, &e.matrix) {
                (_, Some(m)) => Gate::with_label(e.name.clone(), decode_matrix(m)?)?,
                (Some(name), None) => Gate::named(name)?,
                (None, None) => {
                    return Err(Error::Input(format!("gate {k} has neither name nor matrix")))
                }
            };
            raw = raw.push(gate, &e.qubits);
        }
        Ok(raw)
    }

    /// Reads a file that is already in round layout (`rounds` present).
    pub fn to_canonical(&self) -> Result<CanonicalCircuit> {
        let rounds = self
            .rounds
            .ok_or_else(|| Error::Input("circuit file has no `rounds` field".into()))?;
        let raw = self.to_raw()?;
        if raw.gates.len() != rounds * self.n {
            return Err(Error::Validation(format!(
                "{} gates do not fill {rounds} rounds of {}",
                raw.gates.len(),
                self.n
            )));
        }
        let gates: Vec<Gate> = raw.gates.into_iter().map(|g| g.gate).collect();
        let rounds = gates.chunks(self.n).map(|ch| ch.to_vec()).collect();
        CanonicalCircuit::from_rounds(self.n, rounds)
    }

    /// Canonical form of the file, canonicalizing when needed.
    pub fn load_canonical(&self) -> Result<CanonicalCircuit> {
        if self.rounds.is_some() {
            self.to_canonical()
        } else {
            canonicalize(&self.to_raw()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cnot() -> CMat {
        Gate::named("CNOT").unwrap().matrix().clone()
    }

    #[test]
    fn empty_circuit_is_one_identity_round() {
        let c = canonicalize(&RawCircuit::new(2)).unwrap();
        assert_eq!((c.rounds(), c.len()), (1, 2));
        assert!(c.gates().iter().all(Gate::is_exact_identity));
        assert_eq!(circuit_unitary(&c).unwrap(), linalg::identity(4));
    }

    #[test]
    fn adjacent_cnot_lands_in_second_round() {
        let raw = RawCircuit::new(2).push_named("CNOT", &[1, 2]).unwrap();
        let c = canonicalize(&raw).unwrap();
        assert_eq!((c.rounds(), c.len()), (2, 4));
        assert!(c.gate_unitary(1).unwrap().is_exact_identity());
        assert!(c.gate_unitary(3).unwrap().is_exact_identity());
        assert_eq!(c.gate_unitary(4).unwrap().matrix(), &cnot());
        assert!(linalg::max_abs_diff(&circuit_unitary(&c).unwrap(), &cnot()) < 1e-14);
    }

    #[test]
    fn distant_cz_is_routed_with_swaps() {
        let raw = RawCircuit::new(3).push_named("CZ", &[1, 3]).unwrap();
        let c = canonicalize(&raw).unwrap();
        let swaps = c.gates().iter().filter(|g| g.matrix() == &swap_matrix()).count();
        assert_eq!(swaps, 2);
        let u = circuit_unitary(&c).unwrap();
        assert!(linalg::equal_up_to_phase(&u, &raw.unitary().unwrap(), 1e-12));
        // CZ_13 is diagonal with a -1 on |1x1>.
        for idx in 0..8 {
            let want = if idx & 0b101 == 0b101 { -1.0 } else { 1.0 };
            assert!((u[(idx, idx)] - c64r(want)).norm() < 1e-12);
        }
    }

    fn c64r(x: f64) -> C64 {
        c(x, 0.0)
    }

    #[test]
    fn reversed_two_qubit_gate_keeps_orientation() {
        let raw = RawCircuit::new(2).push_named("CNOT", &[2, 1]).unwrap();
        let c = canonicalize(&raw).unwrap();
        assert!(linalg::max_abs_diff(&circuit_unitary(&c).unwrap(), &raw.unitary().unwrap()) < 1e-14);
    }

    #[test]
    fn two_x_gates_cancel() {
        let raw = RawCircuit::new(2)
            .push_named("X", &[1])
            .unwrap()
            .push_named("X", &[1])
            .unwrap();
        let c = canonicalize(&raw).unwrap();
        assert!(linalg::max_abs_diff(&circuit_unitary(&c).unwrap(), &linalg::identity(4)) < 1e-14);
    }

    #[test]
    fn gate_index_bounds_and_arity() {
        let raw = RawCircuit::new(3).push_named("H", &[2]).unwrap();
        let c = canonicalize(&raw).unwrap();
        for i in 1..=c.len() {
            let want = if i % 3 == 1 { 1 } else { 2 };
            assert_eq!(c.gate_unitary(i).unwrap().arity(), want);
        }
        assert!(c.gate_unitary(0).is_err());
        assert!(c.gate_unitary(c.len() + 1).is_err());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let out_of_range = RawCircuit::new(2).push_named("X", &[3]).unwrap();
        assert!(matches!(canonicalize(&out_of_range), Err(Error::Input(_))));
        let not_unitary = linalg::real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(Gate::new(not_unitary), Err(Error::Validation(_))));
        assert!(matches!(
            CanonicalCircuit::from_rounds(2, vec![vec![Gate::named("X").unwrap(), Gate::identity(2)]]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dense_limit_is_enforced() {
        let c = CanonicalCircuit::identity(13, 1).unwrap();
        assert!(matches!(circuit_unitary(&c), Err(Error::Resource(_))));
    }

    fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMat {
        // Gram-Schmidt on a random complex matrix.
        let mut m = CMat::from_fn(dim, dim, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        for j in 0..dim {
            for k in 0..j {
                let proj: C64 = (0..dim).map(|r| m[(r, k)].conj() * m[(r, j)]).sum();
                for r in 0..dim {
                    let v = m[(r, k)];
                    m[(r, j)] -= proj * v;
                }
            }
            let nrm: f64 = (0..dim).map(|r| m[(r, j)].norm_sqr()).sum::<f64>().sqrt();
            for r in 0..dim {
                m[(r, j)] /= nrm;
            }
        }
        m
    }

    #[test]
    fn canonicalize_preserves_unitary_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut raw = RawCircuit::new(3);
            for _ in 0..rng.gen_range(0..=8) {
                if rng.gen_bool(0.4) {
                    let q = rng.gen_range(1..=3);
                    raw = raw.push(Gate::new(random_unitary(&mut rng, 2)).unwrap(), &[q]);
                } else {
                    let a = rng.gen_range(1..=3);
                    let mut b = rng.gen_range(1..=3);
                    while b == a {
                        b = rng.gen_range(1..=3);
                    }
                    raw = raw.push(Gate::new(random_unitary(&mut rng, 4)).unwrap(), &[a, b]);
                }
            }
            let c = canonicalize(&raw).unwrap();
            assert_eq!(c.len(), c.n() * c.rounds());
            assert!(c.gates()[..3].iter().all(Gate::is_exact_identity));
            let diff = linalg::max_abs_diff(&circuit_unitary(&c).unwrap(), &raw.unitary().unwrap());
            assert!(diff <= 1e-10, "diff {diff}");
        }
    }

    #[test]
    fn json_file_roundtrip() {
        let text = r#"{"n": 2, "gates": [{"name": "X", "qubits": [1]},
                      {"matrix": [[[1,0],[0,0]],[[0,0],[1,0]]], "qubits": [2]}]}"#;
        let file = CircuitFile::from_json(text).unwrap();
        let c = file.load_canonical().unwrap();
        let out = c.to_file();
        assert_eq!(out.rounds, Some(c.rounds()));
        let again = out.load_canonical().unwrap();
        assert_eq!(again, c);
    }
}
