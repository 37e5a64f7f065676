//! Binary encoding of a `d`-state chain into a chain of qubits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSpec, LocalTerm, SparseBlock};
use crate::linalg::{self, CMat, CsrMatrix};

/// Particle state `k` is stored as the `q`-bit binary word `k`; words
/// `d..2^q` are penalized.
#[derive(Debug, Clone, Serialize)]
pub struct QubitEncoding {
    pub d: usize,
    pub q: usize,
    pub lambda_pen: f64,
}

impl QubitEncoding {
    pub fn new(d: usize, lambda_pen: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Input(format!("local dimension must be >= 2, got {d}")));
        }
        if !(lambda_pen >= 0.0) {
            return Err(Error::Input(format!("penalty must be non-negative, got {lambda_pen}")));
        }
        let q = usize::BITS as usize - (d - 1).leading_zeros() as usize;
        Ok(QubitEncoding { d, q, lambda_pen })
    }

    /// Penalty of ten times the summed term norms.
    pub fn for_spec(h: &HamiltonianSpec) -> Result<Self> {
        Self::new(h.local_dim, 10.0 * h.term_norm_sum())
    }

    pub fn code(&self, k: usize) -> usize {
        k
    }

    pub fn non_code_patterns(&self) -> usize {
        (1 << self.q) - self.d
    }

    /// Encoded locality `2q`.
    pub fn locality(&self) -> usize {
        2 * self.q
    }

    fn map_index(&self, mut idx: usize, width: usize) -> usize {
        let mut out = 0;
        for p in 0..width {
            let digit = idx % self.d;
            idx /= self.d;
            out |= self.code(digit) << (self.q * p);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EncodedHamiltonian {
    pub spec: HamiltonianSpec,
    pub encoding: QubitEncoding,
    /// Widest encoded term, in qubits.
    pub locality: usize,
}

/// Rewrites every term on `q` qubits per particle and adds a per-particle
/// penalty on the unused words.
pub fn encode(h: &HamiltonianSpec, enc: &QubitEncoding) -> Result<EncodedHamiltonian> {
    if h.local_dim != enc.d {
        return Err(Error::DimensionMismatch {
            expected: enc.d,
            got: h.local_dim,
        });
    }
    let mut out = HamiltonianSpec::empty(2, h.sites * enc.q);
    let terms: Vec<LocalTerm> = h
        .terms
        .par_iter()
        .map(|t| {
            let width = t.width * enc.q;
            let entries = t
                .block
                .entries
                .iter()
                .map(|&(r, k, v)| (enc.map_index(r, t.width), enc.map_index(k, t.width), v))
                .collect();
            LocalTerm {
                site: t.site * enc.q,
                width,
                block: SparseBlock {
                    dim: 1 << width,
                    entries,
                },
                tag: format!("enc:{}", t.tag),
            }
        })
        .collect();
    for t in terms {
        out.push(t)?;
    }
    if enc.lambda_pen > 0.0 && enc.non_code_patterns() > 0 {
        for p in 0..h.sites {
            out.push(LocalTerm {
                site: p * enc.q,
                width: enc.q,
                block: SparseBlock::diagonal(1 << enc.q, (enc.d..1 << enc.q).map(|w| (w, enc.lambda_pen))),
                tag: format!("enc:penalty@{p}"),
            })?;
        }
    }
    let locality = out.terms.iter().map(|t| t.width).max().unwrap_or(0);
    Ok(EncodedHamiltonian {
        spec: out,
        encoding: enc.clone(),
        locality,
    })
}

/// Eigenvalues of a sparse Hermitian matrix from its connected blocks.
/// Each entry pairs an eigenvalue with the index of one row of its block.
pub fn block_spectrum(m: &CsrMatrix, max_block: usize) -> Result<Vec<(f64, usize)>> {
    let mut parent: Vec<usize> = (0..m.dim).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for r in 0..m.dim {
        for &k in &m.indices[m.indptr[r]..m.indptr[r + 1]] {
            let (a, b) = (find(&mut parent, r), find(&mut parent, k));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in 0..m.dim {
        let root = find(&mut parent, r);
        blocks.entry(root).or_default().push(r);
    }
    let blocks: Vec<Vec<usize>> = blocks.into_values().collect();
    if let Some(b) = blocks.iter().find(|b| b.len() > max_block) {
        return Err(Error::Resource(format!("connected block of size {} > {max_block}", b.len())));
    }
    let parts: Vec<Vec<(f64, usize)>> = blocks
        .par_iter()
        .map(|rows| {
            let pos: BTreeMap<usize, usize> = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let mut d = CMat::zeros(rows.len(), rows.len());
            for (i, &r) in rows.iter().enumerate() {
                for e in m.indptr[r]..m.indptr[r + 1] {
                    d[(i, pos[&m.indices[e]])] = m.values[e];
                }
            }
            linalg::hermitian_eigenvalues(&linalg::hermitize(&d))
                .into_iter()
                .map(|v| (v, rows[0]))
                .collect()
        })
        .collect();
    let mut all: Vec<(f64, usize)> = parts.into_iter().flatten().collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(all)
}

#[derive(Debug, Clone, Serialize)]
pub struct CodeSpectrumReport {
    pub original: Vec<f64>,
    pub encoded: Vec<f64>,
    pub max_diff: f64,
    /// Lowest energy among blocks made of non-code configurations.
    pub non_code_min: f64,
    pub lambda_pen: f64,
    pub matches: bool,
    pub non_code_above_half_penalty: bool,
}

/// Compares the bottom `k_eigs` eigenvalues of a tiny chain before and
/// after encoding.
pub fn code_spectrum_check(
    original: &HamiltonianSpec,
    encoded: &EncodedHamiltonian,
    k_eigs: usize,
    max_dim: usize,
) -> Result<CodeSpectrumReport> {
    let enc = &encoded.encoding;
    let a = block_spectrum(&original.materialize(max_dim)?, 4096)?;
    let b = block_spectrum(&encoded.spec.materialize(max_dim)?, 4096)?;
    let k = k_eigs.min(a.len());
    let is_code = |row: usize| {
        let mut x = row;
        (0..original.sites).all(|_| {
            let w = x & ((1 << enc.q) - 1);
            x >>= enc.q;
            w < enc.d
        })
    };
    let non_code_min = b
        .iter()
        .filter(|(_, r)| !is_code(*r))
        .map(|e| e.0)
        .fold(f64::INFINITY, f64::min);
    let original: Vec<f64> = a[..k].iter().map(|e| e.0).collect();
    let encoded_vals: Vec<f64> = b[..k].iter().map(|e| e.0).collect();
    let max_diff = original
        .iter()
        .zip(&encoded_vals)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(CodeSpectrumReport {
        matches: max_diff <= 1e-9,
        non_code_above_half_penalty: non_code_min >= enc.lambda_pen / 2.0,
        original,
        encoded: encoded_vals,
        max_diff,
        non_code_min,
        lambda_pen: enc.lambda_pen,
    })
}
