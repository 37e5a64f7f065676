//! Nearest-neighbour chain Hamiltonians built from 1- and 2-site terms.
//!
//! A basis configuration is a list of symbol indices, one per site; site 0 is
//! the most significant digit of the flattened basis index.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::chain_model::{
    forward_rules, pair_allowed, pair_illegal, Alphabet, AlphabetKind, Letter, Rule, RuleKind,
    RuleSet, Symbol, Variant,
};
use crate::circuit::CanonicalCircuit;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CsrMatrix, LinearOperator, C64, ONE, ZERO};

/// Weight of each propagation term inside `H_prop`, chosen so that the
/// restriction to the history states is the path matrix `P_(T+1)`.
pub const PROP_WEIGHT: f64 = 0.5;

/// Default ceiling on `d^(L+2)` for materialization.
pub const DEFAULT_MAX_DIM: usize = 2_000_000;

const HERMITIAN_TOL: f64 = 1e-12;

/// A block stored by its nonzero entries `(row, col, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseBlock {
    pub fn from_dense(m: &CMat) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for k in 0..m.ncols() {
                if m[(r, k)] != ZERO {
                    entries.push((r, k, m[(r, k)]));
                }
            }
        }
        SparseBlock {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn diagonal(dim: usize, diag: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, v) in diag {
            *acc.entry(k).or_default() += v;
        }
        SparseBlock {
            dim,
            entries: acc
                .into_iter()
                .filter(|&(_, v)| v != 0.0)
                .map(|(k, v)| (k, k, c(v, 0.0)))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(r, k, v) in &self.entries {
            m[(r, k)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        SparseBlock {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, k, v)| (k, r, v.conj())).collect(),
        }
    }

    pub fn scaled(&self, w: f64) -> Self {
        SparseBlock {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, k, v)| (r, k, v * w)).collect(),
        }
    }

    pub fn get(&self, r: usize, k: usize) -> C64 {
        self.entries
            .iter()
            .filter(|e| e.0 == r && e.1 == k)
            .map(|e| e.2)
            .sum()
    }

    /// Entries grouped by row, for gather-style products.
    fn rows(&self) -> Vec<Vec<(usize, C64)>> {
        let mut rows = vec![Vec::new(); self.dim];
        for &(r, k, v) in &self.entries {
            rows[r].push((k, v));
        }
        rows
    }

    /// Entries grouped by column, for scatter-style products.
    fn cols(&self) -> Vec<Vec<(usize, C64)>> {
        let mut cols = vec![Vec::new(); self.dim];
        for &(r, k, v) in &self.entries {
            cols[k].push((r, v));
        }
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerm {
    pub site: usize,
    pub width: usize,
    pub block: SparseBlock,
    pub tag: String,
}

impl LocalTerm {
    pub fn hermiticity_residual(&self) -> f64 {
        let m = self.block.to_dense();
        linalg::max_abs_diff(&m, &m.adjoint())
    }

    /// Spectral norm of the block.
    pub fn norm(&self) -> f64 {
        linalg::hermitian_norm(&self.block.to_dense())
    }
}

/// Where a Hamiltonian came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainMeta {
    pub n: usize,
    pub l: usize,
    pub variant: Variant,
    pub alphabet: AlphabetKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub local_dim: usize,
    pub sites: usize,
    pub terms: Vec<LocalTerm>,
    pub meta: Option<ChainMeta>,
}

/// Which letters a chain uses.
#[derive(Debug, Clone)]
pub struct ChainContext {
    pub n: usize,
    pub l: usize,
    pub variant: Variant,
    pub alphabet: Alphabet,
    pub rules: RuleSet,
}

impl ChainContext {
    pub fn new(n: usize, l: usize, variant: Variant, identified: bool) -> Result<Self> {
        let base = forward_rules(n, l, variant)?;
        let rules = if identified { base.identified() } else { base };
        let kind = match (variant, identified) {
            (Variant::AdiabaticWithS, false) => AlphabetKind::Full14,
            (Variant::Qma, false) => AlphabetKind::Qma13,
            (Variant::AdiabaticWithS, true) => AlphabetKind::Identified10,
            (Variant::Qma, true) => AlphabetKind::Identified9,
        };
        Ok(ChainContext {
            n,
            l,
            variant,
            alphabet: Alphabet::new(kind),
            rules,
        })
    }

    pub fn d(&self) -> usize {
        self.alphabet.len()
    }

    pub fn sites(&self) -> usize {
        self.l + 2
    }

    pub fn meta(&self) -> ChainMeta {
        ChainMeta {
            n: self.n,
            l: self.l,
            variant: self.variant,
            alphabet: self.alphabet.kind(),
        }
    }

    fn empty(&self) -> HamiltonianSpec {
        HamiltonianSpec {
            local_dim: self.d(),
            sites: self.sites(),
            terms: Vec::new(),
            meta: Some(self.meta()),
        }
    }
}

impl HamiltonianSpec {
    pub fn empty(local_dim: usize, sites: usize) -> Self {
        HamiltonianSpec {
            local_dim,
            sites,
            terms: Vec::new(),
            meta: None,
        }
    }

    pub fn dim(&self) -> Result<usize> {
        let mut dim = 1usize;
        for _ in 0..self.sites {
            dim = dim
                .checked_mul(self.local_dim)
                .ok_or_else(|| Error::Resource("Hilbert space dimension overflows".into()))?;
        }
        Ok(dim)
    }

    pub fn push(&mut self, term: LocalTerm) -> Result<()> {
        if term.site + term.width > self.sites {
            return Err(Error::Validation(format!(
                "term {} at site {} width {} leaves the {}-site chain",
                term.tag, term.site, term.width, self.sites
            )));
        }
        if term.block.dim != self.local_dim.pow(term.width as u32) {
            return Err(Error::DimensionMismatch {
                expected: self.local_dim.pow(term.width as u32),
                got: term.block.dim,
            });
        }
        self.terms.push(term);
        Ok(())
    }

    /// Concatenates the terms of several specs on the same chain.
    pub fn sum(parts: &[&HamiltonianSpec]) -> Result<HamiltonianSpec> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("cannot sum zero Hamiltonians".into()))?;
        let mut out = HamiltonianSpec {
            local_dim: first.local_dim,
            sites: first.sites,
            terms: Vec::new(),
            meta: first.meta,
        };
        for p in parts {
            if p.local_dim != out.local_dim || p.sites != out.sites {
                return Err(Error::DimensionMismatch {
                    expected: out.local_dim.pow(out.sites as u32),
                    got: p.local_dim.pow(p.sites as u32),
                });
            }
            out.terms.extend(p.terms.iter().cloned());
        }
        Ok(out)
    }

    pub fn scaled(&self, w: f64) -> HamiltonianSpec {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.block = t.block.scaled(w);
        }
        out
    }

    pub fn max_hermiticity_residual(&self) -> f64 {
        self.terms
            .iter()
            .map(LocalTerm::hermiticity_residual)
            .fold(0.0, f64::max)
    }

    pub fn term_norm_sum(&self) -> f64 {
        self.terms.iter().map(LocalTerm::norm).sum()
    }

    fn stride(&self, t: &LocalTerm) -> usize {
        self.local_dim.pow((self.sites - t.site - t.width) as u32)
    }

    fn local_index(&self, cfg: &[u8], t: &LocalTerm) -> usize {
        cfg[t.site..t.site + t.width]
            .iter()
            .fold(0usize, |acc, &s| acc * self.local_dim + s as usize)
    }

    pub fn config_to_index(&self, cfg: &[u8]) -> usize {
        cfg.iter().fold(0usize, |acc, &s| acc * self.local_dim + s as usize)
    }

    pub fn index_to_config(&self, mut idx: usize) -> Vec<u8> {
        let mut cfg = vec![0u8; self.sites];
        for p in (0..self.sites).rev() {
            cfg[p] = (idx % self.local_dim) as u8;
            idx /= self.local_dim;
        }
        cfg
    }

    /// `<cfg|H|cfg>` for a basis configuration.
    pub fn diagonal_at(&self, cfg: &[u8]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let r = self.local_index(cfg, t);
                t.block.get(r, r).re
            })
            .sum()
    }

    /// Dense-free sparse matrix of the full Hamiltonian.
    pub fn materialize(&self, max_dim: usize) -> Result<CsrMatrix> {
        let dim = self.dim()?;
        if dim > max_dim {
            return Err(Error::Resource(format!(
                "dimension {}^{} = {dim} exceeds the materialization cap {max_dim}",
                self.local_dim, self.sites
            )));
        }
        let op = self.operator()?;
        let rows: Vec<Vec<(usize, C64)>> = (0..dim).into_par_iter().map(|y| op.row(y)).collect();
        let mut indptr = Vec::with_capacity(dim + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (k, v) in row {
                indices.push(k);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            dim,
            indptr,
            indices,
            values,
        })
    }

    fn prepared(&self) -> Vec<PreparedTerm> {
        self.terms
            .iter()
            .map(|t| PreparedTerm {
                stride: self.stride(t),
                ldim: t.block.dim,
                rows: t.block.rows(),
            })
            .collect()
    }

    /// Matrix-free operator view.
    pub fn operator(&self) -> Result<ChainOperator> {
        Ok(ChainOperator {
            dim: self.dim()?,
            terms: self.prepared(),
        })
    }

    /// Matrix-free `H v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let op = self.operator()?;
        if v.len() != op.dim {
            return Err(Error::DimensionMismatch {
                expected: op.dim,
                got: v.len(),
            });
        }
        Ok(op.apply_vec(v))
    }

    /// `H` applied to a sparse superposition of configurations.
    pub fn apply_sparse(&self, state: &SparseState) -> SparseState {
        apply_blocks_sparse(
            self.terms.iter().map(|t| (t.site, t.width, &t.block)),
            self.local_dim,
            state,
        )
    }

    /// Same as [`apply_sparse`](Self::apply_sparse) restricted to one term.
    pub fn apply_term_sparse(&self, term: usize, state: &SparseState) -> SparseState {
        let t = &self.terms[term];
        apply_blocks_sparse(std::iter::once((t.site, t.width, &t.block)), self.local_dim, state)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|t| {
                serde_json::json!({
                    "tag": t.tag,
                    "site": t.site,
                    "width": t.width,
                    "entries": t.block.entries.iter()
                        .map(|&(r, k, v)| serde_json::json!([r, k, v.re, v.im]))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "local_dim": self.local_dim,
            "sites": self.sites,
            "meta": self.meta,
            "terms": terms,
        })
    }
}

struct PreparedTerm {
    stride: usize,
    ldim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

/// Row-gather application of a term list; each output entry is computed
/// independently in a fixed term order, so results are bit-stable.
pub struct ChainOperator {
    dim: usize,
    terms: Vec<PreparedTerm>,
}

impl ChainOperator {
    /// Nonzero entries of one row, sorted by column.
    pub fn row(&self, y: usize) -> Vec<(usize, C64)> {
        let mut row: Vec<(usize, C64)> = Vec::new();
        for p in &self.terms {
            let r = (y / p.stride) % p.ldim;
            for &(k, v) in &p.rows[r] {
                row.push((y + k * p.stride - r * p.stride, v));
            }
        }
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
        for (k, v) in row {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => merged.push((k, v)),
            }
        }
        merged.retain(|e| e.1 != ZERO);
        merged
    }
}

impl LinearOperator for ChainOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.par_iter_mut().enumerate().for_each(|(row, yi)| {
            let mut acc = ZERO;
            for p in &self.terms {
                let r = (row / p.stride) % p.ldim;
                let base = row - r * p.stride;
                for &(k, v) in &p.rows[r] {
                    acc += v * x[base + k * p.stride];
                }
            }
            *yi = acc;
        });
    }
}

/// A vector stored as a map from configuration to amplitude.
pub type SparseState = BTreeMap<Vec<u8>, C64>;

fn apply_blocks_sparse<'a>(
    blocks: impl Iterator<Item = (usize, usize, &'a SparseBlock)>,
    d: usize,
    state: &SparseState,
) -> SparseState {
    let mut out = SparseState::new();
    for (site, width, block) in blocks {
        let cols = block.cols();
        for (cfg, &amp) in state {
            let local = cfg[site..site + width]
                .iter()
                .fold(0usize, |acc, &s| acc * d + s as usize);
            for &(r, v) in &cols[local] {
                let mut next = cfg.clone();
                let mut rr = r;
                for p in (site..site + width).rev() {
                    next[p] = (rr % d) as u8;
                    rr /= d;
                }
                *out.entry(next).or_insert(ZERO) += v * amp;
            }
        }
    }
    out.retain(|_, v| *v != ZERO);
    out
}

/// Non-Hermitian hop operators `F` (forward) or `B` (backward), one block per rule.
#[derive(Debug, Clone)]
pub struct TransitionOperator {
    pub local_dim: usize,
    pub sites: usize,
    pub blocks: Vec<(usize, SparseBlock, String)>,
}

impl TransitionOperator {
    pub fn apply_sparse(&self, state: &SparseState) -> SparseState {
        apply_blocks_sparse(
            self.blocks.iter().map(|(s, b, _)| (*s, 2, b)),
            self.local_dim,
            state,
        )
    }

    pub fn adjoint(&self) -> TransitionOperator {
        TransitionOperator {
            local_dim: self.local_dim,
            sites: self.sites,
            blocks: self
                .blocks
                .iter()
                .map(|(s, b, t)| (*s, b.adjoint(), t.clone()))
                .collect(),
        }
    }
}

/// The `F` block of a rule: `sum_(u,v) M[v,u] |XY_v><AB_u|`.
///
/// `transfer` maps lhs bits to rhs bits; with two bit-carrying letters the
/// left one is the high bit.
pub fn hop_block(ctx_alpha: &Alphabet, rule: &Rule, transfer: &CMat) -> Result<SparseBlock> {
    let d = ctx_alpha.len();
    let lb = rule.lhs_bits();
    let rb = rule.rhs_bits();
    if transfer.nrows() != 1 << rb || transfer.ncols() != 1 << lb {
        return Err(Error::DimensionMismatch {
            expected: (1 << rb) * (1 << lb),
            got: transfer.nrows() * transfer.ncols(),
        });
    }
    let pair_index = |a: Letter, b: Letter, bits: usize, nbits: usize| -> Result<usize> {
        let mut remaining = nbits;
        let mut sym = |l: Letter| -> Result<usize> {
            let l = ctx_alpha.map_letter(l);
            let s = if l.has_bit() {
                remaining -= 1;
                Symbol::with_bit(l, ((bits >> remaining) & 1) as u8)
            } else {
                Symbol::plain(l)
            };
            ctx_alpha.require(s)
        };
        let ia = sym(a)?;
        let ib = sym(b)?;
        Ok(ia * d + ib)
    };
    let mut entries = Vec::new();
    for u in 0..(1 << lb) {
        let col = pair_index(rule.lhs.0, rule.lhs.1, u, lb)?;
        for v in 0..(1 << rb) {
            let m = transfer[(v, u)];
            if m != ZERO {
                let row = pair_index(rule.rhs.0, rule.rhs.1, v, rb)?;
                entries.push((row, col, m));
            }
        }
    }
    Ok(SparseBlock { dim: d * d, entries })
}

/// `F†F + FF† - F - F†`, Hermitized.
pub fn hop_term(hop: &SparseBlock, site: usize, tag: String) -> LocalTerm {
    let f = hop.to_dense();
    let fd = f.adjoint();
    let h = &fd * &f + &f * &fd - &f - &fd;
    LocalTerm {
        site,
        width: 2,
        block: SparseBlock::from_dense(&linalg::hermitize(&h)),
        tag,
    }
}

fn check_unitary(u: &CMat, dim: usize) -> Result<()> {
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::Validation(format!(
            "expected a {dim}x{dim} unitary, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let res = linalg::unitarity_residual(u);
    if res > HERMITIAN_TOL {
        return Err(Error::Validation(format!("matrix is not unitary (residual {res:.3e})")));
    }
    Ok(())
}

fn transfer_matrix(rule: &Rule, circuit: Option<&CanonicalCircuit>) -> Result<CMat> {
    let (lb, rb) = (rule.lhs_bits(), rule.rhs_bits());
    match rule.kind {
        RuleKind::Carry => {
            if lb != rb {
                return Err(Error::Integrity(format!("carry rule {rule} changes bit count")));
            }
            Ok(linalg::identity(1 << lb))
        }
        RuleKind::Seed(_) => {
            if rb != lb + 1 {
                return Err(Error::Integrity(format!("seed rule {rule} must add one bit")));
            }
            let mut m = CMat::zeros(1 << rb, 1 << lb);
            for u in 0..(1 << lb) {
                m[(u << 1, u)] = ONE;
            }
            Ok(m)
        }
        RuleKind::Gate(g) => {
            let u = match circuit {
                Some(c) => c.gate_unitary(g)?.matrix().clone(),
                None => linalg::identity(1 << lb),
            };
            if lb != rb || u.nrows() != 1 << lb {
                return Err(Error::Integrity(format!(
                    "gate {g} of size {} does not fit rule {rule}",
                    u.nrows()
                )));
            }
            Ok(u)
        }
    }
}

/// `H_(AB<->XY)` with subscripts summed (bits carried unchanged).
pub fn swap_term(
    alpha: &Alphabet,
    lhs: (Letter, Letter),
    rhs: (Letter, Letter),
    site: usize,
) -> Result<LocalTerm> {
    let rule = Rule {
        site,
        lhs,
        rhs,
        kind: RuleKind::Carry,
    };
    let m = transfer_matrix(&rule, None)?;
    Ok(hop_term(&hop_block(alpha, &rule, &m)?, site, rule.tag()))
}

/// `H_(T_R Q <-> F G)` carrying the one-qubit gate `U`.
pub fn gate_term_1q(alpha: &Alphabet, u: &CMat, site: usize) -> Result<LocalTerm> {
    check_unitary(u, 2)?;
    let rule = Rule {
        site,
        lhs: (Letter::TR, Letter::Q),
        rhs: (Letter::F, Letter::G),
        kind: RuleKind::Gate(0),
    };
    Ok(hop_term(&hop_block(alpha, &rule, u)?, site, rule.tag()))
}

/// `H_(G Q <-> B G)` carrying the two-qubit gate `U` (G's bit is the high bit).
pub fn gate_term_2q(alpha: &Alphabet, u: &CMat, site: usize) -> Result<LocalTerm> {
    check_unitary(u, 4)?;
    let rule = Rule {
        site,
        lhs: (Letter::G, Letter::Q),
        rhs: (Letter::B, Letter::G),
        kind: RuleKind::Gate(0),
    };
    Ok(hop_term(&hop_block(alpha, &rule, u)?, site, rule.tag()))
}

fn check_circuit(ctx: &ChainContext, c: &CanonicalCircuit) -> Result<()> {
    if c.n() != ctx.n || c.len() != ctx.l {
        return Err(Error::Input(format!(
            "circuit has n = {}, L = {} but the chain expects n = {}, L = {}",
            c.n(),
            c.len(),
            ctx.n,
            ctx.l
        )));
    }
    Ok(())
}

/// Hop operator `F` over all rules, gates applied at gate rules.
pub fn forward_operator(ctx: &ChainContext, c: &CanonicalCircuit) -> Result<TransitionOperator> {
    check_circuit(ctx, c)?;
    let mut blocks = Vec::with_capacity(ctx.rules.rules.len());
    for rule in &ctx.rules.rules {
        let m = transfer_matrix(rule, Some(c))?;
        blocks.push((rule.site, hop_block(&ctx.alphabet, rule, &m)?, rule.tag()));
    }
    Ok(TransitionOperator {
        local_dim: ctx.d(),
        sites: ctx.sites(),
        blocks,
    })
}

pub fn backward_operator(ctx: &ChainContext, c: &CanonicalCircuit) -> Result<TransitionOperator> {
    Ok(forward_operator(ctx, c)?.adjoint())
}

/// `H_prop = PROP_WEIGHT * sum of H_(AB<->XY)` over every rule.
pub fn build_h_prop(ctx: &ChainContext, c: &CanonicalCircuit) -> Result<HamiltonianSpec> {
    let fwd = forward_operator(ctx, c)?;
    let mut h = ctx.empty();
    for (site, block, tag) in &fwd.blocks {
        let mut term = hop_term(block, *site, tag.clone());
        term.block = term.block.scaled(PROP_WEIGHT);
        h.push(term)?;
    }
    Ok(h)
}

fn projector_term(
    ctx: &ChainContext,
    site: usize,
    tag: String,
    pred: impl Fn(usize, usize) -> bool,
) -> LocalTerm {
    let d = ctx.d();
    let mut diag = Vec::new();
    for a in 0..d {
        for b in 0..d {
            if pred(a, b) {
                diag.push((a * d + b, 1.0));
            }
        }
    }
    LocalTerm {
        site,
        width: 2,
        block: SparseBlock::diagonal(d * d, diag),
        tag,
    }
}

fn single_site_term(ctx: &ChainContext, site: usize, tag: String, pred: impl Fn(usize) -> bool) -> LocalTerm {
    let d = ctx.d();
    LocalTerm {
        site,
        width: 1,
        block: SparseBlock::diagonal(d, (0..d).filter(|&a| pred(a)).map(|a| (a, 1.0))),
        tag,
    }
}

fn letter_of(ctx: &ChainContext, idx: usize) -> Letter {
    ctx.alphabet.symbol(idx).letter
}

/// Start-state penalties; the unique zero-energy configuration is `T_R S^n N^(L-n+1)`.
pub fn build_h_init(ctx: &ChainContext) -> Result<HamiltonianSpec> {
    if ctx.variant != Variant::AdiabaticWithS {
        return Err(Error::Input("H_init is defined for the start-state variant only".into()));
    }
    let (n, l) = (ctx.n, ctx.l);
    let tr = ctx.alphabet.map_letter(Letter::TR);
    let nn = ctx.alphabet.map_letter(Letter::N);
    let s = Letter::S;
    let mut h = ctx.empty();
    h.push(single_site_term(ctx, 0, "init:not-T_R@0".into(), |a| letter_of(ctx, a) != tr))?;
    h.push(projector_term(ctx, 0, "init:T_R-then-not-S@0".into(), |a, b| {
        letter_of(ctx, a) == tr && letter_of(ctx, b) != s
    }))?;
    for i in 1..n {
        h.push(projector_term(ctx, i, format!("init:S-then-not-S@{i}"), |a, b| {
            letter_of(ctx, a) == s && letter_of(ctx, b) != s
        }))?;
    }
    h.push(projector_term(ctx, n, format!("init:S-then-not-N@{n}"), |a, b| {
        letter_of(ctx, a) == s && letter_of(ctx, b) != nn
    }))?;
    for i in n + 1..=l {
        h.push(projector_term(ctx, i, format!("init:N-then-not-N@{i}"), |a, b| {
            letter_of(ctx, a) == nn && letter_of(ctx, b) != nn
        }))?;
    }
    Ok(h)
}

/// Pair-automaton penalties; diagonal, equal to `validity_penalty` on templates.
pub fn build_h_valid(ctx: &ChainContext) -> Result<HamiltonianSpec> {
    if ctx.alphabet.is_identified() {
        return Err(Error::Input("H_valid is defined on unidentified alphabets".into()));
    }
    let mut h = ctx.empty();
    h.push(single_site_term(ctx, 0, "valid:start@0".into(), |a| {
        !matches!(letter_of(ctx, a), Letter::F | Letter::TR)
    }))?;
    for i in 0..=ctx.l {
        h.push(projector_term(ctx, i, format!("valid:pair@{i}"), |a, b| {
            !pair_allowed(letter_of(ctx, a), letter_of(ctx, b))
        }))?;
    }
    let last = ctx.l + 1;
    h.push(single_site_term(ctx, last, format!("valid:end@{last}"), |a| {
        letter_of(ctx, a) != Letter::N
    }))?;
    Ok(h)
}

/// Boundary-dependent forbidden pairs; diagonal, equal to `legality_penalty`.
pub fn build_h_legal(ctx: &ChainContext) -> Result<HamiltonianSpec> {
    let mut h = ctx.empty();
    for i in 0..=ctx.l {
        h.push(projector_term(ctx, i, format!("legal@{i}"), |a, b| {
            pair_illegal(letter_of(ctx, a), letter_of(ctx, b), i, ctx.n)
        }))?;
    }
    Ok(h)
}

/// Penalizes a `1` on any of the first `n1` computation sites.
pub fn build_h_input(ctx: &ChainContext, n1: usize) -> Result<HamiltonianSpec> {
    if n1 > ctx.n {
        return Err(Error::Input(format!("n1 = {n1} exceeds n = {}", ctx.n)));
    }
    let mut h = ctx.empty();
    for i in 1..=n1 {
        h.push(single_site_term(ctx, i, format!("input@{i}"), |a| {
            let s = ctx.alphabet.symbol(a);
            s.bit == Some(1) && matches!(s.letter, Letter::Q | Letter::R | Letter::G | Letter::B)
        }))?;
    }
    Ok(h)
}

/// `|G_0><G_0|` on site `L`.
pub fn build_h_out(ctx: &ChainContext) -> Result<HamiltonianSpec> {
    let g0 = ctx.alphabet.require(Symbol::with_bit(Letter::G, 0))?;
    let mut h = ctx.empty();
    h.push(single_site_term(ctx, ctx.l, format!("out@{}", ctx.l), |a| a == g0))?;
    Ok(h)
}

/// Symbol indices of a template with every subscript set to `bits` (high bit first).
pub fn template_config(
    alpha: &Alphabet,
    letters: &[Letter],
    bits: usize,
    nbits: usize,
) -> Result<Vec<u8>> {
    let mut remaining = nbits;
    letters
        .iter()
        .map(|&l| {
            let s = if l.has_bit() {
                remaining -= 1;
                Symbol::with_bit(l, ((bits >> remaining) & 1) as u8)
            } else {
                Symbol::plain(l)
            };
            alpha.require(s).map(|k| k as u8)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::{legality_penalty, validity_penalty, Template};
    use crate::circuit::{Gate, RawCircuit};
    use crate::circuit::CanonicalCircuit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qma_ctx(n: usize, l: usize) -> ChainContext {
        ChainContext::new(n, l, Variant::Qma, false).unwrap()
    }

    fn sym(ctx: &ChainContext, s: &str) -> usize {
        ctx.alphabet.require(s.parse().unwrap()).unwrap()
    }

    #[test]
    fn swap_term_is_the_two_by_two_projector_difference() {
        let ctx = qma_ctx(2, 4);
        let d = ctx.d();
        let t = swap_term(&ctx.alphabet, (Letter::B, Letter::L), (Letter::L, Letter::Q), 1).unwrap();
        let ab = sym(&ctx, "B0") * d + sym(&ctx, "L");
        let xy = sym(&ctx, "L") * d + sym(&ctx, "Q0");
        let m = t.block.to_dense();
        assert_eq!(m[(ab, ab)], ONE);
        assert_eq!(m[(xy, xy)], ONE);
        assert_eq!(m[(ab, xy)], -ONE);
        assert_eq!(m[(xy, ab)], -ONE);
        let ff = sym(&ctx, "F") * d + sym(&ctx, "F");
        assert!(m.column(ff).iter().all(|z| *z == ZERO));
        let ev = linalg::hermitian_eigenvalues(&m);
        assert!(ev.iter().all(|&e| e.abs() < 1e-12 || (e - 2.0).abs() < 1e-12));

        let rq = swap_term(&ctx.alphabet, (Letter::R, Letter::Q), (Letter::B, Letter::R), 0).unwrap();
        let offdiag = rq.block.entries.iter().filter(|e| e.0 != e.1).count();
        assert_eq!(offdiag, 8, "four subscript combinations, two entries each");
    }

    #[test]
    fn gate_terms_have_half_rank() {
        let ctx = qma_ctx(2, 4);
        let x = Gate::named("X").unwrap().matrix().clone();
        let t = gate_term_1q(&ctx.alphabet, &x, 0).unwrap();
        let m = t.block.to_dense();
        let ev: Vec<f64> = linalg::hermitian_eigenvalues(&m).into_iter().filter(|e| e.abs() > 1e-12).collect();
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| (e - 2.0).abs() < 1e-12));
        // (|T_R Q0> + |F G1>)/sqrt2 is annihilated
        let d = ctx.d();
        let mut v = vec![ZERO; d * d];
        v[sym(&ctx, "T_R") * d + sym(&ctx, "Q0")] = c(1.0, 0.0);
        v[sym(&ctx, "F") * d + sym(&ctx, "G1")] = c(1.0, 0.0);
        assert!(linalg::norm(&m.apply_vec(&v)) < 1e-12);

        let cnot = Gate::named("CNOT").unwrap().matrix().clone();
        let t2 = gate_term_2q(&ctx.alphabet, &cnot, 1).unwrap();
        let m2 = t2.block.to_dense();
        let mut w = vec![ZERO; d * d];
        w[sym(&ctx, "G1") * d + sym(&ctx, "Q0")] = ONE;
        w[sym(&ctx, "B1") * d + sym(&ctx, "G1")] = ONE;
        assert!(linalg::norm(&m2.apply_vec(&w)) < 1e-12);
        let rank = linalg::hermitian_eigenvalues(&m2).iter().filter(|e| e.abs() > 1e-9).count();
        assert_eq!(rank, 4);
        let bad = linalg::real_matrix(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(gate_term_1q(&ctx.alphabet, &bad, 0).is_err());
    }

    #[test]
    fn h_prop_term_count_and_removal() {
        let ctx = qma_ctx(2, 4);
        let c = crate::circuit::CanonicalCircuit::identity(2, 2).unwrap();
        let h = build_h_prop(&ctx, &c).unwrap();
        // seven rule families on each of the five sites, minus G N at site L
        assert_eq!(h.terms.len(), 7 * 5 - 1);
        assert!(!h.terms.iter().any(|t| t.tag == "GN<->BT_L@4"));
        assert!(h.max_hermiticity_residual() == 0.0);
    }

    #[test]
    fn h_init_examples() {
        let ctx = ChainContext::new(2, 4, Variant::AdiabaticWithS, false).unwrap();
        let h = build_h_init(&ctx).unwrap();
        let e = |s: &str| {
            let t: Template = s.parse().unwrap();
            let cfg = template_config(&ctx.alphabet, t.letters(), 0, t.bit_count()).unwrap();
            h.diagonal_at(&cfg)
        };
        assert_eq!(e("T_R S S N N N"), 0.0);
        assert!(e("F S S N N N") >= 1.0);
        assert!(e("T_R S N N N N") >= 1.0);
        assert!(build_h_init(&qma_ctx(2, 4)).is_err());
    }

    #[test]
    fn penalties_agree_with_template_functions() {
        let ctx = qma_ctx(2, 4);
        let hv = build_h_valid(&ctx).unwrap();
        let hl = build_h_legal(&ctx).unwrap();
        let letters: Vec<Letter> = Letter::ALL.iter().copied().filter(|&l| l != Letter::S).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let t = Template((0..6).map(|_| letters[rng.gen_range(0..letters.len())]).collect());
            let bits = rng.gen_range(0..(1usize << t.bit_count()));
            let cfg = template_config(&ctx.alphabet, t.letters(), bits, t.bit_count()).unwrap();
            assert_eq!(hv.diagonal_at(&cfg), validity_penalty(&t) as f64, "{t}");
            assert_eq!(hl.diagonal_at(&cfg), legality_penalty(&t, 2) as f64, "{t}");
        }
    }

    #[test]
    fn input_and_out_examples() {
        let ctx = qma_ctx(2, 4);
        let hi = build_h_input(&ctx, 1).unwrap();
        let ho = build_h_out(&ctx).unwrap();
        let cfg = |syms: &[&str]| -> Vec<u8> { syms.iter().map(|s| sym(&ctx, s) as u8).collect() };
        assert!(hi.diagonal_at(&cfg(&["T_R", "Q1", "Q0", "N", "N", "N"])) >= 1.0);
        assert_eq!(hi.diagonal_at(&cfg(&["T_R", "Q0", "Q1", "N", "N", "N"])), 0.0);
        assert_eq!(ho.diagonal_at(&cfg(&["F", "F", "F", "B0", "G1", "N"])), 0.0);
        assert_eq!(ho.diagonal_at(&cfg(&["F", "F", "F", "B0", "G0", "N"])), 1.0);
        let valid = build_h_valid(&ctx).unwrap();
        assert_eq!(valid.diagonal_at(&cfg(&["F", "B1", "R0", "Q1", "N", "N"])), 0.0);
    }

    #[test]
    fn materialize_and_apply_agree() {
        let raw = RawCircuit::new(2).push_named("CNOT", &[1, 2]).unwrap();
        let circ = crate::circuit::canonicalize(&raw).unwrap();
        let ctx4 = ChainContext::new(2, circ.len(), Variant::Qma, false).unwrap();
        let h = HamiltonianSpec::sum(&[
            &build_h_prop(&ctx4, &circ).unwrap(),
            &build_h_legal(&ctx4).unwrap(),
            &build_h_out(&ctx4).unwrap(),
        ])
        .unwrap();
        assert!(matches!(h.materialize(DEFAULT_MAX_DIM), Err(Error::Resource(_))));
        let small = ChainContext::new(2, 2, Variant::Qma, false).unwrap();
        let ident = CanonicalCircuit::identity(2, 1).unwrap();
        let hs = HamiltonianSpec::sum(&[
            &build_h_prop(&small, &ident).unwrap(),
            &build_h_valid(&small).unwrap(),
            &build_h_input(&small, 1).unwrap(),
        ])
        .unwrap();
        let m = hs.materialize(DEFAULT_MAX_DIM).unwrap();
        assert_eq!(m.dim, 28561);
        assert_eq!(m.hermiticity_residual(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<C64> = (0..m.dim).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let a = m.apply_vec(&v);
        let b = hs.apply(&v).unwrap();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff <= 1e-12, "{diff}");
        assert!(hs.apply(&v[1..]).is_err());
        let empty = HamiltonianSpec::empty(13, 4);
        assert!(empty.apply(&v).unwrap().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn prop_terms_split_into_hops_and_diagonal() {
        let ctx = qma_ctx(2, 4);
        let c = CanonicalCircuit::identity(2, 2).unwrap();
        let fwd = forward_operator(&ctx, &c).unwrap();
        let h = build_h_prop(&ctx, &c).unwrap();
        for ((_, f, _), term) in fwd.blocks.iter().zip(&h.terms) {
            let f = f.to_dense();
            let hop = (&f + f.adjoint()).scale(-PROP_WEIGHT);
            let rest = term.block.to_dense() - hop;
            for r in 0..rest.nrows() {
                for k in 0..rest.ncols() {
                    if r != k {
                        assert!(rest[(r, k)].norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_circuit_shape_is_rejected() {
        let ctx = qma_ctx(2, 4);
        let c = CanonicalCircuit::identity(2, 1).unwrap();
        assert!(matches!(build_h_prop(&ctx, &c), Err(Error::Input(_))));
    }
}
