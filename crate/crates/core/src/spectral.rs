//! Eigenvalue solvers, gap scans and numerical checks of the path-matrix
//! spectral lemmas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, Interpolated, LinearOperator, C64, ZERO};

/// The `r x r` path Laplacian: diagonal `(1/2, 1, ..., 1, 1/2)`, off-diagonals `-1/2`.
pub fn p_matrix(r: usize) -> CMat {
    let mut m = CMat::zeros(r, r);
    for i in 0..r {
        let edges = (i > 0) as usize + (i + 1 < r) as usize;
        m[(i, i)] = c(0.5 * edges as f64, 0.0);
        if i + 1 < r {
            m[(i, i + 1)] = c(-0.5, 0.0);
            m[(i + 1, i)] = c(-0.5, 0.0);
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub method: Method,
    pub matvecs: usize,
    pub restarts: usize,
}

impl SpectralReport {
    pub fn gap(&self) -> Option<f64> {
        match self.eigenvalues.as_slice() {
            [a, b, ..] => Some((b - a).max(0.0)),
            _ => None,
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Operators up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    pub max_matvecs: usize,
    /// Krylov basis size before a restart.
    pub krylov_dim: usize,
    /// Convergence threshold on the Ritz residual estimate.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            dense_threshold: 768,
            max_matvecs: 5000,
            krylov_dim: 60,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// Largest residual that a reported eigenpair may carry.
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// The `k` lowest eigenpairs of a Hermitian operator.
pub fn lowest_eigs(op: &dyn LinearOperator, k: usize, opts: &EigOptions) -> Result<SpectralReport> {
    let dim = op.dim();
    if k == 0 || k > dim {
        return Err(Error::Input(format!("cannot request {k} eigenpairs of a {dim}-dim operator")));
    }
    if dim <= opts.dense_threshold {
        dense_eigs(&op.to_dense(), k)
    } else {
        lanczos(op, k, opts)
    }
}

/// Dense path: full diagonalization, then explicit residuals.
pub fn dense_eigs(m: &CMat, k: usize) -> Result<SpectralReport> {
    let (vals, vecs) = linalg::hermitian_eigh(m);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for i in 0..k {
        let v: Vec<C64> = vecs.column(i).iter().copied().collect();
        residuals.push(residual(m, vals[i], &v));
        eigenvectors.push(v);
    }
    let report = SpectralReport {
        eigenvalues: vals[..k].to_vec(),
        eigenvectors,
        residuals,
        method: Method::Dense,
        matvecs: 0,
        restarts: 0,
    };
    check_residuals(&report)?;
    Ok(report)
}

fn residual(op: &dyn LinearOperator, lambda: f64, v: &[C64]) -> f64 {
    let av = op.apply_vec(v);
    let r: Vec<C64> = av.iter().zip(v).map(|(a, x)| a - x * lambda).collect();
    linalg::norm(&r)
}

fn check_residuals(r: &SpectralReport) -> Result<()> {
    if r.residuals.iter().any(|&x| !(x <= RESIDUAL_BOUND)) {
        return Err(Error::Convergence {
            matvecs: r.matvecs,
            residuals: r.residuals.clone(),
        });
    }
    Ok(())
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    linalg::normalize(&mut v);
    v
}

/// Two passes of classical Gram-Schmidt; returns the summed coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut h = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let coeffs: Vec<C64> = basis.par_iter().map(|b| linalg::dot(b, w)).collect();
        for (b, &cf) in basis.iter().zip(&coeffs) {
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= cf * bi;
            }
        }
        for (hi, cf) in h.iter_mut().zip(coeffs) {
            *hi += cf;
        }
    }
    h
}

/// Thick-restart Lanczos with full reorthogonalization.
///
/// `g[(i, j)] = <v_i|A v_j>` is kept for the active block; the row after the
/// block couples it to the next Krylov vector and gives the Ritz residuals.
/// A restart keeps the lowest Ritz vectors and that coupling vector.
/// Exactly degenerate eigenvalues are found once per start vector.
pub fn lanczos(op: &dyn LinearOperator, k: usize, opts: &EigOptions) -> Result<SpectralReport> {
    let dim = op.dim();
    let m = opts.krylov_dim.max(2 * k + 10).min(dim);
    let keep = (k + (m - k) / 2).min(m - 1).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<Vec<C64>> = vec![random_unit(dim, &mut rng)];
    let mut g = CMat::zeros(m + 1, m + 1);
    let mut active = 0usize;
    let mut matvecs = 0usize;
    let mut restarts = 0usize;
    loop {
        while active < m {
            let j = active;
            let mut w = op.apply_vec(&v[j]);
            matvecs += 1;
            let h = orthogonalize(&v, &mut w);
            for (i, &hi) in h.iter().enumerate() {
                g[(i, j)] = hi;
                g[(j, i)] = hi.conj();
            }
            g[(j, j)] = c(h[j].re, 0.0);
            active += 1;
            if active == dim {
                break;
            }
            let mut beta = linalg::norm(&w);
            let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if beta <= 1e-13 * scale {
                // invariant subspace: continue from a fresh orthogonal direction
                w = random_unit(dim, &mut rng);
                orthogonalize(&v, &mut w);
                linalg::normalize(&mut w);
                beta = 0.0;
            } else {
                for x in w.iter_mut() {
                    *x /= beta;
                }
            }
            g[(j + 1, j)] = c(beta, 0.0);
            g[(j, j + 1)] = c(beta, 0.0);
            v.push(w);
        }

        let gs = g.view((0, 0), (active, active)).into_owned();
        let (theta, s) = linalg::hermitian_eigh(&gs);
        let coupling: Vec<f64> = (0..active)
            .map(|i| {
                if active == dim {
                    return 0.0;
                }
                let mut acc = ZERO;
                for j in 0..active {
                    acc += g[(active, j)] * s[(j, i)];
                }
                acc.norm()
            })
            .collect();
        let last_res = coupling[..k].to_vec();
        let converged = (0..k).all(|i| coupling[i] <= opts.tol * theta[i].abs().max(1.0));
        if converged || matvecs >= opts.max_matvecs {
            let vectors: Vec<Vec<C64>> = (0..k).map(|i| combine(&v[..active], &s, i)).collect();
            let residuals: Vec<f64> = (0..k).map(|i| residual(op, theta[i], &vectors[i])).collect();
            let report = SpectralReport {
                eigenvalues: theta[..k].to_vec(),
                eigenvectors: vectors,
                residuals: residuals.clone(),
                method: Method::Lanczos,
                matvecs: matvecs + k,
                restarts,
            };
            if converged && residuals.iter().all(|&r| r <= RESIDUAL_BOUND) {
                return Ok(report);
            }
            if matvecs >= opts.max_matvecs {
                return Err(Error::Convergence {
                    matvecs,
                    residuals: if converged { residuals } else { last_res },
                });
            }
        }

        // thick restart
        restarts += 1;
        let next = v[active].clone();
        let mut nv: Vec<Vec<C64>> = (0..keep).map(|i| combine(&v[..active], &s, i)).collect();
        for y in nv.iter_mut() {
            linalg::normalize(y);
        }
        let mut ng = CMat::zeros(m + 1, m + 1);
        for i in 0..keep {
            ng[(i, i)] = c(theta[i], 0.0);
            let mut acc = ZERO;
            for j in 0..active {
                acc += g[(active, j)] * s[(j, i)];
            }
            ng[(keep, i)] = acc;
            ng[(i, keep)] = acc.conj();
        }
        nv.push(next);
        v = nv;
        g = ng;
        active = keep;
    }
}

fn combine(v: &[Vec<C64>], s: &CMat, col: usize) -> Vec<C64> {
    let dim = v[0].len();
    let mut y = vec![ZERO; dim];
    for (j, vj) in v.iter().enumerate() {
        let w = s[(j, col)];
        if w != ZERO {
            for (yi, x) in y.iter_mut().zip(vj) {
                *yi += w * x;
            }
        }
    }
    y
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapPoint {
    pub s: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapScan {
    pub points: Vec<GapPoint>,
    pub min_gap: f64,
    pub argmin: f64,
}

impl GapScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lambda0,lambda1,gap\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.s, p.lambda0, p.lambda1, p.gap));
        }
        out
    }
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Two lowest eigenvalues of `(1-s) H_init + s H_final` along a grid.
pub fn gap_scan(
    h_init: &dyn LinearOperator,
    h_final: &dyn LinearOperator,
    grid: &[f64],
    opts: &EigOptions,
) -> Result<GapScan> {
    if h_init.dim() != h_final.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_init.dim(),
            got: h_final.dim(),
        });
    }
    if grid.is_empty() || grid.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::Input("the s grid must be a non-empty subset of [0, 1]".into()));
    }
    let points: Vec<Result<GapPoint>> = grid
        .par_iter()
        .map(|&s| {
            let h = Interpolated {
                a: h_init,
                b: h_final,
                s,
            };
            let rep = lowest_eigs(&h, 2, opts)?;
            Ok(GapPoint {
                s,
                lambda0: rep.eigenvalues[0],
                lambda1: rep.eigenvalues[1],
                gap: rep.gap().unwrap_or(0.0),
            })
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .copied()
        .unwrap();
    Ok(GapScan {
        min_gap: best.gap,
        argmin: best.s,
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricLemmaReport {
    pub a1: f64,
    pub a2: f64,
    /// Common lower bound on the two sub-gaps.
    pub lambda: f64,
    /// Smallest principal angle between the ground spaces.
    pub theta: f64,
    pub bound: f64,
    pub observed: f64,
    pub ground_dims: (usize, usize),
    pub holds: bool,
}

pub const CLUSTER_TOL: f64 = 1e-8;

fn ground_space(h: &CMat, tol: f64) -> (f64, CMat, f64) {
    let (vals, vecs) = linalg::hermitian_eigh(h);
    let a = vals[0];
    let g = vals.iter().take_while(|&&x| x <= a + tol).count();
    let sub_gap = vals.get(g).map(|x| x - a).unwrap_or(f64::INFINITY);
    (a, vecs.columns(0, g).into_owned(), sub_gap)
}

/// Checks `lambda_min(H1 + H2) >= a1 + a2 + 2 Lambda sin^2(theta/2)`, where
/// `cos theta` is the largest singular value of `G1^dagger G2` for
/// orthonormal ground-space bases `G1`, `G2`.
pub fn geometric_bound_check(h1: &CMat, h2: &CMat, cluster_tol: f64) -> Result<GeometricLemmaReport> {
    if h1.shape() != h2.shape() || h1.nrows() != h1.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h1.nrows(),
            got: h2.nrows(),
        });
    }
    let (a1, g1, d1) = ground_space(h1, cluster_tol);
    let (a2, g2, d2) = ground_space(h2, cluster_tol);
    let lambda = match d1.min(d2) {
        x if x.is_finite() => x,
        _ => 0.0,
    };
    let overlap = g1.adjoint() * &g2;
    let cos = overlap
        .singular_values()
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .min(1.0);
    let theta = cos.acos();
    let bound = a1 + a2 + 2.0 * lambda * (theta / 2.0).sin().powi(2);
    let observed = linalg::hermitian_eigenvalues(&(h1 + h2))[0];
    Ok(GeometricLemmaReport {
        a1,
        a2,
        lambda,
        theta,
        bound,
        observed,
        ground_dims: (g1.ncols(), g2.ncols()),
        holds: observed >= bound - 1e-9,
    })
}

/// A random Hermitian PSD matrix with a ground space of dimension `ground`.
pub fn random_psd(rng: &mut ChaCha8Rng, dim: usize, ground: usize) -> CMat {
    let a = CMat::from_fn(dim, dim, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let q = a.qr().q();
    let base: f64 = rng.gen::<f64>() * 0.5;
    let gap: f64 = 0.05 + rng.gen::<f64>();
    let mut d = CMat::zeros(dim, dim);
    for i in 0..dim {
        let e = if i < ground {
            base
        } else {
            base + gap + rng.gen::<f64>() * 2.0
        };
        d[(i, i)] = c(e, 0.0);
    }
    linalg::hermitize(&(&q * d * q.adjoint()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainBoundReport {
    pub r: usize,
    pub lambda_min: f64,
    /// `lambda_min * r^3`.
    pub scaled: f64,
}

/// `lambda_min(P_r + diag)` for a non-negative integer diagonal.
pub fn chain_energy_bound_check(r: usize, diag: &[u32]) -> Result<ChainBoundReport> {
    if diag.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: diag.len(),
        });
    }
    if diag.iter().all(|&x| x == 0) {
        return Err(Error::Input("the diagonal needs at least one nonzero entry".into()));
    }
    let mut m = p_matrix(r);
    for (i, &x) in diag.iter().enumerate() {
        m[(i, i)] += c(x as f64, 0.0);
    }
    let lambda_min = linalg::hermitian_eigenvalues(&m)[0];
    if lambda_min <= 0.0 {
        return Err(Error::Integrity(format!(
            "lambda_min(P_{r} + D) = {lambda_min:.3e} is not positive"
        )));
    }
    Ok(ChainBoundReport {
        r,
        lambda_min,
        scaled: lambda_min * (r as f64).powi(3),
    })
}

/// Least-squares slope of `log lambda` against `log r`.
pub fn fit_exponent(reports: &[ChainBoundReport]) -> f64 {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .map(|x| ((x.r as f64).ln(), x.lambda_min.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;
    use proptest::prelude::*;

    #[test]
    fn p_matrix_small_cases() {
        let p2 = p_matrix(2);
        assert_eq!(p2, linalg::real_matrix(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        let ev = linalg::hermitian_eigenvalues(&p_matrix(3));
        for (got, want) in ev.iter().zip([0.0, 0.5, 1.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        for r in [1, 5, 9] {
            let p = p_matrix(r);
            for i in 0..r {
                let s: C64 = p.row(i).iter().sum();
                assert!(s.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn p_matrix_spectrum_is_cosine_law() {
        for r in 1..=64 {
            let ev = linalg::hermitian_eigenvalues(&p_matrix(r));
            for (k, e) in ev.iter().enumerate() {
                let want = 1.0 - (k as f64 * std::f64::consts::PI / r as f64).cos();
                assert!((e - want).abs() < 1e-10, "r={r} k={k}");
            }
        }
    }

    #[test]
    fn lowest_eigs_on_p10_and_identity() {
        let rep = lowest_eigs(&p_matrix(10), 2, &EigOptions::default()).unwrap();
        assert!(rep.eigenvalues[0].abs() < 1e-12);
        let want = 1.0 - (std::f64::consts::PI / 10.0).cos();
        assert!((rep.eigenvalues[1] - want).abs() < 1e-12);
        let id = linalg::identity(4);
        assert!((lowest_eigs(&id, 1, &EigOptions::default()).unwrap().eigenvalues[0] - 1.0).abs() < 1e-14);
    }

    fn path_csr(r: usize) -> CsrMatrix {
        let mut trip = Vec::new();
        for i in 0..r {
            let edges = (i > 0) as usize + (i + 1 < r) as usize;
            trip.push((i, i, c(0.5 * edges as f64 + 0.001 * i as f64, 0.0)));
            if i + 1 < r {
                trip.push((i, i + 1, c(-0.5, 0.0)));
                trip.push((i + 1, i, c(-0.5, 0.0)));
            }
        }
        CsrMatrix::from_triplets(r, trip)
    }

    #[test]
    fn lanczos_matches_dense() {
        let m = path_csr(300);
        let dense = dense_eigs(&m.to_dense(), 4).unwrap();
        let opts = EigOptions {
            dense_threshold: 10,
            ..EigOptions::default()
        };
        let it = lowest_eigs(&m, 4, &opts).unwrap();
        assert_eq!(it.method, Method::Lanczos);
        for (a, b) in it.eigenvalues.iter().zip(&dense.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(it.residuals.iter().all(|&r| r <= RESIDUAL_BOUND));
        // deterministic
        let again = lowest_eigs(&m, 4, &opts).unwrap();
        assert_eq!(again.eigenvalues, it.eigenvalues);
    }

    #[test]
    fn lanczos_reports_non_convergence() {
        let m = path_csr(400);
        let opts = EigOptions {
            dense_threshold: 10,
            max_matvecs: 30,
            krylov_dim: 20,
            ..EigOptions::default()
        };
        match lowest_eigs(&m, 1, &opts) {
            Err(Error::Convergence { residuals, .. }) => assert!(!residuals.is_empty()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn gap_scan_endpoints() {
        let r = 12;
        let mut init = CMat::identity(r, r);
        init[(0, 0)] = ZERO;
        let fin = p_matrix(r);
        let scan = gap_scan(&init, &fin, &uniform_grid(11), &EigOptions::default()).unwrap();
        assert!((scan.points[0].gap - 1.0).abs() < 1e-12);
        let want = 1.0 - (std::f64::consts::PI / r as f64).cos();
        assert!((scan.points[10].gap - want).abs() < 1e-10);
        assert!(scan.min_gap > 0.0);
        assert!(scan.to_csv().starts_with("s,lambda0,lambda1,gap\n0,"));
        assert!(gap_scan(&init, &fin, &[1.5], &EigOptions::default()).is_err());
    }

    #[test]
    fn geometric_lemma_two_by_two_calibration() {
        let h1 = p_matrix(2);
        let h2 = linalg::real_matrix(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let rep = geometric_bound_check(&h1, &h2, CLUSTER_TOL).unwrap();
        assert!((rep.theta - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let bound = 2.0 * (std::f64::consts::PI / 8.0).sin().powi(2);
        assert!((rep.bound - bound).abs() < 1e-12);
        // [[1/2, -1/2], [-1/2, 3/2]] has lowest eigenvalue 1 - 1/sqrt(2)
        assert!((rep.observed - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!(rep.holds);

        let same = geometric_bound_check(&h2, &h2, CLUSTER_TOL).unwrap();
        assert_eq!(same.bound, 0.0);
        assert!(same.observed.abs() < 1e-15 && same.holds);
    }

    #[test]
    fn chain_bound_examples() {
        let r2 = chain_energy_bound_check(2, &[0, 1]).unwrap();
        assert!((r2.lambda_min - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
        let ones = chain_energy_bound_check(6, &[1; 6]).unwrap();
        assert!(ones.lambda_min >= 1.0 - 1e-12);
        assert!(chain_energy_bound_check(3, &[0, 0, 0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn geometric_bound_never_violated(seed in any::<u64>(), dim in 2usize..12, g1 in 1usize..3, g2 in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h1 = random_psd(&mut rng, dim, g1.min(dim - 1));
            let h2 = random_psd(&mut rng, dim, g2.min(dim - 1));
            let rep = geometric_bound_check(&h1, &h2, CLUSTER_TOL).unwrap();
            prop_assert!(rep.holds, "{rep:?}");
        }

        #[test]
        fn gaps_are_non_negative_and_sorted(r in 2usize..30, s in 0.0f64..1.0) {
            let mut init = CMat::identity(r, r);
            init[(0, 0)] = ZERO;
            let scan = gap_scan(&init, &p_matrix(r), &[s], &EigOptions::default()).unwrap();
            prop_assert!(scan.points[0].gap >= 0.0);
            prop_assert!(scan.points[0].lambda0 <= scan.points[0].lambda1);
        }
    }
}
