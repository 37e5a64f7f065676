use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qchain::chain_model::{
    build_template_graph, enumerate_chain, forward_rules, last_index, legality_penalty,
    validity_penalty, Variant,
};
use qchain::circuit::CanonicalCircuit;
use qchain::hamiltonian::{build_h_init, build_h_prop, ChainContext};
use qchain::linalg;
use qchain::qma::{build_qma_hamiltonian, min_eigen, p2_overlap_check, witness_energy, EigenMode, VerifierSpec};
use qchain::spectral::{
    chain_energy_bound_check, fit_exponent, gap_scan, geometric_bound_check, p_matrix, random_psd,
    uniform_grid, EigOptions, CLUSTER_TOL,
};
use qchain::subspace::{build_phi_basis, BasisMode};

use crate::output::{emit, CliError, CliResult};
use crate::{Command, LemmaArgs};

#[derive(Serialize)]
struct Check {
    name: &'static str,
    holds: bool,
    detail: serde_json::Value,
}

fn check(name: &'static str, holds: bool, detail: serde_json::Value) -> Check {
    eprintln!("{} {name}", if holds { "ok  " } else { "FAIL" });
    Check { name, holds, detail }
}

pub fn run(cmd: &Command, a: &LemmaArgs) -> CliResult<()> {
    if a.n < 2 || a.l == 0 || a.l % a.n != 0 {
        return Err(CliError::input(format!("L = {} must be a positive multiple of n = {} >= 2", a.l, a.n)));
    }
    let (n, l) = (a.n, a.l);
    let t_last = last_index(n, l);
    let mut checks = Vec::new();

    for v in [Variant::Qma, Variant::AdiabaticWithS] {
        let rs = forward_rules(n, l, v)?;
        let trace = enumerate_chain(&rs)?;
        let bad: Vec<String> = trace
            .templates
            .iter()
            // the penalties are defined on the S-free alphabet
            .filter(|t| v == Variant::Qma && (validity_penalty(t) != 0 || legality_penalty(t, n) != 0))
            .map(|t| t.to_string())
            .collect();
        checks.push(check(
            "chain is valid, legal and of length T+1",
            trace.len() == t_last + 1 && bad.is_empty(),
            serde_json::json!({ "variant": format!("{v:?}"), "len": trace.len(), "T": t_last, "offending": bad }),
        ));
        let id = enumerate_chain(&rs.identified())?;
        let mapped = trace.templates.iter().zip(&id.templates).all(|(x, y)| {
            &x.map(|c| c.identify()) == y
        });
        checks.push(check(
            "identified alphabet gives the same chain",
            id.len() == trace.len() && mapped,
            serde_json::json!({ "variant": format!("{v:?}"), "len": id.len() }),
        ));
    }

    if l <= 6 {
        let g = build_template_graph(n, l)?;
        let ms: Vec<usize> = g.clean_chains().map(|c| c.m).collect();
        checks.push(check(
            "unique all-legal graph chain with m = n",
            ms == [n],
            serde_json::json!({ "all_legal_m": ms, "chains": g.chains.len() }),
        ));
    }

    let circ = CanonicalCircuit::identity(n, l / n)?;
    let ctx = ChainContext::new(n, l, Variant::AdiabaticWithS, false)?;
    let basis = build_phi_basis(&ctx, &circ, BasisMode::SingleInput)?;
    let r = basis.len();
    let hp = basis.restrict(&build_h_prop(&ctx, &circ)?)?;
    let hi = basis.restrict(&build_h_init(&ctx)?)?;
    let prop_err = linalg::max_abs_diff(&hp, &p_matrix(r));
    let mut init_err = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let want = if i == j && i > 0 { 1.0 } else { 0.0 };
            init_err = init_err.max((hi[(i, j)] - linalg::c(want, 0.0)).norm());
        }
    }
    checks.push(check(
        "restricted propagation term is the path matrix",
        prop_err <= 1e-10 && r == t_last + 1,
        serde_json::json!({ "dim": r, "max_abs_diff": prop_err }),
    ));
    checks.push(check(
        "restricted initial term is diag(0, 1, ..., 1)",
        init_err <= 1e-10,
        serde_json::json!({ "max_abs_diff": init_err }),
    ));

    let scan = gap_scan(&hi, &hp, &uniform_grid(101), &EigOptions::default())?;
    let want = 1.0 - (std::f64::consts::PI / r as f64).cos();
    let end_gap = scan.points.last().unwrap().gap;
    checks.push(check(
        "gap stays positive and matches the path gap at s = 1",
        scan.min_gap > 0.0 && (end_gap - want).abs() <= 1e-9,
        serde_json::json!({ "min_gap": scan.min_gap, "argmin": scan.argmin, "gap_at_1": end_gap, "expected": want }),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut worst: Option<(usize, f64)> = None;
    let mut failures = Vec::new();
    for trial in 0..a.trials {
        let dim = rng.gen_range(2..=8);
        let g1 = rng.gen_range(1..dim);
        let g2 = rng.gen_range(1..dim);
        let h1 = random_psd(&mut rng, dim, g1);
        let h2 = random_psd(&mut rng, dim, g2);
        let rep = geometric_bound_check(&h1, &h2, CLUSTER_TOL)?;
        let slack = rep.observed - rep.bound;
        if worst.is_none_or(|(_, s)| slack < s) {
            worst = Some((trial, slack));
        }
        if !rep.holds {
            failures.push(trial);
        }
    }
    checks.push(check(
        "geometric lemma on random pairs",
        failures.is_empty(),
        serde_json::json!({ "trials": a.trials, "seed": a.seed, "failing_trials": failures, "min_slack": worst }),
    ));

    let mut bounds = Vec::new();
    for r in [4usize, 8, 16, 32] {
        // one unit of penalty at either end or the middle; the end is the weakest
        let mut low: Option<qchain::spectral::ChainBoundReport> = None;
        for pos in [0, r / 2, r - 1] {
            let mut d = vec![0u32; r];
            d[pos] = 1;
            let rep = chain_energy_bound_check(r, &d)?;
            if low.as_ref().is_none_or(|x| rep.lambda_min < x.lambda_min) {
                low = Some(rep);
            }
        }
        bounds.push(low.unwrap());
    }
    checks.push(check(
        "path matrix plus penalty has positive minimum",
        bounds.iter().all(|b| b.lambda_min > 0.0),
        serde_json::json!({ "sweep": bounds, "fitted_exponent": fit_exponent(&bounds) }),
    ));

    if n == 2 && l == 4 {
        let opts = EigOptions::default();
        let yes = build_qma_hamiltonian(&VerifierSpec::accept_all()?)?;
        let no = build_qma_hamiltonian(&VerifierSpec::reject_all()?)?;
        let e_yes = witness_energy(&yes, "0")?.energy;
        let l_yes = min_eigen(&yes, EigenMode::RestrictedLegal, 0, &opts)?.lambda_min;
        let l_no = min_eigen(&no, EigenMode::RestrictedLegal, 0, &opts)?.lambda_min;
        checks.push(check(
            "accepting verifier has a zero-energy witness, rejecting one does not",
            e_yes.abs() < 1e-10 && l_yes.abs() < 1e-10 && l_no > 1e-6,
            serde_json::json!({ "witness_energy_yes": e_yes, "lambda_yes": l_yes, "lambda_no": l_no }),
        ));
        let ov = p2_overlap_check(&no)?;
        let bad: Vec<_> = ov.iter().filter(|o| !o.holds).collect();
        checks.push(check(
            "soundness overlap bound",
            bad.is_empty(),
            serde_json::json!({ "checks": ov.len(), "violations": bad }),
        ));
    }

    let failed: Vec<&str> = checks.iter().filter(|c| !c.holds).map(|c| c.name).collect();
    emit(a.out.as_deref(), cmd, &serde_json::json!({ "n": n, "L": l, "T": t_last, "checks": checks }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::failed(format!("lemma violated: {}", failed.join("; "))))
    }
}
