use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qchain::adiabatic::{
    evolve_doubling, pad_identities, readout, readout_sparse, time_estimate, EvolveOptions,
};
use qchain::chain_model::{build_template_graph, enumerate_chain, forward_rules, g_of_t, Variant};
use qchain::circuit::{CanonicalCircuit, CircuitFile};
use qchain::encoding::{code_spectrum_check, encode, QubitEncoding};
use qchain::hamiltonian::{
    build_h_init, build_h_input, build_h_legal, build_h_out, build_h_prop, build_h_valid,
    ChainContext, HamiltonianSpec, SparseState,
};
use qchain::linalg::{self, c, CsrMatrix, C64, ZERO};
use qchain::qma::{
    acceptance_probability, build_qma_hamiltonian, calibrate_thresholds, decide, min_eigen,
    p2_overlap_check, sector_spectrum, witness_energy, EigenMode, QMAInstance, VerifierSpec,
};
use qchain::spectral::{gap_scan, uniform_grid, EigOptions};
use qchain::subspace::{build_phi_basis, BasisMode, PhiBasis};

use crate::output::{emit, max_dim, write_atomic, CliError, CliResult};
use crate::{
    BuildArgs, ChainArgs, ChainSource, Command, Component, EncodeArgs, EvolveArgs, GapScanArgs,
    QmaAction, QmaArgs, SpaceMode, VariantArg,
};

pub fn run(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Canonicalize { circuit, out } => canonicalize_cmd(circuit, out.as_deref()),
        Command::Chain(a) => chain_cmd(cmd, a),
        Command::Graph { n, l, out } => graph_cmd(cmd, *n, *l, out.as_deref()),
        Command::Build(a) => build_cmd(cmd, a),
        Command::GapScan(a) => gap_scan_cmd(cmd, a),
        Command::Evolve(a) => evolve_cmd(cmd, a),
        Command::Qma(a) => qma_cmd(cmd, a),
        Command::Encode(a) => encode_cmd(cmd, a),
        Command::VerifyLemmas(a) => crate::lemmas::run(cmd, a),
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub fn load_circuit(path: &Path) -> CliResult<CanonicalCircuit> {
    Ok(CircuitFile::from_json(&read(path)?)?.load_canonical()?)
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Qma => Variant::Qma,
        VariantArg::Adiabatic => Variant::AdiabaticWithS,
    }
}

/// The circuit named by `--circuit`, or an identity circuit of size `n, L`.
fn source_circuit(src: &ChainSource) -> CliResult<CanonicalCircuit> {
    let c = match (&src.circuit, src.n, src.l) {
        (Some(p), _, _) => load_circuit(p)?,
        (None, Some(n), Some(l)) => {
            if n < 2 || l == 0 || l % n != 0 {
                return Err(CliError::input(format!("L = {l} must be a positive multiple of n = {n} >= 2")));
            }
            CanonicalCircuit::identity(n, l / n)?
        }
        _ => return Err(CliError::input("give --circuit or both --n and --L")),
    };
    if src.n.is_some_and(|n| n != c.n()) || src.l.is_some_and(|l| l != c.len()) {
        return Err(CliError::input(format!(
            "circuit has n = {}, L = {}, which disagrees with --n/--L",
            c.n(),
            c.len()
        )));
    }
    Ok(c)
}

fn canonicalize_cmd(circuit: &Path, out: Option<&Path>) -> CliResult<()> {
    let c = load_circuit(circuit)?;
    let text = serde_json::to_string_pretty(&c.to_file())? + "\n";
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ChainReport {
    last_step: usize,
    templates: Vec<String>,
    g: Vec<usize>,
}

fn chain_cmd(cmd: &Command, a: &ChainArgs) -> CliResult<()> {
    let mut rs = forward_rules(a.n, a.l, variant(a.variant))?;
    if a.identified {
        rs = rs.identified();
    }
    let trace = enumerate_chain(&rs)?;
    let g = (0..trace.len())
        .map(|t| g_of_t(a.n, a.l, t))
        .collect::<qchain::Result<Vec<_>>>()?;
    let rep = ChainReport {
        last_step: trace.last_step(),
        templates: trace.templates.iter().map(|t| t.to_string()).collect(),
        g,
    };
    for (t, tpl) in rep.templates.iter().enumerate() {
        println!("{t:>4}  g={:<3} {tpl}", rep.g[t]);
    }
    println!("{} templates, T = {}", rep.templates.len(), rep.last_step);
    if let Some(p) = &a.out {
        emit(Some(p), cmd, &rep)?;
    }
    Ok(())
}

fn graph_cmd(cmd: &Command, n: usize, l: usize, out: Option<&Path>) -> CliResult<()> {
    let g = build_template_graph(n, l)?;
    let clean: Vec<_> = g.clean_chains().collect();
    println!(
        "{} nodes ({} valid), {} chains, {} all-legal",
        g.nodes.len(),
        g.valid_count(),
        g.chains.len(),
        clean.len()
    );
    for ch in &clean {
        println!("all-legal chain: m = {}, {} templates, {} -> {}", ch.m, ch.len(), ch.start, ch.end);
    }
    let summary = serde_json::json!({
        "nodes": g.nodes.len(),
        "valid_nodes": g.valid_count(),
        "chains": g.chains,
        "all_legal": clean.iter().map(|ch| serde_json::json!({
            "m": ch.m,
            "templates": g.templates(ch).iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    if let Some(p) = out {
        emit(Some(p), cmd, &summary)?;
    }
    match clean.as_slice() {
        [only] if only.m == n => Ok(()),
        _ => Err(CliError::failed(format!(
            "unique all-legal chain with m = n violated: found {} all-legal chains with m = {:?}",
            clean.len(),
            clean.iter().map(|c| c.m).collect::<Vec<_>>()
        ))),
    }
}

fn component_specs(
    ctx: &ChainContext,
    c: &CanonicalCircuit,
    comp: Component,
    n1: usize,
) -> CliResult<Vec<(&'static str, HamiltonianSpec)>> {
    let one = |comp: Component| -> CliResult<HamiltonianSpec> {
        Ok(match comp {
            Component::Prop => build_h_prop(ctx, c)?,
            Component::Init => build_h_init(ctx)?,
            Component::Valid => build_h_valid(ctx)?,
            Component::Legal => build_h_legal(ctx)?,
            Component::Input => build_h_input(ctx, n1)?,
            Component::Out => build_h_out(ctx)?,
            Component::All => unreachable!(),
        })
    };
    let name = |comp: Component| match comp {
        Component::Prop => "prop",
        Component::Init => "init",
        Component::Valid => "valid",
        Component::Legal => "legal",
        Component::Input => "input",
        Component::Out => "out",
        Component::All => "total",
    };
    if comp != Component::All {
        return Ok(vec![(name(comp), one(comp)?)]);
    }
    let list: &[Component] = match ctx.variant {
        Variant::AdiabaticWithS => &[Component::Init, Component::Prop],
        Variant::Qma => &[
            Component::Prop,
            Component::Valid,
            Component::Legal,
            Component::Input,
            Component::Out,
        ],
    };
    let mut out = Vec::new();
    for &k in list {
        out.push((name(k), one(k)?));
    }
    if ctx.variant == Variant::Qma {
        let refs: Vec<&HamiltonianSpec> = out.iter().map(|p| &p.1).collect();
        let total = HamiltonianSpec::sum(&refs)?;
        out.push(("total", total));
    }
    Ok(out)
}

fn build_cmd(cmd: &Command, a: &BuildArgs) -> CliResult<()> {
    let c = source_circuit(&a.source)?;
    let ctx = ChainContext::new(c.n(), c.len(), variant(a.variant), false)?;
    let specs = component_specs(&ctx, &c, a.component, a.n1)?;
    let cap = max_dim()?;
    let basis = if a.restricted {
        let mode = match ctx.variant {
            Variant::Qma => BasisMode::FullLegal,
            Variant::AdiabaticWithS => BasisMode::SingleInput,
        };
        Some(build_phi_basis(&ctx, &c, mode)?)
    } else {
        None
    };
    let mut files: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    for (name, spec) in &specs {
        let terms_path = a.out_dir.join(format!("{name}.terms.json"));
        write_atomic(&terms_path, (serde_json::to_string(&spec.to_json())? + "\n").as_bytes())?;
        let full = match spec.materialize(cap) {
            Ok(m) => {
                let p = a.out_dir.join(format!("{name}.coo"));
                write_atomic(&p, m.to_coordinate_text().as_bytes())?;
                serde_json::json!({ "dim": m.dim, "nnz": m.nnz(), "file": p })
            }
            Err(qchain::Error::Resource(msg)) => serde_json::json!({ "skipped": msg }),
            Err(e) => return Err(e.into()),
        };
        let restricted = match &basis {
            Some(b) => {
                let m = CsrMatrix::from_dense(&b.restrict(spec)?);
                let p = a.out_dir.join(format!("{name}.restricted.coo"));
                write_atomic(&p, m.to_coordinate_text().as_bytes())?;
                serde_json::json!({ "dim": m.dim, "nnz": m.nnz(), "file": p })
            }
            None => serde_json::Value::Null,
        };
        files.insert(
            name.to_string(),
            serde_json::json!({
                "terms": spec.terms.len(),
                "term_file": terms_path,
                "full": full,
                "restricted": restricted,
            }),
        );
    }
    if let Some(b) = &basis {
        let p = a.out_dir.join("basis.json");
        write_atomic(&p, (serde_json::to_string(&b.to_json())? + "\n").as_bytes())?;
    }
    let result = serde_json::json!({
        "n": c.n(), "L": c.len(), "d": ctx.d(), "sites": ctx.sites(),
        "last_step": ctx.rules.last_step(),
        "components": files,
    });
    emit(Some(&a.out_dir.join("build.json")), cmd, &result)?;
    println!("wrote {} component(s) to {}", specs.len(), a.out_dir.display());
    Ok(())
}

struct RestrictedPair {
    circuit: CanonicalCircuit,
    basis: PhiBasis,
    h_init: qchain::linalg::CMat,
    h_prop: qchain::linalg::CMat,
    spec_init: HamiltonianSpec,
    spec_prop: HamiltonianSpec,
}

fn restricted_pair(c: CanonicalCircuit) -> CliResult<RestrictedPair> {
    let ctx = ChainContext::new(c.n(), c.len(), Variant::AdiabaticWithS, false)?;
    let spec_init = build_h_init(&ctx)?;
    let spec_prop = build_h_prop(&ctx, &c)?;
    let basis = build_phi_basis(&ctx, &c, BasisMode::SingleInput)?;
    Ok(RestrictedPair {
        h_init: basis.restrict(&spec_init)?,
        h_prop: basis.restrict(&spec_prop)?,
        circuit: c,
        basis,
        spec_init,
        spec_prop,
    })
}

fn check_epsilon(e: f64) -> CliResult<()> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(CliError::input(format!("--epsilon must be positive, got {e}")));
    }
    Ok(())
}

fn gap_scan_cmd(cmd: &Command, a: &GapScanArgs) -> CliResult<()> {
    if a.grid < 2 {
        return Err(CliError::input("--grid needs at least 2 points"));
    }
    let mut c = source_circuit(&a.source)?;
    if let Some(e) = a.epsilon {
        check_epsilon(e)?;
        c = pad_identities(&c, e)?.circuit;
    }
    let pair = restricted_pair(c)?;
    let scan = gap_scan(&pair.h_init, &pair.h_prop, &uniform_grid(a.grid), &EigOptions::default())?;
    write_atomic(&a.out, scan.to_csv().as_bytes())?;
    let r = pair.basis.len();
    let last = scan.points.last().unwrap();
    let summary = serde_json::json!({
        "dim": r,
        "L": pair.circuit.len(),
        "min_gap": scan.min_gap,
        "argmin": scan.argmin,
        "gap_at_1": last.gap,
        "path_gap": 1.0 - (std::f64::consts::PI / r as f64).cos(),
    });
    println!("min gap {:.6e} at s = {} (dim {r})", scan.min_gap, scan.argmin);
    if let Some(p) = &a.report {
        emit(Some(p), cmd, &summary)?;
    }
    if !(scan.min_gap > 0.0) {
        return Err(CliError::failed(format!("gap positivity violated: min gap {} at s = {}", scan.min_gap, scan.argmin)));
    }
    Ok(())
}

fn to_full(spec: &HamiltonianSpec, s: &SparseState, dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    for (cfg, &a) in s {
        v[spec.config_to_index(cfg)] += a;
    }
    v
}

fn evolve_cmd(cmd: &Command, a: &EvolveArgs) -> CliResult<()> {
    check_epsilon(a.epsilon)?;
    if !(a.delta >= 0.0) || !(a.target > 0.0 && a.target <= 1.0) {
        return Err(CliError::input("need --delta >= 0 and 0 < --target <= 1"));
    }
    let raw = source_circuit(&a.source)?;
    let padding = pad_identities(&raw, a.epsilon)?;
    let pair = restricted_pair(padding.circuit.clone())?;
    let eig = EigOptions::default();
    let scan = gap_scan(&pair.h_init, &pair.h_prop, &uniform_grid(101), &eig)?;
    let diff = linalg::hermitian_norm(&(&pair.h_prop - &pair.h_init));
    let estimate = time_estimate(diff, scan.min_gap, a.delta, a.epsilon);

    let r = pair.basis.len();
    let mut e0 = vec![ZERO; r];
    e0[0] = c(1.0, 0.0);
    let uniform = pair.basis.ground_state_target();
    let (run, ro) = match a.mode {
        SpaceMode::Restricted => {
            let opts = EvolveOptions {
                initial: Some(e0),
                target: Some(uniform),
                eig,
            };
            let run = evolve_doubling(&pair.h_init, &pair.h_prop, a.target, a.t_start, a.t_max, &opts)?;
            let ro = readout(&run.result.state, &pair.basis)?;
            (run, ro)
        }
        SpaceMode::Full => {
            let cap = max_dim()?;
            let hi = pair.spec_init.materialize(cap)?;
            let hp = pair.spec_prop.materialize(cap)?;
            let embed = |v: &[C64]| -> CliResult<Vec<C64>> {
                Ok(to_full(&pair.spec_prop, &pair.basis.embed_combination(v)?, hi.dim))
            };
            let opts = EvolveOptions {
                initial: Some(embed(&e0)?),
                target: Some(embed(&uniform)?),
                eig,
            };
            let run = evolve_doubling(&hi, &hp, a.target, a.t_start, a.t_max, &opts)?;
            let mut state = SparseState::new();
            for (k, &amp) in run.result.state.iter().enumerate() {
                if amp.norm() > 1e-14 {
                    state.insert(pair.spec_prop.index_to_config(k), amp);
                }
            }
            let final_t = &pair.basis.vectors.last().unwrap().template;
            let ro = readout_sparse(&pair.basis.ctx, &state, final_t, &pair.circuit)?;
            (run, ro)
        }
    };
    let result = serde_json::json!({
        "padding": padding,
        "dim_restricted": r,
        "min_gap": scan.min_gap,
        "required_time_estimate": estimate,
        "doubling": run,
        "readout": ro,
    });
    println!(
        "T = {} fidelity {:.6} (target {}), readout fidelity {:.9}",
        run.result.t_total, run.result.fidelity, a.target, ro.fidelity
    );
    emit(a.out.as_deref(), cmd, &result).map(|_| ())?;
    if !run.succeeded {
        return Err(CliError::failed(format!(
            "fidelity target {} not reached by T = {}",
            a.target, run.result.t_total
        )));
    }
    Ok(())
}

#[derive(Deserialize)]
struct VerifierFile {
    n1: usize,
    n2: usize,
    circuit: CircuitFile,
}

fn load_verifier(path: &Path) -> CliResult<VerifierSpec> {
    let f: VerifierFile = serde_json::from_str(&read(path)?)?;
    Ok(VerifierSpec::new(f.n1, f.n2, f.circuit.load_canonical()?)?)
}

/// Explicit `--a/--b`, else the accept-all/reject-all calibration when the
/// instance has their size.
fn thresholds(a: &QmaArgs, inst: &QMAInstance) -> CliResult<Option<(f64, f64)>> {
    match (a.a, a.b) {
        (Some(x), Some(y)) => Ok(Some((x, y))),
        (None, None) => {
            if inst.verifier.n() == 2 && inst.verifier.l() == 4 {
                let yes = build_qma_hamiltonian(&VerifierSpec::accept_all()?)?;
                let no = build_qma_hamiltonian(&VerifierSpec::reject_all()?)?;
                Ok(Some(calibrate_thresholds(&[yes], &[no], &EigOptions::default())?))
            } else {
                Ok(None)
            }
        }
        _ => Err(CliError::input("give both --a and --b or neither")),
    }
}

fn qma_cmd(cmd: &Command, a: &QmaArgs) -> CliResult<()> {
    let v = load_verifier(&a.verifier)?;
    let mut inst = build_qma_hamiltonian(&v)?;
    if let Some((x, y)) = thresholds(a, &inst)? {
        inst.set_thresholds(x, y)?;
    }
    match a.action {
        QmaAction::Build => {
            let out = a
                .out
                .clone()
                .ok_or_else(|| CliError::input("qma build needs --out"))?;
            let matrix = match inst.hamiltonian.materialize(max_dim()?) {
                Ok(m) => {
                    let p = out.with_extension("coo");
                    write_atomic(&p, m.to_coordinate_text().as_bytes())?;
                    serde_json::json!({ "dim": m.dim, "nnz": m.nnz(), "file": p })
                }
                Err(qchain::Error::Resource(msg)) => serde_json::json!({ "skipped": msg }),
                Err(e) => return Err(e.into()),
            };
            let terms = out.with_extension("terms.json");
            write_atomic(&terms, (serde_json::to_string(&inst.hamiltonian.to_json())? + "\n").as_bytes())?;
            let mut side = inst.sidecar();
            side["matrix"] = matrix;
            side["term_file"] = serde_json::json!(terms);
            emit(Some(&out.with_extension("json")), cmd, &side)?;
            println!("wrote {}", out.with_extension("json").display());
            Ok(())
        }
        QmaAction::Check => qma_check(cmd, a, &inst),
    }
}

fn qma_check(cmd: &Command, a: &QmaArgs, inst: &QMAInstance) -> CliResult<()> {
    let v = &inst.verifier;
    let opts = EigOptions::default();
    let mut witnesses = Vec::new();
    if v.n2 <= 10 {
        for xi in 0..1usize << v.n2 {
            let bits = format!("{xi:0w$b}", w = v.n2);
            let mut w = serde_json::to_value(witness_energy(inst, &bits)?)?;
            w["acceptance_oracle"] = serde_json::json!(acceptance_probability(v, xi)?);
            witnesses.push(w);
        }
    }
    let (mode, sectors) = match a.mode {
        SpaceMode::Restricted => (EigenMode::RestrictedLegal, None),
        SpaceMode::Full => (EigenMode::FullSpace, Some(sector_spectrum(inst, 8192)?)),
    };
    let rep = match (mode, sectors.as_ref()) {
        (EigenMode::FullSpace, Some(_)) => match min_eigen(inst, mode, max_dim()?, &opts) {
            Ok(r) => Some(r),
            Err(qchain::Error::Resource(_)) => None,
            Err(e) => return Err(e.into()),
        },
        _ => Some(min_eigen(inst, mode, 0, &opts)?),
    };
    let lambda = match (&rep, &sectors) {
        (Some(r), _) => r.lambda_min,
        (None, Some(s)) => s.full_min,
        _ => unreachable!(),
    };
    let overlaps = p2_overlap_check(inst)?;
    let decision = match inst.thresholds {
        Some(_) => Some(decide(inst, lambda)?),
        None => None,
    };
    let result = serde_json::json!({
        "lambda_min": lambda,
        "min_eigen": rep,
        "sectors": sectors,
        "witnesses": witnesses,
        "p2_overlaps": overlaps,
        "thresholds": inst.thresholds,
        "decision": decision,
        "sidecar": inst.sidecar(),
    });
    emit(a.out.as_deref(), cmd, &result)?;
    eprintln!("lambda_min = {lambda:.12e}, decision {decision:?}");
    if let Some(bad) = overlaps.iter().find(|o| !o.holds) {
        return Err(CliError::failed(format!(
            "soundness overlap bound violated for x = {}, xi = {}: {} > {}",
            bad.x, bad.xi, bad.overlap, bad.bound
        )));
    }
    if lambda < -1e-9 {
        return Err(CliError::failed(format!("PSD sum violated: lambda_min = {lambda}")));
    }
    Ok(())
}

fn encode_cmd(cmd: &Command, a: &EncodeArgs) -> CliResult<()> {
    let c = source_circuit(&a.source)?;
    let ctx = ChainContext::new(c.n(), c.len(), variant(a.variant), false)?;
    let specs = component_specs(&ctx, &c, a.component, a.n1)?;
    let (name, spec) = specs.last().unwrap();
    let enc = match a.lambda_pen {
        Some(l) => QubitEncoding::new(spec.local_dim, l)?,
        None => QubitEncoding::for_spec(spec)?,
    };
    let encoded = encode(spec, &enc)?;
    let check = if a.check {
        Some(code_spectrum_check(spec, &encoded, a.k_eigs, max_dim()?)?)
    } else {
        None
    };
    let result = serde_json::json!({
        "component": name,
        "encoding": enc,
        "locality": encoded.locality,
        "qubits": encoded.spec.sites,
        "terms": encoded.spec.terms.len(),
        "check": check,
    });
    emit(a.out.as_deref(), cmd, &result)?;
    if let Some(ch) = &check {
        if !ch.matches || !ch.non_code_above_half_penalty {
            return Err(CliError::failed(format!(
                "code-space spectrum violated: max diff {:.3e}, non-code floor {} vs penalty {}",
                ch.max_diff, ch.non_code_min, ch.lambda_pen
            )));
        }
    }
    Ok(())
}
