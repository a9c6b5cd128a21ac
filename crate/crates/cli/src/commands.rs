use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pidq::bounds::{performance_bounds, synergy_bounds, DisagreementConfig};
use pidq::discretize::{discretize_with_cap, BinCount, Encoding, Method};
use pidq::dist::{entropy, pairwise_marginals, DEFAULT_MAX_CELLS};
use pidq::model_quant::{normalize_pid, select_models, synthetic_library};
use pidq::solver::{partial_pid, pid, PidResult};
use pidq::{DiscretizeConfig, JointDist, SolverConfig};
use serde_json::{json, Map, Value};

use crate::formats::{
    read_input, read_json, read_samples, write_json, DistFile, Input, LibraryFile, MarginalsFile,
    SCHEMA_VERSION,
};
use crate::output::Fmt;
use crate::{BinningArgs, Cli, Command, SolverArgs};

pub struct Outcome {
    pub report: String,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn new(report: Value, converged: bool) -> Self {
        Self {
            report: serde_json::to_string_pretty(&report).expect("reports serialize"),
            converged,
            warnings: Vec::new(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let fmt = Fmt {
        digits: cli.precision,
    };
    let cap = max_cells()?;
    match &cli.command {
        Command::Pid(a) => cmd_pid(&a.input, &a.binning, &a.solver, cli.seed, cap, fmt),
        Command::Bounds(a) => cmd_bounds(&a.marginals, a.c, &a.solver, cli.seed, cap, fmt),
        Command::Select(a) => cmd_select(a, cli.seed, cap, fmt),
        Command::Discretize(a) => cmd_discretize(a, cli.seed, cap, fmt),
        Command::Marginals(a) => cmd_marginals(a, cli.seed, cap),
        Command::Library(a) => cmd_library(&a.output, cli.seed, fmt),
    }
}

fn max_cells() -> Result<usize> {
    match std::env::var("PIDQ_MAX_CELLS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("PIDQ_MAX_CELLS must be a positive integer, got `{v}`"),
        },
        Err(_) => Ok(DEFAULT_MAX_CELLS),
    }
}

fn solver_config(args: &SolverArgs, seed: u64) -> Result<SolverConfig> {
    let mut cfg = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    if let Some(t) = args.tol {
        cfg.tol_obj = t;
    }
    if let Some(m) = args.max_iters {
        cfg.max_iters = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn discretize_config(args: &BinningArgs, seed: u64) -> Result<DiscretizeConfig> {
    let mut cfg = DiscretizeConfig {
        seed,
        ..DiscretizeConfig::default()
    };
    if let Some(k) = args.clusters {
        cfg.method = Method::KMeans;
        cfg.bins = BinCount::Fixed(k);
    } else if let Some(b) = &args.bins {
        cfg.bins = match b.as_str() {
            "auto" => BinCount::Auto,
            n => BinCount::Fixed(
                n.parse()
                    .with_context(|| format!("--bins expects `auto` or a count, got `{n}`"))?,
            ),
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Distribution behind an input file, discretizing sample tables.
fn load_joint(path: &Path, binning: &BinningArgs, seed: u64, cap: usize) -> Result<(JointDist, &'static str)> {
    match read_input(path, cap)? {
        Input::Dist(p) => Ok((p, "distribution")),
        Input::Samples(table) => {
            let cfg = discretize_config(binning, seed)?;
            let d = discretize_with_cap(&table, &cfg, cap)?;
            Ok((d.joint, "samples"))
        }
    }
}

fn pid_fields(fmt: Fmt, r: &PidResult, out: &mut Map<String, Value>) {
    out.insert("R".into(), fmt.num(r.r));
    out.insert("U1".into(), fmt.num(r.u1));
    out.insert("U2".into(), fmt.num(r.u2));
    out.insert("S".into(), fmt.num(r.s));
    out.insert("total_mi".into(), fmt.num(r.total_mi));
    out.insert("converged".into(), json!(r.converged));
    out.insert("iterations".into(), json!(r.iterations));
}

fn header(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m
}

fn cmd_pid(
    input: &Path,
    binning: &BinningArgs,
    solver: &SolverArgs,
    seed: u64,
    cap: usize,
    fmt: Fmt,
) -> Result<Outcome> {
    let scfg = solver_config(solver, seed)?;
    let (p, kind) = load_joint(input, binning, seed, cap)?;
    let r = pid(&p, &scfg)?;
    let mut out = header("pid");
    out.insert("input".into(), json!(kind));
    out.insert("cardinalities".into(), json!(p.card().dims()));
    pid_fields(fmt, &r, &mut out);
    Ok(Outcome::new(Value::Object(out), r.converged))
}

fn cmd_bounds(path: &Path, c: f64, solver: &SolverArgs, seed: u64, cap: usize, fmt: Fmt) -> Result<Outcome> {
    let scfg = solver_config(solver, seed)?;
    let dcfg = DisagreementConfig {
        c,
        ..DisagreementConfig::default()
    };
    dcfg.validate()?;
    let file: MarginalsFile = read_json(path)?;
    let marginals = file
        .to_marginals(cap)
        .with_context(|| format!("{}: invalid marginals", path.display()))?;
    let ny = marginals.ny();
    let h_y = entropy(&marginals.p_y())?;
    let mut out = header("bounds");
    let mut warnings = Vec::new();
    let converged;
    if marginals.m12().is_some() {
        let b = synergy_bounds(&marginals, &scfg, &dcfg)?;
        let perf = b.performance(ny)?;
        converged = b.pid.converged && b.min_cmi_converged;
        if b.approximation_slack {
            warnings.push("the greedy coupling puts S_upper below a lower bound".to_string());
        }
        out.insert("R".into(), fmt.num(b.pid.r));
        out.insert("U1".into(), fmt.num(b.pid.u1));
        out.insert("U2".into(), fmt.num(b.pid.u2));
        out.insert("S_R".into(), fmt.num(b.s_r_lower));
        out.insert("S_U".into(), fmt.num(b.s_u_lower));
        out.insert("S_upper".into(), fmt.num(b.s_upper));
        out.insert("alpha".into(), fmt.num(b.alpha));
        out.insert("p_lower".into(), fmt.num(perf.p_lower));
        out.insert("p_upper".into(), fmt.num(perf.p_upper));
        out.insert("p_hat".into(), fmt.num(perf.p_hat));
        out.insert("min_cmi".into(), fmt.num(b.min_cmi));
        out.insert("shared_info".into(), fmt.num(b.shared_info));
        out.insert("coupling_entropy".into(), fmt.num(b.coupling_entropy));
        out.insert("H_y".into(), fmt.num(h_y));
        out.insert("c".into(), fmt.num(c));
        out.insert("approximation_slack".into(), json!(b.approximation_slack));
        out.insert("converged".into(), json!(converged));
        out.insert("null_reasons".into(), json!({}));
    } else {
        let pp = partial_pid(&marginals, &scfg)?;
        converged = pp.converged;
        let lower = performance_bounds(pp.r + pp.u1 + pp.u2, h_y, ny)?.p_lower;
        let missing = "p(x1,x2) not provided (m12 absent)";
        out.insert("R".into(), fmt.num(pp.r));
        out.insert("U1".into(), fmt.num(pp.u1));
        out.insert("U2".into(), fmt.num(pp.u2));
        for k in ["S_R", "S_U", "S_upper", "alpha"] {
            out.insert(k.into(), Value::Null);
        }
        out.insert("p_lower".into(), fmt.num(lower));
        out.insert("p_upper".into(), Value::Null);
        out.insert("p_hat".into(), Value::Null);
        out.insert("min_cmi".into(), Value::Null);
        out.insert("shared_info".into(), Value::Null);
        out.insert("coupling_entropy".into(), Value::Null);
        out.insert("H_y".into(), fmt.num(h_y));
        out.insert("c".into(), fmt.num(c));
        out.insert("approximation_slack".into(), Value::Null);
        out.insert("converged".into(), json!(converged));
        let mut reasons = Map::new();
        for k in ["S_R", "S_U", "S_upper", "alpha", "min_cmi", "shared_info", "coupling_entropy"] {
            reasons.insert(k.into(), json!(missing));
        }
        reasons.insert(
            "p_upper".into(),
            json!("needs S_upper, which needs p(x1,x2) (m12 absent)"),
        );
        reasons.insert("p_hat".into(), json!("needs p_upper"));
        reasons.insert("approximation_slack".into(), json!(missing));
        out.insert("null_reasons".into(), Value::Object(reasons));
    }
    let mut outcome = Outcome::new(Value::Object(out), converged);
    outcome.warnings = warnings;
    Ok(outcome)
}

fn cmd_select(a: &crate::SelectArgs, seed: u64, cap: usize, fmt: Fmt) -> Result<Outcome> {
    let library: LibraryFile = read_json(&a.library)?;
    let library = library
        .to_library()
        .with_context(|| format!("{}: invalid library", a.library.display()))?;
    let scfg = solver_config(&a.solver, seed)?;
    let (p, _) = load_joint(&a.target, &a.binning, seed, cap)?;
    let r = pid(&p, &scfg)?;
    let profile = normalize_pid(&r);
    let sel = select_models(&profile, &library, a.top_k)?;
    let entry = library
        .entries()
        .iter()
        .find(|e| e.dataset_id == sel.dataset_id)
        .expect("selected entry exists");
    let mut out = header("select");
    out.insert("dataset_id".into(), json!(sel.dataset_id));
    out.insert("dataset_name".into(), json!(entry.name));
    out.insert("similarity".into(), fmt.num(sel.distance));
    out.insert(
        "models".into(),
        Value::Array(
            sel.models
                .iter()
                .map(|m| json!({"id": m.id, "score": fmt.num(m.score)}))
                .collect(),
        ),
    );
    out.insert(
        "target_profile".into(),
        json!({
            "R": fmt.num(profile.r_hat),
            "U1": fmt.num(profile.u1_hat),
            "U2": fmt.num(profile.u2_hat),
            "S": fmt.num(profile.s_hat),
        }),
    );
    out.insert("converged".into(), json!(r.converged));
    Ok(Outcome::new(Value::Object(out), r.converged))
}

fn metadata_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.meta.json"))
}

fn encoding_json(enc: &Encoding, card: usize) -> Value {
    match enc {
        Encoding::Bins { per_feature, combos } => json!({
            "kind": "histogram",
            "categories": card,
            "features": per_feature.iter().map(|b| json!({
                "bins": b.bins,
                "edges": b.edges,
                "min": b.min,
                "max": b.max,
                "degenerate": b.degenerate,
            })).collect::<Vec<_>>(),
            "combos": combos,
        }),
        Encoding::Clusters(c) => json!({
            "kind": "kmeans",
            "categories": card,
            "centroids": c.centroids,
            "inertia": c.inertia,
        }),
    }
}

fn cmd_discretize(a: &crate::DiscretizeArgs, seed: u64, cap: usize, fmt: Fmt) -> Result<Outcome> {
    let table = read_samples(&a.input)?;
    let cfg = discretize_config(&a.binning, seed)?;
    let d = discretize_with_cap(&table, &cfg, cap)?;
    let meta_path = a.metadata.clone().unwrap_or_else(|| metadata_path(&a.output));
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "source": a.input.display().to_string(),
        "samples": table.len(),
        "seed": seed,
        "x1": encoding_json(&d.x1.encoding, d.x1.card),
        "x2": encoding_json(&d.x2.encoding, d.x2.card),
        "labels": table.ny(),
    });
    write_json(&a.output, &DistFile::from_joint(&d.joint))?;
    write_json(&meta_path, &meta)?;
    let mut out = header("discretize");
    out.insert("output".into(), json!(a.output.display().to_string()));
    out.insert("metadata".into(), json!(meta_path.display().to_string()));
    out.insert("samples".into(), json!(table.len()));
    out.insert("cardinalities".into(), json!(d.joint.card().dims()));
    out.insert("H_y".into(), fmt.num(d.joint.marginal_entropy(pidq::VarSet::Y)));
    Ok(Outcome::new(Value::Object(out), true))
}

fn cmd_marginals(a: &crate::MarginalsArgs, seed: u64, cap: usize) -> Result<Outcome> {
    let (p, kind) = load_joint(&a.input, &a.binning, seed, cap)?;
    let m = pairwise_marginals(&p, !a.without_m12);
    write_json(&a.output, &MarginalsFile::from_marginals(&m))?;
    let mut out = header("marginals");
    out.insert("input".into(), json!(kind));
    out.insert("output".into(), json!(a.output.display().to_string()));
    out.insert("cardinalities".into(), json!(p.card().dims()));
    out.insert("m12".into(), json!(!a.without_m12));
    Ok(Outcome::new(Value::Object(out), true))
}

fn cmd_library(output: &Path, seed: u64, fmt: Fmt) -> Result<Outcome> {
    let cfg = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let lib = synthetic_library(&cfg)?;
    write_json(output, &LibraryFile::from_library(&lib))?;
    let mut out = header("library");
    out.insert("output".into(), json!(output.display().to_string()));
    out.insert("entries".into(), json!(lib.len()));
    out.insert(
        "datasets".into(),
        Value::Array(
            lib.entries()
                .iter()
                .map(|e| {
                    json!({
                        "dataset_id": e.dataset_id,
                        "name": e.name,
                        "profile": fmt.list(&e.profile.components()),
                    })
                })
                .collect(),
        ),
    );
    Ok(Outcome::new(Value::Object(out), true))
}
