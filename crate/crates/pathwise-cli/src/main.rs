//! Experiment runner: strict TOML config in, deterministic CSV artifacts and
//! a JSON metadata sidecar out.
//!
//! Exit codes: 0 = experiment passed, 2 = experiment-level failure (criteria
//! not met, instability, crossed preconditions), 1 = usage error (flags,
//! config, bad parameters).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use serde::{Deserialize, Serialize};

use pathwise::characteristics::{
    classical_comparison_experiment, feynman_kac, linear_pipeline, uniform_grid, McParams,
};
use pathwise::coefficients::{change_of_variable, transform_field, CoefficientSuite};
use pathwise::error::PathwiseError;
use pathwise::families::{coefficient_family, field_family};
use pathwise::fields::RandomField;
use pathwise::paths::{sample_path, SamplePath};
use pathwise::refsolver::{
    cfl_number, envelope_experiment, solve_fd_ito, solve_fd_stratonovich, FDGrid,
};
use pathwise::rng::child_rng;
use pathwise::taylor::{fit_line, remainder, Pairing, ScanLattice, TimeSlot};
use pathwise::viscosity::{
    canonical_jet, check_point, consistency_experiment, ConsistencyConfig, SolutionSide,
};
use rand::Rng;

#[derive(Parser)]
#[command(name = "pathwise", disable_help_subcommand = true)]
struct Cli {
    /// Experiment config file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Bound the worker pool (0 = default)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = false)]
    verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dims {
    d: usize,
    d_prime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathBlock {
    horizon: f64,
    n_steps: usize,
    refine: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyBlock {
    family: String,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeBlock {
    deltas: Vec<f64>,
    pairing: Option<String>,
    hs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridBlock {
    x_lo: f64,
    x_hi: f64,
    n_x: usize,
    t_stride: Option<usize>,
    t_sub: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesBlock {
    alpha: Option<f64>,
    tau: Option<f64>,
    f_tol: Option<f64>,
    identity_tol: Option<f64>,
    slope_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct McBlock {
    samples: usize,
    inner_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryBlock {
    t: f64,
    xs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareBlock {
    gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeBlock {
    eps: Vec<f64>,
    u0_center: f64,
    u0_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    experiment: String,
    seed: u64,
    output: Option<String>,
    n_seeds: Option<usize>,
    n_points: Option<usize>,
    form: Option<String>,
    lambda: Option<f64>,
    dims: Option<Dims>,
    path: Option<PathBlock>,
    coefficients: Option<FamilyBlock>,
    field: Option<FamilyBlock>,
    lattice: Option<LatticeBlock>,
    grid: Option<GridBlock>,
    tolerances: Option<TolerancesBlock>,
    mc: Option<McBlock>,
    query: Option<QueryBlock>,
    compare: Option<CompareBlock>,
    envelope: Option<EnvelopeBlock>,
}

enum RunError {
    Usage(String),
    Experiment(String),
}

type RunResult = Result<bool, RunError>;

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

impl From<PathwiseError> for RunError {
    fn from(e: PathwiseError) -> Self {
        match e {
            PathwiseError::Stability(_)
            | PathwiseError::Parabolicity(_)
            | PathwiseError::Domain(_)
            | PathwiseError::Internal(_) => RunError::Experiment(e.to_string()),
            other => RunError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Usage(format!("io error: {e}"))
    }
}

fn req<'a, T>(block: &'a Option<T>, name: &str, experiment: &str) -> Result<&'a T, RunError> {
    block.as_ref().ok_or_else(|| {
        usage(format!("experiment `{experiment}` requires the `{name}` block/key"))
    })
}

struct Ctx {
    cfg: ExperimentConfig,
    cfg_text: String,
    outdir: PathBuf,
    verbose: bool,
    started: Instant,
    extras: serde_json::Map<String, serde_json::Value>,
}

impl Ctx {
    fn note(&mut self, key: &str, value: serde_json::Value) {
        self.extras.insert(key.to_string(), value);
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), RunError> {
        fs::write(self.outdir.join(name), contents)?;
        Ok(())
    }

    fn make_path(&self) -> Result<SamplePath, RunError> {
        let pb = req(&self.cfg.path, "path", &self.cfg.experiment)?;
        let d = self.cfg.dims.as_ref().map_or(1, |d| d.d);
        let mut p = sample_path(d, pb.horizon, pb.n_steps, self.cfg.seed)?;
        if let Some(f) = pb.refine {
            if f > 1 {
                p = p.refine(f)?;
            }
        }
        Ok(p)
    }

    fn coefficients(&self) -> Result<CoefficientSuite, RunError> {
        let b = req(&self.cfg.coefficients, "coefficients", &self.cfg.experiment)?;
        Ok(coefficient_family(&b.family, &b.params)?)
    }

    fn field(&self) -> Result<RandomField, RunError> {
        let b = req(&self.cfg.field, "field", &self.cfg.experiment)?;
        Ok(field_family(&b.family, &b.params)?)
    }

    fn lattice(&self) -> Result<ScanLattice, RunError> {
        let b = req(&self.cfg.lattice, "lattice", &self.cfg.experiment)?;
        match b.pairing.as_deref().unwrap_or("matched") {
            "matched" => Ok(ScanLattice::matched(b.deltas.clone())),
            "product" => {
                let hs = b
                    .hs
                    .clone()
                    .ok_or_else(|| usage("lattice.pairing = \"product\" requires lattice.hs"))?;
                Ok(ScanLattice { deltas: b.deltas.clone(), hs, pairing: Pairing::Product })
            }
            other => Err(usage(format!("unknown lattice.pairing `{other}`"))),
        }
    }

    fn fd_grid(&self) -> Result<FDGrid, RunError> {
        let g = req(&self.cfg.grid, "grid", &self.cfg.experiment)?;
        Ok(FDGrid::new(g.x_lo, g.x_hi, g.n_x)?)
    }

    /// Initial data: the configured field frozen at t = 0.
    fn initial_data(&self, path: &SamplePath) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>, RunError> {
        let field = self.field()?;
        let p = path.clone();
        Ok(Arc::new(move |x: f64| field.evaluate(0.0, x, &p).unwrap_or(f64::NAN)))
    }

    /// Deterministic interior sample points for the viscosity experiments,
    /// with times snapped to the path grid.
    fn sample_points(&self, n: usize, horizon: f64, n_steps: usize, min_t: f64) -> Vec<(f64, f64)> {
        let mut rng = child_rng(self.cfg.seed, "points", 0);
        let dt = horizon / n_steps as f64;
        let k_lo = (min_t / dt).ceil() as usize;
        let k_hi = (0.95 * horizon / dt).floor() as usize;
        (0..n)
            .map(|_| {
                let k = k_lo + ((k_hi - k_lo) as f64 * rng.random::<f64>()) as usize;
                let x = -2.0 + 4.0 * rng.random::<f64>();
                (k as f64 * dt, x)
            })
            .collect()
    }
}

fn fmt_bool(b: bool) -> &'static str {
    if b { "true" } else { "false" }
}

fn run(ctx: &mut Ctx) -> RunResult {
    match ctx.cfg.experiment.as_str() {
        "gen-path" => gen_path(ctx),
        "levy-check" => levy_check(ctx),
        "taylor-order" => taylor_order(ctx),
        "check-viscosity" => check_viscosity(ctx),
        "convert" => convert(ctx),
        "solve-fd" => solve_fd(ctx),
        "solve-characteristics" | "feynman-kac" => solve_characteristics(ctx),
        "compare" => compare(ctx),
        "envelope" => envelope(ctx),
        other => Err(usage(format!("unknown experiment `{other}`"))),
    }
}

fn gen_path(ctx: &mut Ctx) -> RunResult {
    let p = ctx.make_path()?;
    let mut bin = Vec::new();
    p.write_binary(&mut bin)?;
    fs::write(ctx.outdir.join("path.pwpf"), bin)?;
    let mut csv = Vec::new();
    p.write_csv(&mut csv)?;
    fs::write(ctx.outdir.join("path.csv"), csv)?;
    ctx.note("n_steps", p.n_steps().into());
    Ok(true)
}

fn levy_check(ctx: &mut Ctx) -> RunResult {
    let pb = req(&ctx.cfg.path, "path", "levy-check")?.clone();
    let d = ctx.cfg.dims.as_ref().map_or(2, |d| d.d);
    let n_seeds = ctx.cfg.n_seeds.unwrap_or(50);
    let tol = ctx
        .cfg
        .tolerances
        .as_ref()
        .and_then(|t| t.identity_tol)
        .unwrap_or(1e-10);
    let mut csv = String::from("seed,antisymmetry,product_rule,chen\n");
    let mut pass = true;
    for i in 0..n_seeds {
        let seed = ctx.cfg.seed.wrapping_add(i as u64);
        let p = sample_path(d, pb.horizon, pb.n_steps, seed)?;
        let lvl = p.second_level_idx(0, p.n_steps())?;
        let anti = (&lvl.levy + lvl.levy.transpose()).amax();
        let bbt = &lvl.increment * lvl.increment.transpose();
        let product = (&lvl.strat_matrix + lvl.strat_matrix.transpose() - bbt).amax();
        let chen = p.chen_check_idx(0, p.n_steps() / 2, p.n_steps())?;
        pass &= anti <= tol && product <= tol && chen <= tol;
        csv.push_str(&format!("{seed},{anti:e},{product:e},{chen:e}\n"));
    }
    ctx.write("levy-check.csv", &csv)?;
    Ok(pass)
}

fn taylor_order(ctx: &mut Ctx) -> RunResult {
    let field = ctx.field()?;
    let suite = ctx.coefficients()?;
    let pb = req(&ctx.cfg.path, "path", "taylor-order")?.clone();
    let lattice = ctx.lattice()?;
    let query = req(&ctx.cfg.query, "query", "taylor-order")?.clone();
    let n_seeds = ctx.cfg.n_seeds.unwrap_or(1);
    let mut csv = String::from("seed,t,x,delta,h_norm,remainder,scale\n");
    let mut log_x = Vec::new();
    let mut log_y = Vec::new();
    for i in 0..n_seeds {
        let seed = ctx.cfg.seed.wrapping_add(i as u64);
        let mut p = sample_path(1, pb.horizon, pb.n_steps, seed)?;
        if let Some(f) = pb.refine {
            if f > 1 {
                p = p.refine(f)?;
            }
        }
        for &x in &query.xs {
            for (delta, h) in lattice.points() {
                let r = remainder(&field, &suite, query.t, x, delta, h, &p, TimeSlot::PathTime)?;
                let scale = delta + h * h;
                csv.push_str(&format!(
                    "{seed},{},{x},{delta},{},{r:e},{scale:e}\n",
                    query.t,
                    h.abs()
                ));
                if r.abs() > 1e-13 {
                    log_x.push(scale.ln());
                    log_y.push(r.abs().ln());
                }
            }
        }
    }
    ctx.write("taylor-order.csv", &csv)?;
    let fit = fit_line(&log_x, &log_y)?;
    ctx.write(
        "taylor-order-summary.csv",
        &format!("slope,intercept,n_points\n{},{},{}\n", fit.slope, fit.intercept, fit.n_points),
    )?;
    ctx.note("slope", fit.slope.into());
    let slope_min = ctx.cfg.tolerances.as_ref().and_then(|t| t.slope_min);
    Ok(slope_min.is_none_or(|m| fit.slope >= m))
}

fn viscosity_cfg(ctx: &Ctx, deltas: Vec<f64>, horizon: f64, n_steps: usize) -> ConsistencyConfig {
    let t = ctx.cfg.tolerances.clone().unwrap_or(TolerancesBlock {
        alpha: None,
        tau: None,
        f_tol: None,
        identity_tol: None,
        slope_min: None,
    });
    let mut cfg = ConsistencyConfig::default();
    cfg.alpha = t.alpha.unwrap_or(cfg.alpha);
    cfg.tau = t.tau.unwrap_or(cfg.tau);
    cfg.f_tol = t.f_tol.unwrap_or(cfg.f_tol);
    cfg.horizon = horizon;
    cfg.n_steps = n_steps;
    cfg.deltas = deltas;
    cfg
}

fn check_viscosity(ctx: &mut Ctx) -> RunResult {
    let field = ctx.field()?;
    let suite = ctx.coefficients()?;
    let pb = req(&ctx.cfg.path, "path", "check-viscosity")?.clone();
    let deltas = req(&ctx.cfg.lattice, "lattice", "check-viscosity")?.deltas.clone();
    let cfg = viscosity_cfg(ctx, deltas.clone(), pb.horizon, pb.n_steps);
    let n_seeds = ctx.cfg.n_seeds.unwrap_or(20);
    let n_points = ctx.cfg.n_points.unwrap_or(100);
    let max_delta = deltas.iter().cloned().fold(0.0, f64::max);
    let points = ctx.sample_points(n_points, pb.horizon, pb.n_steps, (0.1 * pb.horizon).max(2.0 * max_delta));
    let seeds: Vec<u64> = (0..n_seeds).map(|i| ctx.cfg.seed.wrapping_add(i as u64)).collect();
    let report = consistency_experiment(&field, &suite, &points, &seeds, &cfg)?;
    let mut csv = String::from("seed,t,x,side,a_minus_f,ratio_max,member,pass\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{:e},{:e},{},{}\n",
            r.seed,
            r.t,
            r.x,
            r.side.as_str(),
            r.a_minus_f,
            r.ratio_max,
            fmt_bool(r.member),
            fmt_bool(r.pass)
        ));
    }
    ctx.write("check-viscosity.csv", &csv)?;
    ctx.note("max_abs_a_minus_f", report.max_abs_a_minus_f.into());
    Ok(report.pass)
}

fn convert(ctx: &mut Ctx) -> RunResult {
    let field = ctx.field()?;
    let suite = ctx.coefficients()?;
    let pb = req(&ctx.cfg.path, "path", "convert")?.clone();
    let deltas = req(&ctx.cfg.lattice, "lattice", "convert")?.deltas.clone();
    let cfg = viscosity_cfg(ctx, deltas.clone(), pb.horizon, pb.n_steps);
    let lam = ctx.cfg.lambda.unwrap_or(1.0);
    let lambda: Arc<pathwise::coefficients::LambdaFn> = Arc::new(move |_| lam);
    let tsuite = change_of_variable(&suite, lambda.clone());
    let tfield = transform_field(&field, lambda)?;
    let n_points = ctx.cfg.n_points.unwrap_or(20);
    let max_delta = deltas.iter().cloned().fold(0.0, f64::max);
    let points = ctx.sample_points(n_points, pb.horizon, pb.n_steps, (0.1 * pb.horizon).max(2.0 * max_delta));
    let path = sample_path(1, pb.horizon, pb.n_steps, ctx.cfg.seed)?;
    let lattice = ScanLattice::matched(cfg.deltas.clone());
    let mut csv = String::from("t,x,side,pass_base,pass_transformed,agree\n");
    let mut all_agree = true;
    for &(t, x) in &points {
        for side in [SolutionSide::Subsolution, SolutionSide::Supersolution] {
            let jet = canonical_jet(&field, t, x, &path)?;
            let base = check_point(
                &field, &suite, t, x, &path, std::slice::from_ref(&jet), side, cfg.alpha, cfg.tau,
                cfg.f_tol, &lattice,
            )?;
            let tjet = canonical_jet(&tfield, t, x, &path)?;
            let trans = check_point(
                &tfield, &tsuite, t, x, &path, std::slice::from_ref(&tjet), side, cfg.alpha,
                cfg.tau, cfg.f_tol, &lattice,
            )?;
            let agree = base.pass == trans.pass;
            all_agree &= agree;
            csv.push_str(&format!(
                "{t},{x},{},{},{},{}\n",
                side.as_str(),
                fmt_bool(base.pass),
                fmt_bool(trans.pass),
                fmt_bool(agree)
            ));
        }
    }
    ctx.write("convert.csv", &csv)?;
    Ok(all_agree)
}

fn write_sampled_csv(
    ctx: &Ctx,
    name: &str,
    field: &pathwise::fields::SampledField,
    stride: usize,
) -> Result<(), RunError> {
    let mut csv = String::from("t,x,value\n");
    let last = field.t_grid.len() - 1;
    let mut it = 0;
    while it <= last {
        for (ix, &x) in field.x_grid.iter().enumerate() {
            csv.push_str(&format!("{},{x},{}\n", field.t_grid[it], field.value(it, ix)));
        }
        if it == last {
            break;
        }
        it = (it + stride).min(last);
    }
    ctx.write(name, &csv)
}

fn solve_fd(ctx: &mut Ctx) -> RunResult {
    let suite = ctx.coefficients()?;
    let p = ctx.make_path()?;
    let grid = ctx.fd_grid()?;
    let u0 = ctx.initial_data(&p)?;
    let cfl = cfl_number(&suite, &grid, &p);
    let out = match ctx.cfg.form.as_deref().unwrap_or("stratonovich") {
        "stratonovich" => solve_fd_stratonovich(&suite, &*u0, &grid, &p)?,
        "ito" => solve_fd_ito(&suite, &*u0, &grid, &p)?,
        other => return Err(usage(format!("unknown form `{other}`"))),
    };
    let stride = ctx
        .cfg
        .grid
        .as_ref()
        .and_then(|g| g.t_stride)
        .unwrap_or_else(|| (p.n_steps() / 64).max(1));
    write_sampled_csv(ctx, "solve-fd.csv", &out, stride)?;
    // boundary influence: how far the first interior node drifts from its
    // initial value (frozen-tail Dirichlet makes this a proxy for box error)
    let nb = out
        .t_grid
        .iter()
        .enumerate()
        .map(|(it, _)| (out.value(it, 1) - out.value(0, 1)).abs())
        .fold(0.0f64, f64::max);
    ctx.note("cfl", cfl.into());
    ctx.note("boundary_influence", nb.into());
    Ok(true)
}

fn solve_characteristics(ctx: &mut Ctx) -> RunResult {
    let suite = ctx.coefficients()?;
    let p = ctx.make_path()?;
    let g = req(&ctx.cfg.grid, "grid", &ctx.cfg.experiment)?.clone();
    let mcb = req(&ctx.cfg.mc, "mc", &ctx.cfg.experiment)?.clone();
    let query = req(&ctx.cfg.query, "query", &ctx.cfg.experiment)?.clone();
    let u0 = ctx.initial_data(&p)?;
    let x_grid = uniform_grid(g.x_lo, g.x_hi, g.n_x);
    let pipe = linear_pipeline(&suite, &p, &x_grid, g.t_sub.unwrap_or(65))?;
    let mc = McParams {
        samples: mcb.samples,
        inner_steps: mcb.inner_steps,
        master_seed: ctx.cfg.seed,
    };
    let mut csv = String::from("t,x,v,se,w\n");
    let mut clamps = 0usize;
    for &x in &query.xs {
        let z = pipe.bundle.zeta(query.t, x)?;
        let est = feynman_kac(&pipe.reduced, &*u0, query.t, z, &mc)?;
        let m = pipe.bundle.m_at(query.t, z)?;
        clamps += est.clamp_events;
        csv.push_str(&format!(
            "{},{x},{},{},{}\n",
            query.t,
            est.mean,
            est.std_error,
            m * est.mean
        ));
    }
    ctx.write("solve-characteristics.csv", &csv)?;
    ctx.note("clamp_events", clamps.into());
    ctx.note("inner_steps", mcb.inner_steps.into());
    ctx.note("samples", mcb.samples.into());
    Ok(true)
}

fn compare(ctx: &mut Ctx) -> RunResult {
    let suite = ctx.coefficients()?;
    let pb = req(&ctx.cfg.path, "path", "compare")?.clone();
    let gap = req(&ctx.cfg.compare, "compare", "compare")?.gap;
    let grid = ctx.fd_grid()?;
    let n_seeds = ctx.cfg.n_seeds.unwrap_or(10);
    let paths: Vec<SamplePath> = (0..n_seeds)
        .map(|i| sample_path(1, pb.horizon, pb.n_steps, ctx.cfg.seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    let u0 = ctx.initial_data(&paths[0])?;
    let u0c = u0.clone();
    let v0 = move |x: f64| u0c(x) + gap;
    let report = classical_comparison_experiment(&suite, &*u0, &v0, &paths, &grid)?;
    let mut csv = String::from("seed,min_gap,pass\n");
    for (i, &g) in report.min_gap.iter().enumerate() {
        csv.push_str(&format!(
            "{},{g},{}\n",
            ctx.cfg.seed.wrapping_add(i as u64),
            fmt_bool(g >= -1e-6)
        ));
    }
    ctx.write("compare.csv", &csv)?;
    if report.skipped {
        return Err(RunError::Experiment(
            "precondition violated: initial data cross (u0 > v0 somewhere); experiment skipped"
                .into(),
        ));
    }
    Ok(report.pass)
}

fn envelope(ctx: &mut Ctx) -> RunResult {
    let suite = ctx.coefficients()?;
    let p = ctx.make_path()?;
    let grid = ctx.fd_grid()?;
    let e = req(&ctx.cfg.envelope, "envelope", "envelope")?.clone();
    let report = envelope_experiment(&suite, e.u0_center, e.u0_var, &e.eps, &grid, &p)?;
    let mut csv = String::from("epsilon,max_gap,final_gap,min_ordering\n");
    for (i, &eps) in report.eps.iter().enumerate() {
        csv.push_str(&format!(
            "{eps},{},{},{}\n",
            report.max_gap[i], report.final_gap[i], report.min_ordering[i]
        ));
    }
    ctx.write("envelope.csv", &csv)?;
    ctx.note("ordering_ok", report.ordering_ok.into());
    ctx.note("monotone", report.monotone.into());
    Ok(report.ordering_ok && report.monotone)
}

fn write_metadata(ctx: &Ctx, pass: bool) -> Result<(), RunError> {
    let meta = serde_json::json!({
        "experiment": ctx.cfg.experiment,
        "library_version": pathwise::VERSION,
        "pass": pass,
        "wall_clock_seconds": ctx.started.elapsed().as_secs_f64(),
        "config": ctx.cfg_text,
        "extras": serde_json::Value::Object(ctx.extras.clone()),
    });
    ctx.write("metadata.json", &serde_json::to_string_pretty(&meta).unwrap())?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let text = match fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", cli.config.display());
            std::process::exit(1);
        }
    };
    let cfg: ExperimentConfig = match toml::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config: {e}");
            std::process::exit(1);
        }
    };
    let outdir = cli
        .output
        .clone()
        .or_else(|| cfg.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| Path::new(".").to_path_buf());
    if let Err(e) = fs::create_dir_all(&outdir) {
        eprintln!("error: cannot create output dir {}: {e}", outdir.display());
        std::process::exit(1);
    }
    let mut ctx = Ctx {
        cfg,
        cfg_text: text,
        outdir,
        verbose: cli.verbose,
        started: Instant::now(),
        extras: serde_json::Map::new(),
    };
    let result = pathwise::exec::with_thread_bound(cli.threads, || {
        let r = run(&mut ctx);
        (r, ctx)
    });
    let (r, ctx) = result;
    match r {
        Ok(pass) => {
            if let Err(RunError::Usage(e)) | Err(RunError::Experiment(e)) =
                write_metadata(&ctx, pass)
            {
                eprintln!("error: metadata: {e}");
                std::process::exit(1);
            }
            if ctx.verbose {
                eprintln!(
                    "{}: {} in {:.2}s",
                    ctx.cfg.experiment,
                    if pass { "pass" } else { "fail" },
                    ctx.started.elapsed().as_secs_f64()
                );
            }
            std::process::exit(if pass { 0 } else { 2 });
        }
        Err(RunError::Usage(e)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
        Err(RunError::Experiment(e)) => {
            let _ = write_metadata(&ctx, false);
            eprintln!("experiment failed: {e}");
            std::process::exit(2);
        }
    }
}
