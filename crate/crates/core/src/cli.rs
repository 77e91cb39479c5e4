//! Command-line driver. Every command prints a one-line summary
//! `STATUS=<ok|fail|error> SUITE=<name> MAX_RESIDUAL=<float>` last on
//! standard output; exit codes are 0 pass, 1 verification failure, 2 bad
//! input.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checks::{self, open_square, square_rim_distance, upper_hemisphere, PullbackConfig, DEFAULT_TOL};
use crate::discretize::io::{cloud_to_file, field_to_json, graph_to_file, write_field_csv, write_json};
use crate::discretize::{build_graph, grid, partition, sample, BoundarySet, Graph, PointCloud};
use crate::error::{Error, Result};
use crate::field::{DiscreteField, ScalarField};
use crate::hj::{eikonal_solve, regularity_check, stationary_solve, verify_viscosity, EquationForm, Hamiltonian, Profile, ScreenParams, SolveOptions, SweepOrder, H_SLACK};
use crate::manifold::{Kind, Manifold, ManifoldSpec, Point};

/// Verification residuals above `VERIFY_FACTOR tol + 3h` fail a solve.
pub const VERIFY_FACTOR: f64 = 10.0;

#[derive(Parser, Debug)]
#[command(name = "rhj", version, about = "Nonsmooth analysis and Hamilton-Jacobi solvers on Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a point cloud on a catalog manifold.
    Sample(Common),
    /// Sample a cloud and build its k-nearest-neighbor graph.
    Graph(Common),
    /// Solve the eikonal or a stationary equation and verify the result.
    Solve {
        #[arg(value_enum)]
        equation: Equation,
        #[command(flatten)]
        common: Common,
    },
    /// Run a property suite: transport, calculus, variational, convexity, hj, all.
    Check {
        /// Suite name [default: all].
        suite: Option<String>,
        /// Same as the positional suite name.
        #[arg(long)]
        suite_name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve on the tube, transfer to the cusp, verify on both.
    PullbackDemo {
        /// Pull back along the identity instead.
        #[arg(long)]
        identity: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Equation {
    Eikonal,
    Stationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudKind {
    Random,
    Grid,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// euclidean, sphere, hyperbolic, torus, circle, cusp or tube.
    #[arg(long)]
    manifold: Option<String>,
    /// Dimension, for euclidean and torus.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of sample points [default: 1000].
    #[arg(long)]
    n: Option<usize>,
    /// Neighbors per vertex in the graph [default: 8].
    #[arg(long)]
    k: Option<usize>,
    /// Seed for every random draw [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Verification tolerance [default: 1e-6].
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    cloud: Option<CloudKind>,
    /// Write the cloud, graph or field here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Region name: hemisphere, square.
    #[arg(long)]
    boundary: Option<String>,
    /// Hamiltonian spec: JSON text or a path to a JSON file.
    #[arg(long)]
    hamiltonian: Option<String>,
    #[arg(long, value_enum)]
    order: Option<Order>,
    /// JSON run configuration; flags given explicitly take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Order {
    Forward,
    Reverse,
    Alternating,
}

/// Fully resolved run parameters; serializable so every report records how
/// to reproduce it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub cloud: CloudKind,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub report: Option<PathBuf>,
    pub boundary: Option<String>,
    pub hamiltonian: Option<Value>,
    pub order: SweepOrder,
    pub suite: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifold: ManifoldSpec { name: "sphere".into(), ..Default::default() },
            n: 1000,
            k: 8,
            seed: 1,
            tol: DEFAULT_TOL,
            cloud: CloudKind::Random,
            out: None,
            format: Format::Csv,
            report: None,
            boundary: None,
            hamiltonian: None,
            order: SweepOrder::Alternating,
            suite: None,
        }
    }
}

impl RunConfig {
    fn resolve(c: &Common) -> Result<Self> {
        let mut cfg: RunConfig = match &c.config {
            Some(path) => serde_json::from_reader(std::fs::File::open(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(name) = &c.manifold {
            cfg.manifold = ManifoldSpec { name: name.clone(), ..Default::default() };
        }
        if c.dim.is_some() {
            cfg.manifold.dim = c.dim;
        }
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = &c.$f { cfg.$f = v.clone(); })* };
        }
        take!(n, k, seed, tol, cloud, format);
        if c.out.is_some() {
            cfg.out = c.out.clone();
        }
        if c.report.is_some() {
            cfg.report = c.report.clone();
        }
        if c.boundary.is_some() {
            cfg.boundary = c.boundary.clone();
        }
        if let Some(h) = &c.hamiltonian {
            cfg.hamiltonian = Some(parse_json_arg(h)?);
        }
        if let Some(o) = c.order {
            cfg.order = match o {
                Order::Forward => SweepOrder::Forward,
                Order::Reverse => SweepOrder::Reverse,
                Order::Alternating => SweepOrder::Alternating,
            };
        }
        if !(cfg.tol >= 0.0) {
            return Err(Error::InvalidInput(format!("tol must be nonnegative, got {}", cfg.tol)));
        }
        Ok(cfg)
    }

    fn manifold(&self) -> Result<Manifold> {
        Manifold::from_spec(&self.manifold)
    }

    fn cloud(&self) -> Result<PointCloud> {
        let m = self.manifold()?;
        match self.cloud {
            CloudKind::Random => sample(&m, self.n, self.seed),
            CloudKind::Grid => {
                let per_axis = (self.n as f64).powf(1.0 / m.dim() as f64).round().max(1.0) as usize;
                grid(&m, per_axis)
            }
        }
    }
}

fn parse_json_arg(s: &str) -> Result<Value> {
    if s.trim_start().starts_with('{') {
        Ok(serde_json::from_str(s)?)
    } else {
        Ok(serde_json::from_reader(std::fs::File::open(s)?)?)
    }
}

/// `{tag, H, f, A}`: `H` is `"linear"`, `{"linear": c}` or
/// `{"table": [[s, H(s)], ...]}` (piecewise linear, extended with the last
/// slope); `f` is `"const:<c>"`, `"coord:<i>"` or `"manufactured"`
/// (sphere, `z + sqrt(1 - z^2)`).
#[derive(Clone, Debug, Deserialize)]
pub struct HamiltonianSpec {
    #[serde(default = "norm_based_tag")]
    pub tag: String,
    #[serde(rename = "H")]
    pub h: Value,
    pub f: String,
    #[serde(rename = "A")]
    pub a: Option<f64>,
}

fn norm_based_tag() -> String {
    "norm_based".into()
}

fn profile(v: &Value) -> Result<Profile> {
    let bad = || Error::InvalidInput(format!("unknown profile {v}"));
    match v {
        Value::String(s) if s == "linear" => Ok(Arc::new(|s| s)),
        Value::Object(o) if o.contains_key("linear") => {
            let c = o["linear"].as_f64().ok_or_else(bad)?;
            if c < 0.0 {
                return Err(Error::InvalidInput("linear profile needs a nonnegative slope".into()));
            }
            Ok(Arc::new(move |s| c * s))
        }
        Value::Object(o) if o.contains_key("table") => {
            let rows: Vec<(f64, f64)> = serde_json::from_value(o["table"].clone())?;
            if rows.len() < 2 || rows[0].0 != 0.0 {
                return Err(Error::InvalidInput("table needs at least two rows starting at s = 0".into()));
            }
            if rows.windows(2).any(|w| !(w[1].0 > w[0].0) || w[1].1 < w[0].1) {
                return Err(Error::InvalidInput("table must have increasing s and nondecreasing H".into()));
            }
            Ok(Arc::new(move |s| {
                let j = rows.partition_point(|r| r.0 <= s).clamp(1, rows.len() - 1);
                let ((s0, h0), (s1, h1)) = (rows[j - 1], rows[j]);
                h0 + (h1 - h0) * (s - s0) / (s1 - s0)
            }))
        }
        _ => Err(bad()),
    }
}

fn named_field(m: &Manifold, name: &str) -> Result<ScalarField> {
    if let Some(c) = name.strip_prefix("const:") {
        let c: f64 = c.parse().map_err(|_| Error::InvalidInput(format!("bad constant in {name}")))?;
        return Ok(ScalarField::new(move |_| c));
    }
    if let Some(i) = name.strip_prefix("coord:") {
        let i: usize = i.parse().map_err(|_| Error::InvalidInput(format!("bad coordinate in {name}")))?;
        if i >= m.ambient_dim() {
            return Err(Error::InvalidInput(format!("{name}: {} has {} coordinates", m.name(), m.ambient_dim())));
        }
        return Ok(ScalarField::new(move |p: &Point| p.coords[i]));
    }
    if name == "manufactured" {
        if *m.kind() != Kind::Sphere {
            return Err(Error::InvalidInput("the manufactured source lives on the sphere".into()));
        }
        return Ok(checks::manufactured_sphere().0.parts()?.1.clone());
    }
    Err(Error::InvalidInput(format!("unknown field {name:?}")))
}

fn build_hamiltonian(m: &Manifold, spec: &Value, points: &[Point]) -> Result<(Hamiltonian, Option<ScalarField>)> {
    let spec: HamiltonianSpec = serde_json::from_value(spec.clone()).map_err(|e| Error::InvalidInput(format!("Hamiltonian spec: {e}")))?;
    if spec.tag != "norm_based" {
        return Err(Error::InvalidInput(format!("the solver needs tag norm_based, got {:?}", spec.tag)));
    }
    let h = profile(&spec.h)?;
    let f = named_field(m, &spec.f)?;
    let ham0 = Hamiltonian::norm_based(m, h.clone(), f.clone(), 0.0);
    let a = spec.a.unwrap_or_else(|| ham0.zero_section_sup(points));
    let exact = (spec.f == "manufactured" && spec.h == json!("linear")).then(|| checks::manufactured_sphere().1);
    Ok((Hamiltonian::norm_based(m, h, f, a), exact))
}

fn region(graph: &Graph, name: &str) -> Result<(BoundarySet, Box<dyn Fn(&Point) -> f64>)> {
    let m = &graph.manifold;
    match name {
        "hemisphere" if *m.kind() == Kind::Sphere => Ok((partition(graph, upper_hemisphere)?, Box::new(|p: &Point| p.coords[2].asin()))),
        "square" if *m.kind() == (Kind::Euclidean { dim: 2 }) && m.bounds() == [(0.0, 1.0), (0.0, 1.0)] => {
            Ok((partition(graph, open_square)?, Box::new(square_rim_distance)))
        }
        _ => Err(Error::InvalidInput(format!("boundary {name:?} is not available on {}{}", m.name(), m.dim()))),
    }
}

struct Outcome {
    status: Status,
    suite: String,
    max_residual: f64,
    lines: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    Fail,
}

fn write_report(path: &Option<PathBuf>, value: &Value) -> Result<()> {
    if let Some(p) = path {
        write_json(value, p)?;
    }
    Ok(())
}

fn write_field(f: &DiscreteField, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_field_csv(f, path),
        Format::Json => write_json(&field_to_json(f), path),
    }
}

fn graph_summary(g: &Graph) -> String {
    format!("n={} k={} h={:.6e} edges={} components={}", g.len(), g.k, g.h, g.edges.len(), g.component_sizes().len())
}

fn cmd_sample(cfg: &RunConfig) -> Result<Outcome> {
    let cloud = cfg.cloud()?;
    if let Some(out) = &cfg.out {
        write_json(&cloud_to_file(&cloud), out)?;
    }
    write_report(&cfg.report, &json!({ "config": cfg, "n": cloud.len() }))?;
    Ok(Outcome { status: Status::Ok, suite: "sample".into(), max_residual: 0.0, lines: vec![format!("n={} manifold={}", cloud.len(), cloud.manifold.name())] })
}

fn cmd_graph(cfg: &RunConfig) -> Result<Outcome> {
    let g = build_graph(&cfg.cloud()?, cfg.k)?;
    if let Some(out) = &cfg.out {
        write_json(&graph_to_file(&g), out)?;
    }
    write_report(&cfg.report, &json!({ "config": cfg, "n": g.len(), "k": g.k, "h": g.h, "edges": g.edges.len() }))?;
    Ok(Outcome { status: Status::Ok, suite: "graph".into(), max_residual: 0.0, lines: vec![graph_summary(&g)] })
}

fn cmd_solve(cfg: &RunConfig, equation: Equation) -> Result<Outcome> {
    let g = build_graph(&cfg.cloud()?, cfg.k)?;
    let screen = ScreenParams::default();
    let (u, report) = match equation {
        Equation::Eikonal => {
            let name = cfg.boundary.as_deref().ok_or_else(|| Error::InvalidInput("eikonal solve needs --boundary".into()))?;
            let (band, exact) = region(&g, name)?;
            let u = eikonal_solve(&g, &band)?;
            let v = verify_viscosity(&u, &Hamiltonian::eikonal(&g.manifold), &g, Some(&band), EquationForm::Eikonal, screen)?;
            let error = checks::eikonal_error(&g, &band, &u, exact);
            let lipschitz = regularity_check(&u, 1.0, &g);
            let report = json!({
                "equation": "eikonal",
                "boundary_vertices": band.boundary.len(),
                "interior_vertices": band.interior.len(),
                "iterations": 1,
                "verification": { "max_sub": v.max_sub, "max_super": v.max_super, "checked": v.checked.len() },
                "error_vs_analytic": error,
                "lipschitz": lipschitz,
            });
            (u, (report, v.max_residual()))
        }
        Equation::Stationary => {
            let spec = cfg.hamiltonian.as_ref().ok_or_else(|| Error::InvalidInput("stationary solve needs --hamiltonian".into()))?;
            let (ham, exact) = build_hamiltonian(&g.manifold, spec, &g.points)?;
            let opts = SolveOptions { tol: checks::solver_tol(cfg.tol), max_sweeps: None, order: cfg.order };
            let (u, rep) = stationary_solve(&ham, &g, opts)?;
            let v = verify_viscosity(&u, &ham, &g, None, EquationForm::Stationary, screen)?;
            let error = exact.map(|e| u.sup_distance(&e.sample(&g.points)));
            let report = json!({
                "equation": "stationary",
                "iterations": rep.sweeps,
                "solver": rep,
                "verification": { "max_sub": v.max_sub, "max_super": v.max_super, "checked": v.checked.len() },
                "error_vs_analytic": error,
            });
            (u, (report, v.max_residual()))
        }
    };
    let (mut report, residual) = report;
    let threshold = VERIFY_FACTOR * cfg.tol + H_SLACK * g.h;
    let pass = residual <= threshold;
    report["h"] = json!(g.h);
    report["residual"] = json!(residual);
    report["threshold"] = json!(threshold);
    report["pass"] = json!(pass);
    report["config"] = serde_json::to_value(cfg)?;
    if let Some(out) = &cfg.out {
        write_field(&u, out, cfg.format)?;
    }
    write_report(&cfg.report, &report)?;
    let mut lines = vec![graph_summary(&g)];
    if let Some(e) = report["error_vs_analytic"].as_f64() {
        lines.push(format!("error_vs_analytic={e:.6e} h={:.6e}", g.h));
    }
    if !pass {
        lines.push(format!("verification residual {residual:.6e} exceeds {threshold:.6e}"));
    }
    Ok(Outcome { status: if pass { Status::Ok } else { Status::Fail }, suite: format!("solve-{}", report["equation"].as_str().unwrap_or("")), max_residual: residual, lines })
}

fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let suite = cfg.suite.clone().unwrap_or_else(|| "all".into());
    let rep = checks::run_suite(&suite, cfg.seed, cfg.tol)?;
    write_report(&cfg.report, &serde_json::to_value(&rep)?)?;
    let mut lines: Vec<String> = rep.assertions.iter().map(|a| format!("{} {} value={:.6e} bound={:.6e}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.value, a.bound)).collect();
    if let Some(f) = &rep.first_failure {
        lines.push(format!("first failure: {f}"));
    }
    Ok(Outcome { status: if rep.pass { Status::Ok } else { Status::Fail }, suite, max_residual: rep.max_residual, lines })
}

fn cmd_pullback(cfg: &RunConfig, identity: bool, explicit_n: bool) -> Result<Outcome> {
    let base = PullbackConfig::default();
    let pc = PullbackConfig { n: if explicit_n { cfg.n } else { base.n }, k: cfg.k, seed: cfg.seed, tol: cfg.tol, identity };
    let rep = checks::pullback_demo(&pc)?;
    write_report(&cfg.report, &serde_json::to_value(&rep)?)?;
    let side = |s: &checks::SideResiduals| format!("{}: sub={:.6e} super={:.6e} threshold={:.6e} h={:.6e}", s.manifold, s.max_sub, s.max_super, s.threshold, s.h);
    let mut lines = vec![side(&rep.source), side(&rep.target), format!("jacobian_condition min={:.6} max={:.6}", rep.jacobian_condition.0, rep.jacobian_condition.1)];
    if let Some(gap) = rep.hamiltonian_gap {
        lines.push(format!("identity |G - F| max={gap:.3e}"));
    }
    let max_residual = rep.source.max_residual().max(rep.target.max_residual());
    Ok(Outcome { status: if rep.pass { Status::Ok } else { Status::Fail }, suite: "pullback-demo".into(), max_residual, lines })
}

/// Input errors exit 2; failed checks, preconditions and numerics exit 1.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInput(_) | Error::OutOfRange { .. } | Error::Disconnected { .. } | Error::EmptyBoundary | Error::NoInterior | Error::NoBoundary | Error::Io(_) | Error::Json(_) | Error::Csv(_)
    )
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code == 2 {
                println!("STATUS=error SUITE=cli MAX_RESIDUAL=nan");
            }
            return code;
        }
    };
    let (name, result) = match &cli.command {
        Command::Sample(c) => ("sample", RunConfig::resolve(c).and_then(|cfg| cmd_sample(&cfg))),
        Command::Graph(c) => ("graph", RunConfig::resolve(c).and_then(|cfg| cmd_graph(&cfg))),
        Command::Solve { equation, common } => ("solve", RunConfig::resolve(common).and_then(|cfg| cmd_solve(&cfg, *equation))),
        Command::Check { suite, suite_name, common } => (
            "check",
            RunConfig::resolve(common).and_then(|mut cfg| {
                if let Some(s) = suite.clone().or_else(|| suite_name.clone()) {
                    cfg.suite = Some(s);
                }
                cmd_check(&cfg)
            }),
        ),
        Command::PullbackDemo { identity, common } => ("pullback-demo", RunConfig::resolve(common).and_then(|cfg| cmd_pullback(&cfg, *identity, common.n.is_some()))),
    };
    match result {
        Ok(out) => {
            for l in &out.lines {
                println!("{l}");
            }
            let status = if out.status == Status::Ok { "ok" } else { "fail" };
            println!("STATUS={status} SUITE={} MAX_RESIDUAL={:e}", out.suite, out.max_residual);
            if out.status == Status::Ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("STATUS=error SUITE={name} MAX_RESIDUAL=nan");
            if is_input_error(&e) {
                2
            } else {
                1
            }
        }
    }
}
