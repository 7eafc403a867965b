//! Batch front-end: scenario JSON in, CSV on standard output, diagnostics
//! on standard error. Exit codes: 0 success, 2 bad input, 3 mathematical
//! inadmissibility, 4 non-convergence.

use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use kq::kernel::{second_fixed_point, TreeFunction};
use kq::models::{self, ModelSpec, StationaryAnalysis};
use kq::oracle::{self, tail_of, Axis, OracleResult};
use kq::pgf::PgfSpec;
use kq::series;
use kq::Error;

#[derive(Parser)]
#[command(
    name = "kq",
    about = "Analytic and exact-iteration tail distributions for slotted queues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Series truncation order (overrides the scenario file)
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Largest backlog level R in the output (overrides the scenario file)
    #[arg(long, global = true)]
    rmax: Option<usize>,
    /// State-space cap for exact iteration (overrides the scenario file)
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Total-variation stopping tolerance (overrides the scenario file)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Threads to fan independent scenario files across
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Exact, asymptotic, and Doob reference tails from the generating functions
    Analyze {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Stationary tail measured by exact iteration of the chain
    Oracle {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Both pipelines merged, with the oracle/asymptotic ratio
    Compare {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Tree-function utilities for an offspring distribution
    Gw {
        pgf: PathBuf,
        /// Evaluate the tree function at z
        #[arg(long)]
        eval: Option<f64>,
        /// Print tree-size coefficients up to this order
        #[arg(long)]
        series: Option<usize>,
        /// Print the second fixed point of the offspring PGF
        #[arg(long)]
        beta: bool,
        /// Print the tangency point and convergence radius
        #[arg(long)]
        radius: bool,
    },
}

#[derive(Clone, Copy)]
struct Overrides {
    order: Option<usize>,
    r_max: Option<usize>,
    truncation: Option<usize>,
    tol: Option<f64>,
}

#[derive(Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    Single,
    RandomService,
    Priority,
    Tandem,
}

fn default_service_p() -> f64 {
    1.0
}
fn default_order() -> usize {
    series::DEFAULT_ORDER
}
fn default_r_max() -> usize {
    40
}
fn default_truncation() -> usize {
    oracle::DEFAULT_N_MAX
}
fn default_tol() -> f64 {
    oracle::DEFAULT_TOL
}
fn default_max_iterations() -> u64 {
    oracle::DEFAULT_MAX_ITERATIONS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    model: Model,
    arrivals: PgfSpec,
    #[serde(default)]
    arrivals_b: Option<PgfSpec>,
    #[serde(default = "default_service_p")]
    service_p: f64,
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_r_max")]
    r_max: usize,
    #[serde(default = "default_truncation")]
    truncation: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iterations")]
    max_iterations: u64,
}

impl Scenario {
    fn apply(&mut self, ov: &Overrides) {
        if let Some(order) = ov.order {
            self.order = order;
        }
        if let Some(r_max) = ov.r_max {
            self.r_max = r_max;
        }
        if let Some(truncation) = ov.truncation {
            self.truncation = truncation;
        }
        if let Some(tol) = ov.tol {
            self.tol = tol;
        }
    }

    fn validated(&self) -> Result<ModelSpec, String> {
        if self.order == 0 || self.order > series::MAX_ORDER {
            return Err(format!("order must be in 1..={}", series::MAX_ORDER));
        }
        if self.r_max + 16 > self.order {
            return Err("r_max must be at most order - 16".into());
        }
        if self.r_max > self.truncation {
            return Err("r_max must be at most truncation".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err("tol must be positive and finite".into());
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        let needs_b = matches!(self.model, Model::Priority | Model::Tandem);
        if needs_b && self.arrivals_b.is_none() {
            return Err("arrivals_b is required for priority and tandem models".into());
        }
        if !needs_b && self.arrivals_b.is_some() {
            return Err("arrivals_b is only meaningful for priority and tandem models".into());
        }
        if !matches!(self.model, Model::RandomService) && self.service_p != 1.0 {
            return Err("service_p is only meaningful for the random_service model".into());
        }
        let arrivals = self.arrivals.build().map_err(|e| e.to_string())?;
        let batch = |p: &kq::Pgf| p.degree().unwrap_or(0);
        if self.truncation < batch(&arrivals) {
            return Err("truncation must hold one arrival batch".into());
        }
        Ok(match self.model {
            Model::Single => ModelSpec::SingleDeterministic { arrivals },
            Model::RandomService => ModelSpec::RandomService {
                arrivals,
                p: self.service_p,
            },
            Model::Priority | Model::Tandem => {
                let b = self
                    .arrivals_b
                    .as_ref()
                    .unwrap()
                    .build()
                    .map_err(|e| e.to_string())?;
                if self.truncation < batch(&b).max(1) {
                    return Err("truncation must hold one second-flow batch".into());
                }
                if matches!(self.model, Model::Priority) {
                    ModelSpec::PriorityLowFlow {
                        arrivals_hi: arrivals,
                        arrivals_lo: b,
                    }
                } else {
                    ModelSpec::TandemSecondQueue {
                        arrivals_1: arrivals,
                        arrivals_2: b,
                    }
                }
            }
        })
    }

    fn reported_axis(&self) -> Axis {
        match self.model {
            Model::Single | Model::RandomService => Axis::X,
            Model::Priority | Model::Tandem => Axis::Y,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidProbability { .. }
        | Error::UnsupportedKind
        | Error::NotADistribution { .. } => 2,
        Error::NoConvergence { .. } => 4,
        _ => 3,
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn curve(prefactor: f64, base: f64, r: usize) -> f64 {
    prefactor * base.powi(-(r as i32))
}

fn analyze_csv(an: &StationaryAnalysis, r_max: usize) -> String {
    let mut out = String::from("R,exact,asymptotic,doob\n");
    for r in 0..=r_max {
        let exact = an.tail.as_ref().map(|t| num(t[r])).unwrap_or_default();
        let asym = num(curve(an.asym_prefactor, an.asym_base, r));
        let doob = num(curve(an.doob_prefactor, an.doob_base, r));
        out.push_str(&format!("{r},{exact},{asym},{doob}\n"));
    }
    out
}

fn oracle_csv(tail: &[f64], r_max: usize) -> String {
    let mut out = String::from("R,oracle\n");
    for (r, &t) in tail.iter().enumerate().take(r_max + 1) {
        out.push_str(&format!("{r},{}\n", num(t)));
    }
    out
}

fn compare_csv(an: &StationaryAnalysis, tail: &[f64], r_max: usize) -> String {
    let mut out = String::from("R,exact,asymptotic,doob,oracle,ratio\n");
    for r in 0..=r_max {
        let exact = an.tail.as_ref().map(|t| num(t[r])).unwrap_or_default();
        let asym = curve(an.asym_prefactor, an.asym_base, r);
        let doob = num(curve(an.doob_prefactor, an.doob_base, r));
        let ratio = num(tail[r] / asym);
        out.push_str(&format!(
            "{r},{exact},{},{doob},{},{ratio}\n",
            num(asym),
            num(tail[r])
        ));
    }
    out
}

fn diagnostics(res: &OracleResult) -> String {
    format!(
        "iterations={} final_tv={:.3e} clipped_mass_rate={:.3e}\n",
        res.iterations, res.final_tv, res.clipped_mass_rate
    )
}

fn run_oracle(spec: &ModelSpec, sc: &Scenario) -> Result<OracleResult, Error> {
    spec.validate()?;
    match spec {
        ModelSpec::SingleDeterministic { arrivals } => {
            oracle::stationary_1d(arrivals, 1.0, sc.truncation, sc.tol, sc.max_iterations)
        }
        ModelSpec::RandomService { arrivals, p } => {
            oracle::stationary_1d(arrivals, *p, sc.truncation, sc.tol, sc.max_iterations)
        }
        ModelSpec::PriorityLowFlow {
            arrivals_hi,
            arrivals_lo,
        } => oracle::stationary_2d_priority(
            arrivals_hi,
            arrivals_lo,
            sc.truncation,
            sc.tol,
            sc.max_iterations,
        ),
        ModelSpec::TandemSecondQueue {
            arrivals_1,
            arrivals_2,
        } => oracle::stationary_2d_tandem(
            arrivals_1,
            arrivals_2,
            sc.truncation,
            sc.tol,
            sc.max_iterations,
        ),
    }
}

#[derive(Clone, Copy)]
enum Pipeline {
    Analyze,
    Oracle,
    Compare,
}

/// Runs one scenario document to completion, returning buffered standard
/// output, buffered standard error, and the exit code.
fn run_scenario(pipeline: Pipeline, text: &str, ov: &Overrides) -> (String, String, i32) {
    let mut sc: Scenario = match serde_json::from_str(text) {
        Ok(sc) => sc,
        Err(e) => return (String::new(), format!("scenario: {e}\n"), 2),
    };
    sc.apply(ov);
    let spec = match sc.validated() {
        Ok(spec) => spec,
        Err(msg) => return (String::new(), format!("scenario: {msg}\n"), 2),
    };
    let analysis = match pipeline {
        Pipeline::Analyze | Pipeline::Compare => match models::analyze(&spec, sc.order, sc.r_max) {
            Ok(an) => Some(an),
            Err(e) => return (String::new(), format!("{e}\n"), exit_code(&e)),
        },
        Pipeline::Oracle => None,
    };
    let measured = match pipeline {
        Pipeline::Oracle | Pipeline::Compare => match run_oracle(&spec, &sc) {
            Ok(res) => Some(res),
            Err(e) => return (String::new(), format!("{e}\n"), exit_code(&e)),
        },
        Pipeline::Analyze => None,
    };
    match pipeline {
        Pipeline::Analyze => (analyze_csv(&analysis.unwrap(), sc.r_max), String::new(), 0),
        Pipeline::Oracle => {
            let res = measured.unwrap();
            let tail = tail_of(&res, sc.reported_axis());
            (oracle_csv(&tail, sc.r_max), diagnostics(&res), 0)
        }
        Pipeline::Compare => {
            let res = measured.unwrap();
            let tail = tail_of(&res, sc.reported_axis());
            (
                compare_csv(&analysis.unwrap(), &tail, sc.r_max),
                diagnostics(&res),
                0,
            )
        }
    }
}

/// Reads every input up front; `-` is standard input and may appear once.
fn read_inputs(paths: &[PathBuf]) -> Result<Vec<String>, String> {
    let mut texts = Vec::with_capacity(paths.len());
    let mut used_stdin = false;
    for path in paths {
        if path == Path::new("-") {
            if used_stdin {
                return Err("standard input may be used for at most one scenario".into());
            }
            used_stdin = true;
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| format!("standard input: {e}"))?;
            texts.push(text);
        } else {
            texts.push(
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
            );
        }
    }
    Ok(texts)
}

/// Independent scenarios fan out over a fixed-size thread pool; outputs
/// print in input order and the first nonzero exit code wins.
fn run_batch(pipeline: Pipeline, paths: &[PathBuf], ov: &Overrides, jobs: usize) -> i32 {
    let texts = match read_inputs(paths) {
        Ok(texts) => texts,
        Err(msg) => {
            eprintln!("{msg}");
            return 2;
        }
    };
    let n = texts.len();
    let results: Vec<Mutex<Option<(String, String, i32)>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let outcome = run_scenario(pipeline, &texts[i], ov);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    let mut code = 0;
    for cell in &results {
        let (out, err, c) = cell.lock().unwrap().take().unwrap();
        print!("{out}");
        eprint!("{err}");
        if code == 0 && c != 0 {
            code = c;
        }
    }
    code
}

fn run_gw(
    path: &PathBuf,
    eval: Option<f64>,
    series_order: Option<usize>,
    beta: bool,
    radius: bool,
) -> i32 {
    let modes = [eval.is_some(), series_order.is_some(), beta, radius]
        .iter()
        .filter(|&&m| m)
        .count();
    if modes != 1 {
        eprintln!("choose exactly one of --eval, --series, --beta, --radius");
        return 2;
    }
    let texts = match read_inputs(std::slice::from_ref(path)) {
        Ok(texts) => texts,
        Err(msg) => {
            eprintln!("{msg}");
            return 2;
        }
    };
    let spec: PgfSpec = match serde_json::from_str(&texts[0]) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("pgf: {e}");
            return 2;
        }
    };
    let pgf = match spec.build() {
        Ok(pgf) => pgf,
        Err(e) => {
            eprintln!("pgf: {e}");
            return 2;
        }
    };
    if beta {
        return match second_fixed_point(&pgf) {
            Ok(b) => {
                println!("{}", num(b));
                0
            }
            Err(e) => {
                eprintln!("{e}");
                exit_code(&e)
            }
        };
    }
    let tree = match TreeFunction::build(&pgf) {
        Ok(tree) => tree,
        Err(e) => {
            eprintln!("{e}");
            return exit_code(&e);
        }
    };
    if let Some(z) = eval {
        return match tree.eval(z) {
            Ok(value) => {
                println!("{}", num(value));
                0
            }
            Err(e) => {
                eprintln!("{e}");
                exit_code(&e)
            }
        };
    }
    if let Some(order) = series_order {
        if order == 0 || order > series::MAX_ORDER {
            eprintln!("series order must be in 1..={}", series::MAX_ORDER);
            return 2;
        }
        let coeffs = tree.series(order);
        println!("n,coeff");
        for n in 0..=order {
            println!("{n},{}", num(coeffs.coeff(n)));
        }
        return 0;
    }
    println!("tau,rho");
    println!("{},{}", num(tree.tau()), num(tree.rho()));
    0
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let ov = Overrides {
        order: cli.order,
        r_max: cli.rmax,
        truncation: cli.truncation,
        tol: cli.tol,
    };
    let code = match &cli.command {
        Command::Analyze { scenarios } => run_batch(Pipeline::Analyze, scenarios, &ov, cli.jobs),
        Command::Oracle { scenarios } => run_batch(Pipeline::Oracle, scenarios, &ov, cli.jobs),
        Command::Compare { scenarios } => run_batch(Pipeline::Compare, scenarios, &ov, cli.jobs),
        Command::Gw {
            pgf,
            eval,
            series,
            beta,
            radius,
        } => run_gw(pgf, *eval, *series, *beta, *radius),
    };
    std::io::stdout().flush().ok();
    std::io::stderr().flush().ok();
    code
}
