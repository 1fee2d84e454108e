//! `gkf-kit`: EC-density tables, tube-oracle comparisons, end-to-end
//! simulation experiments and the fast self-test.
//!
//! Exit codes: 0 success or agreement, 1 statistical disagreement, 2 usage,
//! 3 numerical failure.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gkf_core::euler::Topology;
use gkf_core::gkf::{ec_density, Family};
use gkf_core::gmf::{conjunction_cone_params_printed, gmf_cone2};
use gkf_core::tube::{chebyshev_radii, fit_tube_coefficients, mc_tube_curve, FitOptions};
use gkf_core::validation::{run_criterion, simulate, Mu2Source, SimulationConfig, FAST};
use gkf_core::GkfError;
use serde::Serialize;

use report::{Cell, Report};

pub const EXIT_DISAGREE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "gkf-kit", version, about = "Expected Euler characteristics of Gaussian-related random fields")]
#[command(args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "GKF_SEED", default_value_t = 1)]
    seed: u64,
    /// Worker threads, or `auto`. Results do not depend on it.
    #[arg(long, global = true, default_value = "auto")]
    #[serde(skip)]
    threads: String,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Omit the timestamp line so reruns are byte-identical.
    #[arg(long, global = true)]
    #[serde(skip)]
    no_timestamp: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// EC densities and Gaussian Minkowski functionals on a grid of levels and orders.
    #[command(args_override_self = true)]
    Table(TableArgs),
    /// Compare closed-form coefficients with a Monte Carlo tube fit.
    #[command(args_override_self = true)]
    Oracle(OracleArgs),
    /// Simulate fields and compare the mean Euler characteristic with the prediction.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Run the fast acceptance checks.
    Selftest,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyName {
    #[value(alias = "half-space")]
    Gaussian,
    Chi,
    Chi2,
    NoncentralChi2,
    F,
    #[value(alias = "cone")]
    Conjunction,
}

#[derive(Args, Debug, Serialize)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Number of components (chi, chi2, noncentral-chi2).
    #[arg(long)]
    k: Option<usize>,
    /// Noncentrality ‖μ‖².
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    /// Correlation of the conjunction pair.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
}

impl FamilyArgs {
    fn resolve(&self) -> Result<Family, String> {
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| format!("--family {:?} needs --{name}", self.family));
        let fam = match self.family {
            FamilyName::Gaussian => Family::Gaussian,
            FamilyName::Chi => Family::Chi { k: need(self.k, "k")? },
            FamilyName::Chi2 => Family::ChiSquared { k: need(self.k, "k")? },
            FamilyName::NoncentralChi2 => Family::NoncentralChiSquared {
                k: need(self.k, "k")?,
                alpha: self.alpha.ok_or("--family noncentral-chi2 needs --alpha")?,
            },
            FamilyName::F => Family::F { k1: need(self.k1, "k1")?, k2: need(self.k2, "k2")? },
            FamilyName::Conjunction => Family::Conjunction { rho: self.rho.ok_or("--family conjunction needs --rho")? },
        };
        if matches!(fam, Family::Chi { k: 0 } | Family::ChiSquared { k: 0 } | Family::NoncentralChiSquared { k: 0, .. })
            || matches!(fam, Family::F { k1: 0, .. } | Family::F { k2: 0, .. })
        {
            return Err("component counts must be positive".into());
        }
        Ok(fam)
    }
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
    levels: Vec<f64>,
    #[arg(long, num_args = 1.., required = true)]
    orders: Vec<usize>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Level `u` defining the domain `F⁻¹[u, ∞)`.
    #[arg(long, allow_negative_numbers = true)]
    level: f64,
    /// Highest coefficient order `J`.
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Explicit radii; overrides `--n-radii` and `--r-max`.
    #[arg(long, num_args = 1..)]
    radii: Option<Vec<f64>>,
    #[arg(long, default_value_t = 16)]
    n_radii: usize,
    #[arg(long, default_value_t = 0.25)]
    r_max: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Polynomial degrees above `J` in the fit.
    #[arg(long, default_value_t = 2)]
    guard: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TopologyName {
    Torus,
    Rectangle,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mu2Choice {
    /// Empirical, central differences.
    Central,
    /// Empirical, nearest-neighbour differences.
    Nearest,
    /// `1/s²`.
    Analytic,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Covariance scale `s` in units of the spacing.
    #[arg(long, default_value_t = 8.0)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = TopologyName::Torus)]
    topology: TopologyName,
    #[arg(long, default_value_t = 2000)]
    replicates: usize,
    /// Source of `μ₂` in the prediction.
    #[arg(long, value_enum, default_value_t = Mu2Choice::Central)]
    mu2: Mu2Choice,
    /// Write a `u,chi,count` histogram of the Euler characteristics here.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<GkfError> for Failure {
    fn from(e: GkfError) -> Self {
        match e {
            GkfError::FitUnstable { .. }
            | GkfError::SeriesFailure { .. }
            | GkfError::ProjectionFailure { .. }
            | GkfError::Quadrature { .. }
            | GkfError::WindowTooNarrow => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::config_path(&args) {
        match config::merge_args(args, path.as_ref()) {
            Ok(a) => args = a,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if cli.global.threads != "auto" {
        match cli.global.threads.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("error: --threads must be a positive integer or `auto`");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let (mut report, code, default_format) = match &cli.command {
        Command::Table(a) => (cmd_table(a)?, 0, Format::Csv),
        Command::Oracle(a) => {
            let (r, c) = cmd_oracle(a, cli.global.seed)?;
            (r, c, Format::Json)
        }
        Command::Simulate(a) => {
            let (r, c) = cmd_simulate(a, cli.global.seed)?;
            (r, c, Format::Csv)
        }
        Command::Selftest => {
            let (r, c) = cmd_selftest();
            (r, c, Format::Csv)
        }
    };
    let format = cli.global.format.unwrap_or(default_format);
    report.add_config(&cli.global);
    report.set_config("format", match format {
        Format::Csv => "csv",
        Format::Json => "json",
    });
    let text = match format {
        Format::Csv => report.to_csv(!cli.global.no_timestamp),
        Format::Json => report.to_json(!cli.global.no_timestamp),
    };
    match &cli.global.output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(code)
}

fn cmd_table(a: &TableArgs) -> Result<Report, Failure> {
    let family = a.family.resolve().map_err(Failure::Usage)?;
    let mut r = Report::new("table", &["family", "params", "u", "j", "ec_density", "gmf_coefficient"]);
    r.add_config(a);
    for &u in &a.levels {
        for &j in &a.orders {
            let rho = ec_density(&family, j, u)?;
            let m = family.gmf(u, j)?.get(j);
            r.row(vec![
                Cell::text(family.name()),
                Cell::text(&family.params()),
                Cell::Num(u),
                Cell::Int(j as i64),
                Cell::Num(rho),
                Cell::Num(m),
            ]);
        }
    }
    Ok(r)
}

fn cmd_oracle(a: &OracleArgs, seed: u64) -> Result<(Report, u8), Failure> {
    let family = a.family.resolve().map_err(Failure::Usage)?;
    let radii = match &a.radii {
        Some(r) => r.clone(),
        None => {
            if a.n_radii < 2 || !(a.r_max > 0.0) {
                return Err(Failure::Usage("need at least two radii and a positive --r-max".into()));
            }
            chebyshev_radii(a.n_radii, a.r_max)
        }
    };
    let needed = 2 * (a.order + 2);
    if radii.len() < needed || radii.len() <= a.order + a.guard {
        return Err(Failure::Usage(format!("order {} needs at least {needed} radii, got {}", a.order, radii.len())));
    }
    if a.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let domain = family.domain(a.level)?;
    let closed = family.gmf(a.level, a.order)?;
    let printed = match family {
        Family::Conjunction { rho } => Some(gmf_cone2(&conjunction_cone_params_printed(a.level, rho)?, a.order)?),
        _ => None,
    };
    let curve = mc_tube_curve(&domain, &radii, a.samples, seed)?;
    let fit = fit_tube_coefficients(&curve, a.order, FitOptions { guard_degrees: a.guard })?;
    let mut cols = vec!["j", "closed_form", "fitted", "fitted_se", "z"];
    if printed.is_some() {
        cols.extend(["printed_apex_closed_form", "printed_apex_z"]);
    }
    let mut r = Report::new("oracle", &cols);
    r.add_config(a);
    r.set_config("domain", &format!("{domain:?}"));
    r.summary("fit_condition", Cell::Num(fit.condition));
    let mut agree = true;
    for j in 0..=a.order {
        let z = (fit.coefficients[j] - closed.get(j)) / fit.std_errors[j];
        agree &= z.abs() <= 3.0;
        let mut row = vec![
            Cell::Int(j as i64),
            Cell::Num(closed.get(j)),
            Cell::Num(fit.coefficients[j]),
            Cell::Num(fit.std_errors[j]),
            Cell::Num(z),
        ];
        if let Some(p) = &printed {
            row.push(Cell::Num(p.get(j)));
            row.push(Cell::Num((fit.coefficients[j] - p.get(j)) / fit.std_errors[j]));
        }
        r.row(row);
    }
    r.summary("agree", Cell::text(if agree { "true" } else { "false" }));
    Ok((r, if agree { 0 } else { EXIT_DISAGREE }))
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<(Report, u8), Failure> {
    let family = a.family.resolve().map_err(Failure::Usage)?;
    if a.replicates == 0 {
        return Err(Failure::Usage("--replicates must be positive".into()));
    }
    let cfg = SimulationConfig {
        family,
        scale: a.scale,
        n: a.n,
        spacing: a.spacing,
        topology: match a.topology {
            TopologyName::Torus => Topology::Torus,
            TopologyName::Rectangle => Topology::Rectangle,
        },
        levels: a.levels.clone(),
        replicates: a.replicates,
        seed,
        mu2_source: match a.mu2 {
            Mu2Choice::Central => Mu2Source::CentralDifference,
            Mu2Choice::Nearest => Mu2Source::NearestNeighbour,
            Mu2Choice::Analytic => Mu2Source::Analytic,
        },
    };
    let out = simulate(&cfg)?;
    let mut r = Report::new("simulate", &["u", "predicted", "mean_chi", "se", "z"]);
    r.add_config(a);
    r.summary("mu2_empirical", Cell::Num(out.mu2_empirical));
    r.summary("mu2_se", Cell::Num(out.mu2_se));
    r.summary("mu2_nearest", Cell::Num(out.mu2_nearest));
    r.summary("mu2_nearest_se", Cell::Num(out.mu2_nearest_se));
    r.summary("mu2_analytic", Cell::Num(out.mu2_analytic));
    r.summary("mu2_used", Cell::Num(out.mu2_used));
    r.summary("soft_check_warnings", Cell::Int(out.soft_check_warnings as i64));
    if out.soft_check_warnings > 0 {
        eprintln!("warning: {} component fields failed the soft mean/variance checks", out.soft_check_warnings);
    }
    r.summary("lkc", Cell::text(&out.lkc.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")));
    let mut agree = true;
    for l in &out.levels {
        agree &= l.z.abs() <= 3.0;
        r.row(vec![Cell::Num(l.u), Cell::Num(l.predicted), Cell::Num(l.mean_chi), Cell::Num(l.se), Cell::Num(l.z)]);
    }
    if let Some(path) = &a.histogram {
        let mut h = Report::new("simulate-histogram", &["u", "chi", "count"]);
        for l in &out.levels {
            let mut counts = std::collections::BTreeMap::new();
            for &c in &l.chis {
                *counts.entry(c).or_insert(0i64) += 1;
            }
            for (chi, n) in counts {
                h.row(vec![Cell::Num(l.u), Cell::Int(chi), Cell::Int(n)]);
            }
        }
        std::fs::write(path, h.to_csv(false)).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok((r, if agree { 0 } else { EXIT_DISAGREE }))
}

fn cmd_selftest() -> (Report, u8) {
    let mut r = Report::new("selftest", &["criterion", "title", "result", "seconds"]);
    let mut all = true;
    for &id in FAST {
        let c = run_criterion(id);
        all &= c.pass;
        for line in &c.details {
            eprintln!("criterion {id}: {line}");
        }
        r.row(vec![
            Cell::Int(id as i64),
            Cell::text(c.title),
            Cell::text(if c.pass { "PASS" } else { "FAIL" }),
            Cell::Num((c.seconds * 1000.0).round() / 1000.0),
        ]);
    }
    (r, if all { 0 } else { EXIT_DISAGREE })
}
