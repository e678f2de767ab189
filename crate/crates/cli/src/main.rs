//! `augmatch`: estimation, simulation and analytic relative efficiency from
//! the command line. Every JSON document carries `"schema_version": 1`.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use augmatch::analytic::relative_efficiency;
use augmatch::pipeline::{estimate_augmented, estimate_unaugmented, EstimateResult, EstimatorConfig};
use augmatch::simulate::{run_mc, write_reps_csv, Estimators, McConfig, McRun, McSummary, Scenario};
use augmatch::{load_csv, write_csv, CsvSchema, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "augmatch",
    version,
    about = "Propensity score matching with optimal augmentation"
)]
struct Cli {
    /// Worker threads for simulation (default: all cores).
    #[arg(long, global = true, env = "AUGMATCH_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the average treatment effect from a CSV file.
    Estimate(EstimateArgs),
    /// Monte Carlo study on a built-in scenario.
    Simulate(SimulateArgs),
    /// Analytic relative efficiency of augmentation in the Gaussian design.
    Releff(ReleffArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Flags shared by `estimate` and `simulate`.
#[derive(Args, Debug)]
struct EstimatorArgs {
    /// Number of matches per unit.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    matches: u64,
    /// Fraction of units used to fit the augmentation (0 disables splitting).
    #[arg(long, default_value_t = 0.05)]
    split: f64,
    /// Round the fitted coefficients to a grid of spacing 1/(k sqrt n).
    #[arg(long)]
    disc_k: Option<f64>,
    /// Confidence level of the Wald interval.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl EstimatorArgs {
    fn config(&self, seed: u64) -> Result<EstimatorConfig, Error> {
        let cfg = EstimatorConfig {
            m: usize::try_from(self.matches).map_err(|_| Error::InvalidArgument("--matches is too large".into()))?,
            disc_k: self.disc_k,
            split_frac: self.split,
            level: self.level,
            seed,
            ..EstimatorConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Input CSV with a treatment column, an outcome column and covariates.
    #[arg(long)]
    input: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// `json` writes the estimate; `csv` writes the matched units with their
    /// scores (and `h` when augmented).
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Treatment column name.
    #[arg(long, default_value = "a")]
    treatment: String,
    /// Outcome column name.
    #[arg(long, default_value = "y")]
    outcome: String,
    /// Use the optimally augmented propensity model (default).
    #[arg(long, overrides_with = "no_augment")]
    augment: bool,
    /// Match on the plain logistic propensity model.
    #[arg(long, overrides_with = "augment")]
    no_augment: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario `1`-`4` or `analytic`.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Estimators to run on every replication.
    #[arg(long, value_enum, default_value_t = WhichArg::Both)]
    estimators: WhichArg,
    /// Summary JSON path (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-replication CSV path.
    #[arg(long)]
    reps_csv: Option<PathBuf>,
    #[command(flatten)]
    est: EstimatorArgs,
    #[command(flatten)]
    design: DesignOverrides,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum WhichArg {
    Both,
    Augmented,
    Unaugmented,
}

impl From<WhichArg> for Estimators {
    fn from(w: WhichArg) -> Self {
        match w {
            WhichArg::Both => Estimators::Both,
            WhichArg::Augmented => Estimators::Augmented,
            WhichArg::Unaugmented => Estimators::Unaugmented,
        }
    }
}

/// Parameters of the `analytic` scenario; rejected for table scenarios.
#[derive(Args, Debug)]
struct DesignOverrides {
    /// Propensity intercept.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<f64>,
    /// Propensity coefficient on `W1`.
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<f64>,
    /// Propensity coefficient on `W2`.
    #[arg(long, allow_hyphen_values = true)]
    theta2: Option<f64>,
    /// Treated outcome intercept.
    #[arg(long, allow_hyphen_values = true)]
    beta0: Option<f64>,
    /// Treated outcome coefficient on `W1`.
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    /// Treated outcome coefficient on `W2`.
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    /// Control outcome intercept.
    #[arg(long, allow_hyphen_values = true)]
    gamma0: Option<f64>,
    /// Control outcome coefficient on `W1`.
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    /// Control outcome coefficient on `W2`.
    #[arg(long, allow_hyphen_values = true)]
    gamma2: Option<f64>,
    /// Outcome noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
}

impl DesignOverrides {
    fn any(&self) -> bool {
        [
            self.theta0,
            self.theta1,
            self.theta2,
            self.beta0,
            self.beta1,
            self.beta2,
            self.gamma0,
            self.gamma1,
            self.gamma2,
            self.sigma,
        ]
        .iter()
        .any(Option::is_some)
    }

    fn scenario(&self, name: &str, m: usize) -> Result<Scenario, Error> {
        if name != "analytic" {
            let id: u8 = name
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("unknown scenario `{name}`; expected 1-4 or analytic")))?;
            if self.any() {
                return Err(Error::InvalidArgument(
                    "design overrides only apply to the analytic scenario".into(),
                ));
            }
            return Scenario::table(id);
        }
        let Scenario::Analytic(mut dz) = Scenario::analytic_default() else {
            unreachable!("default analytic scenario")
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut dz.theta[0], self.theta0);
        set(&mut dz.theta[1], self.theta1);
        set(&mut dz.theta[2], self.theta2);
        set(&mut dz.beta[0], self.beta0);
        set(&mut dz.beta[1], self.beta1);
        set(&mut dz.beta[2], self.beta2);
        set(&mut dz.gamma[0], self.gamma0);
        set(&mut dz.gamma[1], self.gamma1);
        set(&mut dz.gamma[2], self.gamma2);
        set(&mut dz.sigma, self.sigma);
        dz.m = m;
        dz.validate()?;
        Ok(Scenario::Analytic(dz))
    }
}

#[derive(Args, Debug)]
struct ReleffArgs {
    /// Propensity intercept.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta0: f64,
    /// Instrument strength of `W1` in the propensity model.
    #[arg(
        long,
        default_value_t = 1.0,
        allow_hyphen_values = true,
        conflicts_with = "theta1_grid"
    )]
    theta1: f64,
    /// Standardized effect of `W1` on the treated outcome.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    beta1: f64,
    /// Standardized effect of the precision variable `W2`.
    #[arg(
        long,
        default_value_t = 1.0,
        allow_hyphen_values = true,
        conflicts_with = "beta2_grid"
    )]
    beta2: f64,
    /// Standardized effect of `W1` on the control outcome.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    gamma1: f64,
    /// Number of matches per unit.
    #[arg(long, visible_alias = "matches", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    /// Sweep `theta1` over `start:stop:step`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "beta2_grid")]
    theta1_grid: Option<String>,
    /// Sweep `beta2` over `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    beta2_grid: Option<String>,
    /// Default: `json` for a single value, `csv` for a sweep.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(2, "validation", &e.render().to_string());
        }
    };
    let threads = cli.threads.map(|t| t as usize);
    let res = match &cli.cmd {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a, threads),
        Command::Releff(a) => cmd_releff(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_validation() => fail(2, "validation", &e.to_string()),
        Err(e) => fail(3, "numerical", &e.to_string()),
    }
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    code: u8,
    message: &'a str,
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    let doc = ErrorDoc {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind,
            code,
            message: message.trim_end(),
        },
    };
    let mut err = io::stderr().lock();
    let _ = serde_json::to_writer(&mut err, &doc);
    let _ = writeln!(err);
    ExitCode::from(code)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, doc: &T) -> Result<(), Error> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, doc).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateDoc<'a> {
    schema_version: u32,
    command: &'static str,
    n: usize,
    m: usize,
    split_frac: f64,
    seed: u64,
    se: f64,
    ci: [f64; 2],
    level: f64,
    gain: f64,
    #[serde(flatten)]
    result: &'a EstimateResult,
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), Error> {
    let augment = !args.no_augment;
    let mut cfg = args.est.config(args.seed)?;
    if !augment {
        cfg.split_frac = 0.0;
    }
    let schema = CsvSchema {
        treatment: args.treatment.clone(),
        outcome: args.outcome.clone(),
        covariates: None,
    };
    let d = load_csv(&args.input, &schema)?;
    let res = if augment {
        estimate_augmented(&d, &cfg)?
    } else {
        estimate_unaugmented(&d, &cfg)?
    };
    match args.format {
        Format::Json => {
            let v = &res.variance;
            write_json(
                args.output.as_deref(),
                &EstimateDoc {
                    schema_version: SCHEMA_VERSION,
                    command: "estimate",
                    n: d.n(),
                    m: cfg.m,
                    split_frac: cfg.split_frac,
                    seed: cfg.seed,
                    se: v.se,
                    ci: [v.ci.0, v.ci.1],
                    level: v.level,
                    gain: v.gain,
                    result: &res,
                },
            )
        }
        Format::Csv => {
            let sub = d.subset(&res.matched_units)?;
            let mut extra: Vec<(&str, &[f64])> = vec![("score", &res.scores)];
            if let Some(h) = &res.h_values {
                extra.push(("h", h));
            }
            let mut w = sink(args.output.as_deref())?;
            write_csv(&mut w, &sub, &extra)?;
            w.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SimulateDoc<'a> {
    schema_version: u32,
    command: &'static str,
    scenario: &'a Scenario,
    n: usize,
    reps: usize,
    seed: u64,
    m: usize,
    split_frac: f64,
    true_psi: f64,
    failed: usize,
    unaugmented: Option<McSummary>,
    augmented: Option<McSummary>,
    /// `1 − var(aug)/var(unaug)`.
    emp_var_reduction: Option<f64>,
    emp_var_reduction_se: Option<f64>,
}

fn cmd_simulate(args: &SimulateArgs, threads: Option<usize>) -> Result<(), Error> {
    let est = args.est.config(args.seed)?;
    let scenario = args.design.scenario(&args.scenario, est.m)?;
    let cfg = McConfig {
        n: args.n,
        reps: args.reps,
        seed: args.seed,
        estimator: est,
        which: args.estimators.into(),
        threads,
    };
    let run: McRun = run_mc(&scenario, &cfg)?;
    if let Some(p) = &args.reps_csv {
        write_reps_csv(BufWriter::new(File::create(p)?), &run)?;
    }
    write_json(
        args.output.as_deref(),
        &SimulateDoc {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            scenario: &run.scenario,
            n: cfg.n,
            reps: cfg.reps,
            seed: cfg.seed,
            m: cfg.estimator.m,
            split_frac: cfg.estimator.split_frac,
            true_psi: run.true_psi,
            failed: run.failed,
            unaugmented: run.unaugmented,
            augmented: run.augmented,
            emp_var_reduction: run.reduction.map(|r| r.reduction),
            emp_var_reduction_se: run.reduction.map(|r| r.se),
        },
    )
}

/// Parses `start:stop:step` into an inclusive arithmetic grid.
fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidArgument(format!("grid `{spec}` must be start:stop:step with step > 0"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::InvalidArgument(format!(
            "grid `{spec}` has more than 10^6 points"
        )));
    }
    // multiply rather than accumulate so points do not drift
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Serialize)]
struct ReleffRow {
    theta0: f64,
    theta1: f64,
    beta1: f64,
    beta2: f64,
    gamma1: f64,
    m: usize,
    relative_efficiency: f64,
}

#[derive(Serialize)]
struct ReleffDoc<'a> {
    schema_version: u32,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<&'static str>,
    rows: &'a [ReleffRow],
}

fn cmd_releff(args: &ReleffArgs) -> Result<(), Error> {
    let finite = [args.theta0, args.theta1, args.beta1, args.beta2, args.gamma1];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("parameters must be finite".into()));
    }
    let m = usize::try_from(args.m).map_err(|_| Error::InvalidArgument("--m is too large".into()))?;
    let (sweep, points): (Option<&'static str>, Vec<(f64, f64)>) = match (&args.theta1_grid, &args.beta2_grid) {
        (Some(g), None) => (
            Some("theta1"),
            parse_grid(g)?.into_iter().map(|t| (t, args.beta2)).collect(),
        ),
        (None, Some(g)) => (
            Some("beta2"),
            parse_grid(g)?.into_iter().map(|b| (args.theta1, b)).collect(),
        ),
        (None, None) => (None, vec![(args.theta1, args.beta2)]),
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("sweep one grid at a time".into())),
    };
    let rows = points
        .into_iter()
        .map(|(theta1, beta2)| {
            relative_efficiency(theta1, beta2, args.beta1, args.gamma1, args.theta0, m).map(|re| ReleffRow {
                theta0: args.theta0,
                theta1,
                beta1: args.beta1,
                beta2,
                gamma1: args.gamma1,
                m,
                relative_efficiency: re,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let format = args
        .format
        .unwrap_or(if sweep.is_some() { Format::Csv } else { Format::Json });
    match format {
        Format::Json => write_json(
            args.output.as_deref(),
            &ReleffDoc {
                schema_version: SCHEMA_VERSION,
                command: "releff",
                sweep,
                rows: &rows,
            },
        ),
        Format::Csv => {
            let mut wr = csv::Writer::from_writer(sink(args.output.as_deref())?);
            for r in &rows {
                wr.serialize(r)?;
            }
            wr.flush()?;
            Ok(())
        }
    }
}
