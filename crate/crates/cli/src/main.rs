//! Command-line front end: scenario configs in, condition reports and CSV
//! tables out.
//!
//! Exit codes: 0 when every requested check passes, 2 on condition
//! violations, 1 on usage, parse, or evaluation errors.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pxhardy::conditions::hypothesis_reports;
use pxhardy::exponent::luxemburg_norm;
use pxhardy::fieldexpr::ScalarField;
use pxhardy::measures::{density_csv, measures_family, scenario_measures};
use pxhardy::modular::QuadOptions;
use pxhardy::plaplace::{evaluate_both, DEFAULT_FLUX_STEP};
use pxhardy::scenario::Scenario;
use pxhardy::verify::{sharpness_probe, verify_batch, VerificationReport};

use config::{output_csv_path, scenario_from, verification_settings, Config};

#[derive(Parser)]
#[command(
    name = "pxhardy",
    about = "Numerical checks for weighted modular Hardy-type inequalities with variable exponents",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run admissibility and hypothesis checks with witnesses.
    Validate {
        config: PathBuf,
        /// Sample-grid resolution per axis.
        #[arg(long, default_value_t = 41)]
        resolution: usize,
    },
    /// Verify the inequality for a batch of seeded test functions (CSV out).
    Verify {
        config: PathBuf,
        /// Output CSV path (defaults to the `[output]` csv key, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize the left/right ratio over test-function parameters.
    Probe {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation budget for the search.
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// Evaluate the operator at a point, closed radial form and finite
    /// differences side by side.
    Laplacian {
        config: PathBuf,
        /// Comma-separated coordinates, e.g. `--at 1,0`.
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = DEFAULT_FLUX_STEP)]
        step: f64,
    },
    /// Luxemburg norm of an expression over the scenario domain.
    Norm {
        config: PathBuf,
        /// Expression for the field, e.g. `--f "x1^2"`.
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Sample both weight densities on a grid (CSV out).
    Density {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 41)]
        resolution: usize,
    },
}

fn main() -> ExitCode {
    // Usage errors exit with 1 (help and version still exit 0), keeping
    // code 2 reserved for condition violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn load(config: &PathBuf) -> Result<(Config, Scenario), String> {
    let text = fs::read_to_string(config)
        .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    let cfg = Config::parse(&text).map_err(|e| e.to_string())?;
    let scenario = scenario_from(&cfg).map_err(|e| e.to_string())?;
    Ok((cfg, scenario))
}

fn quad_options(cfg: &Config, s: &Scenario) -> Result<QuadOptions, String> {
    let v = verification_settings(cfg).map_err(|e| e.to_string())?;
    Ok(QuadOptions {
        resolution: v.resolution,
        refinement_levels: v.refinement,
        breakpoints: s.breakpoints.clone(),
    })
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate { config, resolution } => {
            let (_, s) = load(&config)?;
            let report = s.validate(resolution).map_err(|e| e.to_string())?;
            for e in &report.entries {
                let status = if e.pass { "pass" } else { "FAIL" };
                match (&e.witness, e.pass) {
                    (Some(w), false) => {
                        println!("{status}  {}  ({}) witness {:?}", e.check, e.detail, w)
                    }
                    _ => println!("{status}  {}  ({})", e.check, e.detail),
                }
            }
            let hyp = hypothesis_reports(&s, resolution).map_err(|e| e.to_string())?;
            for w in &hyp.warnings {
                println!("warning: {w}");
            }
            for r in &hyp.reports {
                let status = if r.pass { "pass" } else { "FAIL" };
                println!(
                    "{status}  {}  (min margin {} at {:?}, {} nodes skipped)",
                    r.name, r.min_margin, r.witness, r.skipped
                );
            }
            if report.pass && hyp.pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Verify { config, out } => {
            let (cfg, s) = load(&config)?;
            let validation = s.validate(41).map_err(|e| e.to_string())?;
            if !validation.pass {
                for e in validation.failures() {
                    println!(
                        "FAIL  {}  ({}) witness {:?}",
                        e.check, e.detail, e.witness
                    );
                }
                println!("scenario failed validation; not verifying");
                return Ok(ExitCode::from(2));
            }
            let v = verification_settings(&cfg).map_err(|e| e.to_string())?;
            let opts = quad_options(&cfg, &s)?;
            let reports = verify_batch(&s, v.family, v.count, v.seed, &opts)
                .map_err(|e| e.to_string())?;
            let mut csv = String::from(VerificationReport::csv_header());
            csv.push('\n');
            for r in &reports {
                csv.push_str(&r.csv_row(v.family.name()));
                csv.push('\n');
            }
            let target = out
                .map(|p| p.to_string_lossy().into_owned())
                .or(output_csv_path(&cfg).map_err(|e| e.to_string())?);
            match target {
                Some(path) => {
                    fs::write(&path, &csv).map_err(|e| format!("cannot write {path}: {e}"))?;
                    println!("wrote {} reports to {path}", reports.len());
                }
                None => print!("{csv}"),
            }
            let passed = reports.iter().filter(|r| r.pass).count();
            println!("{passed}/{} reports pass", reports.len());
            if passed == reports.len() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Probe { config, out, budget } => {
            let (cfg, s) = load(&config)?;
            let v = verification_settings(&cfg).map_err(|e| e.to_string())?;
            let opts = quad_options(&cfg, &s)?;
            let outcome =
                sharpness_probe(&s, v.family, v.seed, budget, &opts).map_err(|e| e.to_string())?;
            let mut csv = String::from("step,params,lhs,rhs_gradient,rhs_log,ratio,pass\n");
            for step in &outcome.trace {
                let params: Vec<String> =
                    step.params.iter().map(|p| format!("{p:.6}")).collect();
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    step.index,
                    params.join(" "),
                    step.report.lhs,
                    step.report.rhs_gradient,
                    step.report.rhs_log,
                    step.report.ratio,
                    step.report.pass
                ));
            }
            if let Some(path) = out {
                fs::write(&path, &csv)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                println!("wrote {} probe steps to {}", outcome.trace.len(), path.display());
            }
            println!(
                "best ratio {} at params {:?} after {} evaluations",
                outcome.best_ratio,
                outcome.best_params,
                outcome.trace.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Laplacian { config, at, step } => {
            let (_, s) = load(&config)?;
            let point: Vec<f64> = at
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{t}`")))
                .collect::<Result<_, _>>()?;
            if point.len() != s.dim() {
                return Err(format!(
                    "point has {} coordinates, scenario domain has dimension {}",
                    point.len(),
                    s.dim()
                ));
            }
            let (radial, fd) = evaluate_both(&s, &point, step).map_err(|e| e.to_string())?;
            match radial {
                Some(r) => println!("radial closed form: {}", r.value),
                None => println!("radial closed form: n/a (profile is not radial)"),
            }
            println!("finite differences (h = {step}): {}", fd.value);
            Ok(ExitCode::SUCCESS)
        }
        Command::Norm { config, f, tol } => {
            let (cfg, s) = load(&config)?;
            let field = ScalarField::parse(&f).map_err(|e| e.to_string())?;
            let opts = quad_options(&cfg, &s)?;
            let norm = luxemburg_norm(&field, &s.exponent, &s.domain, tol, &opts)
                .map_err(|e| e.to_string())?;
            println!("{norm}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Density {
            config,
            out,
            resolution,
        } => {
            let (_, s) = load(&config)?;
            let pair = match measures_family(&s, resolution) {
                Ok(pair) => {
                    for w in &pair.warnings {
                        eprintln!("warning: {w}");
                    }
                    pair
                }
                Err(_) => scenario_measures(&s),
            };
            let csv = density_csv(&pair, &s.domain, resolution).map_err(|e| e.to_string())?;
            fs::write(&out, &csv).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("wrote densities to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
