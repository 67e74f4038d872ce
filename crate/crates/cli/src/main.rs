//! Command-line surface: dataset generation, Laplace fitting, diagnostics
//! reports, low-dimensional oracles, the dimension-scaling experiment, and
//! SVG rendering of its results.
//!
//! Exit codes: 0 on success, 1 on argument/usage errors, 2 on numerical
//! failures (diverged mode, degenerate fit).

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use nalgebra::DVector;

use laplace_diag_core::diagnostics::{self, ReportOptions};
use laplace_diag_core::error::{Error, Result};
use laplace_diag_core::experiment::{self, ExperimentOptions, Regime};
use laplace_diag_core::format::float17;
use laplace_diag_core::population::PopulationLogistic;
use laplace_diag_core::{laplace, logistic::LogisticModel, oracle, with_workers, Dataset};

#[derive(Parser)]
#[command(
    name = "laplace-diag",
    version,
    about = "Laplace approximation fitting and TV-error diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic logistic-regression dataset with Gaussian design.
    Generate {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Ground-truth coefficients, comma-separated; defaults to (1,0,...,0).
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the Laplace approximation to a dataset and write the fit JSON.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and compute the full diagnostics report.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "mc-samples", default_value_t = 100_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 4.0)]
        radius: f64,
        #[arg(long, default_value_t = 16)]
        probes: usize,
        /// Worker threads (0 = one per core). Outputs are identical for any
        /// worker count.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Independent ground-truth computations.
    Oracle {
        #[command(subcommand)]
        what: OracleCommand,
    },
    /// Leading-term scaling experiment over a dimension sweep.
    Experiment {
        /// Sample-size regime: "d2" (n = 2d²) or "d2.5" (n = d^2.5).
        #[arg(long)]
        regime: String,
        #[arg(long, default_value = "8,16,32,64")]
        dims: String,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "mc-samples", default_value_t = 100_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write wall_ms as 0 so repeated runs are byte-identical.
        #[arg(long = "no-timing")]
        no_timing: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an experiment CSV as a self-contained SVG figure.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Brute-force TV distance (d ≤ 2) against the leading-term value.
    Tv {
        /// Only "population" is supported.
        #[arg(long)]
        model: String,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 128)]
        order: usize,
    },
    /// Gamma tail integral against its closed-form bound.
    GammaTail {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        c: f64,
    },
    /// Radial Gaussian-tail integral against its closed-form bound.
    PolarTail {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        d: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))
}

fn parse_beta(spec: Option<&str>, d: usize) -> Result<DVector<f64>> {
    match spec {
        None => Ok(DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 })),
        Some(text) => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != d {
                return Err(Error::Argument(format!(
                    "--beta has {} entries but --d is {d}",
                    parts.len()
                )));
            }
            let mut beta = DVector::zeros(d);
            for (i, p) in parts.iter().enumerate() {
                beta[i] = p
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Argument(format!("bad --beta entry '{p}'")))?;
            }
            Ok(beta)
        }
    }
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Argument(format!("bad --dims entry '{p}'")))
        })
        .collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate {
            d,
            n,
            beta,
            seed,
            out,
        } => {
            let beta = parse_beta(beta.as_deref(), d)?;
            let data = Dataset::generate(d, n, &beta, seed)?;
            std::fs::write(&out, data.to_csv())?;
            println!("wrote {} ({} rows, {} features)", out.display(), n, d);
            Ok(())
        }
        Command::Fit { data, out } => {
            let dataset = Dataset::from_csv(&read_to_string(&data)?)?;
            let model = LogisticModel::new(dataset);
            let fit = laplace::fit(&model, None)?;
            std::fs::write(&out, fit.to_json())?;
            println!(
                "wrote {} (iterations {}, grad_norm {}, lambda_min {})",
                out.display(),
                fit.iterations,
                float17(fit.grad_norm),
                float17(fit.lambda_min)
            );
            Ok(())
        }
        Command::Diagnose {
            data,
            mc_samples,
            seed,
            restarts,
            radius,
            probes,
            workers,
            out,
        } => {
            let dataset = Dataset::from_csv(&read_to_string(&data)?)?;
            let model = LogisticModel::new(dataset);
            let opts = ReportOptions {
                mc_samples,
                restarts,
                radius,
                probes,
                seed,
            };
            let report = with_workers(workers, || -> Result<_> {
                let fit = laplace::fit(&model, None)?;
                diagnostics::assemble_report(&fit, &model, &opts)
            })?;
            std::fs::write(&out, report.to_json())?;
            println!(
                "wrote {} (L_hat {} ± {}, tilde_c3 {})",
                out.display(),
                float17(report.l_hat),
                float17(report.l_stderr),
                float17(report.tilde_c3)
            );
            Ok(())
        }
        Command::Oracle { what } => run_oracle(what),
        Command::Experiment {
            regime,
            dims,
            replicates,
            seed,
            mc_samples,
            workers,
            no_timing,
            out,
        } => {
            let regime = Regime::parse(&regime)?;
            let dims = parse_dims(&dims)?;
            let opts = ExperimentOptions {
                replicates,
                base_seed: seed,
                mc_samples,
                timing: !no_timing,
            };
            let result =
                with_workers(workers, || experiment::run_experiment(regime, &dims, &opts))?;
            std::fs::write(&out, experiment::rows_to_csv(&result.rows))?;
            print!("{}", experiment::summary_text(&result));
            Ok(())
        }
        Command::Plot { input, out } => {
            let rows = experiment::rows_from_csv(&read_to_string(&input)?)?;
            let svg = plot::render(&rows)?;
            std::fs::write(&out, svg)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn run_oracle(what: OracleCommand) -> Result<()> {
    match what {
        OracleCommand::Tv { model, d, n, order } => {
            if model != "population" {
                return Err(Error::Argument(format!(
                    "unknown oracle model '{model}' (expected 'population')"
                )));
            }
            let pop = PopulationLogistic::with_order(d, n, order)?;
            let fit = laplace::fit(&pop, None)?;
            let tv = oracle::tv_bruteforce(&pop, &fit)?;
            let l = oracle::population_leading_exact(&pop.moments, d, n, 256)?;
            println!("tv={}", float17(tv.tv));
            println!("L={}", float17(l));
            println!("ratio={}", float17(tv.tv / l));
            println!("estimated_error={}", float17(tv.estimated_error));
            println!("quadrature_nodes={}", tv.quadrature_nodes);
            Ok(())
        }
        OracleCommand::GammaTail { lambda, c } => {
            let (exact, bound) = oracle::gamma_tail_check(lambda, c)?;
            println!("exact={}", float17(exact));
            println!("bound={}", float17(bound));
            println!("holds={}", exact <= bound);
            Ok(())
        }
        OracleCommand::PolarTail { a, b, p, d } => {
            let (numeric, bound) = oracle::polar_tail_check(a, b, p, d)?;
            println!("numeric={}", float17(numeric));
            println!("bound={}", float17(bound));
            println!("holds={}", numeric <= bound);
            Ok(())
        }
    }
}
