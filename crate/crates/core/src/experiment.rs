//! Scaling experiment: the leading TV term across dimensions under the two
//! sample-size regimes `n = 2d²` (constant `d/√n`) and `n = d^{2.5}`
//! (shrinking `d/√n`), with per-dimension replicate summaries and the
//! log-log slope fit for the shrinking regime.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::format::{float17, parse_float};
use crate::laplace;
use crate::logistic::LogisticModel;
use crate::mc::{derive_seed, mix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `n = 2d²`
    TwoDSquared,
    /// `n = d^{2.5}`
    DPow25,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "d2" => Ok(Regime::TwoDSquared),
            "d2.5" => Ok(Regime::DPow25),
            other => Err(Error::Argument(format!(
                "unknown regime '{other}' (expected 'd2' or 'd2.5')"
            ))),
        }
    }

    pub fn n_for(self, d: usize) -> usize {
        match self {
            Regime::TwoDSquared => (2.0 * (d as f64).powi(2)).round() as usize,
            Regime::DPow25 => (d as f64).powf(2.5).round() as usize,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::TwoDSquared => "n=2d^2",
            Regime::DPow25 => "n=d^2.5",
        }
    }
}

pub const CSV_HEADER: &str = "d,n,replicate,seed,L_hat,L_stderr,tilde_c3,lambda_min_Hv,wall_ms";

#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub d: usize,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub l_hat: f64,
    pub l_stderr: f64,
    pub tilde_c3: f64,
    pub lambda_min_hv: f64,
    pub wall_ms: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct DimensionSummary {
    pub d: usize,
    pub n: usize,
    pub mean_l: f64,
    pub q10: f64,
    pub q90: f64,
    pub diverged: usize,
    pub used: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub regime: Regime,
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<DimensionSummary>,
    /// Least-squares slope of `log10(mean L)` against `log10(d)`; present for
    /// the `d^{2.5}` regime with at least two usable dimensions.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentOptions {
    pub replicates: usize,
    pub base_seed: u64,
    pub mc_samples: u64,
    /// Record wall-clock per replicate; disable for byte-identical reruns.
    pub timing: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            replicates: 20,
            base_seed: 0,
            mc_samples: 100_000,
            timing: true,
        }
    }
}

/// Per-replicate seed: `base_seed + mix(d, replicate)` with a stable 64-bit
/// mix, so streams are reproducible and effectively independent.
pub fn replicate_seed(base_seed: u64, d: usize, replicate: usize) -> u64 {
    base_seed.wrapping_add(mix64(((d as u64) << 32) ^ replicate as u64))
}

pub fn run_experiment(
    regime: Regime,
    dims: &[usize],
    opts: &ExperimentOptions,
) -> Result<ExperimentResult> {
    if dims.is_empty() {
        return Err(Error::Argument("experiment: no dimensions given".into()));
    }
    if dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "experiment: dimensions must be strictly ascending".into(),
        ));
    }
    if dims[0] < 2 {
        return Err(Error::Argument("experiment: dimensions must be ≥ 2".into()));
    }
    if opts.replicates == 0 {
        return Err(Error::Argument("experiment: need at least 1 replicate".into()));
    }

    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&d| (0..opts.replicates).map(move |r| (d, r)))
        .collect();
    let rows: Vec<Result<ExperimentRow>> = jobs
        .par_iter()
        .map(|&(d, replicate)| run_replicate(regime, d, replicate, opts))
        .collect();
    let mut rows: Vec<ExperimentRow> = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.d, r.replicate));

    let summaries = summarize(&rows, dims, regime);
    let slope = if regime == Regime::DPow25 {
        fit_slope(&summaries)
    } else {
        None
    };
    Ok(ExperimentResult {
        regime,
        rows,
        summaries,
        slope,
    })
}

fn run_replicate(
    regime: Regime,
    d: usize,
    replicate: usize,
    opts: &ExperimentOptions,
) -> Result<ExperimentRow> {
    let started = std::time::Instant::now();
    let n = regime.n_for(d);
    let seed = replicate_seed(opts.base_seed, d, replicate);
    let beta = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let data = Dataset::generate(d, n, &beta, seed)?;
    let model = LogisticModel::new(data);

    let fit = match laplace::fit(&model, None) {
        Ok(fit) => fit,
        Err(Error::ModeDiverged(_)) => {
            return Ok(ExperimentRow {
                d,
                n,
                replicate,
                seed,
                l_hat: f64::NAN,
                l_stderr: f64::NAN,
                tilde_c3: f64::NAN,
                lambda_min_hv: f64::NAN,
                wall_ms: elapsed_ms(started, opts.timing),
                diverged: true,
            })
        }
        Err(e) => return Err(e),
    };
    let (l_hat, l_stderr) =
        diagnostics::estimate_l(&fit, &model, opts.mc_samples, derive_seed(seed, 1))?;
    let tilde_c3 = diagnostics::tilde_c3(&fit, &model)?;
    Ok(ExperimentRow {
        d,
        n,
        replicate,
        seed,
        l_hat,
        l_stderr,
        tilde_c3,
        lambda_min_hv: fit.lambda_min,
        wall_ms: elapsed_ms(started, opts.timing),
        diverged: false,
    })
}

fn elapsed_ms(started: std::time::Instant, timing: bool) -> u64 {
    if timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    }
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = p * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

fn summarize(rows: &[ExperimentRow], dims: &[usize], regime: Regime) -> Vec<DimensionSummary> {
    dims.iter()
        .map(|&d| {
            let mut values: Vec<f64> = rows
                .iter()
                .filter(|r| r.d == d && !r.diverged)
                .map(|r| r.l_hat)
                .collect();
            values.sort_by(f64::total_cmp);
            let diverged = rows.iter().filter(|r| r.d == d && r.diverged).count();
            let used = values.len();
            let (mean_l, q10, q90) = if values.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let mean = values.iter().sum::<f64>() / used as f64;
                (mean, quantile(&values, 0.1), quantile(&values, 0.9))
            };
            DimensionSummary {
                d,
                n: regime.n_for(d),
                mean_l,
                q10,
                q90,
                diverged,
                used,
            }
        })
        .collect()
}

fn fit_slope(summaries: &[DimensionSummary]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = summaries
        .iter()
        .filter(|s| s.used > 0 && s.mean_l > 0.0)
        .map(|s| ((s.d as f64).log10(), s.mean_l.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((m * sxy - sx * sy) / (m * sxx - sx * sx))
}

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.d,
            r.n,
            r.replicate,
            r.seed,
            float17(r.l_hat),
            float17(r.l_stderr),
            float17(r.tilde_c3),
            float17(r.lambda_min_hv),
            r.wall_ms
        ));
    }
    out
}

/// Parses an experiment CSV. Repeated header lines (from concatenating the
/// outputs of several runs) are tolerated and skipped.
pub fn rows_from_csv(text: &str) -> Result<Vec<ExperimentRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("experiment CSV is empty".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "experiment CSV row 1: unexpected header '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() || line == CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse(format!(
                "experiment CSV row {}: expected 9 fields, got {}",
                idx + 1,
                fields.len()
            )));
        }
        let parse_int = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>().map_err(|_| {
                Error::Parse(format!("experiment CSV row {}: bad {what} '{s}'", idx + 1))
            })
        };
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            parse_float(s).ok_or_else(|| {
                Error::Parse(format!("experiment CSV row {}: bad {what} '{s}'", idx + 1))
            })
        };
        let l_hat = parse_f(fields[4], "L_hat")?;
        rows.push(ExperimentRow {
            d: parse_int(fields[0], "d")? as usize,
            n: parse_int(fields[1], "n")? as usize,
            replicate: parse_int(fields[2], "replicate")? as usize,
            seed: parse_int(fields[3], "seed")?,
            l_hat,
            l_stderr: parse_f(fields[5], "L_stderr")?,
            tilde_c3: parse_f(fields[6], "tilde_c3")?,
            lambda_min_hv: parse_f(fields[7], "lambda_min_Hv")?,
            wall_ms: parse_int(fields[8], "wall_ms")?,
            diverged: l_hat.is_nan(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse("experiment CSV has no data rows".into()));
    }
    Ok(rows)
}

/// Deterministic text block with per-dimension statistics and the slope.
pub fn summary_text(result: &ExperimentResult) -> String {
    let mut out = format!("regime {}\n", result.regime.label());
    for s in &result.summaries {
        out.push_str(&format!(
            "d={} n={} replicates_used={} diverged={} mean_L={} q10={} q90={}\n",
            s.d,
            s.n,
            s.used,
            s.diverged,
            float17(s.mean_l),
            float17(s.q10),
            float17(s.q90)
        ));
    }
    match result.slope {
        Some(slope) => out.push_str(&format!("loglog_slope={}\n", float17(slope))),
        None => out.push_str("loglog_slope=n/a\n"),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_sample_sizes() {
        assert_eq!(Regime::TwoDSquared.n_for(4), 32);
        assert_eq!(Regime::TwoDSquared.n_for(64), 8192);
        assert_eq!(Regime::DPow25.n_for(4), 32);
        assert_eq!(Regime::DPow25.n_for(8), 181);
        assert_eq!(Regime::DPow25.n_for(64), 32768);
        assert!(Regime::parse("d3").is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.1) - 1.4).abs() < 1e-12);
        assert!((quantile(&v, 0.9) - 4.6).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.9), 7.0);
    }

    #[test]
    fn single_replicate_summary_quantiles_collapse() {
        let opts = ExperimentOptions {
            replicates: 1,
            base_seed: 3,
            mc_samples: 2000,
            timing: false,
        };
        let res = run_experiment(Regime::TwoDSquared, &[4], &opts).unwrap();
        assert_eq!(res.rows.len(), 1);
        let s = &res.summaries[0];
        assert_eq!(s.q10, res.rows[0].l_hat);
        assert_eq!(s.q90, res.rows[0].l_hat);
        assert_eq!(s.mean_l, res.rows[0].l_hat);
        assert!(res.rows[0].l_hat >= 0.0);
    }

    #[test]
    fn csv_round_trips_and_tolerates_concatenation() {
        let opts = ExperimentOptions {
            replicates: 2,
            base_seed: 1,
            mc_samples: 2000,
            timing: false,
        };
        let res = run_experiment(Regime::TwoDSquared, &[2, 4], &opts).unwrap();
        let csv = rows_to_csv(&res.rows);
        let parsed = rows_from_csv(&csv).unwrap();
        assert_eq!(parsed.len(), res.rows.len());
        assert_eq!(rows_to_csv(&parsed), csv);

        let two_regimes = format!("{csv}{csv}");
        let merged = rows_from_csv(&two_regimes).unwrap();
        assert_eq!(merged.len(), 2 * res.rows.len());

        assert!(rows_from_csv("").is_err());
        assert!(rows_from_csv("bad,header\n").is_err());
        let broken = format!("{CSV_HEADER}\n1,2,3\n");
        let err = rows_from_csv(&broken).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let opts = ExperimentOptions::default();
        assert!(run_experiment(Regime::DPow25, &[], &opts).is_err());
        assert!(run_experiment(Regime::DPow25, &[4, 4], &opts).is_err());
        assert!(run_experiment(Regime::DPow25, &[1, 2], &opts).is_err());
    }

    #[test]
    fn experiment_is_deterministic_across_worker_counts() {
        let opts = ExperimentOptions {
            replicates: 2,
            base_seed: 9,
            mc_samples: 2000,
            timing: false,
        };
        let run = || {
            let res = run_experiment(Regime::DPow25, &[2, 3], &opts).unwrap();
            rows_to_csv(&res.rows) + &summary_text(&res)
        };
        let a = crate::with_workers(1, run);
        let b = crate::with_workers(8, run);
        assert_eq!(a, b);
    }
}
