//! Monte-Carlo sweep over channel realizations, powers and variants.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::harness::scenario::{build_scenario, network_at, trial_channels};
use crate::solver::{fmt_f64, run, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub variant: Variant,
    pub power_dbm: f64,
    pub trial: usize,
    /// Best sum rate found; `None` when the solver failed.
    pub sum_rate: Option<f64>,
    pub iterations: usize,
    pub wall_ms: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: Variant,
    pub power_dbm: f64,
    pub mean: f64,
    /// Standard error of the mean; zero with fewer than two trials.
    pub stderr: f64,
    pub trials: usize,
    pub failed: usize,
}

/// Rows ordered by trial, then power, then variant in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub rows: Vec<TrialResult>,
}

/// Runs every enabled variant at every power on every trial. Each trial
/// draws its channels once and reuses them across powers and variants.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepResults> {
    let topology = build_scenario(config)?;
    let per_trial: Vec<Result<Vec<TrialResult>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, &topology, trial))
        .collect();
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(SweepResults { rows })
}

fn run_trial(config: &ScenarioConfig, topology: &crate::channels::NetworkTopology, trial: usize) -> Result<Vec<TrialResult>> {
    let channels = Arc::new(trial_channels(config, topology, trial)?);
    let mut out = Vec::with_capacity(config.power_dbm.len() * config.variants.len());
    for &power_dbm in &config.power_dbm {
        let network = network_at(config, channels.clone(), power_dbm)?;
        for &variant in &config.variants {
            let start = std::time::Instant::now();
            let result = run(&network, &config.solver.with_variant(variant));
            let wall_ms = config.record_wall_time.then(|| start.elapsed().as_secs_f64() * 1e3);
            out.push(match result {
                Ok(o) => TrialResult {
                    variant,
                    power_dbm,
                    trial,
                    sum_rate: Some(o.best_sum_rate),
                    iterations: o.iterations(),
                    wall_ms,
                    error: None,
                },
                Err(e) => TrialResult {
                    variant,
                    power_dbm,
                    trial,
                    sum_rate: None,
                    iterations: e.trace.len(),
                    wall_ms,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(out)
}

impl SweepResults {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.sum_rate.is_none()).count()
    }

    /// Mean and standard error per (variant, power), failed trials skipped.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Variant, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|k| k.0 == r.variant && k.1 == r.power_dbm) {
                keys.push((r.variant, r.power_dbm));
            }
        }
        // variant-major order, powers in first-seen order
        let mut ordered: Vec<(Variant, f64)> = Vec::with_capacity(keys.len());
        for k in &keys {
            if !ordered.iter().any(|o| o.0 == k.0) {
                ordered.extend(keys.iter().filter(|o| o.0 == k.0));
            }
        }
        ordered
            .into_iter()
            .map(|(variant, power_dbm)| {
                let group: Vec<&TrialResult> =
                    self.rows.iter().filter(|r| r.variant == variant && r.power_dbm == power_dbm).collect();
                let values: Vec<f64> = group.iter().filter_map(|r| r.sum_rate).collect();
                let n = values.len();
                let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
                let stderr = if n > 1 {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (var / n as f64).sqrt()
                } else {
                    0.0
                };
                SummaryRow { variant, power_dbm, mean, stderr, trials: n, failed: group.len() - n }
            })
            .collect()
    }

    /// `variant,P_dBm,trial,sum_rate_bps_hz,iters,wall_ms`.
    pub fn write_results<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "P_dBm", "trial", "sum_rate_bps_hz", "iters", "wall_ms"])?;
        for r in &self.rows {
            w.write_record([
                r.variant.name().to_string(),
                fmt_f64(r.power_dbm),
                r.trial.to_string(),
                r.sum_rate.map(fmt_f64).unwrap_or_default(),
                r.iterations.to_string(),
                r.wall_ms.map(|v| format!("{v:.3}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `variant,P_dBm,mean_sum_rate_bps_hz,stderr,trials,failed`.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variant", "P_dBm", "mean_sum_rate_bps_hz", "stderr", "trials", "failed"])?;
        for s in self.summary() {
            w.write_record([
                s.variant.name().to_string(),
                fmt_f64(s.power_dbm),
                fmt_f64(s.mean),
                fmt_f64(s.stderr),
                s.trials.to_string(),
                s.failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Coordination, RisMode};

    fn row(variant: Variant, p: f64, trial: usize, rate: Option<f64>) -> TrialResult {
        TrialResult { variant, power_dbm: p, trial, sum_rate: rate, iterations: 1, wall_ms: None, error: None }
    }

    #[test]
    fn summary_statistics() {
        let v = Variant::new(RisMode::Diagonal, Coordination::Cooperative);
        let res = SweepResults {
            rows: vec![row(v, 10.0, 0, Some(1.0)), row(v, 10.0, 1, Some(3.0)), row(v, 10.0, 2, None)],
        };
        let s = &res.summary()[0];
        assert_eq!((s.mean, s.trials, s.failed), (2.0, 2, 1));
        assert!((s.stderr - 1.0).abs() < 1e-15);
        assert_eq!(res.failures(), 1);
    }

    #[test]
    fn results_schema() {
        let v = Variant::default();
        let res = SweepResults { rows: vec![row(v, 25.0, 0, Some(1.5))] };
        let mut buf = Vec::new();
        res.write_results(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "variant,P_dBm,trial,sum_rate_bps_hz,iters,wall_ms\nbd-ris,25.0,0,1.5,1,\n");
    }
}
