use std::collections::BTreeMap;

use super::config::RunConfig;
use super::log::{fmt_value, RunLog};
use crate::error::{Error, Result};
use crate::sac::mean_std;

/// Evaluations averaged for a run's final score.
pub const FINAL_WINDOW: usize = 5;
/// Trailing window used to smooth learning curves.
pub const SMOOTHING_WINDOW: usize = 20;

/// A base configuration, a grid of overrides, and the seeds to repeat each
/// grid point with.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub grid: Vec<(String, Vec<String>)>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    /// Grid assignment shared by all seeds of this point, e.g.
    /// `algo=sac-v1 alpha=0.2`.
    pub setting: String,
    pub config: RunConfig,
}

impl SweepSpec {
    /// Parses `key=v1,v2,...` into a grid axis.
    pub fn parse_axis(text: &str) -> Result<(String, Vec<String>)> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("grid axis `{text}` must look like key=v1,v2")))?;
        let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::Parse(format!("grid axis `{k}` has no values")));
        }
        Ok((k.trim().to_string(), values))
    }

    /// Cartesian product of the grid, outermost axis first, each point
    /// repeated for every seed. Every configuration is validated.
    pub fn expand(&self) -> Result<Vec<SweepRun>> {
        if self.seeds.is_empty() {
            return Err(Error::Config("a sweep needs at least one seed".into()));
        }
        let mut points: Vec<(Vec<String>, RunConfig)> = vec![(Vec::new(), self.base.clone())];
        for (key, values) in &self.grid {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for (label, cfg) in &points {
                for v in values {
                    let mut cfg = cfg.clone();
                    cfg.set(key, v)?;
                    let mut label = label.clone();
                    label.push(format!("{key}={v}"));
                    next.push((label, cfg));
                }
            }
            points = next;
        }
        let mut runs = Vec::with_capacity(points.len() * self.seeds.len());
        for (label, cfg) in points {
            let setting = if label.is_empty() {
                format!("env={} algo={}", cfg.env, cfg.algo.name())
            } else {
                label.join(" ")
            };
            for &seed in &self.seeds {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                cfg.validate()?;
                runs.push(SweepRun {
                    setting: setting.clone(),
                    config: cfg,
                });
            }
        }
        Ok(runs)
    }
}

/// Aggregate of all seeds of one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingSummary {
    pub setting: String,
    pub runs: usize,
    /// Mean over seeds of each run's final-window mean return.
    pub final_return_mean: f64,
    /// Half the standard deviation over seeds of the same quantity.
    pub final_return_half_std: f64,
    pub final_log_alpha_mean: f64,
    /// Per-seed final-window means, in input order.
    pub per_run: Vec<f64>,
}

/// Groups finished runs by setting (first-appearance order) and reduces
/// each group. Runs with empty logs are skipped.
pub fn summarize(runs: &[(String, RunLog)], window: usize) -> Vec<SettingSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunLog>> = BTreeMap::new();
    for (setting, log) in runs {
        if log.is_empty() {
            continue;
        }
        if !groups.contains_key(setting.as_str()) {
            order.push(setting);
        }
        groups.entry(setting).or_default().push(log);
    }
    order
        .into_iter()
        .map(|setting| {
            let logs = &groups[setting];
            let finals: Vec<f64> = logs.iter().filter_map(|l| l.final_window_mean(window)).collect();
            let (mean, std) = mean_std(&finals);
            let alphas: Vec<f64> = logs.iter().filter_map(|l| l.rows().last().map(|r| r.log_alpha)).collect();
            SettingSummary {
                setting: setting.to_string(),
                runs: logs.len(),
                final_return_mean: mean,
                final_return_half_std: 0.5 * std,
                final_log_alpha_mean: mean_std(&alphas).0,
                per_run: finals,
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "setting,runs,final_return_mean,final_return_half_std,final_log_alpha_mean";

pub fn summary_csv(rows: &[SettingSummary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.setting,
            r.runs,
            fmt_value(r.final_return_mean),
            fmt_value(r.final_return_half_std),
            fmt_value(r.final_log_alpha_mean)
        ));
    }
    out
}

/// Seed-averaged, smoothed return curve of logs that share their steps.
pub fn mean_curve(logs: &[&RunLog], window: usize) -> (Vec<f64>, Vec<f64>) {
    let len = logs.iter().map(|l| l.len()).min().unwrap_or(0);
    let steps = logs
        .first()
        .map(|l| l.rows()[..len].iter().map(|r| r.step as f64).collect())
        .unwrap_or_default();
    let mean: Vec<f64> = (0..len)
        .map(|i| logs.iter().map(|l| l.rows()[i].eval_return_mean).sum::<f64>() / logs.len() as f64)
        .collect();
    (steps, super::log::smooth(&mean, window))
}
