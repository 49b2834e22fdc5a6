//! Experiment orchestration: configuration, the training loop, logs and
//! multi-seed sweeps.

mod config;
mod log;
mod sweep;
mod train;

pub use config::{Algo, MetaOrder, MetaQ, MetaStates, PolicyOptimizer, RunConfig, CONFIG_KEYS};
pub use log::{fmt_value, smooth, svg_chart, RunLog, RunRow, CSV_HEADER};
pub use sweep::{
    mean_curve, summarize, summary_csv, SettingSummary, SweepRun, SweepSpec, FINAL_WINDOW, SMOOTHING_WINDOW,
    SUMMARY_HEADER,
};
pub use train::{stream_rng, train, Stream, TrainReport, Trainer};

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::StateSample;
use crate::networks::save_policy;

pub const LOG_FILE: &str = "log.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const ROLLOUT_FILE: &str = "rollouts.txt";
pub const CHART_FILE: &str = "log.svg";

/// Writes the log, the resolved configuration, the final policy and the
/// final evaluation states into `dir`, plus a chart when `chart` is set.
pub fn write_run_outputs(report: &TrainReport, cfg: &RunConfig, dir: &Path, chart: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report.log.write_csv(&dir.join(LOG_FILE))?;
    let cfg_path = dir.join(CONFIG_FILE);
    std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    save_policy(&report.policy, &dir.join(POLICY_FILE))?;
    let states_path = dir.join(ROLLOUT_FILE);
    let text = if report.final_eval_states.is_empty() {
        String::new()
    } else {
        StateSample::from_rows(&report.final_eval_states)?.to_text()
    };
    std::fs::write(&states_path, text).map_err(|e| Error::io(&states_path, e))?;
    if chart {
        let rows = report.log.rows();
        let x: Vec<f64> = rows.iter().map(|r| r.step as f64).collect();
        let svg = svg_chart(
            &format!("{} {} seed {}", cfg.env, cfg.algo.name(), cfg.seed),
            &x,
            &[("eval return".into(), rows.iter().map(|r| r.eval_return_mean).collect())],
        );
        let path = dir.join(CHART_FILE);
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
