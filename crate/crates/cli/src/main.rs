use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use metasac::harness::{
    mean_curve, summarize, summary_csv, svg_chart, train, write_run_outputs, RunConfig, RunLog, SweepSpec,
    FINAL_WINDOW, LOG_FILE, SMOOTHING_WINDOW,
};
use metasac::metagrad::gradcheck;
use metasac::metrics::{knn_entropy, trajectory_entropy_rate, RateMode, StateSample, DEFAULT_K};
use metasac::networks::load_policy;
use metasac::{Error, Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "metasac", version, about = "Soft actor-critic with fixed, dual and metagradient temperature tuning")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one agent and write its log, policy and final rollout states.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Also draw the learning curve as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Train a grid of configurations over several seeds and summarize.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Grid axis `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
        /// Number of seeds per grid point (seeds 0..N).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Concurrent child processes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Evaluations averaged for each run's final score.
        #[arg(long, default_value_t = FINAL_WINDOW)]
        final_window: usize,
        /// Trailing window for the smoothed curves.
        #[arg(long, default_value_t = SMOOTHING_WINDOW)]
        smooth: usize,
    },
    /// Check the analytic temperature metagradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Entropy estimates from a saved rollout-state file.
    Metrics {
        /// One state per line, values separated by spaces.
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Policy checkpoint for the trajectory entropy rate.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// `mc` or `gaussian`.
        #[arg(long, default_value = "mc")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat `key = value` file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// sac-v1, sac-v2 or meta-sac.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Fixed temperature (sac-v1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Dual-descent target entropy; defaults to minus the action dimension.
    #[arg(long, allow_hyphen_values = true)]
    target_entropy: Option<f64>,
    /// initial or arbitrary.
    #[arg(long)]
    meta_states: Option<String>,
    /// soft or classic.
    #[arg(long)]
    meta_q: Option<String>,
    /// on or off.
    #[arg(long)]
    resample: Option<String>,
    /// alpha-first or alg1.
    #[arg(long)]
    meta_order: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let flags: [(&str, Option<String>); 14] = [
            ("env", self.env.clone()),
            ("algo", self.algo.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("steps", self.steps.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("target_entropy", self.target_entropy.map(|v| v.to_string())),
            ("meta_states", self.meta_states.clone()),
            ("meta_q", self.meta_q.clone()),
            ("resample", self.resample.clone()),
            ("meta_order", self.meta_order.clone()),
            ("tau", self.tau.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("--set expects key=value, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_train(run: &RunArgs, svg: bool) -> Result<()> {
    let cfg = run.resolve()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs/latest"));
    let report = train(cfg.clone())?;
    write_run_outputs(&report, &cfg, &out, svg)?;
    if let Some(last) = report.log.rows().last() {
        println!(
            "step {} return {:.4} +/- {:.4} log_alpha {:.6}",
            last.step, last.eval_return_mean, last.eval_return_std, last.log_alpha
        );
    }
    println!("wrote {}", out.join(LOG_FILE).display());
    Ok(())
}

fn run_sweep(run: &RunArgs, grid: &[String], seeds: u64, jobs: usize, window: usize, smooth: usize) -> Result<()> {
    let base = run.resolve()?;
    let out = base.out.clone().unwrap_or_else(|| PathBuf::from("runs/sweep"));
    let spec = SweepSpec {
        base,
        grid: grid.iter().map(|g| SweepSpec::parse_axis(g)).collect::<Result<_>>()?,
        seeds: (0..seeds).collect(),
    };
    let runs = spec.expand()?;
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let exe = std::env::current_exe().map_err(|e| io_err("current executable", e))?;

    let mut jobs_dirs = Vec::with_capacity(runs.len());
    for (i, r) in runs.iter().enumerate() {
        let dir = out.join(format!("run{i:03}"));
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut cfg = r.config.clone();
        cfg.out = Some(dir.clone());
        let cfg_path = dir.join("sweep-config.txt");
        std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| io_err(&cfg_path, e))?;
        jobs_dirs.push((r.setting.clone(), cfg_path, dir));
    }

    let mut failures = Vec::new();
    for chunk in jobs_dirs.chunks(jobs.max(1)) {
        let children: Vec<_> = chunk
            .iter()
            .map(|(_, cfg_path, _)| {
                Command::new(&exe)
                    .arg("train")
                    .arg("--config")
                    .arg(cfg_path)
                    .stdout(std::process::Stdio::null())
                    .spawn()
            })
            .collect();
        for (child, (setting, cfg_path, _)) in children.into_iter().zip(chunk) {
            let ok = match child {
                Ok(mut c) => c.wait().map(|s| s.success()).unwrap_or(false),
                Err(_) => false,
            };
            if !ok {
                eprintln!("run failed: {setting} ({})", cfg_path.display());
                failures.push(cfg_path.clone());
            }
        }
    }

    let mut finished = Vec::new();
    for (setting, _, dir) in &jobs_dirs {
        if let Ok(log) = RunLog::read_csv(&dir.join(LOG_FILE)) {
            finished.push((setting.clone(), log));
        }
    }
    let summary = summarize(&finished, window);
    let summary_path = out.join("summary.csv");
    std::fs::write(&summary_path, summary_csv(&summary)).map_err(|e| io_err(&summary_path, e))?;

    let mut series = Vec::new();
    let mut x = Vec::new();
    for s in &summary {
        let logs: Vec<&RunLog> = finished.iter().filter(|(k, _)| *k == s.setting).map(|(_, l)| l).collect();
        let (steps, curve) = mean_curve(&logs, smooth);
        if steps.len() > x.len() {
            x = steps;
        }
        series.push((s.setting.clone(), curve));
    }
    let chart_path = out.join("summary.svg");
    std::fs::write(&chart_path, svg_chart("mean evaluation return", &x, &series))
        .map_err(|e| io_err(&chart_path, e))?;

    for s in &summary {
        println!(
            "{}: {:.4} +/- {:.4} (half std, {} runs), log_alpha {:.4}",
            s.setting, s.final_return_mean, s.final_return_half_std, s.runs, s.final_log_alpha_mean
        );
    }
    println!("wrote {}", summary_path.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} of {} runs failed", failures.len(), jobs_dirs.len())))
    }
}

fn run_gradcheck(instances: usize, seed: u64, h: f64, tol: f64) -> Result<bool> {
    let results = gradcheck(instances, seed, h)?;
    let mut worst: f64 = 0.0;
    for (i, r) in results.iter().enumerate() {
        worst = worst.max(r.rel_err);
        println!(
            "{i:3} width {:2} batch {:2} alpha {:.5} analytic {:+.10e} fd {:+.10e} rel_err {:.2e}{}",
            r.hidden,
            r.batch,
            r.alpha,
            r.analytic,
            r.finite_difference,
            r.rel_err,
            if r.rel_err <= tol { "" } else { "  FAIL" }
        );
    }
    let pass = worst <= tol;
    println!(
        "{} {} instances, worst relative error {:.3e} (tolerance {:.1e})",
        if pass { "PASS" } else { "FAIL" },
        results.len(),
        worst,
        tol
    );
    Ok(pass)
}

fn run_metrics(input: &Path, k: usize, policy: Option<&Path>, mode: &str, seed: u64) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let sample = StateSample::from_text(&text)?;
    println!("states {} dim {}", sample.len(), sample.dim());
    println!("state_entropy {:.9}", knn_entropy(&sample, k)?);
    if let Some(path) = policy {
        let policy = load_policy::<f64>(path)?;
        let states = Tensor::matrix(sample.len(), sample.dim(), sample.data().to_vec())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = trajectory_entropy_rate(&policy, &states, RateMode::parse(mode)?, &mut rng)?;
        println!("traj_entropy_rate {rate:.9}");
    }
    Ok(())
}

fn io_err(path: impl AsRef<Path>, e: std::io::Error) -> Error {
    Error::Io {
        path: path.as_ref().to_path_buf(),
        source: e,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Cmd::Train { run, svg } => run_train(run, *svg),
        Cmd::Sweep {
            run,
            grid,
            seeds,
            jobs,
            final_window,
            smooth,
        } => run_sweep(run, grid, *seeds, *jobs, *final_window, *smooth),
        Cmd::Gradcheck { instances, seed, h, tol } => match run_gradcheck(*instances, *seed, *h, *tol) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Cmd::Metrics {
            input,
            k,
            policy,
            mode,
            seed,
        } => run_metrics(input, *k, policy.as_deref(), mode, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
