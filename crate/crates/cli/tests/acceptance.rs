//! End-to-end acceptance checks. Runs as a plain binary so every verdict is
//! printed, one line per criterion; exits nonzero if a gating one fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use metasac::autodiff::{Graph, ParamSet, Tensor};
use metasac::buffers::Batch;
use metasac::envs::{make_env, Environment};
use metasac::harness::{train, Algo, MetaStates, RunConfig, TrainReport, FINAL_WINDOW};
use metasac::metagrad::{
    decompose_policy_grad, gradcheck, meta_loss_and_grad, GradcheckInstance, GRADCHECK_WIDTHS,
};
use metasac::metrics::{knn_entropy, trajectory_entropy_rate, RateMode, StateSample};
use metasac::networks::{Policy, PolicySpec, LOG_STD_MAX, LOG_STD_MIN};
use metasac::sac::{policy_loss, q_loss};
use metasac::alpha::{AlphaOptimizer, AlphaState, META_GRAD_CLIP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Desk-scale training fixture shared by the learning criteria.
const HIDDEN: usize = 64;
const BATCH: usize = 64;
const STEPS: usize = 30_000;
const ALPHA_LR: f64 = 1e-2;
const SEEDS: u64 = 5;
const ALPHA_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// Pinned PointMass2D return threshold for fixed alpha = 0.2 after 3e4 steps.
const R_STAR: f64 = -20.0;

const LN_2PI_E: f64 = 2.837_877_066_409_345_6;

struct Verdict {
    id: u32,
    pass: bool,
    gating: bool,
    detail: String,
}

fn report(id: u32, pass: bool, detail: String) -> Verdict {
    announce(Verdict {
        id,
        pass,
        gating: true,
        detail,
    })
}

fn announce(v: Verdict) -> Verdict {
    println!("{}", line(&v));
    v
}

fn line(v: &Verdict) -> String {
    format!(
        "criterion {:2} {}{}: {}",
        v.id,
        if v.pass { "PASS" } else { "FAIL" },
        if v.gating { "" } else { " (report only)" },
        v.detail
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn max_rel(a: &ParamSet<f64>, b: &ParamSet<f64>) -> f64 {
    a.flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| rel_err(*x, y))
        .fold(0.0, f64::max)
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let results = gradcheck(50, 2024, 1e-4).unwrap();
    let elapsed = start.elapsed();
    let worst = results.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let widths: Vec<usize> = GRADCHECK_WIDTHS
        .iter()
        .filter(|w| results.iter().any(|r| r.hidden == **w))
        .copied()
        .collect();
    report(
        1,
        worst <= 1e-4 && elapsed <= Duration::from_secs(60) && results.len() >= 50,
        format!(
            "{} instances (widths {widths:?}), worst relative error {worst:.2e}, {:.1}s",
            results.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let inst = GradcheckInstance::random(&mut rng).unwrap();
        let alpha = rng.gen_range(0.0..1.0);
        let dec = decompose_policy_grad(&inst.policy, &inst.critic, &inst.states, &inst.noise).unwrap();
        let combined = dec.combined(alpha).unwrap().flatten();
        let mut g = Graph::new();
        let p = g.bind(&inst.policy.params);
        let c = g.bind_constant(&inst.critic.params);
        let (loss, _) = policy_loss(&mut g, &inst.policy, &p, &inst.critic, &c, alpha, &inst.states, &inst.noise).unwrap();
        let direct = g.gradients(loss, &p).unwrap().flatten();
        for (a, b) in combined.iter().zip(&direct) {
            // Entries at rounding level are compared absolutely.
            let err = if (a - b).abs() < 1e-15 { 0.0 } else { (a - b).abs() / b.abs() };
            worst = worst.max(err);
        }
    }
    let elapsed = start.elapsed();
    report(
        2,
        worst <= 1e-12 && elapsed <= Duration::from_secs(5),
        format!("5 alphas, worst elementwise relative error {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

/// `x W^T + b` with optional relu, recording which side of zero every
/// pre-activation sits on.
fn dense(x: &[f64], n: usize, w: &Tensor<f64>, b: &Tensor<f64>, relu: bool, pattern: &mut Vec<u8>) -> Vec<f64> {
    let (m, k) = w.shape().as_matrix();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for o in 0..m {
            let z = b.data()[o] + (0..k).map(|j| x[i * k + j] * w.data()[o * k + j]).sum::<f64>();
            out[i * m + o] = if relu {
                pattern.push(u8::from(z > 0.0));
                z.max(0.0)
            } else {
                z
            };
        }
    }
    out
}

fn layer<'a>(p: &'a ParamSet<f64>, prefix: &str, l: usize) -> Option<(&'a Tensor<f64>, &'a Tensor<f64>)> {
    Some((p.get(&format!("{prefix}l{l}.w"))?, p.get(&format!("{prefix}l{l}.b"))?))
}

fn mlp(p: &ParamSet<f64>, prefix: &str, mut x: Vec<f64>, n: usize, relu_last: bool, pattern: &mut Vec<u8>) -> Vec<f64> {
    let mut l = 0;
    while let Some((w, b)) = layer(p, prefix, l) {
        let last = layer(p, prefix, l + 1).is_none();
        x = dense(&x, n, w, b, !last || relu_last, pattern);
        l += 1;
    }
    x
}

/// Activation pattern of every non-smooth point on the path from the
/// weights to the losses: relu signs, the log-std clamp region and the twin
/// minimum. Actions come from `actions` if given, otherwise from the policy
/// (sampled with `noise`, or deterministic).
fn kink_pattern(
    policy: &ParamSet<f64>,
    critic: &ParamSet<f64>,
    bound: f64,
    states: &Tensor<f64>,
    actions: Option<&Tensor<f64>>,
    noise: Option<&Tensor<f64>>,
) -> Vec<u8> {
    let (n, sd) = states.shape().as_matrix();
    let mut pattern = Vec::new();
    let acts = match actions {
        Some(a) => a.data().to_vec(),
        None => {
            let h = mlp(policy, "trunk.", states.data().to_vec(), n, true, &mut pattern);
            let mu = mlp(policy, "mu.", h.clone(), n, false, &mut pattern);
            let raw = mlp(policy, "log_std.", h, n, false, &mut pattern);
            pattern.extend(raw.iter().map(|&r| u8::from(r > LOG_STD_MIN) + u8::from(r > LOG_STD_MAX)));
            match noise {
                Some(eps) => (0..mu.len())
                    .map(|i| bound * (mu[i] + raw[i].clamp(LOG_STD_MIN, LOG_STD_MAX).exp() * eps.data()[i]).tanh())
                    .collect(),
                None => mu.iter().map(|m| bound * m.tanh()).collect(),
            }
        }
    };
    let ad = acts.len() / n;
    let input: Vec<f64> = (0..n)
        .flat_map(|i| states.row(i).iter().chain(&acts[i * ad..(i + 1) * ad]).copied().collect::<Vec<_>>())
        .collect();
    debug_assert_eq!(input.len(), n * (sd + ad));
    let q1 = mlp(critic, "q1.", input.clone(), n, false, &mut pattern);
    let q2 = mlp(critic, "q2.", input, n, false, &mut pattern);
    pattern.extend(q1.iter().zip(&q2).map(|(a, b)| u8::from(a < b)));
    pattern
}

/// Central differences, or `None` when some coordinate's stencil crosses a
/// point where `pattern` changes, i.e. where no derivative exists to compare
/// against.
fn smooth_fd_gradient(
    params: &ParamSet<f64>,
    h: f64,
    f: impl Fn(&ParamSet<f64>) -> f64,
    pattern: impl Fn(&ParamSet<f64>) -> Vec<u8>,
) -> Option<ParamSet<f64>> {
    let at = pattern(params);
    let flat = params.flatten();
    let mut work = flat.clone();
    let mut grad = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let mut side = |x: f64| {
            work[i] = x;
            let p = params.unflatten(&work).unwrap();
            (f(&p), pattern(&p) == at)
        };
        let (plus, same_plus) = side(flat[i] + h);
        let (minus, same_minus) = side(flat[i] - h);
        work[i] = flat[i];
        if !(same_plus && same_minus) {
            return None;
        }
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Some(params.unflatten(&grad).unwrap())
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let (mut wq, mut wpi, mut wmeta) = (0.0f64, 0.0f64, 0.0f64);
    let (mut checked, mut redrawn) = (0, 0);
    while checked < 100 {
        let inst = GradcheckInstance::random(&mut rng).unwrap();
        let n = inst.batch;
        let alpha = inst.alpha;

        let bound = inst.policy.spec().action_bound;
        let batch = Batch {
            states: inst.states.clone(),
            actions: normal(&mut rng, n, 2).map(|v| bound * v.tanh()),
            rewards: normal(&mut rng, n, 1),
            next_states: normal(&mut rng, n, 3),
            not_terminal: Tensor::matrix(n, 1, vec![1.0; n]).unwrap(),
            indices: (0..n).collect(),
        };
        let targets = normal(&mut rng, n, 1);
        let pol = &inst.policy.params;
        let crit = &inst.critic.params;

        let q_value = |params: &ParamSet<f64>| {
            let mut g = Graph::new();
            let p = g.bind_constant(params);
            let l = q_loss(&mut g, &inst.critic, &p, &batch, &targets).unwrap();
            g.item(l)
        };
        let q_pattern = |c: &ParamSet<f64>| kink_pattern(pol, c, bound, &batch.states, Some(&batch.actions), None);
        let pi_value = |params: &ParamSet<f64>| {
            let mut g = Graph::new();
            let p = g.bind_constant(params);
            let c = g.bind_constant(crit);
            let (l, _) = policy_loss(&mut g, &inst.policy, &p, &inst.critic, &c, alpha, &inst.states, &inst.noise).unwrap();
            g.item(l)
        };
        let pi_pattern = |p: &ParamSet<f64>| kink_pattern(p, crit, bound, &inst.states, None, Some(&inst.noise));
        let meta_value = |params: &ParamSet<f64>| {
            meta_loss_and_grad(&inst.policy, params, &inst.critic, &inst.meta_states, false).unwrap().0
        };
        let meta_pattern = |p: &ParamSet<f64>| kink_pattern(p, crit, bound, &inst.meta_states, None, None);

        let fds = (
            smooth_fd_gradient(crit, h, q_value, q_pattern),
            smooth_fd_gradient(pol, h, pi_value, pi_pattern),
            smooth_fd_gradient(pol, h, meta_value, meta_pattern),
        );
        let (Some(fd_q), Some(fd_pi), Some(fd_meta)) = fds else {
            redrawn += 1;
            continue;
        };
        checked += 1;

        let mut g = Graph::new();
        let p = g.bind(crit);
        let l = q_loss(&mut g, &inst.critic, &p, &batch, &targets).unwrap();
        wq = wq.max(max_rel(&g.gradients(l, &p).unwrap(), &fd_q));

        let mut g = Graph::new();
        let p = g.bind(pol);
        let c = g.bind_constant(crit);
        let (l, _) = policy_loss(&mut g, &inst.policy, &p, &inst.critic, &c, alpha, &inst.states, &inst.noise).unwrap();
        wpi = wpi.max(max_rel(&g.gradients(l, &p).unwrap(), &fd_pi));

        let (_, grad) = meta_loss_and_grad(&inst.policy, pol, &inst.critic, &inst.meta_states, true).unwrap();
        wmeta = wmeta.max(max_rel(&grad.unwrap(), &fd_meta));
    }
    let elapsed = start.elapsed();
    let worst = wq.max(wpi).max(wmeta);
    report(
        3,
        worst <= 1e-5 && elapsed <= Duration::from_secs(60),
        format!(
            "100 instances ({redrawn} redrawn across a kink), worst relative error q_loss {wq:.2e}, policy_loss {wpi:.2e}, meta_loss {wmeta:.2e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, flm, left, tol / 2.0, depth - 1) + rec(f, m, fm, b, fb, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, fa, b, fb, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn scalar_policy(bound: f64) -> Policy<f64> {
    let spec = PolicySpec {
        state_dim: 1,
        action_dim: 1,
        hidden: vec![4],
        action_bound: bound,
    };
    Policy::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn log_density(pi: &Policy<f64>, mu: f64, log_std: f64, noise: f64) -> f64 {
    let mut g = Graph::new();
    let m = g.constant(Tensor::matrix(1, 1, vec![mu]).unwrap());
    let s = g.constant(Tensor::matrix(1, 1, vec![log_std]).unwrap());
    let out = pi.sample_from_heads(&mut g, m, s, &Tensor::matrix(1, 1, vec![noise]).unwrap()).unwrap();
    g.item(out.log_prob)
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mu: f64 = rng.gen_range(-2.0..2.0);
        let log_std: f64 = rng.gen_range(-2.0..1.0);
        let b: f64 = rng.gen_range(0.3..3.0);
        let pi = scalar_policy(b);
        let density = |a: f64| {
            let noise = ((a / b).atanh() - mu) / log_std.exp();
            let lp = log_density(&pi, mu, log_std, noise);
            if lp.is_finite() {
                lp.exp()
            } else {
                0.0
            }
        };
        let pieces = 64;
        let w = 2.0 * b / pieces as f64;
        let total: f64 = (0..pieces).map(|i| simpson(&density, -b + i as f64 * w, -b + (i + 1) as f64 * w, 1e-6)).sum();
        worst = worst.max((total - 1.0).abs());
    }
    let pi = scalar_policy(1.0);
    let finite = (-50..=50).all(|u| log_density(&pi, 0.0, 0.0, u as f64).is_finite());
    report(
        4,
        worst <= 1e-3 && finite,
        format!("20 densities, worst |integral - 1| {worst:.2e}; log_prob finite for |u| <= 50: {finite}"),
    )
}

fn criterion_6() -> Verdict {
    let action_dim = 2;
    let h = -(action_dim as f64);
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, entropy, expect) in [("above", h + 0.7, -1i32), ("below", h - 0.7, 1), ("at", h, 0)] {
        // Spread the log-probs around the requested mean entropy.
        let log_probs: Vec<f64> = (0..8).map(|i| -entropy + 0.25 * (i as f64 - 3.5)).collect();
        let mut s = AlphaState::new(0.5, 1e-2, AlphaOptimizer::Sgd).unwrap();
        let before = s.alpha();
        s.dual_update(&log_probs, h).unwrap();
        let moved = (s.alpha() - before).abs() > 1e-15;
        let got = if !moved {
            0
        } else if s.alpha() > before {
            1
        } else {
            -1
        };
        ok &= got == expect;
        parts.push(format!("{label}: {before:.6} -> {:.6}", s.alpha()));
    }
    report(6, ok, parts.join(", "))
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 50_000;
    let uniform: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
    let h_uniform = knn_entropy(&StateSample::from_rows(&uniform).unwrap(), 3).unwrap();
    let gauss: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
    let gauss = StateSample::from_flat(2, gauss).unwrap();
    let h_gauss = knn_entropy(&gauss, 3).unwrap();

    let small = StateSample::from_flat(2, gauss.data()[..4000].to_vec()).unwrap();
    let base = knn_entropy(&small, 3).unwrap();
    let scaling = [0.1, 2.0, 37.0]
        .iter()
        .map(|&c| (knn_entropy(&small.map(|v| v * c).unwrap(), 3).unwrap() - base - 2.0 * f64::ln(c)).abs())
        .fold(0.0, f64::max);

    let spec = PolicySpec {
        state_dim: 3,
        action_dim: 2,
        hidden: vec![8, 8],
        action_bound: 1.0,
    };
    let pi = Policy::<f64>::new(spec, &mut rng).unwrap();
    let states = normal(&mut rng, 64, 3);
    let rate = trajectory_entropy_rate(&pi, &states, RateMode::Gaussian, &mut rng).unwrap();
    let closed: f64 = (0..64)
        .map(|i| {
            let (_, ls) = pi.head_values(&Tensor::matrix(1, 3, states.row(i).to_vec()).unwrap()).unwrap();
            ls.data().iter().map(|l| 0.5 * LN_2PI_E + l).sum::<f64>()
        })
        .sum::<f64>()
        / 64.0;
    let rate_err = (rate - closed).abs();

    let pass = h_uniform.abs() <= 0.05 && (h_gauss - LN_2PI_E).abs() <= 0.05 && scaling <= 1e-9 && rate_err <= 1e-12;
    report(
        10,
        pass,
        format!(
            "uniform {h_uniform:+.4} (want 0), normal {h_gauss:.4} (want {LN_2PI_E:.6}), scaling error {scaling:.1e}, gaussian rate error {rate_err:.1e}"
        ),
    )
}

fn criterion_11() -> Verdict {
    let base = std::env::temp_dir().join(format!("metasac-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let run = |name: &str| -> Option<Vec<u8>> {
        let out: PathBuf = base.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_metasac"))
            .args(["train", "--algo", "meta-sac", "--env", "pendulum", "--seed", "7", "--steps", "3000", "--batch", "32"])
            .args(["--set", "start_steps=1000", "--set", "hidden=32", "--set", "d0_size=32", "--set", "eval_interval=1000"])
            .arg("--out")
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .ok()?;
        if !status.success() {
            return None;
        }
        std::fs::read(out.join("log.csv")).ok()
    };
    let (a, b) = (run("a"), run("b"));
    let _ = std::fs::remove_dir_all(&base);
    let pass = matches!((&a, &b), (Some(x), Some(y)) if x == y && !x.is_empty());
    report(
        11,
        pass,
        format!("two train invocations, {} CSV bytes each, identical: {pass}", a.map(|x| x.len()).unwrap_or(0)),
    )
}

fn fixture(env: &str, algo: Algo, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.env = env.to_string();
    cfg.algo = algo;
    cfg.seed = seed;
    cfg.steps = STEPS;
    cfg.hidden = HIDDEN;
    cfg.sac.batch_size = BATCH;
    cfg.d0_size = BATCH;
    cfg.alpha_lr = ALPHA_LR;
    cfg
}

struct Run {
    report: TrainReport,
    elapsed: Duration,
}

impl Run {
    fn score(&self) -> f64 {
        self.report.log.final_window_mean(FINAL_WINDOW).unwrap()
    }
}

fn run(cfg: RunConfig) -> Run {
    let label = format!("{} {} alpha {} seed {} meta_states {:?}", cfg.env, cfg.algo.name(), cfg.alpha, cfg.seed, cfg.meta_states);
    let start = Instant::now();
    let report = train(cfg).unwrap();
    let r = Run {
        report,
        elapsed: start.elapsed(),
    };
    println!("  trained {label}: final-window return {:.4}, {:.0}s", r.score(), r.elapsed.as_secs_f64());
    r
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Return of uniformly random actions, for scale.
fn random_policy_return(env: &dyn Environment, episodes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let spec = env.spec();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = env.reset(&mut rng);
        loop {
            let a: Vec<f64> = (0..spec.action_dim).map(|_| rng.gen_range(-spec.action_bound..=spec.action_bound)).collect();
            let out = env.step(&s, &a).unwrap();
            total += out.reward;
            s = out.state;
            if out.done {
                break;
            }
        }
    }
    total / episodes as f64
}

struct EnvSweep {
    fixed: Vec<(f64, Vec<Run>)>,
    meta: Vec<Run>,
}

fn sweep(env: &str) -> EnvSweep {
    let fixed = ALPHA_GRID
        .iter()
        .map(|&alpha| {
            let runs = (0..SEEDS)
                .map(|seed| {
                    let mut cfg = fixture(env, Algo::SacV1, seed);
                    cfg.alpha = alpha;
                    run(cfg)
                })
                .collect();
            (alpha, runs)
        })
        .collect();
    let meta = (0..SEEDS).map(|seed| run(fixture(env, Algo::MetaSac, seed))).collect();
    EnvSweep { fixed, meta }
}

/// Criteria named on the command line, or all of them.
fn selected() -> Vec<u32> {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=11).collect()
    } else {
        picked
    }
}

fn main() -> ExitCode {
    let wanted = selected();
    let quick: [(u32, fn() -> Verdict); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (6, criterion_6),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut verdicts: Vec<Verdict> = quick.iter().filter(|(id, _)| wanted.contains(id)).map(|(_, f)| f()).collect();
    if [5, 7, 8, 9].iter().any(|id| wanted.contains(id)) {
        verdicts.extend(training_criteria());
    }
    verdicts.sort_by_key(|v| v.id);
    println!("\nacceptance summary");
    for v in &verdicts {
        println!("{}", line(v));
    }
    if verdicts.iter().all(|v| v.pass || !v.gating) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Criteria 5, 7, 8 and 9, which share one training sweep.
fn training_criteria() -> Vec<Verdict> {
    let mut verdicts = Vec::new();
    let start = Instant::now();
    let sweeps: Vec<(&str, EnvSweep)> = ["pointmass", "pendulum"].iter().map(|&e| (e, sweep(e))).collect();
    let sweep_time = start.elapsed();

    // Clipping invariants over every Meta-SAC run of the sweep.
    let metas: Vec<&Run> = sweeps.iter().flat_map(|(_, s)| s.meta.iter()).collect();
    let logged_max = metas
        .iter()
        .flat_map(|r| r.report.log.rows().iter().map(|row| row.log_alpha))
        .fold(f64::NEG_INFINITY, f64::max);
    let held_max = metas.iter().map(|r| r.report.max_log_alpha).fold(f64::NEG_INFINITY, f64::max);
    let grad_max = metas.iter().map(|r| r.report.max_abs_alpha_grad).fold(0.0, f64::max);
    let updates: u64 = metas.iter().map(|r| r.report.alpha_updates).sum();
    verdicts.push(report(
        5,
        logged_max <= 0.0 && held_max <= 0.0 && grad_max <= META_GRAD_CLIP && updates > 0,
        format!(
            "{} meta-sac runs, {updates} temperature updates: max logged log_alpha {logged_max:.4}, max held {held_max:.4}, max |applied grad| {grad_max:.4}",
            metas.len()
        ),
    ));

    let pm = &sweeps[0].1;
    let (_, fixed02) = pm.fixed.iter().find(|(a, _)| *a == 0.2).unwrap();
    let first3 = &fixed02[..3];
    let worst = first3.iter().map(Run::score).fold(f64::INFINITY, f64::min);
    let slowest = first3.iter().map(|r| r.elapsed).max().unwrap();
    let random = random_policy_return(make_env("pointmass").unwrap().as_ref(), 10);
    verdicts.push(report(
        7,
        worst >= R_STAR && slowest <= Duration::from_secs(600),
        format!(
            "pointmass alpha 0.2, seeds 0-2 final-window returns [{}], R* {R_STAR}, random policy {random:.2}, slowest seed {:.0}s",
            first3.iter().map(|r| format!("{:.3}", r.score())).collect::<Vec<_>>().join(", "),
            slowest.as_secs_f64()
        ),
    ));

    let mut ok8 = sweep_time <= Duration::from_secs(7200);
    let mut parts = Vec::new();
    for (env, s) in &sweeps {
        let (best_alpha, best) = s
            .fixed
            .iter()
            .map(|(a, runs)| (*a, mean(runs.iter().map(Run::score))))
            .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let meta = mean(s.meta.iter().map(Run::score));
        let close = meta >= best - 0.1 * best.abs();
        let fell = s.meta.iter().all(|r| r.report.final_log_alpha < r.report.initial_log_alpha);
        ok8 &= close && fell;
        parts.push(format!(
            "{env}: meta {meta:.3} vs best fixed {best:.3} (alpha {best_alpha}) within 10%: {close}, final log_alpha [{}] below initial: {fell}",
            s.meta.iter().map(|r| format!("{:.3}", r.report.final_log_alpha)).collect::<Vec<_>>().join(", ")
        ));
    }
    parts.push(format!("{:.0}s", sweep_time.as_secs_f64()));
    verdicts.push(report(8, ok8, parts.join("; ")));

    let pendulum = &sweeps[1].1;
    let arbitrary: Vec<Run> = (0..SEEDS)
        .map(|seed| {
            let mut cfg = fixture("pendulum", Algo::MetaSac, seed);
            cfg.meta_states = MetaStates::Arbitrary;
            run(cfg)
        })
        .collect();
    let arb = mean(arbitrary.iter().map(Run::score));
    let init = mean(pendulum.meta.iter().map(Run::score));
    verdicts.push(announce(Verdict {
        id: 9,
        pass: arb <= init,
        gating: false,
        detail: format!("pendulum meta-sac arbitrary states {arb:.3} vs initial states {init:.3}"),
    }));
    verdicts
}
