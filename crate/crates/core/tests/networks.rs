mod common;

use common::{fd_gradient, integrate, max_rel_err, normal, rel_err};
use metasac::autodiff::{Graph, ParamSet, Tensor};
use metasac::networks::{polyak_update, squashed_log_density, Critic, CriticSpec, Policy, PolicySpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn policy(seed: u64, width: usize, bound: f64) -> Policy<f64> {
    let spec = PolicySpec {
        state_dim: 3,
        action_dim: 2,
        hidden: vec![width, width],
        action_bound: bound,
    };
    let mut p = Policy::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    // Make the heads matter for the gradient check.
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for (name, t) in p.params.iter_mut() {
        if name.starts_with("mu.") || name.starts_with("log_std.") {
            for v in t.data_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
    p
}

fn critic(seed: u64) -> Critic<f64> {
    let spec = CriticSpec {
        state_dim: 3,
        action_dim: 2,
        hidden: vec![8, 8],
        twin: true,
    };
    Critic::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Log-density of a single action under heads `(mu, log_std)` computed by
/// pushing the matching noise through the graph.
fn graph_log_density(pi: &Policy<f64>, a: f64, mu: f64, log_std: f64) -> f64 {
    let b = pi.spec().action_bound;
    let u = (a / b).atanh();
    let noise = (u - mu) / log_std.exp();
    let mut g = Graph::new();
    let m = g.constant(Tensor::matrix(1, 1, vec![mu]).unwrap());
    let s = g.constant(Tensor::matrix(1, 1, vec![log_std]).unwrap());
    let out = pi
        .sample_from_heads(&mut g, m, s, &Tensor::matrix(1, 1, vec![noise]).unwrap())
        .unwrap();
    g.item(out.log_prob)
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

#[test]
fn squashed_density_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let mu: f64 = rng.gen_range(-2.0..2.0);
        let log_std: f64 = rng.gen_range(-2.0..1.0);
        let b: f64 = rng.gen_range(0.3..3.0);
        let pi = scalar_policy(b);
        let density = |a: f64| {
            let lp = graph_log_density(&pi, a, mu, log_std);
            if lp.is_finite() {
                lp.exp()
            } else {
                0.0
            }
        };
        // Split the interval so the adaptive rule cannot step over a narrow peak.
        let pieces = 64;
        let width = 2.0 * b / pieces as f64;
        let total: f64 = (0..pieces)
            .map(|i| {
                let lo = -b + i as f64 * width;
                integrate(&density, lo, lo + width, 1e-6)
            })
            .sum();
        assert!((total - 1.0).abs() <= 1e-3, "mu {mu} log_std {log_std} b {b}: {total}");
    }
}

#[test]
fn graph_density_matches_closed_form() {
    let pi = scalar_policy(0.4);
    for &(a, mu, ls) in &[(0.1, 0.0, 0.0), (-0.39, 0.5, -1.0), (0.0, 1.5, 0.7)] {
        let want = squashed_log_density(a, mu, ls, 0.4);
        assert!(rel_err(graph_log_density(&pi, a, mu, ls), want) <= 1e-10);
    }
}

#[test]
fn policy_sample_gradients_match_finite_differences() {
    let pi = policy(1, 8, 1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let states = normal(&mut rng, 5, 3);
    let noise = normal(&mut rng, 5, 2);
    let objective = |g: &mut Graph<f64>, p: &metasac::autodiff::BoundParams| {
        let s = g.constant(states.clone());
        let out = pi.sample(g, p, s, &noise).unwrap();
        let lp = g.sum(out.log_prob);
        let act = g.sum(out.action);
        let half = g.scale(act, 0.5);
        g.add(lp, half).unwrap()
    };
    let mut g = Graph::new();
    let bound = g.bind(&pi.params);
    let root = objective(&mut g, &bound);
    let grad = g.gradients(root, &bound).unwrap();
    let fd = fd_gradient(&pi.params, 1e-6, |q: &ParamSet<f64>| {
        let mut g = Graph::new();
        let b = g.bind_constant(q);
        let r = objective(&mut g, &b);
        g.item(r)
    });
    assert!(max_rel_err(&grad, &fd) <= 1e-5);
}

#[test]
fn min_q_action_gradient_matches_finite_differences() {
    let q = critic(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let states = normal(&mut rng, 6, 3);
    let mut actions = ParamSet::new();
    actions.insert("a", normal(&mut rng, 6, 2).map(|v| 0.5 * v));
    let eval = |g: &mut Graph<f64>, a: metasac::autodiff::Var| {
        let p = g.bind_constant(&q.params);
        let s = g.constant(states.clone());
        let m = q.min_q(g, &p, s, a).unwrap();
        g.sum(m)
    };
    let mut g = Graph::new();
    let bound = g.bind(&actions);
    let root = eval(&mut g, bound.var("a"));
    let grad = g.gradients(root, &bound).unwrap();
    let fd = fd_gradient(&actions, 1e-6, |x: &ParamSet<f64>| {
        let mut g = Graph::new();
        let b = g.bind_constant(x);
        let r = eval(&mut g, b.var("a"));
        g.item(r)
    });
    assert!(max_rel_err(&grad, &fd) <= 1e-5);
}

#[test]
fn min_q_is_below_both_heads() {
    let q = critic(7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let states = normal(&mut rng, 20, 3);
    let actions = normal(&mut rng, 20, 2);
    let mut g = Graph::new();
    let p = g.bind_constant(&q.params);
    let s = g.constant(states);
    let a = g.constant(actions);
    let heads = q.q_values(&mut g, &p, s, a).unwrap();
    let m = q.min_q(&mut g, &p, s, a).unwrap();
    for i in 0..20 {
        let v = g.value(m).data()[i];
        assert!(v <= g.value(heads[0]).data()[i] && v <= g.value(heads[1]).data()[i]);
    }
}

#[test]
fn polyak_endpoints() {
    let online = critic(1);
    let mut target = critic(2);
    let before = target.params.clone();
    polyak_update(&mut target.params, &online.params, 0.0).unwrap();
    assert_eq!(target.params, before);
    polyak_update(&mut target.params, &online.params, 1.0).unwrap();
    assert_eq!(target.params, online.params);
    let zero = online.params.zeros_like();
    let mut t = zero.clone();
    polyak_update(&mut t, &zero.map(|_| 1.0), 0.05).unwrap();
    assert!(t.flatten().iter().all(|&v| v == 0.05));
}

#[test]
fn extreme_pre_squash_values_stay_finite() {
    let pi = scalar_policy(1.0);
    for &u in &[-50.0, -20.0, 20.0, 50.0] {
        let mut g = Graph::new();
        let m = g.leaf(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let s = g.leaf(Tensor::matrix(1, 1, vec![0.0]).unwrap());
        let out = pi
            .sample_from_heads(&mut g, m, s, &Tensor::matrix(1, 1, vec![u]).unwrap())
            .unwrap();
        let lp = g.item(out.log_prob);
        assert!(lp.is_finite(), "u = {u}: {lp}");
        let adj = g.backward(out.log_prob).unwrap();
        assert!(adj.of(m, &g).all_finite() && adj.of(s, &g).all_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn actions_lie_inside_the_bound(seed in 0u64..1000, scale in 0.1f64..20.0, b in 0.1f64..3.0) {
        let pi = policy(seed, 4, b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = normal(&mut rng, 8, 3).map(|v| v * scale);
        let noise = normal(&mut rng, 8, 2).map(|v| v * scale);
        let a = pi.act(&states, Some(&noise)).unwrap();
        for &v in a.data() {
            prop_assert!(v.abs() <= b && v.is_finite());
        }
        let det = pi.act(&states, None).unwrap();
        let zero = pi.act(&states, Some(&Tensor::zeros(noise.shape().clone()))).unwrap();
        prop_assert_eq!(det, zero);
    }
}
