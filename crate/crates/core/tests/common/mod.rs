#![allow(dead_code)]

use metasac::autodiff::{ParamSet, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;

/// Entrywise relative error floor: gradients smaller than this are compared
/// in absolute terms, where central-difference rounding dominates.
pub const REL_FLOOR: f64 = 1e-3;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Central difference of `f` with respect to every entry of `params`.
pub fn fd_gradient(params: &ParamSet<f64>, h: f64, f: impl Fn(&ParamSet<f64>) -> f64) -> ParamSet<f64> {
    let flat = params.flatten();
    let mut grad = vec![0.0; flat.len()];
    let mut work = flat.clone();
    for i in 0..flat.len() {
        work[i] = flat[i] + h;
        let plus = f(&params.unflatten(&work).unwrap());
        work[i] = flat[i] - h;
        let minus = f(&params.unflatten(&work).unwrap());
        work[i] = flat[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    params.unflatten(&grad).unwrap()
}

/// Largest entrywise relative error between two gradients.
pub fn max_rel_err(a: &ParamSet<f64>, b: &ParamSet<f64>) -> f64 {
    a.flatten()
        .iter()
        .zip(b.flatten().iter())
        .map(|(x, y)| rel_err(*x, *y))
        .fold(0.0, f64::max)
}

pub fn normal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}
