//! Entropy-temperature strategies.
//!
//! All trainable variants work on `log alpha`, clipped to at most zero after
//! every update so that `0 < alpha <= 1`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper bound on `log alpha`.
pub const LOG_ALPHA_MAX: f64 = 0.0;
/// Bound on the absolute `log alpha` gradient of the metagradient tuner.
pub const META_GRAD_CLIP: f64 = 0.05;
pub const DEFAULT_ALPHA_LR: f64 = 3e-4;

/// Temperature for the fixed-alpha tuner as a function of the update step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    /// `alpha0 * exp(-rate * t)`.
    ExpDecay { alpha0: f64, rate: f64 },
}

impl AlphaSchedule {
    /// Exponential decay from `start` at step 0 to `end` at step `steps`.
    pub fn decay_between(start: f64, end: f64, steps: usize) -> Result<Self> {
        if !(start > 0.0 && end > 0.0) || steps == 0 {
            return Err(Error::Config(
                "decay endpoints must be positive over at least one step".into(),
            ));
        }
        Ok(AlphaSchedule::ExpDecay {
            alpha0: start,
            rate: (start / end).ln() / steps as f64,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaSchedule::Constant(a) => a > 0.0 && a.is_finite(),
            AlphaSchedule::ExpDecay { alpha0, rate } => {
                alpha0 > 0.0 && alpha0.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("fixed temperature must be positive: {self:?}")))
        }
    }

    pub fn alpha_at(&self, step: usize) -> f64 {
        match *self {
            AlphaSchedule::Constant(a) => a,
            AlphaSchedule::ExpDecay { alpha0, rate } => alpha0 * (-rate * step as f64).exp(),
        }
    }
}

/// Update rule for `log alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaOptimizer {
    Sgd,
    Adam { m: f64, v: f64, t: u64 },
}

impl AlphaOptimizer {
    pub fn adam() -> Self {
        AlphaOptimizer::Adam { m: 0.0, v: 0.0, t: 0 }
    }

    fn delta(&mut self, lr: f64, g: f64) -> f64 {
        match self {
            AlphaOptimizer::Sgd => -lr * g,
            AlphaOptimizer::Adam { m, v, t } => {
                *t += 1;
                *m = 0.9 * *m + 0.1 * g;
                *v = 0.999 * *v + 0.001 * g * g;
                let m_hat = *m / (1.0 - 0.9_f64.powi(*t as i32));
                let v_hat = *v / (1.0 - 0.999_f64.powi(*t as i32));
                -lr * m_hat / (v_hat.sqrt() + 1e-8)
            }
        }
    }
}

/// Record of one temperature update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaStep {
    /// Gradient with respect to `alpha` supplied by the tuner.
    pub grad_alpha: f64,
    /// Chain-ruled gradient with respect to `log alpha`, before clipping.
    pub grad_log_alpha: f64,
    /// Gradient actually used for the step.
    pub applied: f64,
    pub log_alpha: f64,
}

/// Trainable temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaState {
    log_alpha: f64,
    lr: f64,
    optimizer: AlphaOptimizer,
    updates: u64,
    max_abs_applied: f64,
}

impl AlphaState {
    pub fn new(initial_alpha: f64, lr: f64, optimizer: AlphaOptimizer) -> Result<Self> {
        if !(initial_alpha > 0.0 && initial_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "initial temperature {initial_alpha} must lie in (0, 1]"
            )));
        }
        if !(lr > 0.0) {
            return Err(Error::Config(format!("temperature learning rate {lr} must be positive")));
        }
        Ok(AlphaState {
            log_alpha: initial_alpha.ln(),
            lr,
            optimizer,
            updates: 0,
            max_abs_applied: 0.0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Largest absolute gradient applied to `log alpha` so far.
    pub fn max_abs_applied(&self) -> f64 {
        self.max_abs_applied
    }

    fn apply(&mut self, grad_alpha: f64, clip: Option<f64>) -> Result<AlphaStep> {
        if !grad_alpha.is_finite() {
            return Err(Error::NonFinite("temperature gradient".into()));
        }
        let grad_log_alpha = self.alpha() * grad_alpha;
        let applied = match clip {
            Some(c) => grad_log_alpha.clamp(-c, c),
            None => grad_log_alpha,
        };
        let delta = self.optimizer.delta(self.lr, applied);
        self.log_alpha = (self.log_alpha + delta).min(LOG_ALPHA_MAX);
        self.updates += 1;
        self.max_abs_applied = self.max_abs_applied.max(applied.abs());
        Ok(AlphaStep {
            grad_alpha,
            grad_log_alpha,
            applied,
            log_alpha: self.log_alpha,
        })
    }

    /// Dual descent on `L(alpha) = mean(-alpha log pi - alpha H)`, whose
    /// derivative is `mean(-log pi) - H`: the temperature falls while the
    /// policy entropy exceeds the target and rises below it.
    pub fn dual_update<T: Scalar>(&mut self, log_probs: &[T], target_entropy: f64) -> Result<AlphaStep> {
        if log_probs.is_empty() {
            return Err(Error::Empty("dual temperature update"));
        }
        let entropy = -log_probs.iter().map(|x| x.as_f64()).sum::<f64>() / log_probs.len() as f64;
        self.apply(entropy - target_entropy, None)
    }

    /// Metagradient step from `dL_meta / d alpha`, with the `log alpha`
    /// gradient clipped to `META_GRAD_CLIP` in absolute value.
    pub fn meta_update(&mut self, grad_alpha: f64) -> Result<AlphaStep> {
        self.apply(grad_alpha, Some(META_GRAD_CLIP))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schedule() {
        let s = AlphaSchedule::Constant(0.2);
        assert_eq!(s.alpha_at(0), 0.2);
        assert_eq!(s.alpha_at(123_456), 0.2);
        assert!(AlphaSchedule::Constant(0.0).validate().is_err());
        assert!(AlphaSchedule::Constant(-0.1).validate().is_err());
    }

    #[test]
    fn zero_rate_decay_is_constant() {
        let s = AlphaSchedule::ExpDecay { alpha0: 0.2, rate: 0.0 };
        assert_eq!(s.alpha_at(1_000_000), 0.2);
    }

    #[test]
    fn decay_hits_grid_endpoints() {
        let steps = 30_000;
        let s = AlphaSchedule::decay_between((-3.0f64).exp(), (-7.0f64).exp(), steps).unwrap();
        assert!((s.alpha_at(0) - 0.049787).abs() < 1e-6);
        assert!((s.alpha_at(steps).ln() + 7.0).abs() < 1e-9);
        assert!((s.alpha_at(steps) - 0.000912).abs() < 1e-6);
    }

    #[test]
    fn dual_stationary_at_target() {
        let mut st = AlphaState::new(0.5, 0.1, AlphaOptimizer::Sgd).unwrap();
        let before = st.log_alpha();
        let step = st.dual_update(&[3.0_f64, 3.0], -3.0).unwrap();
        assert_eq!(step.grad_alpha, 0.0);
        assert_eq!(st.log_alpha(), before);
    }

    #[test]
    fn dual_sign_convention() {
        // mean(-log pi) = -2 is above H = -3: temperature must fall.
        let mut st = AlphaState::new(0.5, 0.1, AlphaOptimizer::Sgd).unwrap();
        let before = st.alpha();
        let step = st.dual_update(&[2.0_f64, 2.0], -3.0).unwrap();
        assert_eq!(step.grad_alpha, 1.0);
        assert!(st.alpha() < before);
    }

    #[test]
    fn dual_ignores_batch_duplication() {
        let lp = [0.3_f64, -1.2, 2.5];
        let doubled: Vec<f64> = lp.iter().chain(lp.iter()).copied().collect();
        let mut a = AlphaState::new(0.3, 0.01, AlphaOptimizer::Sgd).unwrap();
        let mut b = a.clone();
        a.dual_update(&lp, -1.0).unwrap();
        b.dual_update(&doubled, -1.0).unwrap();
        assert_eq!(a.log_alpha(), b.log_alpha());
    }

    #[test]
    fn updates_never_push_log_alpha_above_zero() {
        let mut st = AlphaState::new(0.999, 10.0, AlphaOptimizer::Sgd).unwrap();
        st.dual_update(&[10.0_f64], 0.0).unwrap();
        assert_eq!(st.log_alpha(), 0.0);
        st.meta_update(-100.0).unwrap();
        assert_eq!(st.log_alpha(), 0.0);
    }

    #[test]
    fn meta_gradient_is_clipped() {
        let mut st = AlphaState::new(1.0, 1e-3, AlphaOptimizer::Sgd).unwrap();
        let step = st.meta_update(0.2).unwrap();
        assert_eq!(step.grad_log_alpha, 0.2);
        assert_eq!(step.applied, 0.05);
        assert!((st.log_alpha() + 0.05e-3).abs() < 1e-15);
        let step = st.meta_update(-0.2).unwrap();
        assert_eq!(step.applied, -0.05);
        assert!(st.max_abs_applied() <= META_GRAD_CLIP);
    }

    #[test]
    fn zero_meta_gradient_is_noop() {
        let mut st = AlphaState::new(0.2, 3e-4, AlphaOptimizer::Sgd).unwrap();
        let before = st.log_alpha();
        st.meta_update(0.0).unwrap();
        assert_eq!(st.log_alpha(), before);
    }

    #[test]
    fn chain_rule_matches_log_space_differences() {
        // L(alpha) = (alpha - 0.7)^2, dL/dalpha = 2(alpha - 0.7).
        let alpha: f64 = 0.3;
        let grad_alpha = 2.0 * (alpha - 0.7);
        let st = AlphaState::new(alpha, 1.0, AlphaOptimizer::Sgd).unwrap();
        let g_log = st.alpha() * grad_alpha;
        let f = |la: f64| (la.exp() - 0.7).powi(2);
        let h = 1e-6;
        let la = alpha.ln();
        let fd = (f(la + h) - f(la - h)) / (2.0 * h);
        assert!((g_log - fd).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_initial_state() {
        assert!(AlphaState::new(0.0, 1e-3, AlphaOptimizer::Sgd).is_err());
        assert!(AlphaState::new(1.5, 1e-3, AlphaOptimizer::Sgd).is_err());
        assert!(AlphaState::new(0.5, 0.0, AlphaOptimizer::Sgd).is_err());
        let mut st = AlphaState::new(0.5, 1e-3, AlphaOptimizer::Sgd).unwrap();
        assert!(st.dual_update::<f64>(&[], -1.0).is_err());
        assert!(st.meta_update(f64::NAN).is_err());
    }

    #[test]
    fn adam_variant_moves_against_gradient() {
        let mut st = AlphaState::new(0.5, 1e-2, AlphaOptimizer::adam()).unwrap();
        let before = st.log_alpha();
        st.meta_update(0.01).unwrap();
        assert!(st.log_alpha() < before);
    }
}
