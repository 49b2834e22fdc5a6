//! Replay storage and the frozen initial-state buffer.

use rand::Rng;

use crate::autodiff::{Tensor, ParamSet};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_state: Vec<T>,
    /// True termination; horizon truncation is not terminal.
    pub terminal: bool,
}

/// A sampled minibatch laid out as `[batch, dim]` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub states: Tensor<T>,
    pub actions: Tensor<T>,
    /// `[batch, 1]`.
    pub rewards: Tensor<T>,
    pub next_states: Tensor<T>,
    /// `[batch, 1]`, `1 - terminal`.
    pub not_terminal: Tensor<T>,
    pub indices: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Fixed-capacity ring buffer of transitions; the oldest entry is
/// overwritten once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    storage: Vec<Transition<T>>,
    capacity: usize,
    cursor: usize,
    state_dim: usize,
    action_dim: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            cursor: 0,
            state_dim,
            action_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition<T>) -> Result<()> {
        for (what, expected, got) in [
            ("transition state", self.state_dim, t.state.len()),
            ("transition next state", self.state_dim, t.next_state.len()),
            ("transition action", self.action_dim, t.action.len()),
        ] {
            if expected != got {
                return Err(Error::Dim { what, expected, got });
            }
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter_chronological(&self) -> impl Iterator<Item = &Transition<T>> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// States of the `n` most recent transitions, oldest first.
    pub fn recent_states(&self, n: usize) -> Vec<Vec<T>> {
        let len = self.storage.len();
        let skip = len.saturating_sub(n);
        self.iter_chronological()
            .skip(skip)
            .map(|t| t.state.clone())
            .collect()
    }

    pub fn get(&self, index: usize) -> Option<&Transition<T>> {
        self.storage.get(index)
    }

    /// `size` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if size == 0 || self.storage.len() < size {
            return Err(Error::NotEnoughSamples {
                needed: size.max(1),
                available: self.storage.len(),
            });
        }
        let n = self.storage.len();
        Ok((0..size).map(|_| rng.gen_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Batch<T>> {
        let idx = self.sample_indices(size, rng)?;
        Ok(self.gather(idx))
    }

    /// A second, independent minibatch when `fresh` is set; otherwise a copy
    /// of `previous`.
    pub fn resample_fresh<R: Rng + ?Sized>(
        &self,
        previous: &Batch<T>,
        fresh: bool,
        rng: &mut R,
    ) -> Result<Batch<T>> {
        if fresh {
            self.sample(previous.len(), rng)
        } else {
            Ok(previous.clone())
        }
    }

    fn gather(&self, indices: Vec<usize>) -> Batch<T> {
        let b = indices.len();
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut s = Vec::with_capacity(b * sd);
        let mut a = Vec::with_capacity(b * ad);
        let mut r = Vec::with_capacity(b);
        let mut s2 = Vec::with_capacity(b * sd);
        let mut nt = Vec::with_capacity(b);
        for &i in &indices {
            let t = &self.storage[i];
            s.extend_from_slice(&t.state);
            a.extend_from_slice(&t.action);
            r.push(t.reward);
            s2.extend_from_slice(&t.next_state);
            nt.push(if t.terminal { T::zero() } else { T::one() });
        }
        let m = |cols, data| Tensor::matrix(b, cols, data).expect("batch layout");
        Batch {
            states: m(sd, s),
            actions: m(ad, a),
            rewards: m(1, r),
            next_states: m(sd, s2),
            not_terminal: m(1, nt),
            indices,
        }
    }
}

/// Initial states collected from environment resets before training.
/// There is no way to modify the contents after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialStateBuffer<T> {
    states: Tensor<T>,
}

impl<T: Scalar> InitialStateBuffer<T> {
    pub fn from_states(states: &[Vec<T>]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("initial-state buffer"));
        }
        Ok(InitialStateBuffer {
            states: Tensor::from_rows(states)?,
        })
    }

    /// Fills the buffer with `size` observations from independent resets.
    pub fn collect<R: Rng>(env: &dyn Environment, size: usize, rng: &mut R) -> Result<Self> {
        let states: Vec<Vec<T>> = (0..size)
            .map(|_| {
                let s = env.reset(rng);
                env.observe(&s).into_iter().map(T::lit).collect()
            })
            .collect();
        Self::from_states(&states)
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[len, state_dim]`.
    pub fn states(&self) -> &Tensor<T> {
        &self.states
    }

    pub fn fingerprint(&self) -> u64 {
        let mut p = ParamSet::new();
        p.insert("states", self.states.clone());
        p.fingerprint()
    }
}
