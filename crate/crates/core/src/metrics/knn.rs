use statrs::function::gamma::{digamma, ln_gamma};

use super::StateSample;
use crate::error::{Error, Result};

/// Distances below this are treated as this, so duplicate states do not
/// send the estimate to minus infinity.
pub const DISTANCE_FLOOR: f64 = 1e-12;

const LEAF_SIZE: usize = 8;

/// `ln` of the volume of the unit Euclidean ball in `d` dimensions.
pub fn unit_ball_log_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0)
}

/// Kozachenko-Leonenko estimate of the differential entropy in nats:
/// `psi(N) - psi(k) + ln c_d + (d / N) * sum_i ln r_ik`.
pub fn knn_entropy(samples: &StateSample, k: usize) -> Result<f64> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::NotEnoughSamples {
            needed: k + 1,
            available: n,
        });
    }
    let d = samples.dim();
    let log_r: f64 = kth_neighbor_distances(samples, k)?
        .into_iter()
        .map(|r| r.max(DISTANCE_FLOOR).ln())
        .sum();
    Ok(digamma(n as f64) - digamma(k as f64) + unit_ball_log_volume(d) + d as f64 * log_r / n as f64)
}

fn check(samples: &StateSample, k: usize) -> Result<()> {
    if samples.len() <= k {
        return Err(Error::NotEnoughSamples {
            needed: k + 1,
            available: samples.len(),
        });
    }
    Ok(())
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Keeps the `k` smallest squared distances seen, ascending.
fn offer(best: &mut [f64], d2: f64) {
    let k = best.len();
    if d2 >= best[k - 1] {
        return;
    }
    let mut i = k - 1;
    while i > 0 && best[i - 1] > d2 {
        best[i] = best[i - 1];
        i -= 1;
    }
    best[i] = d2;
}

/// Distance from every sample to its `k`-th nearest other sample, by
/// exhaustive search.
pub fn kth_neighbor_distances_brute(samples: &StateSample, k: usize) -> Result<Vec<f64>> {
    check(samples, k)?;
    let n = samples.len();
    Ok((0..n)
        .map(|i| {
            let mut best = vec![f64::INFINITY; k];
            for j in (0..n).filter(|&j| j != i) {
                offer(&mut best, dist2(samples.row(i), samples.row(j)));
            }
            best[k - 1].sqrt()
        })
        .collect())
}

/// Same as [`kth_neighbor_distances_brute`] through a k-d tree.
pub fn kth_neighbor_distances(samples: &StateSample, k: usize) -> Result<Vec<f64>> {
    check(samples, k)?;
    let tree = KdTree::build(samples);
    let mut best = vec![0.0; k];
    Ok((0..samples.len())
        .map(|i| {
            best.fill(f64::INFINITY);
            tree.search(i, 0, tree.order.len(), 0, &mut best);
            best[k - 1].sqrt()
        })
        .collect())
}

/// Implicit k-d tree: `order[lo..hi]` is split at its median on axis
/// `depth % dim`, recursively.
struct KdTree<'a> {
    samples: &'a StateSample,
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    fn build(samples: &'a StateSample) -> Self {
        let mut tree = KdTree {
            samples,
            order: (0..samples.len()).collect(),
        };
        let n = tree.order.len();
        tree.split(0, n, 0);
        tree
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.samples.row(i)[axis]
    }

    fn split(&mut self, lo: usize, hi: usize, depth: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let axis = depth % self.samples.dim();
        let mid = (lo + hi) / 2;
        let samples = self.samples;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            samples.row(a)[axis].total_cmp(&samples.row(b)[axis])
        });
        self.split(lo, mid, depth + 1);
        self.split(mid + 1, hi, depth + 1);
    }

    fn search(&self, query: usize, lo: usize, hi: usize, depth: usize, best: &mut [f64]) {
        let q = self.samples.row(query);
        if hi - lo <= LEAF_SIZE {
            for &j in &self.order[lo..hi] {
                if j != query {
                    offer(best, dist2(q, self.samples.row(j)));
                }
            }
            return;
        }
        let axis = depth % self.samples.dim();
        let mid = (lo + hi) / 2;
        let pivot = self.order[mid];
        if pivot != query {
            offer(best, dist2(q, self.samples.row(pivot)));
        }
        let diff = q[axis] - self.coord(pivot, axis);
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, near.0, near.1, depth + 1, best);
        if diff * diff <= best[best.len() - 1] {
            self.search(query, far.0, far.1, depth + 1, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_log_volume(1) - 2f64.ln()).abs() < 1e-12);
        assert!((unit_ball_log_volume(2) - std::f64::consts::PI.ln()).abs() < 1e-12);
        let v3 = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((unit_ball_log_volume(3) - v3.ln()).abs() < 1e-12);
    }

    #[test]
    fn line_neighbours() {
        let s = StateSample::from_rows(&[[0.0], [1.0], [3.0], [7.0]]).unwrap();
        let r = kth_neighbor_distances_brute(&s, 1).unwrap();
        assert_eq!(r, vec![1.0, 1.0, 2.0, 4.0]);
        let r = kth_neighbor_distances(&s, 3).unwrap();
        assert_eq!(r, vec![7.0, 6.0, 4.0, 7.0]);
    }

    #[test]
    fn too_few_samples() {
        let s = StateSample::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(knn_entropy(&s, 3), Err(Error::NotEnoughSamples { .. })));
        assert!(knn_entropy(&s, 2).is_ok());
    }

    #[test]
    fn duplicates_are_floored() {
        let s = StateSample::from_rows(&[[1.0], [1.0], [1.0], [1.0], [1.0]]).unwrap();
        let h = knn_entropy(&s, 3).unwrap();
        assert!(h.is_finite());
    }
}
