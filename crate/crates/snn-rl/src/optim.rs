//! Applies plasticity updates to weights: plain online ascent, Adam smoothing
//! and episode batching.

use crate::error::{Result, SnnError};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    Plain,
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimConfig {
    pub mode: UpdateMode,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_beta1() -> f64 {
    0.995
}
fn default_beta2() -> f64 {
    0.99995
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_batch_size() -> usize {
    1
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            mode: UpdateMode::Plain,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            batch_size: default_batch_size(),
        }
    }
}

/// First/second moment estimates for Adam, one pair per weight.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
}

impl AdamState {
    pub fn new(neurons: usize, inputs: usize, cfg: &OptimConfig) -> Self {
        Self {
            m: Array2::zeros((neurons, inputs)),
            v: Array2::zeros((neurons, inputs)),
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
        }
    }
}

/// `w <- w + delta_w`; the update already carries the learning rate.
pub fn apply_plain(w: &mut Array2<f64>, delta_w: &Array2<f64>) -> Result<()> {
    *w += delta_w;
    check_finite(w)
}

/// In-place scaled variant used by the per-millisecond hot loop:
/// `w <- w + scale * m`. Equivalent to `apply_plain(w, scale * m)`.
pub fn apply_plain_scaled(w: &mut Array2<f64>, scale: f64, m: &Array2<f64>) {
    let wv = w.as_slice_mut().expect("row-major weights");
    let mv = m.as_slice().expect("row-major update");
    for (a, &b) in wv.iter_mut().zip(mv) {
        *a += scale * b;
    }
}

/// One bias-corrected Adam step on the ascent direction `grad_estimate`.
pub fn apply_adam(
    st: &mut AdamState,
    w: &mut Array2<f64>,
    grad_estimate: &Array2<f64>,
    lr: f64,
) -> Result<()> {
    st.t += 1;
    let b1 = st.beta1;
    let b2 = st.beta2;
    let bc1 = 1.0 - b1.powi(st.t as i32);
    let bc2 = 1.0 - b2.powi(st.t as i32);
    for ((wv, (m, v)), &g) in w
        .iter_mut()
        .zip(st.m.iter_mut().zip(st.v.iter_mut()))
        .zip(grad_estimate.iter())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *wv += lr * m_hat / (v_hat.sqrt() + st.epsilon);
    }
    check_finite(w)
}

fn check_finite(w: &Array2<f64>) -> Result<()> {
    if w.sum().is_finite() {
        Ok(())
    } else {
        let index = w.iter().position(|x| !x.is_finite()).unwrap_or_default();
        Err(SnnError::SimFault {
            context: "non-finite weight after update",
            index,
        })
    }
}

/// Accumulates one update matrix per episode and flushes the mean every
/// `batch_size` episodes.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    pending: Array2<f64>,
    pub episodes_accumulated: usize,
    pub batch_size: usize,
}

impl BatchAccumulator {
    pub fn new(neurons: usize, inputs: usize, batch_size: usize) -> Self {
        assert!(batch_size >= 1);
        Self {
            pending: Array2::zeros((neurons, inputs)),
            episodes_accumulated: 0,
            batch_size,
        }
    }

    /// Called at each episode end with that episode's summed update. Returns
    /// the mean accumulated update when the batch fills.
    pub fn commit(&mut self, episode_update: &Array2<f64>) -> Option<Array2<f64>> {
        self.pending += episode_update;
        self.episodes_accumulated += 1;
        if self.episodes_accumulated == self.batch_size {
            let mean = self.pending.mapv(|x| x / self.batch_size as f64);
            self.pending.fill(0.0);
            self.episodes_accumulated = 0;
            Some(mean)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(v: f64) -> Array2<f64> {
        Array2::from_elem((2, 2), v)
    }

    #[test]
    fn plain_apply_is_addition() {
        let mut w = mat(1.0);
        apply_plain(&mut w, &mat(0.25)).unwrap();
        assert!(w.iter().all(|&x| x == 1.25));
        apply_plain(&mut w, &mat(0.0)).unwrap();
        assert!(w.iter().all(|&x| x == 1.25));
    }

    #[test]
    fn repeated_plain_commutes_with_summed_deltas() {
        let mut a = mat(0.0);
        let mut b = mat(0.0);
        let d1 = mat(0.1);
        let d2 = mat(-0.3);
        apply_plain(&mut a, &d1).unwrap();
        apply_plain(&mut a, &d2).unwrap();
        apply_plain(&mut b, &(&d1 + &d2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaled_apply_matches_plain() {
        let mut a = mat(1.0);
        let mut b = mat(1.0);
        let m = mat(0.4);
        apply_plain_scaled(&mut a, 0.5, &m);
        apply_plain(&mut b, &m.mapv(|x| 0.5 * x)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_weight_is_a_fault() {
        let mut w = mat(1.0);
        assert!(apply_plain(&mut w, &mat(f64::INFINITY)).is_err());
    }

    #[test]
    fn adam_first_step_magnitude_is_about_lr() {
        let cfg = OptimConfig {
            mode: UpdateMode::Adam,
            ..OptimConfig::default()
        };
        let mut st = AdamState::new(2, 2, &cfg);
        let mut w = mat(0.0);
        apply_adam(&mut st, &mut w, &mat(0.37), 1e-2).unwrap();
        // t=1 bias correction makes the step lr * g / (|g| + eps) ~ lr.
        assert_relative_eq!(w[[0, 0]], 1e-2, max_relative = 1e-6);
    }

    #[test]
    fn adam_zero_gradient_never_moves_weights() {
        let cfg = OptimConfig::default();
        let mut st = AdamState::new(2, 2, &cfg);
        let mut w = mat(3.0);
        for _ in 0..50 {
            apply_adam(&mut st, &mut w, &mat(0.0), 1e-2).unwrap();
        }
        assert!(w.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn adam_degenerates_to_sign_steps_without_momentum() {
        let cfg = OptimConfig {
            mode: UpdateMode::Adam,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 1e-300,
            batch_size: 1,
        };
        let mut st = AdamState::new(1, 1, &cfg);
        let mut w = Array2::zeros((1, 1));
        apply_adam(&mut st, &mut w, &Array2::from_elem((1, 1), -0.001), 0.5).unwrap();
        assert_relative_eq!(w[[0, 0]], -0.5, max_relative = 1e-9);
    }

    #[test]
    fn batch_of_one_flushes_immediately() {
        let mut acc = BatchAccumulator::new(2, 2, 1);
        let out = acc.commit(&mat(0.5)).unwrap();
        assert_eq!(out, mat(0.5));
    }

    #[test]
    fn sixteen_equal_updates_flush_their_value() {
        let mut acc = BatchAccumulator::new(2, 2, 16);
        for _ in 0..15 {
            assert!(acc.commit(&mat(0.25)).is_none());
        }
        let out = acc.commit(&mat(0.25)).unwrap();
        for v in out.iter() {
            assert_relative_eq!(*v, 0.25, epsilon = 1e-12);
        }
        assert_eq!(acc.episodes_accumulated, 0);
    }

    #[test]
    fn batching_then_applying_equals_applying_the_mean() {
        let updates = [mat(0.1), mat(-0.4), mat(0.25), mat(0.05)];
        let mut acc = BatchAccumulator::new(2, 2, 4);
        let mut flushed = None;
        for u in &updates {
            if let Some(f) = acc.commit(u) {
                flushed = Some(f);
            }
        }
        let mean = updates.iter().fold(mat(0.0), |a, b| a + b) / 4.0;
        let flushed = flushed.unwrap();
        for (a, b) in flushed.iter().zip(mean.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
