//! Policy readout (softmax over per-action population rates), action sampling
//! with hold, the action-selection feedback signal and the combined
//! feedback-modulated update with its three regularizers.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::critic::TdError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActorConfig {
    /// Number of discrete actions.
    pub k: usize,
    /// Neurons per action per population.
    pub n_e: usize,
    #[serde(default)]
    pub n_i: usize,
    /// Softmax temperature.
    pub alpha: f64,
    pub eta: f64,
    pub tau_n: f64,
    pub tau_p: f64,
    pub tau_z: f64,
    pub tau_q: f64,
    pub a_plus: f64,
    #[serde(default)]
    pub a_minus: f64,
    /// Env steps between action re-draws.
    pub resample_every: usize,
    /// Entropy, weight-decay and target-rate regularizer strengths.
    #[serde(default)]
    pub c_e: f64,
    #[serde(default)]
    pub c_w: f64,
    #[serde(default)]
    pub c_t: f64,
    /// Target mean rate (spikes/ms) for the c_t regularizer.
    #[serde(default)]
    pub rho_target: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    pub s: Vec<f64>,
    pub held_action: usize,
    pub steps_since_resample: usize,
}

impl PolicyState {
    pub fn new(k: usize) -> Self {
        Self {
            s: vec![1.0 / k as f64; k],
            held_action: 0,
            steps_since_resample: usize::MAX,
        }
    }

    /// Draws a fresh action when the hold period is over, otherwise keeps the
    /// current one. Called once per environment step.
    pub fn sample_or_hold<R: Rng>(
        &mut self,
        s: &[f64],
        resample_every: usize,
        rng: &mut R,
    ) -> usize {
        self.s = s.to_vec();
        if self.steps_since_resample >= resample_every {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = s.len() - 1;
            for (k, &p) in s.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            self.held_action = chosen;
            self.steps_since_resample = 1;
        } else {
            self.steps_since_resample += 1;
        }
        self.held_action
    }

    pub fn reset(&mut self) {
        let k = self.s.len();
        self.s.fill(1.0 / k as f64);
        self.held_action = 0;
        self.steps_since_resample = usize::MAX;
    }
}

/// `s = softmax(alpha * (rho_e - rho_i))` with max subtraction. An empty
/// inhibitory side contributes 0.
pub fn action_probs(rates_e_by_action: &[f64], rates_i_by_action: &[f64], alpha: f64) -> Vec<f64> {
    let drives: Vec<f64> = rates_e_by_action
        .iter()
        .enumerate()
        .map(|(k, &e)| alpha * (e - rates_i_by_action.get(k).copied().unwrap_or(0.0)))
        .collect();
    let max = drives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = drives.iter().map(|d| (d - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Action-selection feedback `I{k = held} - s_k`. Components sum to zero.
pub fn feedback_signal(held_action: usize, s: &[f64]) -> Vec<f64> {
    s.iter()
        .enumerate()
        .map(|(k, &sk)| if k == held_action { 1.0 - sk } else { -sk })
        .collect()
}

/// Entropy-gradient gate `g_k = -sum_m s_m (log s_m + 1)(I{m=k} - s_k)`.
pub fn entropy_gate(s: &[f64]) -> Vec<f64> {
    (0..s.len())
        .map(|k| {
            -s.iter()
                .enumerate()
                .map(|(m, &sm)| {
                    let ind = if m == k { 1.0 } else { 0.0 };
                    sm * (sm.ln() + 1.0) * (ind - s[k])
                })
                .sum::<f64>()
        })
        .collect()
}

/// Combined actor update for one synapse matrix whose neurons all serve
/// actions laid out contiguously (`n_per_action` neurons per action):
///
/// `dw = eta * (sign d q + sign c_e g_k z - c_w w / 2 - c_t (rho_mean - rho_hat) z)`
#[allow(clippy::too_many_arguments)]
pub fn actor_delta_w(
    delta: TdError,
    q: &Array2<f64>,
    z: &Array2<f64>,
    w: &Array2<f64>,
    rates_mean: f64,
    gate: &[f64],
    cfg: &ActorConfig,
    sign: f64,
) -> Array2<f64> {
    let n_per_action = q.nrows() / cfg.k;
    let mut out = Array2::zeros(q.raw_dim());
    let rate_err = cfg.c_t * (rates_mean - cfg.rho_target);
    for j in 0..q.nrows() {
        let g = gate[j / n_per_action];
        for i in 0..q.ncols() {
            out[[j, i]] = cfg.eta
                * (sign * delta.0 * q[[j, i]] + sign * cfg.c_e * g * z[[j, i]]
                    - 0.5 * cfg.c_w * w[[j, i]]
                    - rate_err * z[[j, i]]);
        }
    }
    out
}
