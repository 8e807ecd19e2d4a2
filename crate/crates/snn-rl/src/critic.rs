//! Value readout from the critic populations, TD-error computation and the
//! critic plasticity rule (TD-STDP).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticConfig {
    /// Excitatory / inhibitory neuron counts.
    pub n_e: usize,
    #[serde(default)]
    pub n_i: usize,
    /// Value scale and offset of the linear readout.
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    /// Discount time constant (ms).
    pub tau_gamma: f64,
    pub tau_n: f64,
    pub tau_p: f64,
    pub tau_z: f64,
    pub a_plus: f64,
    #[serde(default)]
    pub a_minus: f64,
}

/// Scalar TD error for one 1 ms step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdError(pub f64);

/// Linear value readout: `alpha * (mean(rho_e) - mean(rho_i)) + beta`.
/// The mean over an empty inhibitory population is 0.
pub fn value(rates_e: &[f64], rates_i: &[f64], alpha: f64, beta: f64) -> f64 {
    let mean = |r: &[f64]| {
        if r.is_empty() {
            0.0
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        }
    };
    alpha * (mean(rates_e) - mean(rates_i)) + beta
}

/// Discrete TD error with the half-step reward discount:
///
/// `delta = exp(-dt/tau) v_next + exp(-dt/(2 tau)) r dt - v_now`
///
/// On a terminal step the bootstrap target `v_next` is forced to 0.
pub fn td_error(
    v_now: f64,
    v_next: f64,
    reward_per_ms: f64,
    dt: f64,
    tau_gamma: f64,
    terminal: bool,
) -> TdError {
    let target = if terminal { 0.0 } else { v_next };
    TdError(
        (-dt / tau_gamma).exp() * target + (-dt / (2.0 * tau_gamma)).exp() * reward_per_ms * dt
            - v_now,
    )
}

/// Critic weight update `dw = sign * eta * delta * z`, handed to the optimizer
/// rather than applied in place.
pub fn critic_delta_w(delta: TdError, z: &Array2<f64>, sign: f64, eta: f64) -> Array2<f64> {
    z.mapv(|v| sign * eta * delta.0 * v)
}
