//! Numerical certification of the learning-rule identities: every trace
//! recursion is checked against its direct-convolution closed form, the
//! critic and actor weight-update paths are checked against their
//! gradient-form expressions, and the surrogate voltage derivative is checked
//! by finite differences on a frozen spike record.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actor;
use crate::critic;
use crate::traces::{ExpTrace, RateEstimator, StdpTaus, StdpTraceSet};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub max_err: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_err.is_finite() && self.max_err <= self.tol
    }
}

/// Discrete causal convolution of `signal` with `exp(-t/tau)`, by direct
/// summation. The oracle all recursion checks compare against.
fn conv_kernel(signal: &[f64], tau: f64) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; n];
    for (t, o) in out.iter_mut().enumerate() {
        *o = signal[..=t]
            .iter()
            .enumerate()
            .map(|(s, &u)| u * (-((t - s) as f64) / tau).exp())
            .sum();
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = b.abs().max(1e-9);
    (a - b).abs() / scale
}

fn bernoulli_train<R: Rng>(len: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..len).map(|_| rng.gen_bool(p)).collect()
}

fn to_f64(spikes: &[bool]) -> Vec<f64> {
    spikes.iter().map(|&s| s as u8 as f64).collect()
}

/// (a) Trace recursions vs direct convolution for P, z, q and rho over a
/// random 1,000-step spike record.
pub fn check_trace_recursions(seed: u64) -> Check {
    let len = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau_p = 20.0;
    let tau_z = 20.0;
    let tau_q = 40.0;
    let tau_n = 20.0;
    let pre = bernoulli_train(len, 0.3, &mut rng);
    let post = bernoulli_train(len, 0.2, &mut rng);
    let feedback: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() - 0.5).collect();

    let mut traces = StdpTraceSet::new(
        1,
        1,
        1.0,
        0.0,
        StdpTaus {
            tau_p,
            tau_z,
            tau_q,
        },
        1.0,
        true,
    );
    let mut p_trace = ExpTrace::new(tau_p, 1.0);
    let mut rate = RateEstimator::new(1, tau_n, 1.0);

    // Closed forms.
    let p_direct = conv_kernel(&to_f64(&pre), tau_p);
    let z_src: Vec<f64> = post
        .iter()
        .enumerate()
        .map(|(t, &xj)| if xj { p_direct[t] } else { 0.0 })
        .collect();
    let z_direct = conv_kernel(&z_src, tau_z);
    let q_src: Vec<f64> = feedback
        .iter()
        .zip(&z_direct)
        .map(|(&f, &z)| f * z)
        .collect();
    let q_direct = conv_kernel(&q_src, tau_q);
    let rho_src: Vec<f64> = post.iter().map(|&s| s as u8 as f64 / tau_n).collect();
    let rho_direct = conv_kernel(&rho_src, tau_n);

    let mut max_err: f64 = 0.0;
    for t in 0..len {
        traces.stdp_update(&pre[t..=t], &post[t..=t]);
        traces.feedback_gate_update(&feedback[t..=t]);
        p_trace.update(pre[t] as u8 as f64);
        rate.update(&post[t..=t]);
        max_err = max_err
            .max(rel_err(p_trace.value, p_direct[t]))
            .max(rel_err(traces.z[[0, 0]], z_direct[t]))
            .max(rel_err(traces.q.as_ref().unwrap()[[0, 0]], q_direct[t]))
            .max(rel_err(rate.rho[0], rho_direct[t]));
    }
    Check {
        name: "trace recursions vs direct convolution",
        max_err,
        tol: 1e-9,
    }
}

/// Core of the critic-rule identity: with A+ = 1, A- = 0 the per-step
/// product `delta * z` along the recursion must equal `delta` times the
/// closed-form path `((X_j . (X_i * k_tau_p)) * k_tau_z)(t)` built with the
/// theorem's time constants (`tau_p = tau_m`, `tau_z = tau_n`); the constant
/// prefactor is absorbed into the learning rate. Exposing the recursion's
/// time constants lets tests corrupt them.
pub fn check_theorem1_with(tau_p_rec: f64, tau_z_rec: f64, seed: u64) -> Check {
    let len = 1000;
    let tau_m = 100.0;
    let tau_n = 20.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = bernoulli_train(len, 0.3, &mut rng);
    let post = bernoulli_train(len, 0.15, &mut rng);
    let deltas: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() - 0.5).collect();

    let mut traces = StdpTraceSet::new(
        1,
        1,
        1.0,
        0.0,
        StdpTaus {
            tau_p: tau_p_rec,
            tau_z: tau_z_rec,
            tau_q: 1.0,
        },
        1.0,
        false,
    );

    let pre_filtered = conv_kernel(&to_f64(&pre), tau_m);
    let gated: Vec<f64> = post
        .iter()
        .enumerate()
        .map(|(t, &xj)| if xj { pre_filtered[t] } else { 0.0 })
        .collect();
    let grad_path = conv_kernel(&gated, tau_n);

    let mut acc_rule = 0.0;
    let mut acc_grad = 0.0;
    let mut max_err: f64 = 0.0;
    for t in 0..len {
        traces.stdp_update(&pre[t..=t], &post[t..=t]);
        acc_rule += deltas[t] * traces.z[[0, 0]];
        acc_grad += deltas[t] * grad_path[t];
        if acc_grad.abs() > 1e-6 {
            max_err = max_err.max(rel_err(acc_rule, acc_grad));
        }
    }
    max_err = max_err.max(rel_err(acc_rule, acc_grad));
    Check {
        name: "critic rule vs closed-form gradient path",
        max_err,
        tol: 1e-9,
    }
}

pub fn check_theorem1(seed: u64) -> Check {
    // The identity requires tau_p = tau_m and tau_z = tau_n.
    check_theorem1_with(100.0, 20.0, seed)
}

/// Actor-rule identity: the q recursion must equal the nested convolution
/// `(((A_k - s_k) . ((X_j . (X_i * k_tau)) * k_tau_n)) * k_tau_q)(t)`.
pub fn check_theorem2(seed: u64) -> Check {
    let len = 1000;
    let tau_m = 100.0;
    let tau_n = 20.0;
    let tau_q = 40.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = bernoulli_train(len, 0.3, &mut rng);
    let post = bernoulli_train(len, 0.15, &mut rng);
    // Piecewise-constant feedback, held over 20-step environment steps.
    let mut feedback = Vec::with_capacity(len);
    let mut level = 0.0;
    for t in 0..len {
        if t % 20 == 0 {
            let s: f64 = rng.gen();
            level = if rng.gen_bool(0.5) { 1.0 - s } else { -s };
        }
        feedback.push(level);
    }

    let mut traces = StdpTraceSet::new(
        1,
        1,
        1.0,
        0.0,
        StdpTaus {
            tau_p: tau_m,
            tau_z: tau_n,
            tau_q,
        },
        1.0,
        true,
    );

    let pre_filtered = conv_kernel(&to_f64(&pre), tau_m);
    let gated: Vec<f64> = post
        .iter()
        .enumerate()
        .map(|(t, &xj)| if xj { pre_filtered[t] } else { 0.0 })
        .collect();
    let z_path = conv_kernel(&gated, tau_n);
    let q_src: Vec<f64> = feedback.iter().zip(&z_path).map(|(&f, &z)| f * z).collect();
    let q_path = conv_kernel(&q_src, tau_q);

    let mut max_err: f64 = 0.0;
    for t in 0..len {
        traces.stdp_update(&pre[t..=t], &post[t..=t]);
        traces.feedback_gate_update(&feedback[t..=t]);
        max_err = max_err.max(rel_err(traces.q.as_ref().unwrap()[[0, 0]], q_path[t]));
    }
    Check {
        name: "actor rule vs nested convolution path",
        max_err,
        tol: 1e-9,
    }
}

/// Voltage of the integral LIF form in which firing subtracts a fixed
/// `(theta - e_rest)` kernel at frozen spike times, so the membrane is a
/// differentiable function of the weight.
fn frozen_spike_voltage(
    w: f64,
    pre: &[bool],
    frozen_fires: &[bool],
    tau: f64,
    r: f64,
    e_rest: f64,
    theta: f64,
) -> Vec<f64> {
    let decay = (-1.0f64 / tau).exp();
    let mut v = e_rest;
    let mut out = Vec::with_capacity(pre.len());
    for t in 0..pre.len() {
        v = e_rest + (v - e_rest) * decay + (r / tau) * w * (pre[t] as u8 as f64);
        if frozen_fires[t] {
            v -= theta - e_rest;
        }
        out.push(v);
    }
    out
}

/// (d) STE check: finite-difference dV/dw under frozen spike times equals
/// `(R/tau)(X_i * k_tau)(t)`.
pub fn check_ste_voltage_derivative(seed: u64) -> Check {
    let len = 500;
    let tau = 100.0;
    let r = 1.0;
    let e_rest = -65.0;
    let theta = -52.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pre = bernoulli_train(len, 0.4, &mut rng);
    let frozen = bernoulli_train(len, 0.05, &mut rng);
    let w = 5.0;
    let h = 1e-4;

    let up = frozen_spike_voltage(w + h, &pre, &frozen, tau, r, e_rest, theta);
    let dn = frozen_spike_voltage(w - h, &pre, &frozen, tau, r, e_rest, theta);
    let kernel = conv_kernel(&to_f64(&pre), tau);

    let mut max_err: f64 = 0.0;
    for t in 0..len {
        let fd = (up[t] - dn[t]) / (2.0 * h);
        let expected = (r / tau) * kernel[t];
        max_err = max_err.max((fd - expected).abs());
    }
    Check {
        name: "surrogate voltage derivative (finite difference)",
        max_err,
        tol: 1e-6,
    }
}

/// (e) Entropy gate vs the finite-difference entropy gradient at 20 random
/// distributions for each temperature.
pub fn check_entropy_gate(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut max_err: f64 = 0.0;
    for alpha in [2.0, 15.0, 25.0] {
        for _ in 0..20 {
            let k = rng.gen_range(2..5);
            let rho: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() * 0.3).collect();
            let entropy = |r: &[f64]| {
                let s = actor::action_probs(r, &[], alpha);
                -s.iter().map(|&p| p * p.ln()).sum::<f64>()
            };
            let s = actor::action_probs(&rho, &[], alpha);
            let gate = actor::entropy_gate(&s);
            for i in 0..k {
                let mut u = rho.clone();
                let mut d = rho.clone();
                u[i] += h;
                d[i] -= h;
                let fd = (entropy(&u) - entropy(&d)) / (2.0 * h);
                max_err = max_err.max((alpha * gate[i] - fd).abs());
            }
        }
    }
    Check {
        name: "entropy gate vs finite-difference gradient",
        max_err,
        tol: 1e-6,
    }
}

/// (f) TD-error spot values against frozen oracle numbers.
pub fn check_td_spot_values() -> Check {
    let cases = [
        (critic::td_error(0.0, 0.0, 0.0, 1.0, 1000.0, false).0, 0.0),
        (
            critic::td_error(0.5, 0.5, 0.001, 1.0, 1000.0, false).0,
            0.0004997500416666911,
        ),
        (critic::td_error(0.5, 0.7, 0.0, 1.0, 1000.0, true).0, -0.5),
        // Half-step reward discounting at a coarser step.
        (
            critic::td_error(0.0, 0.0, 0.001, 20.0, 1000.0, false).0,
            0.001 * 20.0 * (-0.01f64).exp(),
        ),
    ];
    let max_err = cases
        .iter()
        .map(|(got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    Check {
        name: "TD-error spot values",
        max_err,
        tol: 1e-12,
    }
}

/// Runs all six check families.
pub fn run_all() -> Vec<Check> {
    vec![
        check_trace_recursions(101),
        check_theorem1(202),
        check_theorem2(303),
        check_ste_voltage_derivative(404),
        check_entropy_gate(505),
        check_td_spot_values(),
    ]
}
