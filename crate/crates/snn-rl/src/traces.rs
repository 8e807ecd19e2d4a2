//! Exponential low-pass machinery: firing-rate estimators, pre/post STDP
//! traces, eligibility traces and the feedback-gated trace.
//!
//! Every trace follows the same discrete recursion
//! `y <- exp(-dt/tau) * y + u`, which is the step-by-step evaluation of the
//! causal convolution `(u * k_tau)(t)` with kernel `k_tau(t) = exp(-t/tau)`.

use ndarray::Array2;

/// Scalar exponential trace, the primitive recursion all other traces share.
#[derive(Debug, Clone, Copy)]
pub struct ExpTrace {
    pub value: f64,
    decay: f64,
}

impl ExpTrace {
    pub fn new(tau: f64, dt: f64) -> Self {
        Self {
            value: 0.0,
            decay: (-dt / tau).exp(),
        }
    }

    pub fn update(&mut self, input: f64) {
        self.value = self.decay * self.value + input;
    }

    pub fn reset(&mut self) {
        self.value = 0.0;
    }
}

/// Exponentially filtered firing rate per neuron, in spikes/ms.
///
/// `rho <- exp(-dt/tau_n) * rho + spike / tau_n`
#[derive(Debug, Clone)]
pub struct RateEstimator {
    pub rho: Vec<f64>,
    pub tau_n: f64,
    decay: f64,
    increment: f64,
}

impl RateEstimator {
    pub fn new(n: usize, tau_n: f64, dt: f64) -> Self {
        Self {
            rho: vec![0.0; n],
            tau_n,
            decay: (-dt / tau_n).exp(),
            increment: 1.0 / tau_n,
        }
    }

    pub fn update(&mut self, spikes: &[bool]) {
        debug_assert_eq!(spikes.len(), self.rho.len());
        for (r, &s) in self.rho.iter_mut().zip(spikes) {
            *r *= self.decay;
            if s {
                *r += self.increment;
            }
        }
    }

    pub fn mean(&self) -> f64 {
        if self.rho.is_empty() {
            0.0
        } else {
            self.rho.iter().sum::<f64>() / self.rho.len() as f64
        }
    }

    pub fn reset(&mut self) {
        self.rho.fill(0.0);
    }
}

/// Per-synapse STDP state for one synapse matrix: presynaptic traces `P_i`,
/// postsynaptic traces `P_j`, eligibility `z` and (for actor heads) the
/// feedback-gated trace `q`. Matrices are laid out `neurons x inputs` to match
/// [`crate::lif::SynapseMatrix`].
#[derive(Debug, Clone)]
pub struct StdpTraceSet {
    pub p_pre: Vec<f64>,
    pub p_post: Vec<f64>,
    pub z: Array2<f64>,
    pub q: Option<Array2<f64>>,
    pub a_plus: f64,
    pub a_minus: f64,
    decay_p: f64,
    decay_z: f64,
    decay_q: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StdpTaus {
    pub tau_p: f64,
    pub tau_z: f64,
    pub tau_q: f64,
}

impl StdpTraceSet {
    pub fn new(
        neurons: usize,
        inputs: usize,
        a_plus: f64,
        a_minus: f64,
        taus: StdpTaus,
        dt: f64,
        with_feedback_trace: bool,
    ) -> Self {
        Self {
            p_pre: vec![0.0; inputs],
            p_post: vec![0.0; neurons],
            z: Array2::zeros((neurons, inputs)),
            q: with_feedback_trace.then(|| Array2::zeros((neurons, inputs))),
            a_plus,
            a_minus,
            decay_p: (-dt / taus.tau_p).exp(),
            decay_z: (-dt / taus.tau_z).exp(),
            decay_q: (-dt / taus.tau_q).exp(),
        }
    }

    /// One step of the STDP recursions. Order is fixed: the P traces update
    /// first (including this step's spikes), then z uses the updated values:
    ///
    /// ```text
    /// P_j <- exp(-dt/tau_p) P_j + X_j
    /// P_i <- exp(-dt/tau_p) P_i + X_i
    /// z   <- exp(-dt/tau_z) z + A+ P_i X_j - A- P_j X_i
    /// ```
    pub fn stdp_update(&mut self, pre_spikes: &[bool], post_spikes: &[bool]) {
        debug_assert_eq!(pre_spikes.len(), self.p_pre.len());
        debug_assert_eq!(post_spikes.len(), self.p_post.len());

        for (p, &s) in self.p_post.iter_mut().zip(post_spikes) {
            *p *= self.decay_p;
            if s {
                *p += 1.0;
            }
        }
        for (p, &s) in self.p_pre.iter_mut().zip(pre_spikes) {
            *p *= self.decay_p;
            if s {
                *p += 1.0;
            }
        }

        let inputs = self.p_pre.len();
        let z = self.z.as_slice_mut().expect("row-major z");
        for v in z.iter_mut() {
            *v *= self.decay_z;
        }
        if self.a_plus != 0.0 {
            for (j, &post) in post_spikes.iter().enumerate() {
                if post {
                    let row = &mut z[j * inputs..(j + 1) * inputs];
                    for (v, &p) in row.iter_mut().zip(&self.p_pre) {
                        *v += self.a_plus * p;
                    }
                }
            }
        }
        if self.a_minus != 0.0 {
            for (j, &pj) in self.p_post.iter().enumerate() {
                let row = &mut z[j * inputs..(j + 1) * inputs];
                for (v, &pre) in row.iter_mut().zip(pre_spikes) {
                    if pre {
                        *v -= self.a_minus * pj;
                    }
                }
            }
        }
    }

    /// `q <- exp(-dt/tau_q) q + feedback_j * z`, with one feedback scalar per
    /// postsynaptic neuron. Runs after `stdp_update` within a step, so it sees
    /// the freshly updated z.
    pub fn feedback_gate_update(&mut self, feedback: &[f64]) {
        let inputs = self.p_pre.len();
        let q = self
            .q
            .as_mut()
            .expect("feedback trace not allocated")
            .as_slice_mut()
            .expect("row-major q");
        let z = self.z.as_slice().expect("row-major z");
        debug_assert_eq!(feedback.len(), self.p_post.len());
        for (j, &f) in feedback.iter().enumerate() {
            let qr = &mut q[j * inputs..(j + 1) * inputs];
            let zr = &z[j * inputs..(j + 1) * inputs];
            for (qv, &zv) in qr.iter_mut().zip(zr) {
                *qv = self.decay_q * *qv + f * zv;
            }
        }
    }

    pub fn reset(&mut self) {
        self.p_pre.fill(0.0);
        self.p_post.fill(0.0);
        self.z.fill(0.0);
        if let Some(q) = &mut self.q {
            q.fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn taus(tau_p: f64, tau_z: f64, tau_q: f64) -> StdpTaus {
        StdpTaus {
            tau_p,
            tau_z,
            tau_q,
        }
    }

    #[test]
    fn rate_single_spike_then_decay() {
        let mut est = RateEstimator::new(1, 20.0, 1.0);
        est.update(&[true]);
        assert_relative_eq!(est.rho[0], 0.05, max_relative = 1e-12);
        est.update(&[false]);
        assert_relative_eq!(
            est.rho[0],
            0.05 * (-1.0f64 / 20.0).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_stationary_mean_under_bernoulli_spiking() {
        // Stationary mean of the recursion is p * (1/tau) / (1 - exp(-1/tau)).
        let tau = 20.0;
        let p = 0.1;
        let mut est = RateEstimator::new(1, tau, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut acc = 0.0;
        let steps = 100_000;
        for _ in 0..steps {
            est.update(&[rng.gen_bool(p)]);
            acc += est.rho[0];
        }
        let mean = acc / steps as f64;
        let expected = p * (1.0 / tau) / (1.0 - (-1.0f64 / tau).exp());
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn rate_stays_nonnegative() {
        let mut est = RateEstimator::new(3, 20.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.3)).collect();
            est.update(&s);
            assert!(est.rho.iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn stdp_pure_decay_without_spikes() {
        let mut t = StdpTraceSet::new(2, 2, 1.0, 0.5, taus(20.0, 20.0, 40.0), 1.0, true);
        t.p_pre[0] = 1.0;
        t.p_post[1] = 1.0;
        t.z[[0, 0]] = 1.0;
        if let Some(q) = &mut t.q {
            q[[1, 1]] = 1.0;
        }
        t.stdp_update(&[false; 2], &[false; 2]);
        t.feedback_gate_update(&[0.0, 0.0]);
        let d20 = (-1.0f64 / 20.0).exp();
        let d40 = (-1.0f64 / 40.0).exp();
        assert_relative_eq!(t.p_pre[0], d20);
        assert_relative_eq!(t.p_post[1], d20);
        assert_relative_eq!(t.z[[0, 0]], d20);
        assert_relative_eq!(t.q.as_ref().unwrap()[[1, 1]], d40);
    }

    #[test]
    fn pre_before_post_potentiates_by_decayed_trace() {
        // Pre spike at step t, post spike at t+1: z picks up the pre trace
        // after one decay step, exp(-1/20).
        let mut t = StdpTraceSet::new(1, 1, 1.0, 0.0, taus(20.0, 20.0, 40.0), 1.0, false);
        t.stdp_update(&[true], &[false]);
        t.stdp_update(&[false], &[true]);
        assert_relative_eq!(t.z[[0, 0]], (-1.0f64 / 20.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn post_before_pre_is_inert_with_ltd_disabled() {
        let mut t = StdpTraceSet::new(1, 1, 1.0, 0.0, taus(20.0, 20.0, 40.0), 1.0, false);
        t.stdp_update(&[false], &[true]);
        t.stdp_update(&[true], &[false]);
        assert_eq!(t.z[[0, 0]], 0.0);
    }

    #[test]
    fn ltd_term_depresses_on_pre_spike() {
        let mut t = StdpTraceSet::new(1, 1, 0.0, 1.0, taus(20.0, 20.0, 40.0), 1.0, false);
        t.stdp_update(&[false], &[true]);
        t.stdp_update(&[true], &[false]);
        // P_j decayed one step before the pre spike lands.
        assert_relative_eq!(t.z[[0, 0]], -(-1.0f64 / 20.0).exp(), max_relative = 1e-12);
    }

    #[test]
    fn feedback_gate_single_increment() {
        let mut t = StdpTraceSet::new(1, 1, 1.0, 0.0, taus(20.0, 20.0, 40.0), 1.0, true);
        t.z[[0, 0]] = 1.0;
        t.feedback_gate_update(&[0.5]);
        assert_eq!(t.q.as_ref().unwrap()[[0, 0]], 0.5);
    }

    #[test]
    fn q_stays_zero_without_feedback() {
        let mut t = StdpTraceSet::new(2, 3, 1.0, 0.0, taus(20.0, 20.0, 40.0), 1.0, true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let pre: Vec<bool> = (0..3).map(|_| rng.gen_bool(0.5)).collect();
            let post: Vec<bool> = (0..2).map(|_| rng.gen_bool(0.5)).collect();
            t.stdp_update(&pre, &post);
            t.feedback_gate_update(&[0.0, 0.0]);
        }
        assert!(t.q.as_ref().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn q_matches_brute_force_nested_convolution() {
        // q(t) must equal the direct summation of ((f * z) conv k_tau_q).
        let tau_q = 40.0;
        let mut t = StdpTraceSet::new(1, 1, 1.0, 0.0, taus(20.0, 20.0, tau_q), 1.0, true);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut increments: Vec<f64> = Vec::new();
        for step in 0..1000 {
            let pre = [rng.gen_bool(0.3)];
            let post = [rng.gen_bool(0.2)];
            let f = rng.gen::<f64>() - 0.5;
            t.stdp_update(&pre, &post);
            t.feedback_gate_update(&[f]);
            increments.push(f * t.z[[0, 0]]);
            let direct: f64 = increments
                .iter()
                .enumerate()
                .map(|(s, u)| u * (-((step - s) as f64) / tau_q).exp())
                .sum();
            let q = t.q.as_ref().unwrap()[[0, 0]];
            if direct.abs() > 1e-12 {
                assert!(
                    ((q - direct) / direct).abs() <= 1e-9,
                    "step {step}: {q} vs {direct}"
                );
            } else {
                assert!((q - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn z_nonnegative_without_ltd() {
        let mut t = StdpTraceSet::new(4, 6, 1.0, 0.0, taus(20.0, 20.0, 40.0), 1.0, false);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let pre: Vec<bool> = (0..6).map(|_| rng.gen_bool(0.4)).collect();
            let post: Vec<bool> = (0..4).map(|_| rng.gen_bool(0.3)).collect();
            t.stdp_update(&pre, &post);
            assert!(t.z.iter().all(|&v| v >= 0.0));
        }
    }

    proptest! {
        #[test]
        fn recursion_equals_convolution(
            signal in proptest::collection::vec(0u8..2, 1..200),
            tau in prop_oneof![Just(20.0f64), Just(40.0f64)],
        ) {
            let mut trace = ExpTrace::new(tau, 1.0);
            for (t, &s) in signal.iter().enumerate() {
                trace.update(s as f64);
                let direct: f64 = signal[..=t]
                    .iter()
                    .enumerate()
                    .map(|(u, &x)| x as f64 * (-((t - u) as f64) / tau).exp())
                    .sum();
                if direct > 0.0 {
                    prop_assert!(((trace.value - direct) / direct).abs() <= 1e-9);
                } else {
                    prop_assert!(trace.value.abs() <= 1e-15);
                }
            }
        }

        #[test]
        fn trace_is_linear_in_its_input(
            s1 in proptest::collection::vec(-1.0f64..1.0, 50),
            s2 in proptest::collection::vec(-1.0f64..1.0, 50),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let mut ta = ExpTrace::new(20.0, 1.0);
            let mut tb = ExpTrace::new(20.0, 1.0);
            let mut tc = ExpTrace::new(20.0, 1.0);
            for (&x, &y) in s1.iter().zip(&s2) {
                ta.update(x);
                tb.update(y);
                tc.update(a * x + b * y);
                prop_assert!((tc.value - (a * ta.value + b * tb.value)).abs() <= 1e-9);
            }
        }
    }
}
