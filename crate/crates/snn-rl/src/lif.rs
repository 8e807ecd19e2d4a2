//! Leaky integrate-and-fire populations simulated in fixed 1 ms steps.
//!
//! The membrane voltage decays exponentially toward the resting potential and
//! each presynaptic spike injects an impulse of `R/tau * w` into the voltage:
//!
//! ```text
//! V[j] <- E_rest + (V[j] - E_rest) * exp(-dt/tau) + (R/tau) * I[j]
//! ```
//!
//! A neuron fires when its post-update voltage exceeds the threshold and is
//! immediately reset to `E_rest`. There is no refractory period.

use crate::error::{Result, SnnError};
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Membrane parameters shared by all neurons in a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifParams {
    /// Resting potential (mV).
    pub e_rest: f64,
    /// Firing threshold (mV).
    pub v_thresh: f64,
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Membrane resistance (ohm).
    pub resistance: f64,
    /// Simulation step (ms).
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            e_rest: -65.0,
            v_thresh: -52.0,
            tau_m: 100.0,
            resistance: 1.0,
            dt: 1.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if self.v_thresh <= self.e_rest {
            return Err(SnnError::Config(format!(
                "v_thresh ({}) must exceed e_rest ({})",
                self.v_thresh, self.e_rest
            )));
        }
        if self.tau_m <= 0.0 || self.dt <= 0.0 || self.dt > self.tau_m {
            return Err(SnnError::Config(format!(
                "need 0 < dt <= tau_m, got dt={} tau_m={}",
                self.dt, self.tau_m
            )));
        }
        Ok(())
    }

    /// Voltage decay factor per step.
    pub fn decay(&self) -> f64 {
        (-self.dt / self.tau_m).exp()
    }

    /// Impulse gain applied to each unit of input current.
    pub fn input_gain(&self) -> f64 {
        self.resistance / self.tau_m
    }
}

/// A group of LIF neurons stepped together.
#[derive(Debug, Clone)]
pub struct LifPopulation {
    pub params: LifParams,
    pub voltage: Vec<f64>,
    pub fired: Vec<bool>,
    decay: f64,
    gain: f64,
}

impl LifPopulation {
    pub fn new(params: LifParams, n: usize) -> Self {
        Self {
            voltage: vec![params.e_rest; n],
            fired: vec![false; n],
            decay: params.decay(),
            gain: params.input_gain(),
            params,
        }
    }

    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    /// Advances the population one step given the summed input current per
    /// neuron. Returns the firing mask for this step.
    pub fn step(&mut self, weighted_input: &[f64]) -> Result<&[bool]> {
        debug_assert_eq!(weighted_input.len(), self.voltage.len());
        let e = self.params.e_rest;
        let theta = self.params.v_thresh;
        for (j, (v, &i_in)) in self
            .voltage
            .iter_mut()
            .zip(weighted_input.iter())
            .enumerate()
        {
            if !i_in.is_finite() {
                return Err(SnnError::SimFault {
                    context: "non-finite input current",
                    index: j,
                });
            }
            let next = e + (*v - e) * self.decay + self.gain * i_in;
            if next > theta {
                *v = e;
                self.fired[j] = true;
            } else {
                *v = next;
                self.fired[j] = false;
            }
        }
        Ok(&self.fired)
    }

    /// Returns voltages to rest and clears firing state.
    pub fn reset(&mut self) {
        self.voltage.fill(self.params.e_rest);
        self.fired.fill(false);
    }
}

/// Dense input-to-neuron weights, stored row-major as `neurons x inputs` so
/// each postsynaptic neuron owns a contiguous row.
#[derive(Debug, Clone)]
pub struct SynapseMatrix {
    pub w: Array2<f64>,
}

impl SynapseMatrix {
    /// i.i.d. uniform initialization on `[0, w_max]`.
    pub fn uniform<R: Rng>(neurons: usize, inputs: usize, w_max: f64, rng: &mut R) -> Self {
        let w = Array2::from_shape_fn((neurons, inputs), |_| rng.gen::<f64>() * w_max);
        Self { w }
    }

    pub fn zeros(neurons: usize, inputs: usize) -> Self {
        Self {
            w: Array2::zeros((neurons, inputs)),
        }
    }

    pub fn neurons(&self) -> usize {
        self.w.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    /// Summed input current per neuron for a binary input spike vector.
    pub fn current(&self, input_spikes: &[bool], out: &mut [f64]) -> Result<()> {
        if input_spikes.len() != self.inputs() || out.len() != self.neurons() {
            return Err(SnnError::Config(format!(
                "dimension mismatch: weights {}x{}, spikes {}, out {}",
                self.neurons(),
                self.inputs(),
                input_spikes.len(),
                out.len()
            )));
        }
        let w = self.w.as_slice().expect("row-major weights");
        let inputs = self.inputs();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w[j * inputs..(j + 1) * inputs];
            let mut acc = 0.0;
            for (i, &spiked) in input_spikes.iter().enumerate() {
                if spiked {
                    acc += row[i];
                }
            }
            *o = acc;
        }
        Ok(())
    }

    /// NaN/Inf anywhere in the matrix is a hard failure.
    pub fn check_finite(&self) -> Result<()> {
        if self.w.sum().is_finite() {
            Ok(())
        } else {
            let index = self
                .w
                .iter()
                .position(|x| !x.is_finite())
                .unwrap_or_default();
            Err(SnnError::SimFault {
                context: "non-finite synaptic weight",
                index,
            })
        }
    }
}

/// One forward step: weighted sum of input spikes, then the LIF update.
pub fn forward(
    pop: &mut LifPopulation,
    syn: &SynapseMatrix,
    input_spikes: &[bool],
    scratch: &mut [f64],
) -> Result<()> {
    syn.current(input_spikes, scratch)?;
    pop.step(scratch)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resting_fixed_point() {
        let mut pop = LifPopulation::new(LifParams::default(), 3);
        pop.step(&[0.0, 0.0, 0.0]).unwrap();
        assert!(pop.voltage.iter().all(|&v| v == -65.0));
        assert!(pop.fired.iter().all(|&f| !f));
    }

    #[test]
    fn single_impulse_moves_voltage_by_gain() {
        let mut pop = LifPopulation::new(LifParams::default(), 1);
        pop.step(&[100.0]).unwrap();
        assert_relative_eq!(pop.voltage[0], -64.0, max_relative = 1e-12);
        assert!(!pop.fired[0]);
    }

    #[test]
    fn crossing_threshold_spikes_and_resets() {
        let mut pop = LifPopulation::new(LifParams::default(), 1);
        pop.voltage[0] = -52.4;
        // Push the update above -52 mV.
        pop.step(&[100.0]).unwrap();
        assert!(pop.fired[0]);
        assert_eq!(pop.voltage[0], -65.0);
    }

    #[test]
    fn voltage_never_exceeds_threshold_after_step() {
        let params = LifParams::default();
        let mut pop = LifPopulation::new(params, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let input: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() * 2000.0).collect();
            pop.step(&input).unwrap();
            assert!(pop.voltage.iter().all(|&v| v <= params.v_thresh));
        }
    }

    #[test]
    fn impulse_response_matches_exponential_kernel() {
        // A lone weight-w spike at step 0 must contribute
        // (R*w/tau)*exp(-t*dt/tau) to the voltage at step t.
        let params = LifParams::default();
        let w = 3.5;
        let mut pop = LifPopulation::new(params, 1);
        pop.step(&[w]).unwrap();
        for t in 0..500 {
            let expected = params.e_rest
                + (params.resistance * w / params.tau_m)
                    * (-(t as f64) * params.dt / params.tau_m).exp();
            assert_relative_eq!(pop.voltage[0], expected, max_relative = 1e-12);
            pop.step(&[0.0]).unwrap();
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn forward_matches_double_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let syn = SynapseMatrix::uniform(6, 10, 2.0, &mut rng);
        let spikes: Vec<bool> = (0..10).map(|_| rng.gen_bool(0.4)).collect();
        let mut current = vec![0.0; 6];
        syn.current(&spikes, &mut current).unwrap();
        for j in 0..6 {
            let mut acc = 0.0;
            for i in 0..10 {
                if spikes[i] {
                    acc += syn.w[[j, i]];
                }
            }
            assert_eq!(current[j], acc);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn one_spiking_input_selects_one_weight_per_neuron() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let syn = SynapseMatrix::uniform(4, 5, 1.0, &mut rng);
        let mut spikes = vec![false; 5];
        spikes[2] = true;
        let mut current = vec![0.0; 4];
        syn.current(&spikes, &mut current).unwrap();
        for j in 0..4 {
            assert_eq!(current[j], syn.w[[j, 2]]);
        }
    }

    #[test]
    fn reset_is_idempotent_and_silences_population() {
        let mut pop = LifPopulation::new(LifParams::default(), 4);
        pop.step(&[5000.0, 0.0, 200.0, 1.0]).unwrap();
        pop.reset();
        let snapshot = pop.voltage.clone();
        pop.reset();
        assert_eq!(pop.voltage, snapshot);
        assert!(pop.voltage.iter().all(|&v| v == -65.0));
        for _ in 0..10 {
            pop.step(&[0.0; 4]).unwrap();
            assert!(pop.fired.iter().all(|&f| !f));
        }
    }

    #[test]
    fn non_finite_current_is_a_fault() {
        let mut pop = LifPopulation::new(LifParams::default(), 2);
        let err = pop.step(&[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, SnnError::SimFault { index: 1, .. }));
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let syn = SynapseMatrix::zeros(3, 4);
        let mut out = vec![0.0; 3];
        assert!(syn.current(&[false; 5], &mut out).is_err());
    }

    #[test]
    fn deterministic_spike_trains_under_same_seed() {
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let syn = SynapseMatrix::uniform(5, 8, 6.0, &mut rng);
            let mut pop = LifPopulation::new(LifParams::default(), 5);
            let mut scratch = vec![0.0; 5];
            let mut record = Vec::new();
            for _ in 0..200 {
                let spikes: Vec<bool> = (0..8).map(|_| rng.gen_bool(0.5)).collect();
                forward(&mut pop, &syn, &spikes, &mut scratch).unwrap();
                record.push(pop.fired.clone());
            }
            record
        };
        assert_eq!(run(42), run(42));
    }
}
