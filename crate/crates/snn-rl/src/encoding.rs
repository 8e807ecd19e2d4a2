//! State-to-feature Fourier encoding and feature-to-spike Bernoulli coding.
//!
//! Features are cosine basis responses `o_c = cos(pi * c . x~)` over integer
//! coefficient vectors `c`, with the normalized state `x~` in `[0,1]^d`.
//! Coefficients are enumerated lexicographically (last dimension fastest),
//! which fixes the feature order for weight-file portability.

use crate::error::{Result, SnnError};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierEncoder {
    pub order: usize,
    pub state_dim: usize,
    /// Per-dimension (low, high) clip-then-normalize bounds.
    pub bounds: Vec<(f64, f64)>,
    pub cross_terms: bool,
}

impl FourierEncoder {
    /// CartPole encoder: order 2 with cross terms over the 4-dim state,
    /// giving (2+1)^4 = 81 features.
    pub fn cartpole() -> Self {
        Self {
            order: 2,
            state_dim: 4,
            bounds: vec![(-2.4, 2.4), (-3.0, 3.0), (-0.2095, 0.2095), (-3.5, 3.5)],
            cross_terms: true,
        }
    }

    /// Order-1, no-cross encoder over an 8-dim state, used as the first stage
    /// of the 17-dim encoder variant.
    pub fn lander_style() -> Self {
        Self {
            order: 1,
            state_dim: 8,
            bounds: vec![(-1.0, 1.0); 8],
            cross_terms: false,
        }
    }

    pub fn output_dim(&self) -> usize {
        if self.cross_terms {
            (self.order + 1).pow(self.state_dim as u32)
        } else {
            self.order * self.state_dim
        }
    }

    fn normalize(&self, state: &[f64]) -> Vec<f64> {
        state
            .iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (v.clamp(lo, hi) - lo) / (hi - lo))
            .collect()
    }

    /// Raw cosine responses in [-1, 1].
    pub fn basis(&self, state: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.state_dim);
        let x = self.normalize(state);
        if self.cross_terms {
            let n = self.output_dim();
            let base = self.order + 1;
            let mut out = Vec::with_capacity(n);
            for idx in 0..n {
                // Decode idx into the coefficient vector, last dim fastest.
                let mut rem = idx;
                let mut dot = 0.0;
                for d in (0..self.state_dim).rev() {
                    let c = rem % base;
                    rem /= base;
                    dot += c as f64 * x[d];
                }
                out.push((std::f64::consts::PI * dot).cos());
            }
            out
        } else {
            let mut out = Vec::with_capacity(self.output_dim());
            for &xi in &x {
                for c in 1..=self.order {
                    out.push((std::f64::consts::PI * c as f64 * xi).cos());
                }
            }
            out
        }
    }
}

/// 81 features in [0,1] for a CartPole state: `f = (cos(pi c . x~) + 1) / 2`.
pub fn encode_cartpole(enc: &FourierEncoder, state: &[f64; 4]) -> Vec<f64> {
    enc.basis(state).iter().map(|o| (o + 1.0) / 2.0).collect()
}

/// 17 features in [0,1] for an 8-dim state: `ReLU([o, -o, 1])` over the
/// order-1 cosine responses.
pub fn encode_lander_style(enc: &FourierEncoder, state: &[f64; 8]) -> Vec<f64> {
    let o = enc.basis(state);
    let mut out = Vec::with_capacity(2 * o.len() + 1);
    out.extend(o.iter().map(|&v| v.max(0.0)));
    out.extend(o.iter().map(|&v| (-v).max(0.0)));
    out.push(1.0);
    out
}

/// Turns features into one Bernoulli spike per input neuron per millisecond.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeCoder {
    pub neurons_per_feature: usize,
}

impl SpikeCoder {
    pub fn spikes<R: Rng>(&self, features: &[f64], rng: &mut R, out: &mut Vec<bool>) -> Result<()> {
        out.clear();
        for (i, &f) in features.iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(SnnError::Encoding { index: i, value: f });
            }
            for _ in 0..self.neurons_per_feature {
                out.push(rng.gen::<f64>() < f);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cartpole_dimension_and_range() {
        let enc = FourierEncoder::cartpole();
        assert_eq!(enc.output_dim(), 81);
        let f = encode_cartpole(&enc, &[0.5, -1.0, 0.05, 2.0]);
        assert_eq!(f.len(), 81);
        assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn constant_basis_term_is_always_one() {
        // Index 0 decodes to the all-zero coefficient vector.
        let enc = FourierEncoder::cartpole();
        for state in [[0.0; 4], [1.0, 2.0, 0.1, -3.0], [-2.4, 3.0, -0.2, 3.5]] {
            assert_eq!(encode_cartpole(&enc, &state)[0], 1.0);
        }
    }

    #[test]
    fn zero_normalized_state_saturates_all_features() {
        // x~ = 0 at the lower bounds: every cos(0) = 1, every f = 1.
        let enc = FourierEncoder::cartpole();
        let f = encode_cartpole(&enc, &[-2.4, -3.0, -0.2095, -3.5]);
        assert!(f.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn antinode_maps_to_zero_feature() {
        // Coefficient (0,0,0,1) is the last-dim order-1 term; c.x~ = 1 at the
        // upper bound, so o = cos(pi) = -1 and f = 0.
        let enc = FourierEncoder::cartpole();
        let f = encode_cartpole(&enc, &[-2.4, -3.0, -0.2095, 3.5]);
        assert!(f[1].abs() < 1e-12);
    }

    #[test]
    fn clipping_saturates_out_of_range_states() {
        let enc = FourierEncoder::cartpole();
        let inside = encode_cartpole(&enc, &[2.4, 3.0, 0.2095, 3.5]);
        let outside = encode_cartpole(&enc, &[99.0, 99.0, 9.0, 99.0]);
        assert_eq!(inside, outside);
    }

    #[test]
    fn lexicographic_enumeration_is_frozen() {
        // Feature 1 must be coefficient (0,0,0,1): responds to dim 3 only.
        let enc = FourierEncoder::cartpole();
        let mid = [0.0, 0.0, 0.0, 0.0];
        let mut moved = mid;
        moved[3] = 1.75; // quarter of the dim-3 range above midpoint
        let a = encode_cartpole(&enc, &mid);
        let b = encode_cartpole(&enc, &moved);
        assert!((a[1] - b[1]).abs() > 1e-3);
        // Feature 27 is (1,0,0,0): responds to dim 0 only.
        let mut moved0 = mid;
        moved0[0] = 1.2;
        let c = encode_cartpole(&enc, &moved0);
        assert_eq!(a[1], c[1]);
        assert!((a[27] - c[27]).abs() > 1e-3);
    }

    #[test]
    fn lander_style_relu_split() {
        let enc = FourierEncoder::lander_style();
        let f = encode_lander_style(&enc, &[0.0; 8]);
        assert_eq!(f.len(), 17);
        assert_eq!(f[16], 1.0);
        assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for i in 0..8 {
            // Exactly one of the (o, -o) pair survives the ReLU.
            assert!(f[i] == 0.0 || f[i + 8] == 0.0);
        }
        // At x~ = 0.5 per dim, o_i = cos(pi/2) = 0: both halves zero.
        let g = encode_lander_style(&enc, &[0.0; 8]);
        assert!(g[0].abs() < 1e-12 && g[8].abs() < 1e-12);
        // Push one dim toward its low bound: o_0 > 0, so negative slot is 0.
        let h = encode_lander_style(&enc, &[-0.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(h[0] > 0.0);
        assert_eq!(h[8], 0.0);
    }

    #[test]
    fn bernoulli_extremes_and_empirical_rate() {
        let coder = SpikeCoder {
            neurons_per_feature: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = Vec::new();
        let mut count = 0usize;
        for _ in 0..10_000 {
            coder.spikes(&[0.0, 1.0, 0.5], &mut rng, &mut out).unwrap();
            assert!(!out[0]);
            assert!(out[1]);
            count += out[2] as usize;
        }
        let rate = count as f64 / 10_000.0;
        assert!((rate - 0.5).abs() < 0.015, "rate {rate}");
    }

    #[test]
    fn replicated_input_neurons() {
        let coder = SpikeCoder {
            neurons_per_feature: 16,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = Vec::new();
        coder.spikes(&[1.0, 0.0], &mut rng, &mut out).unwrap();
        assert_eq!(out.len(), 32);
        assert!(out[..16].iter().all(|&s| s));
        assert!(out[16..].iter().all(|&s| !s));
    }

    #[test]
    fn out_of_range_feature_is_a_fault() {
        let coder = SpikeCoder {
            neurons_per_feature: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::new();
        assert!(coder.spikes(&[1.2], &mut rng, &mut out).is_err());
    }

    #[test]
    fn encoding_is_deterministic() {
        let enc = FourierEncoder::cartpole();
        let s = [0.3, -0.7, 0.11, 1.9];
        assert_eq!(encode_cartpole(&enc, &s), encode_cartpole(&enc, &s));
        let coder = SpikeCoder {
            neurons_per_feature: 1,
        };
        let f = encode_cartpole(&enc, &s);
        let mut a = Vec::new();
        let mut b = Vec::new();
        coder
            .spikes(&f, &mut ChaCha8Rng::seed_from_u64(9), &mut a)
            .unwrap();
        coder
            .spikes(&f, &mut ChaCha8Rng::seed_from_u64(9), &mut b)
            .unwrap();
        assert_eq!(a, b);
    }
}
