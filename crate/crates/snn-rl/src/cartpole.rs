//! Native cart-pole physics plus the episode protocol constants: warm-up,
//! SNN/environment time mapping, reward scaling and terminal handling.

use crate::error::{Result, SnnError};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.8;
pub const MASS_CART: f64 = 1.0;
pub const MASS_POLE: f64 = 0.1;
pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
/// Half of the pole's length (m).
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const POLE_MASS_LENGTH: f64 = MASS_POLE * POLE_HALF_LENGTH;
pub const FORCE_MAG: f64 = 10.0;
/// Physics step (s); one environment step.
pub const PHYSICS_DT: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 0.2095;
pub const MAX_STEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn in_bounds(&self) -> bool {
        self.x.abs() <= X_LIMIT && self.theta.abs() <= THETA_LIMIT
    }
}

/// One semi-implicit-free Euler step of the standard cart-pole equations with
/// the given applied force.
pub fn physics_step_force(s: &CartPoleState, force: f64) -> CartPoleState {
    let cos_t = s.theta.cos();
    let sin_t = s.theta.sin();
    let temp = (force + POLE_MASS_LENGTH * s.theta_dot * s.theta_dot * sin_t) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin_t - cos_t * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t * cos_t / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS;
    CartPoleState {
        x: s.x + PHYSICS_DT * s.x_dot,
        x_dot: s.x_dot + PHYSICS_DT * x_acc,
        theta: s.theta + PHYSICS_DT * s.theta_dot,
        theta_dot: s.theta_dot + PHYSICS_DT * theta_acc,
    }
}

/// Action 0 pushes left, action 1 pushes right.
pub fn physics_step(s: &CartPoleState, action: usize) -> CartPoleState {
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    physics_step_force(s, force)
}

/// Fixed constants of the paper's episode protocol.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpisodeProtocol {
    pub warmup_ms: usize,
    pub snn_ms_per_env_step: usize,
    pub reward_scale: f64,
    /// Discount time constant (ms).
    pub tau_gamma: f64,
    /// Simulation steps at the episode end with a forced-zero TD target.
    pub terminal_zero_ms: usize,
    pub max_steps: usize,
}

impl Default for EpisodeProtocol {
    fn default() -> Self {
        Self {
            warmup_ms: 100,
            snn_ms_per_env_step: 20,
            reward_scale: 0.02,
            tau_gamma: 1000.0,
            terminal_zero_ms: 2,
            max_steps: MAX_STEPS,
        }
    }
}

pub struct StepOutcome {
    pub obs: Vec<f64>,
    /// Raw (unscaled) environment reward for the step.
    pub reward: f64,
    pub done: bool,
    /// True only when the episode ended by leaving the bounds (pole fell or
    /// cart ran off the track), not by hitting the step limit. The zero-value
    /// TD target applies only to failures; a truncated episode still
    /// bootstraps from the estimated value of its final state.
    pub failed: bool,
}

/// Minimal environment abstraction so other environments can slot in behind
/// the harness.
pub trait Environment {
    fn reset<R: Rng>(&mut self, rng: &mut R) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
    fn obs_dim(&self) -> usize;
    fn action_count(&self) -> usize;
}

#[derive(Debug, Clone, Default)]
pub struct CartPole {
    pub state: CartPoleState,
    pub steps: usize,
    pub done: bool,
}

impl Environment for CartPole {
    /// Each state component i.i.d. uniform on [-0.05, 0.05].
    fn reset<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        self.state = CartPoleState {
            x: rng.gen_range(-0.05..0.05),
            x_dot: rng.gen_range(-0.05..0.05),
            theta: rng.gen_range(-0.05..0.05),
            theta_dot: rng.gen_range(-0.05..0.05),
        };
        self.steps = 0;
        self.done = false;
        self.state.as_array().to_vec()
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(SnnError::Protocol(
                "step called on a finished episode".into(),
            ));
        }
        self.state = physics_step(&self.state, action);
        self.steps += 1;
        let failed = !self.state.in_bounds();
        self.done = failed || self.steps >= MAX_STEPS;
        Ok(StepOutcome {
            obs: self.state.as_array().to_vec(),
            reward: 1.0,
            done: self.done,
            failed,
        })
    }

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        2
    }
}
