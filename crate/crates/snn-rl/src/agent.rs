//! Wires input spikes, critic and actor populations, traces and the
//! optimizer into the per-millisecond simulation step.

use ndarray::Array2;
use rand::Rng;

use crate::actor::{self, ActorConfig, PolicyState};
use crate::cartpole::EpisodeProtocol;
use crate::critic::{self, CriticConfig, TdError};
use crate::error::Result;
use crate::lif::{LifParams, LifPopulation, SynapseMatrix};
use crate::optim::{self, AdamState, BatchAccumulator, OptimConfig, UpdateMode};
use crate::traces::{RateEstimator, StdpTaus, StdpTraceSet};

/// One synapse matrix with its population, rate filter, traces and optimizer
/// state. The critic uses one head per population sign, the actor likewise.
pub struct Head {
    pub syn: SynapseMatrix,
    pub pop: LifPopulation,
    pub rates: RateEstimator,
    pub traces: StdpTraceSet,
    /// +1 excitatory, -1 inhibitory.
    pub sign: f64,
    /// Episode gradient accumulator, allocated in batched-Adam mode.
    pub grad: Option<Array2<f64>>,
    pub adam: Option<AdamState>,
    pub batch: Option<BatchAccumulator>,
    pub spike_count: u64,
    scratch: Vec<f64>,
}

impl Head {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng>(
        neurons: usize,
        inputs: usize,
        lif: LifParams,
        tau_n: f64,
        taus: StdpTaus,
        a_plus: f64,
        a_minus: f64,
        with_q: bool,
        sign: f64,
        w_init: f64,
        optim_cfg: &OptimConfig,
        rng: &mut R,
    ) -> Self {
        let batched = optim_cfg.mode == UpdateMode::Adam;
        Self {
            syn: SynapseMatrix::uniform(neurons, inputs, w_init, rng),
            pop: LifPopulation::new(lif, neurons),
            rates: RateEstimator::new(neurons, tau_n, lif.dt),
            traces: StdpTraceSet::new(neurons, inputs, a_plus, a_minus, taus, lif.dt, with_q),
            sign,
            grad: batched.then(|| Array2::zeros((neurons, inputs))),
            adam: batched.then(|| AdamState::new(neurons, inputs, optim_cfg)),
            batch: batched.then(|| BatchAccumulator::new(neurons, inputs, optim_cfg.batch_size)),
            spike_count: 0,
            scratch: vec![0.0; neurons],
        }
    }

    fn forward(&mut self, input: &[bool]) -> Result<()> {
        self.syn.current(input, &mut self.scratch)?;
        self.pop.step(&self.scratch)?;
        self.rates.update(&self.pop.fired);
        self.spike_count += self.pop.fired.iter().filter(|&&f| f).count() as u64;
        Ok(())
    }

    fn reset(&mut self) {
        self.pop.reset();
        self.rates.reset();
        self.traces.reset();
        self.spike_count = 0;
    }
}

pub struct Agent {
    pub critic_cfg: CriticConfig,
    pub actor_cfg: ActorConfig,
    pub protocol: EpisodeProtocol,
    pub optim_cfg: OptimConfig,
    pub critic_e: Head,
    pub critic_i: Option<Head>,
    pub actor_e: Head,
    pub actor_i: Option<Head>,
    pub policy: PolicyState,
    /// With feedback ablated, the actor update reads z instead of q.
    pub ablate_feedback: bool,
    /// Feedback `A_k - s_k` and entropy gate, held per environment step.
    feedback: Vec<f64>,
    gate: Vec<f64>,
    feedback_per_neuron: Vec<f64>,
    rate_means_e: Vec<f64>,
    rate_means_i: Vec<f64>,
}

impl Agent {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        inputs: usize,
        lif: LifParams,
        critic_cfg: CriticConfig,
        actor_cfg: ActorConfig,
        protocol: EpisodeProtocol,
        optim_cfg: OptimConfig,
        w_init_critic: f64,
        w_init_actor: f64,
        ablate_feedback: bool,
        rng: &mut R,
    ) -> Self {
        let ct = StdpTaus {
            tau_p: critic_cfg.tau_p,
            tau_z: critic_cfg.tau_z,
            tau_q: 1.0,
        };
        let at = StdpTaus {
            tau_p: actor_cfg.tau_p,
            tau_z: actor_cfg.tau_z,
            tau_q: actor_cfg.tau_q,
        };
        let k = actor_cfg.k;
        let critic_e = Head::new(
            critic_cfg.n_e,
            inputs,
            lif,
            critic_cfg.tau_n,
            ct,
            critic_cfg.a_plus,
            critic_cfg.a_minus,
            false,
            1.0,
            w_init_critic,
            &optim_cfg,
            rng,
        );
        let critic_i = (critic_cfg.n_i > 0).then(|| {
            Head::new(
                critic_cfg.n_i,
                inputs,
                lif,
                critic_cfg.tau_n,
                ct,
                critic_cfg.a_plus,
                critic_cfg.a_minus,
                false,
                -1.0,
                w_init_critic,
                &optim_cfg,
                rng,
            )
        });
        let actor_e = Head::new(
            k * actor_cfg.n_e,
            inputs,
            lif,
            actor_cfg.tau_n,
            at,
            actor_cfg.a_plus,
            actor_cfg.a_minus,
            true,
            1.0,
            w_init_actor,
            &optim_cfg,
            rng,
        );
        let actor_i = (actor_cfg.n_i > 0).then(|| {
            Head::new(
                k * actor_cfg.n_i,
                inputs,
                lif,
                actor_cfg.tau_n,
                at,
                actor_cfg.a_plus,
                actor_cfg.a_minus,
                true,
                -1.0,
                w_init_actor,
                &optim_cfg,
                rng,
            )
        });
        let n_actor = k * (actor_cfg.n_e + actor_cfg.n_i);
        Self {
            policy: PolicyState::new(k),
            feedback: vec![0.0; k],
            gate: vec![0.0; k],
            feedback_per_neuron: vec![0.0; n_actor.max(1)],
            rate_means_e: vec![0.0; k],
            rate_means_i: vec![0.0; k],
            critic_cfg,
            actor_cfg,
            protocol,
            optim_cfg,
            critic_e,
            critic_i,
            actor_e,
            actor_i,
            ablate_feedback,
        }
    }

    /// Resets all transient state (voltages, traces, rates, policy) at an
    /// episode boundary. Weights persist.
    pub fn reset_episode(&mut self) {
        self.critic_e.reset();
        self.actor_e.reset();
        if let Some(h) = &mut self.critic_i {
            h.reset();
        }
        if let Some(h) = &mut self.actor_i {
            h.reset();
        }
        self.policy.reset();
        self.feedback.fill(0.0);
        self.gate.fill(0.0);
    }

    /// Warm-up dynamics: spiking input, neuron stepping and rate filtering
    /// only. No TD error, no trace updates, no weight changes.
    pub fn warmup_step(&mut self, input_spikes: &[bool]) -> Result<()> {
        self.critic_e.forward(input_spikes)?;
        self.actor_e.forward(input_spikes)?;
        if let Some(h) = &mut self.critic_i {
            h.forward(input_spikes)?;
        }
        if let Some(h) = &mut self.actor_i {
            h.forward(input_spikes)?;
        }
        Ok(())
    }

    pub fn clear_spike_counts(&mut self) {
        self.critic_e.spike_count = 0;
        self.actor_e.spike_count = 0;
        if let Some(h) = &mut self.critic_i {
            h.spike_count = 0;
        }
        if let Some(h) = &mut self.actor_i {
            h.spike_count = 0;
        }
    }

    fn per_action_rates(&mut self) {
        let n_e = self.actor_cfg.n_e;
        for (k, chunk) in self.actor_e.rates.rho.chunks(n_e).enumerate() {
            self.rate_means_e[k] = chunk.iter().sum::<f64>() / n_e as f64;
        }
        if let Some(h) = &self.actor_i {
            let n_i = self.actor_cfg.n_i;
            for (k, chunk) in h.rates.rho.chunks(n_i).enumerate() {
                self.rate_means_i[k] = chunk.iter().sum::<f64>() / n_i as f64;
            }
        } else {
            self.rate_means_i.fill(0.0);
        }
    }

    /// Action probabilities from the current per-action mean rates.
    pub fn action_probs(&mut self) -> Vec<f64> {
        self.per_action_rates();
        actor::action_probs(&self.rate_means_e, &self.rate_means_i, self.actor_cfg.alpha)
    }

    /// Samples (or holds) the action for the next environment step and
    /// freezes the feedback signal and entropy gate for its duration.
    pub fn choose_action<R: Rng>(&mut self, rng: &mut R) -> usize {
        let s = self.action_probs();
        let action = self
            .policy
            .sample_or_hold(&s, self.actor_cfg.resample_every, rng);
        self.feedback = actor::feedback_signal(action, &s);
        self.gate = actor::entropy_gate(&s);
        action
    }

    pub fn value(&self) -> f64 {
        let empty: &[f64] = &[];
        critic::value(
            &self.critic_e.rates.rho,
            self.critic_i.as_ref().map_or(empty, |h| &h.rates.rho),
            self.critic_cfg.alpha,
            self.critic_cfg.beta,
        )
    }

    /// One learning millisecond: network dynamics, TD error, trace updates
    /// and (in plain mode) immediate weight updates. Returns the TD error.
    pub fn learn_step(
        &mut self,
        input_spikes: &[bool],
        reward_per_ms: f64,
        terminal: bool,
    ) -> Result<f64> {
        let v_now = self.value();

        self.critic_e.forward(input_spikes)?;
        self.actor_e.forward(input_spikes)?;
        if let Some(h) = &mut self.critic_i {
            h.forward(input_spikes)?;
        }
        if let Some(h) = &mut self.actor_i {
            h.forward(input_spikes)?;
        }

        let v_next = self.value();
        let dt = self.critic_e.pop.params.dt;
        let delta = critic::td_error(
            v_now,
            v_next,
            reward_per_ms,
            dt,
            self.critic_cfg.tau_gamma,
            terminal,
        );

        // Trace recursions, then weight updates.
        self.critic_e
            .traces
            .stdp_update(input_spikes, &self.critic_e.pop.fired);
        self.actor_e
            .traces
            .stdp_update(input_spikes, &self.actor_e.pop.fired);
        if let Some(h) = &mut self.critic_i {
            h.traces.stdp_update(input_spikes, &h.pop.fired);
        }
        if let Some(h) = &mut self.actor_i {
            h.traces.stdp_update(input_spikes, &h.pop.fired);
        }

        // Feedback gate, one scalar per actor neuron from its action's slot.
        Self::gate_actor(
            &mut self.actor_e,
            &self.feedback,
            &mut self.feedback_per_neuron,
        );
        if let Some(h) = &mut self.actor_i {
            Self::gate_actor(h, &self.feedback, &mut self.feedback_per_neuron);
        }

        self.per_action_rates();
        let actor_rate_mean = self.rate_means_e.iter().sum::<f64>() / self.actor_cfg.k as f64;

        let eta_c = self.critic_cfg.eta;
        let eta_a = self.actor_cfg.eta;
        let plain = self.optim_cfg.mode == UpdateMode::Plain;

        Self::critic_update(&mut self.critic_e, delta, eta_c, plain);
        if let Some(h) = &mut self.critic_i {
            Self::critic_update(h, delta, eta_c, plain);
        }
        Self::actor_update(
            &mut self.actor_e,
            &self.actor_cfg,
            delta,
            &self.gate,
            actor_rate_mean,
            eta_a,
            plain,
            self.ablate_feedback,
        );
        if let Some(h) = &mut self.actor_i {
            Self::actor_update(
                h,
                &self.actor_cfg,
                delta,
                &self.gate,
                actor_rate_mean,
                eta_a,
                plain,
                self.ablate_feedback,
            );
        }

        Ok(delta.0)
    }

    fn gate_actor(head: &mut Head, feedback: &[f64], buf: &mut Vec<f64>) {
        let n = head.pop.len();
        let per_action = n / feedback.len();
        buf.clear();
        buf.extend((0..n).map(|j| feedback[j / per_action]));
        head.traces.feedback_gate_update(&buf[..n]);
    }

    /// dw = sign * eta * delta * z, applied directly (plain) or accumulated
    /// as sign * delta * z for the batched Adam path.
    fn critic_update(head: &mut Head, delta: TdError, eta: f64, plain: bool) {
        if plain {
            optim::apply_plain_scaled(&mut head.syn.w, head.sign * eta * delta.0, &head.traces.z);
        } else {
            let g = head.grad.as_mut().expect("grad buffer");
            optim::apply_plain_scaled(g, head.sign * delta.0, &head.traces.z);
        }
    }

    /// Combined actor rule with the three regularizers, fused per row.
    #[allow(clippy::too_many_arguments)]
    fn actor_update(
        head: &mut Head,
        cfg: &ActorConfig,
        delta: TdError,
        gate: &[f64],
        rates_mean: f64,
        eta: f64,
        plain: bool,
        ablate: bool,
    ) {
        let inputs = head.syn.inputs();
        let n = head.pop.len();
        let per_action = n / cfg.k;
        let rate_err = cfg.c_t * (rates_mean - cfg.rho_target);
        let scale = if plain { eta } else { 1.0 };
        let q = if ablate {
            head.traces.z.as_slice().expect("row-major z")
        } else {
            head.traces
                .q
                .as_ref()
                .expect("actor feedback trace")
                .as_slice()
                .expect("row-major q")
        };
        let z = head.traces.z.as_slice().expect("row-major z");
        let w = head.syn.w.as_slice_mut().expect("row-major w");
        let target: &mut [f64] = if plain {
            w
        } else {
            head.grad
                .as_mut()
                .expect("grad buffer")
                .as_slice_mut()
                .expect("row-major grad")
        };
        let decay_on_w = plain; // weight decay always reads the live weights
        let sign = head.sign;
        for j in 0..n {
            let g = gate[j / per_action];
            let c_q = scale * sign * delta.0;
            let c_z = scale * (sign * cfg.c_e * g - rate_err);
            let c_w = -scale * 0.5 * cfg.c_w;
            let row = j * inputs..(j + 1) * inputs;
            // In batched mode the decay term still has to read the weights,
            // which live in a different buffer than the accumulator.
            if decay_on_w {
                for ((t, &qv), &zv) in target[row.clone()]
                    .iter_mut()
                    .zip(&q[row.clone()])
                    .zip(&z[row.clone()])
                {
                    *t += c_q * qv + c_z * zv + c_w * *t;
                }
            } else {
                // SAFETY-free split: weights are only read here.
                for i in row.clone() {
                    target[i] += c_q * q[i] + c_z * z[i];
                }
            }
        }
        if !plain && cfg.c_w != 0.0 {
            let wv = head.syn.w.as_slice().expect("row-major w");
            let gv = head
                .grad
                .as_mut()
                .expect("grad buffer")
                .as_slice_mut()
                .expect("row-major grad");
            for (g, &wx) in gv.iter_mut().zip(wv) {
                *g -= 0.5 * cfg.c_w * wx;
            }
        }
    }

    /// Weight sanity check, run once per environment step.
    pub fn check_finite(&self) -> Result<()> {
        self.critic_e.syn.check_finite()?;
        self.actor_e.syn.check_finite()?;
        if let Some(h) = &self.critic_i {
            h.syn.check_finite()?;
        }
        if let Some(h) = &self.actor_i {
            h.syn.check_finite()?;
        }
        Ok(())
    }

    /// Episode end: in batched mode, commit the episode gradient and run Adam
    /// when the batch flushes.
    pub fn end_episode(&mut self) -> Result<()> {
        if self.optim_cfg.mode == UpdateMode::Plain {
            return Ok(());
        }
        let eta_c = self.critic_cfg.eta;
        let eta_a = self.actor_cfg.eta;
        Self::commit_head(&mut self.critic_e, eta_c)?;
        Self::commit_head(&mut self.actor_e, eta_a)?;
        if let Some(h) = &mut self.critic_i {
            Self::commit_head(h, eta_c)?;
        }
        if let Some(h) = &mut self.actor_i {
            Self::commit_head(h, eta_a)?;
        }
        Ok(())
    }

    fn commit_head(head: &mut Head, lr: f64) -> Result<()> {
        let grad = head.grad.as_mut().expect("grad buffer");
        let flushed = head.batch.as_mut().expect("batch accumulator").commit(grad);
        grad.fill(0.0);
        if let Some(mean) = flushed {
            optim::apply_adam(
                head.adam.as_mut().expect("adam state"),
                &mut head.syn.w,
                &mean,
                lr,
            )?;
        }
        Ok(())
    }
}
