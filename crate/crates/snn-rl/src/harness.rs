//! Training loop, run metrics and CSV/JSON export.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::agent::Agent;
use crate::cartpole::{CartPole, Environment};
use crate::encoding::{encode_cartpole, FourierEncoder, SpikeCoder};
use crate::error::{Result, SnnError};
use crate::profile::Profile;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub profile: Profile,
    pub episodes: usize,
    pub seed: u64,
    pub ablate_feedback: bool,
}

/// One CSV row: `episode,steps,return,actor_hz,critic_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub scaled_return: f64,
    pub actor_hz: f64,
    pub critic_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub profile: String,
    pub seed: u64,
    /// First episode (1-based) with a perfect score, if any.
    pub t_f: Option<usize>,
    /// First episode whose trailing 100-episode window is all perfect.
    pub t_s: Option<usize>,
    pub episodes: usize,
    pub git_describe: Option<String>,
}

/// Per-millisecond reward and the step offset from which TD targets are
/// forced to zero (past the end when the episode continues). The zero target
/// marks genuine failures only; a time-limit truncation keeps bootstrapping.
pub fn reward_trace(
    raw_reward: f64,
    protocol: &crate::cartpole::EpisodeProtocol,
    failed: bool,
) -> (f64, usize) {
    let ms = protocol.snn_ms_per_env_step;
    let per_ms = raw_reward * protocol.reward_scale / ms as f64;
    let terminal_from = if failed {
        ms - protocol.terminal_zero_ms
    } else {
        ms
    };
    (per_ms, terminal_from)
}

/// Runs one full training run and returns the per-episode log plus summary.
pub fn train(cfg: &RunConfig) -> Result<(Vec<EpisodeLog>, RunSummary)> {
    if cfg.profile.env != "cartpole" {
        return Err(SnnError::Config(format!(
            "unsupported environment: {}",
            cfg.profile.env
        )));
    }
    let p = &cfg.profile;
    p.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let encoder = FourierEncoder::cartpole();
    let coder = SpikeCoder {
        neurons_per_feature: p.network.neurons_per_feature,
    };
    let inputs = encoder.output_dim() * p.network.neurons_per_feature;
    let mut env = CartPole::default();
    let mut agent = Agent::new(
        inputs,
        p.neuron,
        p.critic.clone(),
        p.actor.clone(),
        p.protocol,
        p.optim.clone(),
        p.network.w_init_critic,
        p.network.w_init_actor,
        cfg.ablate_feedback,
        &mut rng,
    );

    let protocol = p.protocol;
    let n_actor = p.actor.k * (p.actor.n_e + p.actor.n_i);
    let n_critic = p.critic.n_e + p.critic.n_i;
    let mut spikes = Vec::with_capacity(inputs);
    let mut logs = Vec::with_capacity(cfg.episodes);

    for episode in 1..=cfg.episodes {
        let obs = env.reset(&mut rng);
        let mut features = encode_cartpole(&encoder, &to4(&obs));
        agent.reset_episode();

        for _ in 0..protocol.warmup_ms {
            coder.spikes(&features, &mut rng, &mut spikes)?;
            agent.warmup_step(&spikes)?;
        }
        agent.clear_spike_counts();

        loop {
            let action = agent.choose_action(&mut rng);
            let out = env.step(action)?;
            // The transition's reward arrives while the post-step state is on
            // display: the environment advances at the window boundary, so the
            // agent spends the next 20 ms looking at the state it just moved
            // into (and the action above was chosen from rates that had the
            // *previous* window's state on display).
            features = encode_cartpole(&encoder, &to4(&out.obs));
            let (per_ms, terminal_from) = reward_trace(out.reward, &protocol, out.failed);
            for ms in 0..protocol.snn_ms_per_env_step {
                coder.spikes(&features, &mut rng, &mut spikes)?;
                agent.learn_step(&spikes, per_ms, ms >= terminal_from)?;
            }
            agent.check_finite()?;
            if out.done {
                break;
            }
        }
        agent.end_episode()?;

        let steps = env.steps;
        let seconds = steps as f64 * 0.02;
        let actor_spikes =
            agent.actor_e.spike_count + agent.actor_i.as_ref().map_or(0, |h| h.spike_count);
        let critic_spikes =
            agent.critic_e.spike_count + agent.critic_i.as_ref().map_or(0, |h| h.spike_count);
        logs.push(EpisodeLog {
            episode,
            steps,
            scaled_return: steps as f64 * protocol.reward_scale,
            actor_hz: actor_spikes as f64 / (n_actor as f64 * seconds),
            critic_hz: critic_spikes as f64 / (n_critic as f64 * seconds),
        });
    }

    let step_counts: Vec<usize> = logs.iter().map(|l| l.steps).collect();
    let (t_f, t_s) = compute_metrics(&step_counts, protocol.max_steps);
    Ok((
        logs,
        RunSummary {
            profile: p.name.clone(),
            seed: cfg.seed,
            t_f,
            t_s,
            episodes: cfg.episodes,
            git_describe: git_describe(),
        },
    ))
}

fn to4(obs: &[f64]) -> [f64; 4] {
    [obs[0], obs[1], obs[2], obs[3]]
}

/// `t_f`: first episode (1-based) reaching `max_steps`. `t_s`: first episode
/// `e >= 100` such that episodes `e-99..=e` all reached `max_steps`.
pub fn compute_metrics(step_counts: &[usize], max_steps: usize) -> (Option<usize>, Option<usize>) {
    let t_f = step_counts
        .iter()
        .position(|&s| s >= max_steps)
        .map(|i| i + 1);
    let mut streak = 0usize;
    let mut t_s = None;
    for (i, &s) in step_counts.iter().enumerate() {
        if s >= max_steps {
            streak += 1;
            if streak >= 100 {
                t_s = Some(i + 1);
                break;
            }
        } else {
            streak = 0;
        }
    }
    (t_f, t_s)
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()?;
    if out.status.success() {
        Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
    } else {
        None
    }
}

pub fn export_csv(logs: &[EpisodeLog], path: &Path) -> Result<()> {
    let io_err = |source| SnnError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    let mut buf = String::from("episode,steps,return,actor_hz,critic_hz\n");
    for l in logs {
        buf.push_str(&format!(
            "{},{},{:.2},{:.3},{:.3}\n",
            l.episode, l.steps, l.scaled_return, l.actor_hz, l.critic_hz
        ));
    }
    f.write_all(buf.as_bytes()).map_err(io_err)
}

pub fn export_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let io_err = |source| SnnError::Io {
        path: path.display().to_string(),
        source,
    };
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(path, json + "\n").map_err(io_err)
}

pub fn load_csv(path: &Path) -> Result<Vec<EpisodeLog>> {
    let io_err = |source| SnnError::Io {
        path: path.display().to_string(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let mut logs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(SnnError::Config(format!(
                "{}: malformed CSV line {}",
                path.display(),
                n + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| SnnError::Config(format!("{}: line {}: {e}", path.display(), n + 1)))
        };
        logs.push(EpisodeLog {
            episode: parse(fields[0])? as usize,
            steps: parse(fields[1])? as usize,
            scaled_return: parse(fields[2])?,
            actor_hz: parse(fields[3])?,
            critic_hz: parse(fields[4])?,
        });
    }
    Ok(logs)
}

/// Mean and (population) standard deviation helpers for aggregate reporting.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}
