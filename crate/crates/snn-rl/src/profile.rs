//! Declarative hyperparameter profiles. The shipped profiles are data files
//! embedded at compile time; arbitrary profiles load from a TOML path.

use crate::actor::ActorConfig;
use crate::cartpole::EpisodeProtocol;
use crate::critic::CriticConfig;
use crate::error::{Result, SnnError};
use crate::lif::LifParams;
use crate::optim::OptimConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

const CARTPOLE_DEFAULT: &str = include_str!("../profiles/cartpole-default.toml");
const CARTPOLE_BIO: &str = include_str!("../profiles/cartpole-bio.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Upper ends of the uniform [0, w] weight initializations, per network.
    pub w_init_critic: f64,
    pub w_init_actor: f64,
    pub neurons_per_feature: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub env: String,
    #[serde(default)]
    pub neuron: LifParams,
    pub critic: CriticConfig,
    pub actor: ActorConfig,
    pub protocol: EpisodeProtocol,
    pub network: NetworkConfig,
    #[serde(default)]
    pub optim: OptimConfig,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if self.critic.n_e < 1 {
            return Err(SnnError::Config("critic n_e must be >= 1".into()));
        }
        if self.actor.k < 2 || self.actor.resample_every < 1 {
            return Err(SnnError::Config(
                "actor needs k >= 2 and resample_every >= 1".into(),
            ));
        }
        if self.actor.c_e < 0.0 || self.actor.c_w < 0.0 || self.actor.c_t < 0.0 {
            return Err(SnnError::Config(
                "regularizer strengths must be >= 0".into(),
            ));
        }
        if self.critic.tau_gamma != self.protocol.tau_gamma {
            return Err(SnnError::Config(format!(
                "critic tau_gamma ({}) disagrees with protocol tau_gamma ({})",
                self.critic.tau_gamma, self.protocol.tau_gamma
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Profile =
            toml::from_str(text).map_err(|e| SnnError::Config(format!("profile parse: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// The immutable shipped profiles.
pub fn builtin(name: &str) -> Result<Profile> {
    match name {
        "cartpole-default" => Profile::from_toml(CARTPOLE_DEFAULT),
        "cartpole-bio" => Profile::from_toml(CARTPOLE_BIO),
        _ => Err(SnnError::Config(format!("unknown builtin profile: {name}"))),
    }
}

/// Resolves a profile by builtin name first, then as a file path.
pub fn load(name_or_path: &str) -> Result<Profile> {
    if let Ok(p) = builtin(name_or_path) {
        return Ok(p);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|source| SnnError::Io {
        path: name_or_path.to_string(),
        source,
    })?;
    Profile::from_toml(&text)
}
