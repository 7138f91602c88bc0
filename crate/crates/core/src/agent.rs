//! A single type wrapping every agent so the trainer, tester and checkpoint
//! code can treat them uniformly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{DdpgAgent, DdqnAgent, RandomAgent};
use crate::env::{map_action, map_action_bits, EnvConfig, LinkAssignment, Observation, PayloadMode};
use crate::error::{Error, Result};
use crate::sac::{SacAgent, SacConfig, UpdateStats};
use crate::semantic::SemanticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    /// Soft actor-critic choosing band, power and symbols per word.
    Sss,
    /// Soft actor-critic choosing band and power, scored in bits.
    SacBits,
    /// Per-link double DQN over (band, power), scored in bits.
    Ddqn,
    /// DDPG choosing band, power and symbols per word.
    DdpgSemantic,
    /// Uniform (band, power), scored in bits.
    Random,
    /// Uniform (band, power, symbols per word), scored semantically.
    RandomSemantic,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Sss,
        AgentKind::SacBits,
        AgentKind::Ddqn,
        AgentKind::DdpgSemantic,
        AgentKind::Random,
        AgentKind::RandomSemantic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Sss => "sss",
            AgentKind::SacBits => "sac-bits",
            AgentKind::Ddqn => "ddqn",
            AgentKind::DdpgSemantic => "ddpg-semantic",
            AgentKind::Random => "random",
            AgentKind::RandomSemantic => "random-semantic",
        }
    }

    pub fn payload_mode(self) -> PayloadMode {
        match self {
            AgentKind::Sss | AgentKind::DdpgSemantic | AgentKind::RandomSemantic => PayloadMode::Semantic,
            AgentKind::SacBits | AgentKind::Ddqn | AgentKind::Random => PayloadMode::Bits,
        }
    }

    pub fn is_learned(self) -> bool {
        !matches!(self, AgentKind::Random | AgentKind::RandomSemantic)
    }

    /// Raw action width for continuous agents: 3 per link with symbols per
    /// word, else 2.
    pub fn continuous_action_dim(self, q: usize) -> usize {
        match self.payload_mode() {
            PayloadMode::Semantic => 3 * q,
            PayloadMode::Bits => 2 * q,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = AgentKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::Config(format!("unknown agent kind `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "agent_kind", rename_all = "kebab-case")]
pub enum Agent {
    Sss(SacAgent),
    SacBits(SacAgent),
    Ddqn(DdqnAgent),
    DdpgSemantic(DdpgAgent),
    Random(RandomAgent),
    RandomSemantic(RandomAgent),
}

impl Agent {
    pub fn new(kind: AgentKind, cfg: &SacConfig, env: &EnvConfig, seed: u64) -> Result<Self> {
        let obs_dim = env.obs_dim();
        let a_dim = kind.continuous_action_dim(env.q);
        Ok(match kind {
            AgentKind::Sss => Agent::Sss(SacAgent::new(cfg.clone(), obs_dim, a_dim, seed)?),
            AgentKind::SacBits => Agent::SacBits(SacAgent::new(cfg.clone(), obs_dim, a_dim, seed)?),
            AgentKind::Ddqn => Agent::Ddqn(DdqnAgent::new(
                cfg.clone(),
                env.q,
                env.link_obs_dim() + env.shared_obs_dim(),
                env.w * env.power_levels_dbm.len(),
                seed,
            )?),
            AgentKind::DdpgSemantic => Agent::DdpgSemantic(DdpgAgent::new(cfg.clone(), obs_dim, a_dim, seed)?),
            AgentKind::Random => Agent::Random(RandomAgent::new(a_dim, seed)),
            AgentKind::RandomSemantic => Agent::RandomSemantic(RandomAgent::new(a_dim, seed)),
        })
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Sss(_) => AgentKind::Sss,
            Agent::SacBits(_) => AgentKind::SacBits,
            Agent::Ddqn(_) => AgentKind::Ddqn,
            Agent::DdpgSemantic(_) => AgentKind::DdpgSemantic,
            Agent::Random(_) => AgentKind::Random,
            Agent::RandomSemantic(_) => AgentKind::RandomSemantic,
        }
    }

    /// Input width of the agent's network(s), or of the flat observation.
    pub fn obs_dim(&self) -> usize {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.obs_dim(),
            Agent::Ddqn(a) => a.input_dim(),
            Agent::DdpgSemantic(a) => a.obs_dim(),
            Agent::Random(_) | Agent::RandomSemantic(_) => 0,
        }
    }

    /// Width of the stored action: continuous dimensions, or one index per
    /// link for DDQN.
    pub fn action_dim(&self) -> usize {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.act_dim(),
            Agent::Ddqn(a) => a.num_actions(),
            Agent::DdpgSemantic(a) => a.act_dim(),
            Agent::Random(a) | Agent::RandomSemantic(a) => a.act_dim(),
        }
    }

    pub fn hidden(&self) -> Vec<usize> {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.policy.hidden_widths(),
            Agent::Ddqn(a) => a.q.hidden_widths(),
            Agent::DdpgSemantic(a) => a.actor.hidden_widths(),
            Agent::Random(_) | Agent::RandomSemantic(_) => Vec::new(),
        }
    }

    pub fn set_progress(&mut self, episode: usize, total_episodes: usize) {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.set_progress(episode, total_episodes),
            Agent::Ddqn(a) => a.set_progress(episode, total_episodes),
            Agent::DdpgSemantic(a) => a.set_progress(episode, total_episodes),
            Agent::Random(_) | Agent::RandomSemantic(_) => {}
        }
    }

    /// Current exploration parameter (uniform-mixing probability or DDQN
    /// epsilon); 1 for random agents.
    pub fn exploration(&self) -> f64 {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.exploration(),
            Agent::Ddqn(a) => a.exploration(),
            Agent::DdpgSemantic(a) => a.exploration(),
            Agent::Random(_) | Agent::RandomSemantic(_) => 1.0,
        }
    }

    /// Chooses the raw action for `obs`. DDQN returns link action indices as
    /// floats.
    pub fn act(&mut self, obs: &Observation, explore: bool) -> Result<Vec<f64>> {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.act(&obs.flatten(), explore),
            Agent::Ddqn(a) => {
                let feats: Vec<Vec<f64>> = (0..obs.per_link.len()).map(|k| obs.link_features(k)).collect();
                Ok(a.act(&feats, explore)?.into_iter().map(|i| i as f64).collect())
            }
            Agent::DdpgSemantic(a) => a.act(&obs.flatten(), explore),
            Agent::Random(a) | Agent::RandomSemantic(a) => Ok(a.act()),
        }
    }

    pub fn decode(&self, raw: &[f64], env: &EnvConfig, sem: &SemanticConfig) -> Result<Vec<LinkAssignment>> {
        match self {
            Agent::Ddqn(_) => {
                let levels = env.power_levels_dbm.len();
                Ok(raw
                    .iter()
                    .map(|&i| {
                        let i = i as usize;
                        LinkAssignment {
                            band: i / levels,
                            power_index: i % levels,
                            u: env.u_ref,
                        }
                    })
                    .collect())
            }
            _ => match self.kind().payload_mode() {
                PayloadMode::Semantic => map_action(raw, env, sem),
                PayloadMode::Bits => map_action_bits(raw, env),
            },
        }
    }

    pub fn remember(
        &mut self,
        obs: &Observation,
        raw: &[f64],
        reward: f64,
        next_obs: &Observation,
        done: bool,
    ) -> Result<()> {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.remember(&obs.flatten(), raw, reward, &next_obs.flatten(), done),
            Agent::Ddqn(a) => {
                let f: Vec<Vec<f64>> = (0..obs.per_link.len()).map(|k| obs.link_features(k)).collect();
                let nf: Vec<Vec<f64>> = (0..next_obs.per_link.len()).map(|k| next_obs.link_features(k)).collect();
                let idx: Vec<usize> = raw.iter().map(|&i| i as usize).collect();
                a.remember(&f, &idx, reward, &nf, done)
            }
            Agent::DdpgSemantic(a) => a.remember(&obs.flatten(), raw, reward, &next_obs.flatten(), done),
            Agent::Random(_) | Agent::RandomSemantic(_) => Ok(()),
        }
    }

    pub fn maybe_update(&mut self, step_counter: u64) -> Result<Option<UpdateStats>> {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.maybe_update(step_counter),
            Agent::Ddqn(a) => a.maybe_update(step_counter),
            Agent::DdpgSemantic(a) => a.maybe_update(step_counter),
            Agent::Random(_) | Agent::RandomSemantic(_) => Ok(None),
        }
    }

    pub fn buffer_len(&self) -> usize {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.buffer().len(),
            Agent::Ddqn(a) => a.buffer_len(),
            Agent::DdpgSemantic(a) => a.buffer_len(),
            Agent::Random(_) | Agent::RandomSemantic(_) => 0,
        }
    }

    /// Re-creates the replay buffer, which checkpoints do not carry.
    pub fn reset_buffer(&mut self) {
        match self {
            Agent::Sss(a) | Agent::SacBits(a) => a.reset_buffer(),
            Agent::Ddqn(a) => a.reset_buffer(),
            Agent::DdpgSemantic(a) => a.reset_buffer(),
            Agent::Random(_) | Agent::RandomSemantic(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.as_str().parse::<AgentKind>().unwrap(), k);
        }
        assert!(matches!("sac".parse::<AgentKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn action_widths() {
        let env = EnvConfig::default();
        let cfg = SacConfig {
            hidden: vec![4],
            ..SacConfig::default()
        };
        assert_eq!(Agent::new(AgentKind::Sss, &cfg, &env, 0).unwrap().action_dim(), 12);
        assert_eq!(Agent::new(AgentKind::SacBits, &cfg, &env, 0).unwrap().action_dim(), 8);
        assert_eq!(Agent::new(AgentKind::Ddqn, &cfg, &env, 0).unwrap().action_dim(), 16);
        assert_eq!(Agent::new(AgentKind::Random, &cfg, &env, 0).unwrap().action_dim(), 8);
    }

    #[test]
    fn ddqn_index_decodes_to_band_and_power() {
        let env = EnvConfig::default();
        let cfg = SacConfig {
            hidden: vec![4],
            ..SacConfig::default()
        };
        let a = Agent::new(AgentKind::Ddqn, &cfg, &env, 0).unwrap();
        let d = a.decode(&[0.0, 7.0, 15.0, 4.0], &env, &SemanticConfig::default()).unwrap();
        assert_eq!((d[1].band, d[1].power_index), (1, 3));
        assert_eq!((d[2].band, d[2].power_index), (3, 3));
        assert_eq!((d[3].band, d[3].power_index), (1, 0));
    }

    #[test]
    fn agent_serializes_with_kind_tag() {
        let env = EnvConfig::default();
        let a = Agent::new(AgentKind::Random, &SacConfig::default(), &env, 3).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"agent_kind\":\"random\""));
        let back: Agent = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kind(), AgentKind::Random);
    }
}
