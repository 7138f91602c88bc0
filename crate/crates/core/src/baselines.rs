//! Comparison agents: uniform random, per-link double DQN, and DDPG.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{mse, standard_normal, Adam, Mlp, MlpGrads};
use crate::error::{Error, Result};
use crate::sac::{concat_cols, normalize_rewards, ReplayBuffer, SacConfig, UpdateStats};

/// Uniform raw actions in `(-1, 1)^A`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomAgent {
    act_dim: usize,
    #[serde(with = "crate::rng")]
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(act_dim: usize, seed: u64) -> Self {
        Self {
            act_dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn act(&mut self) -> Vec<f64> {
        (0..self.act_dim).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }
}

/// TD loss `mean((Q(s)[a] - y)^2)` on the taken actions, with its
/// parameter gradient.
pub fn ddqn_loss(q: &Mlp, obs: &Array2<f64>, actions: &[usize], target: &Array1<f64>) -> (f64, MlpGrads) {
    let (out, cache) = q.forward_cached(obs);
    let n = obs.nrows();
    let taken: Array2<f64> = Array2::from_shape_fn((n, 1), |(r, _)| out[[r, actions[r]]]);
    let (loss, g) = mse(&taken, target);
    let mut g_out = Array2::zeros(out.raw_dim());
    for r in 0..n {
        g_out[[r, actions[r]]] = g[[r, 0]];
    }
    let (grads, _) = q.backward(&cache, &g_out);
    (loss, grads)
}

/// Double-DQN target: the online net picks the next action, the target net
/// values it.
pub fn ddqn_target(
    q: &Mlp,
    q_target: &Mlp,
    reward: &Array1<f64>,
    done: &Array1<f64>,
    next_obs: &Array2<f64>,
    gamma: f64,
) -> Array1<f64> {
    let online = q.forward(next_obs);
    let target = q_target.forward(next_obs);
    (0..reward.len())
        .map(|r| {
            let best = argmax(online.row(r).iter().copied());
            reward[r] + gamma * (1.0 - done[r]) * target[[r, best]]
        })
        .collect()
}

fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Double DQN over one link's features with a network shared by all links.
/// Each link picks one of `W x L` (band, power level) pairs; a link's input
/// is its own features, the shared features and a one-hot link index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdqnAgent {
    pub cfg: SacConfig,
    num_links: usize,
    input_dim: usize,
    num_actions: usize,
    pub q: Mlp,
    pub q_target: Mlp,
    opt: Adam,
    #[serde(with = "crate::rng")]
    rng: ChaCha8Rng,
    epsilon: f64,
    env_steps: u64,
    #[serde(skip)]
    buffer: ReplayBuffer,
}

impl DdqnAgent {
    /// `link_input_dim` excludes the one-hot link index.
    pub fn new(cfg: SacConfig, num_links: usize, link_input_dim: usize, num_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = link_input_dim + num_links;
        let mut widths = vec![input_dim];
        widths.extend(&cfg.hidden);
        widths.push(num_actions);
        let q = Mlp::new(&widths, 1.0, &mut rng)?;
        Ok(Self {
            opt: Adam::new(&q, cfg.critic_lr),
            q_target: q.clone(),
            q,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, input_dim, 1),
            num_links,
            input_dim,
            num_actions,
            rng,
            epsilon: cfg.exploration.start,
            env_steps: 0,
            cfg,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn reset_buffer(&mut self) {
        self.buffer = ReplayBuffer::new(self.cfg.buffer_capacity, self.input_dim, 1);
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn set_progress(&mut self, episode: usize, total_episodes: usize) {
        self.epsilon = self.cfg.exploration.value(episode, total_episodes);
    }

    pub fn exploration(&self) -> f64 {
        self.epsilon
    }

    fn link_input(&self, features: &[f64], link: usize) -> Vec<f64> {
        let mut x = features.to_vec();
        x.extend((0..self.num_links).map(|k| if k == link { 1.0 } else { 0.0 }));
        x
    }

    /// One action index per link; `features[k]` is link `k`'s observation
    /// (own block followed by the shared block).
    pub fn act(&mut self, features: &[Vec<f64>], explore: bool) -> Result<Vec<usize>> {
        if features.len() != self.num_links {
            return Err(Error::Usage(format!("expected {} links, got {}", self.num_links, features.len())));
        }
        if explore {
            self.env_steps += 1;
        }
        let warm = explore && self.env_steps <= self.cfg.exploration.warmup_steps as u64;
        let mut x = Array2::zeros((self.num_links, self.input_dim));
        for (k, f) in features.iter().enumerate() {
            let row = self.link_input(f, k);
            if row.len() != self.input_dim {
                return Err(Error::Usage(format!(
                    "link features have {} values, network expects {}",
                    row.len(),
                    self.input_dim
                )));
            }
            x.row_mut(k).assign(&Array1::from(row));
        }
        let qv = self.q.forward(&x);
        Ok((0..self.num_links)
            .map(|k| {
                if explore && (warm || self.rng.random::<f64>() < self.epsilon) {
                    self.rng.random_range(0..self.num_actions)
                } else {
                    argmax(qv.row(k).iter().copied())
                }
            })
            .collect())
    }

    /// Stores one transition per link, all sharing the global reward.
    pub fn remember(
        &mut self,
        features: &[Vec<f64>],
        actions: &[usize],
        reward: f64,
        next_features: &[Vec<f64>],
        done: bool,
    ) -> Result<()> {
        for k in 0..self.num_links {
            let x = self.link_input(&features[k], k);
            let nx = self.link_input(&next_features[k], k);
            self.buffer.push(&x, &[actions[k] as f64], reward, &nx, done)?;
        }
        Ok(())
    }

    pub fn maybe_update(&mut self, step_counter: u64) -> Result<Option<UpdateStats>> {
        if self.buffer.len() < self.cfg.buffer_threshold() || !step_counter.is_multiple_of(self.cfg.update_every as u64) {
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.cfg.updates_per_round {
            last = Some(self.update()?);
        }
        Ok(last)
    }

    pub fn update(&mut self) -> Result<UpdateStats> {
        let b = self.buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let reward = normalize_rewards(&b.reward, self.cfg.reward_scale);
        let y = ddqn_target(&self.q, &self.q_target, &reward, &b.done, &b.next_obs, self.cfg.gamma);
        let actions: Vec<usize> = b.act.column(0).iter().map(|&a| a as usize).collect();
        let (loss, g) = ddqn_loss(&self.q, &b.obs, &actions, &y);
        if !loss.is_finite() {
            return Err(Error::Numerical("non-finite DDQN loss".into()));
        }
        self.opt.step(&mut self.q, &g)?;
        self.q_target.soft_update_from(&self.q, self.cfg.tau);
        Ok(UpdateStats {
            q_loss1: loss,
            q_loss2: f64::NAN,
            policy_loss: f64::NAN,
            entropy_coef: self.epsilon,
        })
    }
}

/// Deterministic actor output `tanh(net(s))`.
pub fn ddpg_actor_forward(actor: &Mlp, obs: &Array2<f64>) -> Array2<f64> {
    actor.forward(obs).mapv(f64::tanh)
}

/// Actor loss `-mean(Q(s, tanh(actor(s))))` and its gradient for the actor.
pub fn ddpg_actor_loss(actor: &Mlp, critic: &Mlp, obs: &Array2<f64>) -> (f64, MlpGrads) {
    let n = obs.nrows();
    let (pre, acache) = actor.forward_cached(obs);
    let act = pre.mapv(f64::tanh);
    let sa = concat_cols(obs, &act);
    let (q, ccache) = critic.forward_cached(&sa);
    let loss = -q.sum() / n as f64;
    let g_q = Array2::from_elem((n, 1), -1.0 / n as f64);
    let (_, g_in) = critic.backward(&ccache, &g_q);
    let d_act = g_in.slice(s![.., obs.ncols()..]).to_owned();
    let g_pre = d_act * act.mapv(|a| 1.0 - a * a);
    let (grads, _) = actor.backward(&acache, &g_pre);
    (loss, grads)
}

/// Critic loss `mean((Q(s, a) - y)^2)` and its gradient.
pub fn ddpg_critic_loss(critic: &Mlp, obs_act: &Array2<f64>, target: &Array1<f64>) -> (f64, MlpGrads) {
    crate::sac::critic_loss(critic, obs_act, target)
}

/// DDPG with Gaussian exploration noise on a tanh-bounded actor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdpgAgent {
    pub cfg: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    #[serde(with = "crate::rng")]
    rng: ChaCha8Rng,
    exploration: f64,
    env_steps: u64,
    #[serde(skip)]
    buffer: ReplayBuffer,
}

/// Bound that keeps stored actions strictly inside `(-1, 1)`.
const ACTION_LIMIT: f64 = 1.0 - 1e-6;

impl DdpgAgent {
    pub fn new(cfg: SacConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = |input: usize, out: usize| {
            let mut v = vec![input];
            v.extend(&cfg.hidden);
            v.push(out);
            v
        };
        let actor = Mlp::new(&widths(obs_dim, act_dim), cfg.policy_out_scale, &mut rng)?;
        let critic = Mlp::new(&widths(obs_dim + act_dim, 1), 1.0, &mut rng)?;
        Ok(Self {
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim),
            obs_dim,
            act_dim,
            rng,
            exploration: cfg.exploration.start,
            env_steps: 0,
            cfg,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn reset_buffer(&mut self) {
        self.buffer = ReplayBuffer::new(self.cfg.buffer_capacity, self.obs_dim, self.act_dim);
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn set_progress(&mut self, episode: usize, total_episodes: usize) {
        self.exploration = self.cfg.exploration.value(episode, total_episodes);
    }

    pub fn exploration(&self) -> f64 {
        self.exploration
    }

    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Usage(format!(
                "observation has {} features, actor expects {}",
                obs.len(),
                self.obs_dim
            )));
        }
        if explore {
            self.env_steps += 1;
            let warm = self.env_steps <= self.cfg.exploration.warmup_steps as u64;
            if warm || self.rng.random::<f64>() < self.exploration {
                return Ok((0..self.act_dim).map(|_| self.rng.random_range(-1.0..1.0)).collect());
            }
        }
        let x = Array2::from_shape_vec((1, self.obs_dim), obs.to_vec()).expect("shape checked");
        let mut a = ddpg_actor_forward(&self.actor, &x).row(0).to_vec();
        if explore {
            let noise = standard_normal(1, self.act_dim, &mut self.rng);
            for (v, e) in a.iter_mut().zip(noise.iter()) {
                *v = (*v + self.cfg.action_noise_std * e).clamp(-ACTION_LIMIT, ACTION_LIMIT);
            }
        }
        Ok(a)
    }

    pub fn remember(&mut self, obs: &[f64], act: &[f64], reward: f64, next_obs: &[f64], done: bool) -> Result<()> {
        self.buffer.push(obs, act, reward, next_obs, done)
    }

    pub fn maybe_update(&mut self, step_counter: u64) -> Result<Option<UpdateStats>> {
        if self.buffer.len() < self.cfg.buffer_threshold() || !step_counter.is_multiple_of(self.cfg.update_every as u64) {
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.cfg.updates_per_round {
            last = Some(self.update()?);
        }
        Ok(last)
    }

    pub fn update(&mut self) -> Result<UpdateStats> {
        let b = self.buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let reward = normalize_rewards(&b.reward, self.cfg.reward_scale);
        let next_act = ddpg_actor_forward(&self.actor_target, &b.next_obs);
        let next_q = self.critic_target.forward(&concat_cols(&b.next_obs, &next_act));
        let y: Array1<f64> = (0..reward.len())
            .map(|r| reward[r] + self.cfg.gamma * (1.0 - b.done[r]) * next_q[[r, 0]])
            .collect();
        let (lc, gc) = ddpg_critic_loss(&self.critic, &concat_cols(&b.obs, &b.act), &y);
        self.critic_opt.step(&mut self.critic, &gc)?;
        let (la, ga) = ddpg_actor_loss(&self.actor, &self.critic, &b.obs);
        self.actor_opt.step(&mut self.actor, &ga)?;
        self.actor_target.soft_update_from(&self.actor, self.cfg.tau);
        self.critic_target.soft_update_from(&self.critic, self.cfg.tau);
        if !(lc.is_finite() && la.is_finite()) {
            return Err(Error::Numerical("non-finite DDPG loss".into()));
        }
        Ok(UpdateStats {
            q_loss1: lc,
            q_loss2: f64::NAN,
            policy_loss: la,
            entropy_coef: f64::NAN,
        })
    }
}
