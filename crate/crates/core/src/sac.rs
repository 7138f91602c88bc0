//! Soft actor-critic with twin critics, target networks, a tanh-squashed
//! Gaussian policy and a learned entropy coefficient.
//!
//! Each update, in order: normalize the batch rewards, adjust the entropy
//! coefficient, regress both critics on the soft Bellman target, step the
//! policy, and Polyak-average the target critics.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{
    mse, squashed_gaussian, squashed_gaussian_backward, standard_normal, Adam, Mlp, MlpGrads, SquashedSample,
};
use crate::error::{Error, Result};

/// Hyperparameters of the soft actor-critic, also used by the DDQN and DDPG
/// baselines where a field applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub gamma: f64,
    /// Polyak coefficient for the target critics.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_lr: f64,
    pub initial_entropy_coef: f64,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    /// Rewards in a batch are standardized then multiplied by this.
    pub reward_scale: f64,
    pub buffer_capacity: usize,
    /// Updates start once the buffer holds this many transitions; defaults to
    /// the batch size.
    pub buffer_threshold: Option<usize>,
    /// Environment steps between update rounds.
    pub update_every: usize,
    /// Target networks are soft-updated once this many gradient updates have
    /// run.
    pub iteration_threshold: u64,
    pub updates_per_round: usize,
    /// Output-layer init scale of the policy head.
    pub policy_out_scale: f64,
    /// Gaussian action noise of the deterministic-policy baseline.
    pub action_noise_std: f64,
    pub exploration: ExplorationSchedule,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            batch_size: 64,
            gamma: 0.99,
            tau: 0.01,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            entropy_lr: 3e-4,
            initial_entropy_coef: 0.1,
            target_entropy: None,
            reward_scale: 10.0,
            buffer_capacity: 1_000_000,
            buffer_threshold: None,
            update_every: 1,
            iteration_threshold: 1,
            updates_per_round: 1,
            policy_out_scale: 0.1,
            action_noise_std: 0.1,
            exploration: ExplorationSchedule::default(),
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("agent.hidden must list positive widths".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config("agent.buffer_capacity must be >= agent.batch_size > 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("agent.gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("agent.tau must lie in (0, 1], got {}", self.tau)));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("entropy_lr", self.entropy_lr),
            ("initial_entropy_coef", self.initial_entropy_coef),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("agent.{name} must be > 0")));
            }
        }
        if self.update_every == 0 {
            return Err(Error::Config("agent.update_every must be >= 1".into()));
        }
        self.exploration.validate()
    }

    pub fn buffer_threshold(&self) -> usize {
        self.buffer_threshold.unwrap_or(self.batch_size).max(self.batch_size)
    }
}

/// Uniform-random exploration: always for the first `warmup_steps`
/// environment steps, then with a probability decaying linearly from `start`
/// to `end` over the first `decay_fraction` of training episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationSchedule {
    pub warmup_steps: usize,
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            warmup_steps: 1000,
            start: 1.0,
            end: 0.02,
            decay_fraction: 0.8,
        }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        if !((0.0..=1.0).contains(&self.start) && (0.0..=1.0).contains(&self.end)) {
            return Err(Error::Config("exploration start/end must lie in [0, 1]".into()));
        }
        if !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0) {
            return Err(Error::Config("exploration.decay_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn value(&self, episode: usize, total_episodes: usize) -> f64 {
        let horizon = (self.decay_fraction * total_episodes as f64).max(1.0);
        let frac = (episode as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// A sampled minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub reward: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
}

/// Ring buffer of transitions; storage grows on demand up to `capacity`.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    act: Vec<f64>,
    reward: Vec<f64>,
    next_obs: Vec<f64>,
    done: Vec<f64>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        Self {
            capacity,
            obs_dim,
            act_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }

    pub fn push(&mut self, obs: &[f64], act: &[f64], reward: f64, next_obs: &[f64], done: bool) -> Result<()> {
        if obs.len() != self.obs_dim || next_obs.len() != self.obs_dim || act.len() != self.act_dim {
            return Err(Error::Usage(format!(
                "transition shape ({}, {}, {}) does not match buffer ({}, {})",
                obs.len(),
                act.len(),
                next_obs.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if self.capacity == 0 {
            return Ok(());
        }
        let d = if done { 1.0 } else { 0.0 };
        if self.len() < self.capacity {
            self.obs.extend_from_slice(obs);
            self.act.extend_from_slice(act);
            self.next_obs.extend_from_slice(next_obs);
            self.reward.push(reward);
            self.done.push(d);
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
            self.act[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(act);
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
            self.reward[i] = reward;
            self.done[i] = d;
        }
        self.head = (self.head + 1) % self.capacity;
        Ok(())
    }

    /// Draws `n` distinct transitions uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if n > self.len() {
            return Err(Error::Usage(format!("cannot sample {n} from a buffer of {}", self.len())));
        }
        let idx = rand::seq::index::sample(rng, self.len(), n).into_vec();
        let rows = |src: &[f64], dim: usize| {
            let mut out = Array2::zeros((n, dim));
            for (r, &i) in idx.iter().enumerate() {
                out.row_mut(r)
                    .as_slice_mut()
                    .expect("contiguous row")
                    .copy_from_slice(&src[i * dim..(i + 1) * dim]);
            }
            out
        };
        Ok(Batch {
            obs: rows(&self.obs, self.obs_dim),
            act: rows(&self.act, self.act_dim),
            next_obs: rows(&self.next_obs, self.obs_dim),
            reward: idx.iter().map(|&i| self.reward[i]).collect(),
            done: idx.iter().map(|&i| self.done[i]).collect(),
        })
    }
}

/// `scale * (r - mean) / (std + 1e-6)` with the population standard deviation.
pub fn normalize_rewards(r: &Array1<f64>, scale: f64) -> Array1<f64> {
    let n = r.len().max(1) as f64;
    let mean = r.sum() / n;
    let var = r.mapv(|x| (x - mean) * (x - mean)).sum() / n;
    r.mapv(|x| scale * (x - mean) / (var.sqrt() + 1e-6))
}

/// Soft Bellman target `r + gamma (1 - done) (min_q' - coef * log_pi')`.
pub fn soft_target(
    reward: &Array1<f64>,
    done: &Array1<f64>,
    next_min_q: &Array1<f64>,
    next_log_prob: &Array1<f64>,
    gamma: f64,
    entropy_coef: f64,
) -> Array1<f64> {
    let mut y = Array1::zeros(reward.len());
    for i in 0..reward.len() {
        y[i] = reward[i] + gamma * (1.0 - done[i]) * (next_min_q[i] - entropy_coef * next_log_prob[i]);
    }
    y
}

pub fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), *a, *b]
}

/// `mean((Q(s, a) - y)^2)` and its parameter gradient.
pub fn critic_loss(q: &Mlp, obs_act: &Array2<f64>, target: &Array1<f64>) -> (f64, MlpGrads) {
    let (pred, cache) = q.forward_cached(obs_act);
    let (loss, g) = mse(&pred, target);
    let (grads, _) = q.backward(&cache, &g);
    (loss, grads)
}

/// Reparameterized policy objective `mean(coef * log_pi(a|s) - min_i Q_i(s, a))`
/// with `a = tanh(mu + sigma * noise)`, and its gradient for the policy.
pub fn policy_loss(
    policy: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    obs: &Array2<f64>,
    noise: &Array2<f64>,
    entropy_coef: f64,
) -> (f64, MlpGrads, SquashedSample) {
    let (head, cache) = policy.forward_cached(obs);
    let sample = squashed_gaussian(&head, noise);
    let (loss, grads) = policy_loss_from_sample(policy, &cache, &sample, q1, q2, obs, entropy_coef);
    (loss, grads, sample)
}

fn policy_loss_from_sample(
    policy: &Mlp,
    cache: &crate::approximator::MlpCache,
    sample: &SquashedSample,
    q1: &Mlp,
    q2: &Mlp,
    obs: &Array2<f64>,
    entropy_coef: f64,
) -> (f64, MlpGrads) {
    let n = obs.nrows();
    let nf = n as f64;
    let sa = concat_cols(obs, &sample.action);
    let (v1, c1) = q1.forward_cached(&sa);
    let (v2, c2) = q2.forward_cached(&sa);
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for r in 0..n {
        let m = if v1[[r, 0]] <= v2[[r, 0]] {
            g1[[r, 0]] = -1.0 / nf;
            v1[[r, 0]]
        } else {
            g2[[r, 0]] = -1.0 / nf;
            v2[[r, 0]]
        };
        loss += entropy_coef * sample.log_prob[r] - m;
    }
    loss /= nf;
    let (_, gin1) = q1.backward(&c1, &g1);
    let (_, gin2) = q2.backward(&c2, &g2);
    let obs_dim = obs.ncols();
    let d_action = gin1.slice(s![.., obs_dim..]).to_owned() + gin2.slice(s![.., obs_dim..]);
    let c_lp = Array1::from_elem(n, entropy_coef / nf);
    let g_head = squashed_gaussian_backward(sample, &c_lp, &d_action);
    let (grads, _) = policy.backward(cache, &g_head);
    (loss, grads)
}

/// Entropy-coefficient loss `-log_coef * mean(log_pi + target_entropy)` and
/// its derivative in `log_coef`. Descending it raises the coefficient when
/// the policy's entropy `-log_pi` is below `target_entropy`.
pub fn entropy_loss(log_coef: f64, log_probs: &Array1<f64>, target_entropy: f64) -> (f64, f64) {
    let n = log_probs.len().max(1) as f64;
    let m = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / n;
    (-log_coef * m, -m)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub q_loss1: f64,
    pub q_loss2: f64,
    pub policy_loss: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacAgent {
    pub cfg: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    pub log_entropy_coef: f64,
    #[serde(with = "crate::rng")]
    rng: ChaCha8Rng,
    env_steps: u64,
    updates: u64,
    exploration: f64,
    #[serde(skip)]
    buffer: ReplayBuffer,
}

impl SacAgent {
    pub fn new(cfg: SacConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = |input: usize, out: usize| {
            let mut v = vec![input];
            v.extend(&cfg.hidden);
            v.push(out);
            v
        };
        let policy = Mlp::new(&widths(obs_dim, 2 * act_dim), cfg.policy_out_scale, &mut rng)?;
        let q1 = Mlp::new(&widths(obs_dim + act_dim, 1), 1.0, &mut rng)?;
        let q2 = Mlp::new(&widths(obs_dim + act_dim, 1), 1.0, &mut rng)?;
        Ok(Self {
            policy_opt: Adam::new(&policy, cfg.actor_lr),
            q1_opt: Adam::new(&q1, cfg.critic_lr),
            q2_opt: Adam::new(&q2, cfg.critic_lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            policy,
            q1,
            q2,
            log_entropy_coef: cfg.initial_entropy_coef.ln(),
            buffer: ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim),
            obs_dim,
            act_dim,
            rng,
            env_steps: 0,
            updates: 0,
            exploration: cfg.exploration.start,
            cfg,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn entropy_coef(&self) -> f64 {
        self.log_entropy_coef.exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.cfg.target_entropy.unwrap_or(-(self.act_dim as f64))
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Re-creates the (unserialized) replay buffer after loading.
    pub fn reset_buffer(&mut self) {
        self.buffer = ReplayBuffer::new(self.cfg.buffer_capacity, self.obs_dim, self.act_dim);
    }

    pub fn set_progress(&mut self, episode: usize, total_episodes: usize) {
        self.exploration = self.cfg.exploration.value(episode, total_episodes);
    }

    pub fn exploration(&self) -> f64 {
        self.exploration
    }

    /// Raw action in `(-1, 1)^A`. Training mode mixes in uniform actions per
    /// the exploration schedule and otherwise samples the policy; evaluation
    /// returns `tanh(mean)`.
    pub fn act(&mut self, obs: &[f64], explore: bool) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Usage(format!(
                "observation has {} features, policy expects {}",
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
        let head = self.policy.forward(&x);
        if explore {
            let noise = standard_normal(1, self.act_dim, &mut self.rng);
            Ok(squashed_gaussian(&head, &noise).action.row(0).to_vec())
        } else {
            Ok((0..self.act_dim).map(|d| head[[0, d]].tanh()).collect())
        }
    }

    pub fn remember(&mut self, obs: &[f64], act: &[f64], reward: f64, next_obs: &[f64], done: bool) -> Result<()> {
        self.buffer.push(obs, act, reward, next_obs, done)
    }

    /// Runs the configured update rounds if the buffer is warm. Call once per
    /// environment step.
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
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let reward = normalize_rewards(&batch.reward, self.cfg.reward_scale);
        let n = batch.obs.nrows();

        // entropy coefficient from a fresh policy sample; the policy step
        // below reuses it since the policy is unchanged in between
        let (head, pcache) = self.policy.forward_cached(&batch.obs);
        let noise = standard_normal(n, self.act_dim, &mut self.rng);
        let sample = squashed_gaussian(&head, &noise);
        let (_, d_log_coef) = entropy_loss(self.log_entropy_coef, &sample.log_prob, self.target_entropy());
        self.log_entropy_coef -= self.cfg.entropy_lr * d_log_coef;
        let coef = self.entropy_coef();

        let next_head = self.policy.forward(&batch.next_obs);
        let next_noise = standard_normal(n, self.act_dim, &mut self.rng);
        let next = squashed_gaussian(&next_head, &next_noise);
        let next_sa = concat_cols(&batch.next_obs, &next.action);
        let t1 = self.q1_target.forward(&next_sa);
        let t2 = self.q2_target.forward(&next_sa);
        let min_q: Array1<f64> = (0..n).map(|i| t1[[i, 0]].min(t2[[i, 0]])).collect();
        let y = soft_target(&reward, &batch.done, &min_q, &next.log_prob, self.cfg.gamma, coef);

        let sa = concat_cols(&batch.obs, &batch.act);
        let (l1, g1) = critic_loss(&self.q1, &sa, &y);
        let (l2, g2) = critic_loss(&self.q2, &sa, &y);
        self.q1_opt.step(&mut self.q1, &g1)?;
        self.q2_opt.step(&mut self.q2, &g2)?;

        let (lp, gp) = policy_loss_from_sample(&self.policy, &pcache, &sample, &self.q1, &self.q2, &batch.obs, coef);
        self.policy_opt.step(&mut self.policy, &gp)?;

        self.updates += 1;
        if self.updates >= self.cfg.iteration_threshold {
            self.q1_target.soft_update_from(&self.q1, self.cfg.tau);
            self.q2_target.soft_update_from(&self.q2, self.cfg.tau);
        }

        let stats = UpdateStats {
            q_loss1: l1,
            q_loss2: l2,
            policy_loss: lp,
            entropy_coef: coef,
        };
        if !(l1.is_finite() && l2.is_finite() && lp.is_finite() && coef.is_finite()) {
            return Err(Error::Numerical(format!("non-finite SAC update: {stats:?}")));
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_rewards_have_unit_std() {
        let r = Array1::from(vec![1.0, 2.0, 3.0, 4.0]);
        let n = normalize_rewards(&r, 10.0);
        let mean = n.sum() / 4.0;
        let var = n.mapv(|x| (x - mean).powi(2)).sum() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 10.0).abs() < 1e-4);
        let flat = normalize_rewards(&Array1::from(vec![5.0; 3]), 10.0);
        assert!(flat.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn target_masks_terminal_bootstrap() {
        let y = soft_target(
            &Array1::from(vec![1.0, 1.0]),
            &Array1::from(vec![0.0, 1.0]),
            &Array1::from(vec![2.0, 2.0]),
            &Array1::from(vec![-1.0, -1.0]),
            0.5,
            0.2,
        );
        assert!((y[0] - (1.0 + 0.5 * 2.2)).abs() < 1e-15);
        assert_eq!(y[1], 1.0);
    }

    #[test]
    fn entropy_gradient_sign() {
        // log_pi far above -H means too little entropy: coefficient must grow
        let (_, g) = entropy_loss(0.0, &Array1::from(vec![5.0]), -2.0);
        assert!(g < 0.0);
    }

    #[test]
    fn buffer_wraps_and_samples_distinct() {
        let mut b = ReplayBuffer::new(3, 1, 1);
        for i in 0..5 {
            let x = i as f64;
            b.push(&[x], &[x], x, &[x], false).unwrap();
        }
        assert_eq!(b.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(3, &mut rng).unwrap();
        let mut seen: Vec<f64> = batch.reward.to_vec();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, vec![2.0, 3.0, 4.0]);
        assert!(b.sample(4, &mut rng).is_err());
        assert!(b.push(&[0.0, 1.0], &[0.0], 0.0, &[0.0], false).is_err());
    }

    #[test]
    fn exploration_decays_linearly() {
        let s = ExplorationSchedule {
            warmup_steps: 0,
            start: 1.0,
            end: 0.0,
            decay_fraction: 0.5,
        };
        assert_eq!(s.value(0, 100), 1.0);
        assert_eq!(s.value(25, 100), 0.5);
        assert_eq!(s.value(80, 100), 0.0);
    }

    #[test]
    fn deterministic_action_in_range() {
        let mut agent = SacAgent::new(
            SacConfig {
                hidden: vec![8],
                ..SacConfig::default()
            },
            5,
            3,
            0,
        )
        .unwrap();
        let a = agent.act(&[0.1, -0.2, 0.3, 0.0, 1.0], false).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|x| x.abs() < 1.0));
        assert!(agent.act(&[0.0; 4], false).is_err());
    }

    #[test]
    fn update_runs_and_moves_targets_slowly() {
        let cfg = SacConfig {
            hidden: vec![8],
            batch_size: 4,
            ..SacConfig::default()
        };
        let mut agent = SacAgent::new(cfg, 2, 1, 3).unwrap();
        for i in 0..10 {
            let x = i as f64 / 10.0;
            agent.remember(&[x, -x], &[0.5 - x], x, &[x, x], i % 5 == 4).unwrap();
        }
        let before = agent.q1_target.clone();
        let stats = agent.update().unwrap();
        assert!(stats.q_loss1.is_finite() && stats.policy_loss.is_finite());
        // target moved by exactly tau of the gap to the updated critic
        let gap: f64 = before
            .flat_params()
            .iter()
            .zip(agent.q1.flat_params())
            .zip(agent.q1_target.flat_params())
            .map(|((b, q), t)| (t - (0.01 * q + 0.99 * b)).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-15);
    }
}
