//! Run configuration, training and testing loops, checkpoints, parameter
//! sweeps and CSV/JSON outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentKind};
use crate::channel::ChannelConfig;
use crate::env::{self, EnvConfig, EnvSnapshot, Environment, PayloadMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::sac::SacConfig;
use crate::semantic::{SemanticConfig, SimilarityModel, SurrogateParams};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Offset between the training and testing environment seeds.
pub const TEST_SEED_OFFSET: u64 = 0x7e57;

pub const TRAIN_LOG_HEADER: [&str; 9] = [
    "episode",
    "mean_reward",
    "r1_mean",
    "r2_mean",
    "q_loss1",
    "q_loss2",
    "policy_loss",
    "epsilon",
    "buffer_size",
];

pub const SWEEP_HEADER: [&str; 7] = ["parameter", "value", "agent_kind", "seed", "mean_hsse", "mean_srs", "ci"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    /// CSV table; when absent the surrogate below is tabulated.
    pub table_path: Option<PathBuf>,
    pub surrogate: SurrogateParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SweepConfig {
    pub parameter: Option<String>,
    pub values: Vec<f64>,
    /// Agents evaluated at each point; defaults to `agent_kind`.
    pub agents: Vec<AgentKind>,
    /// Retrain learned agents at every point instead of evaluating one policy.
    pub retrain: bool,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub agent_kind: AgentKind,
    pub episode_max: usize,
    pub episode_test: usize,
    /// Write an intermediate checkpoint every this many episodes (0: final
    /// only).
    pub checkpoint_every: usize,
    pub output_dir: PathBuf,
    /// Write per-step rows during training and testing.
    pub step_log: bool,
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub semantic: SemanticConfig,
    pub similarity: SimilarityConfig,
    pub env: EnvConfig,
    pub agent: SacConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            agent_kind: AgentKind::Sss,
            episode_max: 1000,
            episode_test: 100,
            checkpoint_every: 0,
            output_dir: PathBuf::from("runs/default"),
            step_log: false,
            scenario: ScenarioConfig::default(),
            channel: ChannelConfig::default(),
            semantic: SemanticConfig::default(),
            similarity: SimilarityConfig::default(),
            env: EnvConfig::default(),
            agent: SacConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

impl RunConfig {
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Parse {
                source_name: source_name.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Checks every section, including that the similarity table loads and
    /// passes its bound and monotonicity scans.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate(self.env.q, self.env.w)?;
        self.channel.validate()?;
        self.semantic.validate()?;
        self.env.validate(&self.semantic)?;
        if self.agent_kind.is_learned() {
            self.agent.validate()?;
        }
        self.similarity_model()?;
        if let Some(p) = &self.sweep.parameter {
            SweepParameter::from_str(p)?;
        }
        Ok(())
    }

    pub fn similarity_model(&self) -> Result<SimilarityModel> {
        let model = match &self.similarity.table_path {
            Some(p) => SimilarityModel::from_csv_file(p)?,
            None => SimilarityModel::from_surrogate(&self.similarity.surrogate)?,
        };
        let (lo, hi) = model.u_range();
        if self.semantic.u_min < lo || self.semantic.u_max > hi {
            return Err(Error::Config(format!(
                "similarity table covers u in [{lo}, {hi}] but semantic.u_min/u_max span [{}, {}]",
                self.semantic.u_min, self.semantic.u_max
            )));
        }
        Ok(model)
    }

    pub fn agent_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn test_seed(&self) -> u64 {
        self.seed.wrapping_add(TEST_SEED_OFFSET)
    }
}

pub fn build_env(cfg: &RunConfig, sim: Arc<SimilarityModel>, mode: PayloadMode, seed: u64) -> Result<Environment> {
    Environment::new(
        cfg.scenario.clone(),
        cfg.channel,
        cfg.semantic,
        cfg.env.clone(),
        sim,
        mode,
        seed,
    )
}

/// Training metrics of one episode. Loss and coefficient fields are `None`
/// when the agent has no such quantity or did not update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub mean_reward: f64,
    pub r1_mean: f64,
    pub r2_mean: f64,
    pub q_loss1: Option<f64>,
    pub q_loss2: Option<f64>,
    pub policy_loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub buffer_size: usize,
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EpisodeLog {
    fn record(&self) -> [String; 9] {
        [
            self.episode.to_string(),
            self.mean_reward.to_string(),
            self.r1_mean.to_string(),
            self.r2_mean.to_string(),
            opt_field(self.q_loss1),
            opt_field(self.q_loss2),
            opt_field(self.policy_loss),
            opt_field(self.epsilon),
            self.buffer_size.to_string(),
        ]
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, x: f64) {
        if x.is_finite() {
            self.sum += x;
            self.n += 1;
        }
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Everything a training run carries between episodes.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub agent: Agent,
    pub env: Environment,
    /// Next episode to run.
    pub episode: usize,
    pub total_steps: u64,
}

impl TrainState {
    pub fn new(cfg: &RunConfig, sim: Arc<SimilarityModel>) -> Result<Self> {
        let env = build_env(cfg, sim, cfg.agent_kind.payload_mode(), cfg.seed)?;
        let agent = Agent::new(cfg.agent_kind, &cfg.agent, &cfg.env, cfg.agent_seed())?;
        Ok(Self {
            agent,
            env,
            episode: 0,
            total_steps: 0,
        })
    }

    /// Runs one training episode; optional per-step rows go to `steps`.
    pub fn run_episode<W: Write>(
        &mut self,
        total_episodes: usize,
        mut steps: Option<&mut csv::Writer<W>>,
    ) -> Result<EpisodeLog> {
        let e = self.episode;
        self.agent.set_progress(e, total_episodes);
        self.env.set_exploration(self.agent.exploration());
        let mut obs = self.env.reset(e)?;
        let (mut reward, mut r1, mut r2) = (Mean::default(), Mean::default(), Mean::default());
        let (mut l1, mut l2, mut lp, mut coef) = (Mean::default(), Mean::default(), Mean::default(), Mean::default());
        let env_cfg = self.env.config().clone();
        let sem = *self.env.semantic_config();
        for t in 0..env_cfg.steps_per_episode {
            let ctx = |err: Error| match err {
                Error::Numerical(m) => Error::Numerical(format!("episode {e} step {t}: {m}")),
                other => other,
            };
            let raw = self.agent.act(&obs, true)?;
            let assignment = self.agent.decode(&raw, &env_cfg, &sem)?;
            let res = self.env.step(&assignment).map_err(ctx)?;
            if let Some(w) = steps.as_deref_mut() {
                env::write_step_rows(w, e, t, &env_cfg, &res)?;
            }
            self.agent
                .remember(&obs, &raw, res.reward, &res.observation, res.done)?;
            self.total_steps += 1;
            if let Some(s) = self.agent.maybe_update(self.total_steps).map_err(ctx)? {
                l1.add(s.q_loss1);
                l2.add(s.q_loss2);
                lp.add(s.policy_loss);
                coef.add(s.entropy_coef);
            }
            reward.add(res.reward);
            r1.add(res.metrics.r1);
            r2.add(res.metrics.r2);
            obs = res.observation;
        }
        self.episode += 1;
        let epsilon = match self.agent.kind() {
            AgentKind::Sss | AgentKind::SacBits => coef.get(),
            AgentKind::Ddqn => Some(self.agent.exploration()),
            _ => None,
        };
        Ok(EpisodeLog {
            episode: e,
            mean_reward: reward.get().unwrap_or(0.0),
            r1_mean: r1.get().unwrap_or(0.0),
            r2_mean: r2.get().unwrap_or(0.0),
            q_loss1: l1.get(),
            q_loss2: l2.get(),
            policy_loss: lp.get(),
            epsilon,
            buffer_size: self.agent.buffer_len(),
        })
    }

    pub fn checkpoint(&self, cfg: &RunConfig) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            agent_kind: self.agent.kind(),
            episode: self.episode,
            total_steps: self.total_steps,
            dims: CheckpointDims::of(&self.agent, &cfg.env),
            agent: self.agent.clone(),
            env: self.env.snapshot(),
        }
    }

    /// Restores agent, environment and counters from a checkpoint. The replay
    /// buffer starts empty.
    pub fn restore(&mut self, ckpt: Checkpoint) -> Result<()> {
        self.env.restore(ckpt.env)?;
        self.agent = ckpt.agent;
        self.agent.reset_buffer();
        self.episode = ckpt.episode;
        self.total_steps = ckpt.total_steps;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDims {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub q: usize,
    pub w: usize,
    pub hidden: Vec<usize>,
}

impl CheckpointDims {
    pub fn of(agent: &Agent, env: &EnvConfig) -> Self {
        Self {
            obs_dim: agent.obs_dim(),
            action_dim: agent.action_dim(),
            q: env.q,
            w: env.w,
            hidden: agent.hidden(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub agent_kind: AgentKind,
    /// Next episode to run.
    pub episode: usize,
    pub total_steps: u64,
    pub dims: CheckpointDims,
    pub agent: Agent,
    pub env: EnvSnapshot,
}

fn mismatch(field: &str, found: impl std::fmt::Debug, expected: impl std::fmt::Debug) -> Error {
    Error::CheckpointMismatch {
        field: field.to_string(),
        found: format!("{found:?}"),
        expected: format!("{expected:?}"),
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fails with the first field that disagrees with `cfg`.
    pub fn check_against(&self, cfg: &RunConfig, kind: AgentKind) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(mismatch("version", self.version, CHECKPOINT_VERSION));
        }
        if self.agent_kind != kind {
            return Err(mismatch("agent_kind", self.agent_kind.as_str(), kind.as_str()));
        }
        let expected = CheckpointDims::of(&Agent::new(kind, &cfg.agent, &cfg.env, 0)?, &cfg.env);
        let d = &self.dims;
        if d.q != expected.q {
            return Err(mismatch("q", d.q, expected.q));
        }
        if d.w != expected.w {
            return Err(mismatch("w", d.w, expected.w));
        }
        if d.obs_dim != expected.obs_dim {
            return Err(mismatch("obs_dim", d.obs_dim, expected.obs_dim));
        }
        if d.action_dim != expected.action_dim {
            return Err(mismatch("action_dim", d.action_dim, expected.action_dim));
        }
        if d.hidden != expected.hidden {
            return Err(mismatch("hidden", &d.hidden, &expected.hidden));
        }
        let actual = CheckpointDims::of(&self.agent, &cfg.env);
        if actual != *d {
            return Err(mismatch("dims", &actual, d));
        }
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_train_log<W: Write>(w: W, log: &[EpisodeLog]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRAIN_LOG_HEADER)?;
    for l in log {
        wtr.write_record(l.record())?;
    }
    wtr.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub log: Vec<EpisodeLog>,
}

/// Trains in memory for `cfg.episode_max` episodes (or up to that count
/// when resuming from `state`).
pub fn train(cfg: &RunConfig, state: &mut TrainState) -> Result<Vec<EpisodeLog>> {
    let mut log = Vec::with_capacity(cfg.episode_max.saturating_sub(state.episode));
    while state.episode < cfg.episode_max {
        log.push(state.run_episode::<fs::File>(cfg.episode_max, None)?);
    }
    Ok(log)
}

/// Trains `cfg.agent_kind`, writing `train_log.csv`, `checkpoint.json`
/// (plus periodic `checkpoint_<episode>.json`) and optionally
/// `train_steps.csv` under the output directory. With `resume`, continues
/// from that checkpoint's episode and random state and appends to the log.
pub fn run_training(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let sim = Arc::new(cfg.similarity_model()?);
    let mut state = TrainState::new(cfg, sim)?;
    if let Some(p) = resume {
        let ckpt = Checkpoint::load(p)?;
        ckpt.check_against(cfg, cfg.agent_kind)?;
        state.restore(ckpt)?;
    }
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let log_path = dir.join("train_log.csv");
    let appending = resume.is_some() && log_path.exists();
    let log_file = fs::OpenOptions::new()
        .create(true)
        .append(appending)
        .write(true)
        .truncate(!appending)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    let mut log_wtr = csv::Writer::from_writer(log_file);
    if !appending {
        log_wtr.write_record(TRAIN_LOG_HEADER)?;
    }
    let mut steps_wtr = if cfg.step_log {
        let mut w = csv_writer(&dir.join("train_steps.csv"))?;
        w.write_record(env::STEP_LOG_HEADER)?;
        Some(w)
    } else {
        None
    };
    let mut log = Vec::new();
    while state.episode < cfg.episode_max {
        let entry = state.run_episode(cfg.episode_max, steps_wtr.as_mut())?;
        log_wtr.write_record(entry.record())?;
        log::info!(
            "episode {} reward {:.4e} r1 {:.4} buffer {}",
            entry.episode,
            entry.mean_reward,
            entry.r1_mean,
            entry.buffer_size
        );
        log.push(entry);
        if cfg.checkpoint_every > 0 && state.episode % cfg.checkpoint_every == 0 && state.episode < cfg.episode_max {
            log_wtr.flush().map_err(|e| Error::io(&log_path, e))?;
            state
                .checkpoint(cfg)
                .save(&dir.join(format!("checkpoint_{}.json", state.episode)))?;
        }
    }
    log_wtr.flush().map_err(|e| Error::io(&log_path, e))?;
    if let Some(w) = steps_wtr.as_mut() {
        w.flush().map_err(|e| Error::io(dir.join("train_steps.csv"), e))?;
    }
    state.checkpoint(cfg).save(&dir.join("checkpoint.json"))?;
    Ok(TrainOutcome { state, log })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEpisode {
    pub episode: usize,
    /// Mean over steps of the summed V2I HSSE.
    pub mean_hsse: f64,
    pub mean_reward: f64,
    pub successes: usize,
    /// Mean completion time of the links that succeeded, seconds.
    pub response_time: Option<f64>,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub agent_kind: AgentKind,
    pub episodes: usize,
    /// Successes over `Q * episodes`.
    pub srs: f64,
    pub mean_hsse: f64,
    /// 95% normal half-width of `mean_hsse` across episodes.
    pub hsse_ci: f64,
    pub mean_reward: f64,
    pub mean_response_time: Option<f64>,
    pub per_episode: Vec<TestEpisode>,
}

/// Exploit-mode evaluation on the testing environment seed. Every agent
/// evaluated under the same config sees the same channel trace; test
/// episodes are numbered from `cfg.episode_max` so the refresh cadence
/// continues from training.
pub fn evaluate<W: Write>(
    cfg: &RunConfig,
    sim: Arc<SimilarityModel>,
    agent: &mut Agent,
    mut steps: Option<&mut csv::Writer<W>>,
) -> Result<TestSummary> {
    let kind = agent.kind();
    let mut env = build_env(cfg, sim, kind.payload_mode(), cfg.test_seed())?;
    env.set_exploration(if kind.is_learned() {
        cfg.agent.exploration.value(cfg.episode_max, cfg.episode_max)
    } else {
        1.0
    });
    let q = cfg.env.q;
    let env_cfg = cfg.env.clone();
    let sem = cfg.semantic;
    let mut per_episode = Vec::with_capacity(cfg.episode_test);
    let mut successes = 0usize;
    let mut rt = Mean::default();
    for i in 0..cfg.episode_test {
        let e = cfg.episode_max + i;
        let mut obs = env.reset(e)?;
        let (mut hsse, mut reward) = (Mean::default(), Mean::default());
        let mut collisions = 0;
        for t in 0..env_cfg.steps_per_episode {
            let raw = agent.act(&obs, false)?;
            let assignment = agent.decode(&raw, &env_cfg, &sem)?;
            let res = env.step(&assignment)?;
            if let Some(w) = steps.as_deref_mut() {
                env::write_step_rows(w, e, t, &env_cfg, &res)?;
            }
            hsse.add(res.metrics.r1);
            reward.add(res.reward);
            collisions += res.metrics.band_collisions;
            obs = res.observation;
        }
        let done: Vec<usize> = env.completion_steps().iter().flatten().copied().collect();
        successes += done.len();
        let mut ep_rt = Mean::default();
        for &s in &done {
            let t = s as f64 * env_cfg.step_dt;
            ep_rt.add(t);
            rt.add(t);
        }
        per_episode.push(TestEpisode {
            episode: e,
            mean_hsse: hsse.get().unwrap_or(0.0),
            mean_reward: reward.get().unwrap_or(0.0),
            successes: done.len(),
            response_time: ep_rt.get(),
            collisions,
        });
    }
    let n = per_episode.len().max(1) as f64;
    let mean_hsse = per_episode.iter().map(|p| p.mean_hsse).sum::<f64>() / n;
    let var = per_episode.iter().map(|p| (p.mean_hsse - mean_hsse).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(TestSummary {
        agent_kind: kind,
        episodes: per_episode.len(),
        srs: successes as f64 / (q as f64 * n),
        mean_hsse,
        hsse_ci: 1.96 * (var / n).sqrt(),
        mean_reward: per_episode.iter().map(|p| p.mean_reward).sum::<f64>() / n,
        mean_response_time: rt.get(),
        per_episode,
    })
}

/// Loads the agent for testing: from `checkpoint` when given, otherwise a
/// fresh random agent (learned kinds require a checkpoint).
pub fn load_agent(cfg: &RunConfig, kind: AgentKind, checkpoint: Option<&Path>) -> Result<Agent> {
    match checkpoint {
        Some(p) => {
            let ckpt = Checkpoint::load(p)?;
            ckpt.check_against(cfg, kind)?;
            Ok(ckpt.agent)
        }
        None if !kind.is_learned() => Agent::new(kind, &cfg.agent, &cfg.env, cfg.agent_seed()),
        None => Err(Error::Usage(format!("testing `{kind}` requires a checkpoint"))),
    }
}

/// Tests `cfg.agent_kind`, writing `test_episodes.csv`, `test_summary.json`
/// and optionally `test_steps.csv` (which includes the remaining-demand
/// trace) under the output directory.
pub fn run_testing(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<TestSummary> {
    cfg.validate()?;
    let sim = Arc::new(cfg.similarity_model()?);
    let mut agent = load_agent(cfg, cfg.agent_kind, checkpoint)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let mut steps_wtr = if cfg.step_log {
        let mut w = csv_writer(&dir.join("test_steps.csv"))?;
        w.write_record(env::STEP_LOG_HEADER)?;
        Some(w)
    } else {
        None
    };
    let summary = evaluate(cfg, sim, &mut agent, steps_wtr.as_mut())?;
    if let Some(w) = steps_wtr.as_mut() {
        w.flush().map_err(|e| Error::io(dir.join("test_steps.csv"), e))?;
    }
    let mut w = csv_writer(&dir.join("test_episodes.csv"))?;
    w.write_record(["episode", "mean_hsse", "mean_reward", "successes", "response_time", "collisions"])?;
    for p in &summary.per_episode {
        w.write_record([
            p.episode.to_string(),
            p.mean_hsse.to_string(),
            p.mean_reward.to_string(),
            p.successes.to_string(),
            opt_field(p.response_time),
            p.collisions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("test_episodes.csv"), e))?;
    let path = dir.join("test_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    DemandMultiplier,
    V2iPowerDbm,
    UBits,
    NVehicles,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 4] = [
        SweepParameter::DemandMultiplier,
        SweepParameter::V2iPowerDbm,
        SweepParameter::UBits,
        SweepParameter::NVehicles,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::DemandMultiplier => "demand_multiplier",
            SweepParameter::V2iPowerDbm => "v2i_power_dbm",
            SweepParameter::UBits => "u_bits",
            SweepParameter::NVehicles => "n_vehicles",
        }
    }

    pub fn apply(self, cfg: &mut RunConfig, value: f64) -> Result<()> {
        match self {
            SweepParameter::DemandMultiplier => cfg.env.demand_multiplier = value,
            SweepParameter::V2iPowerDbm => cfg.env.v2i_power_dbm = value,
            SweepParameter::UBits => cfg.env.u_bits = value,
            SweepParameter::NVehicles => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("n_vehicles must be a whole number, got {value}")));
                }
                cfg.scenario.n_vehicles = value as usize;
            }
        }
        Ok(())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = SweepParameter::ALL.iter().map(|p| p.as_str()).collect();
            Error::Usage(format!(
                "unsupported sweep parameter `{s}` (supported: {})",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub agent_kind: AgentKind,
    pub seed: u64,
    pub mean_hsse: f64,
    pub mean_srs: f64,
    pub ci: f64,
}

/// An agent taking part in a sweep, with the policy used at every point when
/// not retraining.
#[derive(Debug, Clone)]
pub struct SweepAgent {
    pub kind: AgentKind,
    pub agent: Option<Agent>,
}

/// Evaluates every agent at every value of `parameter`. Learned agents
/// either reuse their supplied policy or, with `cfg.sweep.retrain`, are
/// retrained at each point.
pub fn sweep(cfg: &RunConfig, parameter: SweepParameter, values: &[f64], agents: &[SweepAgent]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * agents.len());
    for &v in values {
        let mut point = cfg.clone();
        parameter.apply(&mut point, v)?;
        point.validate()?;
        let sim = Arc::new(point.similarity_model()?);
        for a in agents {
            let mut agent = if a.kind.is_learned() && cfg.sweep.retrain {
                let mut c = point.clone();
                c.agent_kind = a.kind;
                let mut st = TrainState::new(&c, sim.clone())?;
                train(&c, &mut st)?;
                st.agent
            } else {
                match &a.agent {
                    Some(ag) => ag.clone(),
                    None => load_agent(&point, a.kind, None)?,
                }
            };
            let s = evaluate::<fs::File>(&point, sim.clone(), &mut agent, None)?;
            rows.push(SweepRow {
                parameter: parameter.as_str().to_string(),
                value: v,
                agent_kind: a.kind,
                seed: point.seed,
                mean_hsse: s.mean_hsse,
                mean_srs: s.srs,
                ci: s.hsse_ci,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SWEEP_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.parameter.clone(),
            r.value.to_string(),
            r.agent_kind.to_string(),
            r.seed.to_string(),
            r.mean_hsse.to_string(),
            r.mean_srs.to_string(),
            r.ci.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Runs a sweep with policies loaded from `checkpoints` (kind, path) and
/// writes `sweep.csv` under the output directory.
pub fn run_sweep(
    cfg: &RunConfig,
    parameter: &str,
    values: &[f64],
    kinds: &[AgentKind],
    checkpoints: &[(AgentKind, PathBuf)],
) -> Result<Vec<SweepRow>> {
    let param = SweepParameter::from_str(parameter)?;
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    cfg.validate()?;
    let kinds: Vec<AgentKind> = if kinds.is_empty() { vec![cfg.agent_kind] } else { kinds.to_vec() };
    let mut agents = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let path = checkpoints.iter().find(|(k, _)| *k == kind).map(|(_, p)| p.as_path());
        let agent = if kind.is_learned() && cfg.sweep.retrain {
            None
        } else {
            Some(load_agent(cfg, kind, path)?)
        };
        agents.push(SweepAgent { kind, agent });
    }
    let rows = sweep(cfg, param, values, &agents)?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("sweep.csv");
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_sweep_csv(f, &rows)?;
    Ok(rows)
}
