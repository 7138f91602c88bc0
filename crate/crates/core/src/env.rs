//! The spectrum-sharing MDP: scenario, channels, payload bookkeeping, SINR,
//! rewards and observations.
//!
//! One environment step is one fast-fading slot (1 ms by default). The action
//! for a step is chosen against the channel shown in the current observation;
//! after the step a fresh fast-fading draw forms the next observation. Large
//! scale fading (vehicle movement, path loss, shadowing) is refreshed every
//! `refresh_every` episodes.
//!
//! Observation layout, per V2V link `q` (length `(Q + 2) W + 4`):
//!
//! 1. `h_q[w]` own-link gains, `w = 0..W`
//! 2. `h_{q'q}[w]` from every other V2V transmitter `q' != q` in increasing
//!    `q'`, each over `w = 0..W`
//! 3. `h_{wq}[w]` V2I transmitter `w` to this receiver on band `w`
//! 4. `h_{qB}[w]` this transmitter to the BS
//! 5. previous-step V2V SINR, previous-step `u`, remaining demand fraction,
//!    remaining time fraction
//!
//! followed by a shared block (length `2W + 2`): previous V2I SINRs, V2I
//! symbol counts, episode index, exploration parameter. Gains and SINRs are
//! in dB, shifted and scaled by the constants in [`ObservationScaling`].

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelConfig, ChannelRealization, FadingState, LargeScale};
use crate::error::{Error, Result};
use crate::mobility::{self, GridSpec, ScenarioState, TurnProbs, DEFAULT_BS_POSITION, DEFAULT_SPEED};
use crate::semantic::{self, SemanticConfig, SimilarityModel};

/// Sentence-level payload constant behind the demand size `k * 1060 / u`.
pub const DEMAND_UNIT: f64 = 1060.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub n_vehicles: usize,
    /// m/s
    pub speed: f64,
    pub turn_probs: TurnProbs,
    pub bs_position: [f64; 2],
    /// Seconds of movement applied at each environment refresh.
    pub mobility_dt: f64,
    pub refresh_every: usize,
    /// Re-draw V2I users and V2V pairs at each refresh.
    pub reselect_topology: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            n_vehicles: 20,
            speed: DEFAULT_SPEED,
            turn_probs: TurnProbs::default(),
            bs_position: DEFAULT_BS_POSITION,
            mobility_dt: 0.1,
            refresh_every: 20,
            reselect_topology: true,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, q: usize, w: usize) -> Result<()> {
        self.grid.validate()?;
        self.turn_probs.validate()?;
        mobility::check_vehicle_count(self.n_vehicles, q, w)?;
        if self.refresh_every == 0 {
            return Err(Error::Config("scenario.refresh_every must be >= 1".into()));
        }
        if !(self.mobility_dt.is_finite() && self.mobility_dt >= 0.0) {
            return Err(Error::Config("scenario.mobility_dt must be >= 0".into()));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::Config("scenario.speed must be >= 0".into()));
        }
        Ok(())
    }
}

/// Affine constants used to standardize observation features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationScaling {
    pub gain_db_offset: f64,
    pub gain_db_scale: f64,
    pub sinr_db_offset: f64,
    pub sinr_db_scale: f64,
    /// SINRs below this (including exact zeros) are reported at the floor.
    pub sinr_db_floor: f64,
    /// Episode index is divided by this.
    pub episode_norm: f64,
}

impl Default for ObservationScaling {
    fn default() -> Self {
        Self {
            gain_db_offset: -100.0,
            gain_db_scale: 30.0,
            sinr_db_offset: 10.0,
            sinr_db_scale: 30.0,
            sinr_db_floor: -50.0,
            episode_norm: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Number of V2V links.
    pub q: usize,
    /// Number of V2I links, one per sub-band.
    pub w: usize,
    pub step_dt: f64,
    pub steps_per_episode: usize,
    pub time_budget: f64,
    /// Demand per link is `demand_multiplier * 1060 / u_ref` suts.
    pub demand_multiplier: f64,
    pub u_ref: f64,
    /// Symbols per word used by the V2I links.
    pub v2i_u: f64,
    /// Bits per word for the bit-pipe metrics.
    pub u_bits: f64,
    pub power_levels_dbm: Vec<f64>,
    pub v2i_power_dbm: f64,
    pub noise_dbm: f64,
    pub lambda_weight: f64,
    /// Per-link reward once its payload is delivered; defaults to the
    /// `bandwidth * Q / u_min` upper bound of the summed V2V rate.
    pub varpi: Option<f64>,
    /// Steps whose similarity falls below this deliver nothing.
    pub xi_threshold: f64,
    pub observation: ObservationScaling,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            q: 4,
            w: 4,
            step_dt: 0.001,
            steps_per_episode: 100,
            time_budget: 0.1,
            demand_multiplier: 50.0,
            u_ref: 20.0,
            v2i_u: 20.0,
            u_bits: 20.0,
            power_levels_dbm: vec![-100.0, 5.0, 10.0, 23.0],
            v2i_power_dbm: 23.0,
            noise_dbm: -114.0,
            lambda_weight: 0.5,
            varpi: None,
            xi_threshold: 0.9,
            observation: ObservationScaling::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, sem: &SemanticConfig) -> Result<()> {
        if self.q == 0 || self.w == 0 {
            return Err(Error::Config("env.q and env.w must be >= 1".into()));
        }
        if !(self.step_dt.is_finite() && self.step_dt > 0.0) || self.steps_per_episode == 0 {
            return Err(Error::Config("env.step_dt and env.steps_per_episode must be > 0".into()));
        }
        let budget = self.steps_per_episode as f64 * self.step_dt;
        if (self.time_budget - budget).abs() > 1e-9 * budget.max(1.0) {
            return Err(Error::Config(format!(
                "env.time_budget ({}) must equal steps_per_episode * step_dt ({budget})",
                self.time_budget
            )));
        }
        if self.power_levels_dbm.is_empty() || self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("env.power_levels_dbm must be a non-empty list of finite values".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_weight) {
            return Err(Error::Config(format!(
                "env.lambda_weight must lie in [0, 1], got {}",
                self.lambda_weight
            )));
        }
        if !(self.demand_multiplier.is_finite() && self.demand_multiplier >= 0.0) {
            return Err(Error::Config("env.demand_multiplier must be >= 0".into()));
        }
        for (name, v) in [("u_ref", self.u_ref), ("v2i_u", self.v2i_u)] {
            if !(v >= sem.u_min && v <= sem.u_max) {
                return Err(Error::Config(format!(
                    "env.{name} = {v} outside [u_min, u_max] = [{}, {}]",
                    sem.u_min, sem.u_max
                )));
            }
        }
        if !(self.u_bits.is_finite() && self.u_bits > 0.0) {
            return Err(Error::Config("env.u_bits must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.xi_threshold) {
            return Err(Error::Config("env.xi_threshold must lie in [0, 1]".into()));
        }
        let bound = varpi_lower_bound(self, sem);
        if let Some(v) = self.varpi {
            if !(v.is_finite() && v >= bound) {
                return Err(Error::Config(format!(
                    "env.varpi = {v} is below the maximum summed V2V rate {bound} \
                     (bandwidth * Q / u_min)"
                )));
            }
        }
        let o = &self.observation;
        if !(o.gain_db_scale > 0.0 && o.sinr_db_scale > 0.0 && o.episode_norm > 0.0) {
            return Err(Error::Config("env.observation scales must be > 0".into()));
        }
        Ok(())
    }

    pub fn varpi(&self, sem: &SemanticConfig) -> f64 {
        self.varpi.unwrap_or_else(|| varpi_lower_bound(self, sem))
    }

    /// Initial semantic demand per link, suts.
    pub fn semantic_demand(&self) -> f64 {
        self.demand_multiplier * DEMAND_UNIT / self.u_ref
    }

    pub fn link_obs_dim(&self) -> usize {
        (self.q + 2) * self.w + 4
    }

    pub fn shared_obs_dim(&self) -> usize {
        2 * self.w + 2
    }

    pub fn obs_dim(&self) -> usize {
        self.q * self.link_obs_dim() + self.shared_obs_dim()
    }
}

fn varpi_lower_bound(cfg: &EnvConfig, sem: &SemanticConfig) -> f64 {
    sem.bandwidth_hz * cfg.q as f64 / sem.u_min
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Transmit power in watts; levels at or below -100 dBm mean "transmitter
/// off" and give exactly zero.
pub fn tx_power_watts(dbm: f64) -> f64 {
    if dbm <= -100.0 {
        0.0
    } else {
        dbm_to_watts(dbm)
    }
}

/// How delivered payload and rewards are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadMode {
    /// Suts through the similarity table.
    Semantic,
    /// Bits through Shannon capacity; similarity is never consulted.
    Bits,
}

/// One V2V link's resource choice for a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAssignment {
    pub band: usize,
    pub power_index: usize,
    /// Symbols (or bits) per word.
    pub u: f64,
}

fn unit_to_index(raw: f64, n: usize) -> usize {
    let x = ((raw + 1.0) / 2.0 * n as f64).floor();
    if x.is_nan() || x < 0.0 {
        0
    } else {
        (x as usize).min(n - 1)
    }
}

/// Decodes per-link `(band, power, symbols)` raw values in `(-1, 1)`.
pub fn map_action(raw: &[f64], cfg: &EnvConfig, sem: &SemanticConfig) -> Result<Vec<LinkAssignment>> {
    if raw.len() != 3 * cfg.q {
        return Err(Error::Usage(format!(
            "expected {} raw action values, got {}",
            3 * cfg.q,
            raw.len()
        )));
    }
    Ok(raw
        .chunks_exact(3)
        .map(|a| {
            let frac = ((a[2] + 1.0) / 2.0).clamp(0.0, 1.0);
            let frac = if frac.is_nan() { 0.0 } else { frac };
            let u = (sem.u_min + frac * (sem.u_max - sem.u_min))
                .round()
                .clamp(sem.u_min, sem.u_max);
            LinkAssignment {
                band: unit_to_index(a[0], cfg.w),
                power_index: unit_to_index(a[1], cfg.power_levels_dbm.len()),
                u,
            }
        })
        .collect())
}

/// Decodes per-link `(band, power)` raw values; `u` is pinned to `u_ref`.
pub fn map_action_bits(raw: &[f64], cfg: &EnvConfig) -> Result<Vec<LinkAssignment>> {
    if raw.len() != 2 * cfg.q {
        return Err(Error::Usage(format!(
            "expected {} raw action values, got {}",
            2 * cfg.q,
            raw.len()
        )));
    }
    Ok(raw
        .chunks_exact(2)
        .map(|a| LinkAssignment {
            band: unit_to_index(a[0], cfg.w),
            power_index: unit_to_index(a[1], cfg.power_levels_dbm.len()),
            u: cfg.u_ref,
        })
        .collect())
}

/// Linear SINRs `(v2i[w], v2v[q])` for transmit powers in watts. Each V2V
/// link transmits on `bands[q]` only.
pub fn compute_sinrs_watts(
    real: &ChannelRealization,
    bands: &[usize],
    v2v_power_w: &[f64],
    v2i_power_w: f64,
    noise_w: f64,
) -> (Vec<f64>, Vec<f64>) {
    let w = real.num_bands();
    let q = real.num_v2v();
    let mut v2i_interf = vec![0.0; w];
    for k in 0..q {
        v2i_interf[bands[k]] += v2v_power_w[k] * real.g_v2v_to_bs[[k, bands[k]]];
    }
    let sinr_v2i = (0..w)
        .map(|b| v2i_power_w * real.g_v2i[b] / (noise_w + v2i_interf[b]))
        .collect();
    let sinr_v2v = (0..q)
        .map(|k| {
            let b = bands[k];
            let mut interf = v2i_power_w * real.g_v2i_to_v2v[[b, k]];
            for other in 0..q {
                if other != k && bands[other] == b {
                    interf += v2v_power_w[other] * real.g_cross[[other, k, b]];
                }
            }
            v2v_power_w[k] * real.g_v2v[[k, b]] / (noise_w + interf)
        })
        .collect();
    (sinr_v2i, sinr_v2v)
}

/// SINRs for a set of link assignments under `cfg`'s power levels.
pub fn compute_sinrs(
    real: &ChannelRealization,
    assignment: &[LinkAssignment],
    cfg: &EnvConfig,
) -> (Vec<f64>, Vec<f64>) {
    let bands: Vec<usize> = assignment.iter().map(|a| a.band).collect();
    let powers: Vec<f64> = assignment
        .iter()
        .map(|a| tx_power_watts(cfg.power_levels_dbm[a.power_index]))
        .collect();
    compute_sinrs_watts(
        real,
        &bands,
        &powers,
        tx_power_watts(cfg.v2i_power_dbm),
        dbm_to_watts(cfg.noise_dbm),
    )
}

/// Agent-facing state, split into per-link and shared features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub per_link: Vec<Vec<f64>>,
    pub shared: Vec<f64>,
}

impl Observation {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.per_link.iter().flatten().copied().collect();
        out.extend_from_slice(&self.shared);
        out
    }

    /// Link `q`'s own block followed by the shared block.
    pub fn link_features(&self, q: usize) -> Vec<f64> {
        let mut out = self.per_link[q].clone();
        out.extend_from_slice(&self.shared);
        out
    }

    pub fn dim(&self) -> usize {
        self.per_link.iter().map(Vec::len).sum::<usize>() + self.shared.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepMetrics {
    pub assignment: Vec<LinkAssignment>,
    pub sinr_v2i: Vec<f64>,
    pub sinr_v2v: Vec<f64>,
    pub xi_v2i: Vec<f64>,
    pub xi_v2v: Vec<f64>,
    /// Per V2I link HSSE (bit-equivalent in bits mode).
    pub hsse_v2i: Vec<f64>,
    /// Per V2V link rate counted in the reward (suts/s, or capacity over
    /// `u_bits` in bits mode); zero for finished links and below-threshold
    /// steps.
    pub hsr_v2v: Vec<f64>,
    /// Payload delivered this step (suts or bits).
    pub delivered: Vec<f64>,
    /// Remaining payload after this step.
    pub remaining: Vec<f64>,
    /// Links whose payload completed on this step.
    pub completed: Vec<usize>,
    /// Pairs of active V2V links sharing a sub-band.
    pub band_collisions: usize,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub metrics: StepMetrics,
}

/// Serializable snapshot of everything random or evolving in an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub scenario: ScenarioState,
    pub fading: FadingState,
    #[serde(with = "crate::rng")]
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scenario_cfg: ScenarioConfig,
    channel_cfg: ChannelConfig,
    semantic_cfg: SemanticConfig,
    cfg: EnvConfig,
    similarity: Arc<SimilarityModel>,
    mode: PayloadMode,
    rng: ChaCha8Rng,

    scenario: ScenarioState,
    fading: FadingState,
    large: LargeScale,
    realization: ChannelRealization,

    episode: usize,
    step_idx: usize,
    in_episode: bool,
    demand0: f64,
    demand: Vec<f64>,
    time_left: Vec<f64>,
    completed_at: Vec<Option<usize>>,
    prev_sinr_v2v: Vec<f64>,
    prev_sinr_v2i: Vec<f64>,
    prev_u: Vec<f64>,
    exploration: f64,
}

impl Environment {
    /// Builds the scenario and fading state from `seed`. The environment owns
    /// its random stream, so two environments with the same seed see the same
    /// channel trace regardless of the actions taken.
    pub fn new(
        scenario_cfg: ScenarioConfig,
        channel_cfg: ChannelConfig,
        semantic_cfg: SemanticConfig,
        cfg: EnvConfig,
        similarity: Arc<SimilarityModel>,
        mode: PayloadMode,
        seed: u64,
    ) -> Result<Self> {
        scenario_cfg.validate(cfg.q, cfg.w)?;
        channel_cfg.validate()?;
        semantic_cfg.validate()?;
        cfg.validate(&semantic_cfg)?;
        if mode == PayloadMode::Semantic {
            let (lo, hi) = similarity.u_range();
            if semantic_cfg.u_min < lo || semantic_cfg.u_max > hi {
                return Err(Error::Config(format!(
                    "similarity table covers u in [{lo}, {hi}] but actions span [{}, {}]",
                    semantic_cfg.u_min, semantic_cfg.u_max
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = mobility::init_scenario(
            &scenario_cfg.grid,
            scenario_cfg.n_vehicles,
            scenario_cfg.speed,
            cfg.q,
            cfg.w,
            scenario_cfg.bs_position,
            &mut rng,
        )?;
        let positions = scenario.positions();
        let fading = FadingState::new(&positions, &channel_cfg, &mut rng);
        let large = channel::large_scale(&scenario.topology, &positions, &fading, &channel_cfg)?;
        let realization = channel::realize(&large, &mut rng);
        let q = cfg.q;
        let w = cfg.w;
        let mut env = Self {
            scenario_cfg,
            channel_cfg,
            semantic_cfg,
            similarity,
            mode,
            rng,
            scenario,
            fading,
            large,
            realization,
            episode: 0,
            step_idx: 0,
            in_episode: false,
            demand0: 0.0,
            demand: vec![0.0; q],
            time_left: vec![0.0; q],
            completed_at: vec![None; q],
            prev_sinr_v2v: vec![0.0; q],
            prev_sinr_v2i: vec![0.0; w],
            prev_u: vec![cfg.u_ref; q],
            exploration: 0.0,
            cfg,
        };
        env.demand0 = env.initial_demand();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn semantic_config(&self) -> &SemanticConfig {
        &self.semantic_cfg
    }

    pub fn channel_config(&self) -> &ChannelConfig {
        &self.channel_cfg
    }

    pub fn scenario_config(&self) -> &ScenarioConfig {
        &self.scenario_cfg
    }

    pub fn mode(&self) -> PayloadMode {
        self.mode
    }

    pub fn scenario(&self) -> &ScenarioState {
        &self.scenario
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    pub fn large_scale(&self) -> &LargeScale {
        &self.large
    }

    pub fn remaining_demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn remaining_time(&self) -> &[f64] {
        &self.time_left
    }

    /// Initial payload per link in the current mode's unit.
    pub fn initial_demand(&self) -> f64 {
        match self.mode {
            PayloadMode::Semantic => self.cfg.semantic_demand(),
            PayloadMode::Bits => self.cfg.semantic_demand() * self.cfg.u_ref,
        }
    }

    /// Step at which each link's payload reached zero in the current episode.
    pub fn completion_steps(&self) -> &[Option<usize>] {
        &self.completed_at
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn steps_taken(&self) -> usize {
        self.step_idx
    }

    /// Exploration parameter reported in the observation.
    pub fn set_exploration(&mut self, tau: f64) {
        self.exploration = tau;
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            scenario: self.scenario.clone(),
            fading: self.fading.clone(),
            rng: self.rng.clone(),
        }
    }

    /// Restores a snapshot; the next `reset` starts from it.
    pub fn restore(&mut self, snap: EnvSnapshot) -> Result<()> {
        let positions = snap.scenario.positions();
        self.large = channel::large_scale(&snap.scenario.topology, &positions, &snap.fading, &self.channel_cfg)?;
        self.scenario = snap.scenario;
        self.fading = snap.fading;
        self.rng = snap.rng;
        self.in_episode = false;
        Ok(())
    }

    /// Replaces the channel used by the next step. Intended for hand-built
    /// test instances.
    pub fn set_realization(&mut self, real: ChannelRealization) -> Result<()> {
        if real.num_v2v() != self.cfg.q || real.num_bands() != self.cfg.w {
            return Err(Error::Usage("realization shape does not match (Q, W)".into()));
        }
        self.realization = real;
        Ok(())
    }

    fn refresh(&mut self) -> Result<()> {
        mobility::step_positions(
            &mut self.scenario,
            self.scenario_cfg.mobility_dt,
            &self.scenario_cfg.turn_probs,
            &mut self.rng,
        )?;
        let positions = self.scenario.positions();
        self.fading.update(&positions, &self.channel_cfg, &mut self.rng)?;
        if self.scenario_cfg.reselect_topology {
            self.scenario.topology = mobility::select_topology(
                &self.scenario.vehicles,
                self.cfg.q,
                self.cfg.w,
                self.scenario_cfg.bs_position,
                &mut self.rng,
            )?;
        }
        self.large = channel::large_scale(&self.scenario.topology, &positions, &self.fading, &self.channel_cfg)?;
        Ok(())
    }

    /// Starts episode `episode_index`, refreshing large-scale state on every
    /// positive multiple of `refresh_every`.
    pub fn reset(&mut self, episode_index: usize) -> Result<Observation> {
        if episode_index > 0 && episode_index.is_multiple_of(self.scenario_cfg.refresh_every) {
            self.refresh()?;
        }
        self.episode = episode_index;
        self.step_idx = 0;
        self.in_episode = true;
        self.demand0 = self.initial_demand();
        self.demand = vec![self.demand0; self.cfg.q];
        self.time_left = vec![self.cfg.time_budget; self.cfg.q];
        self.completed_at = vec![None; self.cfg.q];
        self.prev_sinr_v2v = vec![0.0; self.cfg.q];
        self.prev_sinr_v2i = vec![0.0; self.cfg.w];
        self.prev_u = vec![self.cfg.u_ref; self.cfg.q];
        self.realization = channel::realize(&self.large, &mut self.rng);
        Ok(self.observe())
    }

    fn gain_feature(&self, g: f64) -> f64 {
        let o = &self.cfg.observation;
        let db = 10.0 * g.max(1e-300).log10();
        (db - o.gain_db_offset) / o.gain_db_scale
    }

    fn sinr_feature(&self, s: f64) -> f64 {
        let o = &self.cfg.observation;
        let db = if s > 0.0 { 10.0 * s.log10() } else { f64::NEG_INFINITY };
        (db.max(o.sinr_db_floor) - o.sinr_db_offset) / o.sinr_db_scale
    }

    fn u_feature(&self, u: f64) -> f64 {
        let s = &self.semantic_cfg;
        if s.u_max > s.u_min {
            (u - s.u_min) / (s.u_max - s.u_min)
        } else {
            0.0
        }
    }

    pub fn observe(&self) -> Observation {
        let q = self.cfg.q;
        let w = self.cfg.w;
        let r = &self.realization;
        let per_link = (0..q)
            .map(|k| {
                let mut f = Vec::with_capacity(self.cfg.link_obs_dim());
                f.extend((0..w).map(|b| self.gain_feature(r.g_v2v[[k, b]])));
                for other in (0..q).filter(|&o| o != k) {
                    f.extend((0..w).map(|b| self.gain_feature(r.g_cross[[other, k, b]])));
                }
                f.extend((0..w).map(|b| self.gain_feature(r.g_v2i_to_v2v[[b, k]])));
                f.extend((0..w).map(|b| self.gain_feature(r.g_v2v_to_bs[[k, b]])));
                f.push(self.sinr_feature(self.prev_sinr_v2v[k]));
                f.push(self.u_feature(self.prev_u[k]));
                f.push(if self.demand0 > 0.0 { self.demand[k] / self.demand0 } else { 0.0 });
                f.push(self.time_left[k] / self.cfg.time_budget);
                f
            })
            .collect();
        let mut shared: Vec<f64> = self.prev_sinr_v2i.iter().map(|&s| self.sinr_feature(s)).collect();
        shared.extend((0..w).map(|_| self.u_feature(self.cfg.v2i_u)));
        shared.push(self.episode as f64 / self.cfg.observation.episode_norm);
        shared.push(self.exploration);
        Observation { per_link, shared }
    }

    /// Applies one step of link assignments.
    pub fn step(&mut self, assignment: &[LinkAssignment]) -> Result<StepResult> {
        if !self.in_episode {
            return Err(Error::Usage(
                "step called outside an episode (call reset first; the last episode is done)".into(),
            ));
        }
        let q = self.cfg.q;
        let w = self.cfg.w;
        if assignment.len() != q {
            return Err(Error::Usage(format!("expected {q} link assignments, got {}", assignment.len())));
        }
        for a in assignment {
            if a.band >= w || a.power_index >= self.cfg.power_levels_dbm.len() {
                return Err(Error::Usage(format!("assignment out of range: {a:?}")));
            }
        }
        let active: Vec<bool> = self.demand.iter().map(|&d| d > 0.0).collect();
        let bands: Vec<usize> = assignment.iter().map(|a| a.band).collect();
        // finished links stay silent
        let powers: Vec<f64> = assignment
            .iter()
            .zip(&active)
            .map(|(a, &on)| if on { tx_power_watts(self.cfg.power_levels_dbm[a.power_index]) } else { 0.0 })
            .collect();
        let (sinr_v2i, sinr_v2v) = compute_sinrs_watts(
            &self.realization,
            &bands,
            &powers,
            tx_power_watts(self.cfg.v2i_power_dbm),
            dbm_to_watts(self.cfg.noise_dbm),
        );
        let mut band_collisions = 0;
        for a in 0..q {
            for b in (a + 1)..q {
                if active[a] && active[b] && bands[a] == bands[b] {
                    band_collisions += 1;
                }
            }
        }

        let sem = self.semantic_cfg;
        let ratio = sem.info_per_sentence_ratio;
        let varpi = self.cfg.varpi(&sem);
        let mut xi_v2i = vec![1.0; w];
        let mut xi_v2v = vec![1.0; q];
        let hsse_v2i: Vec<f64> = match self.mode {
            PayloadMode::Semantic => (0..w)
                .map(|b| {
                    let xi = self.similarity.similarity(self.cfg.v2i_u, lin_to_db(sinr_v2i[b]))?;
                    xi_v2i[b] = xi;
                    Ok(semantic::hsse(&sem, self.cfg.v2i_u, xi))
                })
                .collect::<Result<_>>()?,
            PayloadMode::Bits => sinr_v2i
                .iter()
                .map(|&s| semantic::bit_equivalent_hsse(s, self.cfg.u_bits, ratio))
                .collect(),
        };
        let r1: f64 = hsse_v2i.iter().sum();

        let mut hsr_v2v = vec![0.0; q];
        let mut delivered = vec![0.0; q];
        let mut r2 = 0.0;
        let mut completed = Vec::new();
        for k in 0..q {
            if !active[k] {
                r2 += varpi;
                continue;
            }
            let (rate, payload_rate) = match self.mode {
                PayloadMode::Semantic => {
                    let xi = self.similarity.similarity(assignment[k].u, lin_to_db(sinr_v2v[k]))?;
                    xi_v2v[k] = xi;
                    if xi >= self.cfg.xi_threshold {
                        let h = semantic::hsr(&sem, assignment[k].u, xi);
                        (h, h)
                    } else {
                        (0.0, 0.0)
                    }
                }
                PayloadMode::Bits => {
                    let spectral = (1.0 + sinr_v2v[k]).log2();
                    (
                        sem.bandwidth_hz * spectral * ratio / self.cfg.u_bits,
                        sem.bandwidth_hz * spectral,
                    )
                }
            };
            hsr_v2v[k] = rate;
            r2 += rate;
            let d = (payload_rate * self.cfg.step_dt).min(self.demand[k]);
            delivered[k] = d;
            self.demand[k] = (self.demand[k] - d).max(0.0);
            if self.demand[k] <= 0.0 && self.time_left[k] > 0.0 {
                self.demand[k] = 0.0;
                self.completed_at[k] = Some(self.step_idx + 1);
                completed.push(k);
            }
        }
        let lambda = self.cfg.lambda_weight;
        let reward = lambda * r1 + (1.0 - lambda) * r2;
        if !reward.is_finite() {
            return Err(Error::Numerical(format!("non-finite reward at step {}", self.step_idx)));
        }

        for t in &mut self.time_left {
            *t = (*t - self.cfg.step_dt).max(0.0);
        }
        self.step_idx += 1;
        let done = self.step_idx >= self.cfg.steps_per_episode;
        if done {
            self.in_episode = false;
        }
        self.prev_sinr_v2v = sinr_v2v.clone();
        self.prev_sinr_v2i = sinr_v2i.clone();
        self.prev_u = assignment.iter().map(|a| a.u).collect();
        self.realization = channel::realize(&self.large, &mut self.rng);

        let metrics = StepMetrics {
            assignment: assignment.to_vec(),
            sinr_v2i,
            sinr_v2v,
            xi_v2i,
            xi_v2v,
            hsse_v2i,
            hsr_v2v,
            delivered,
            remaining: self.demand.clone(),
            completed,
            band_collisions,
            r1,
            r2,
        };
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done,
            metrics,
        })
    }
}

pub fn lin_to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Column header of the per-step metrics stream.
pub const STEP_LOG_HEADER: [&str; 12] = [
    "episode",
    "step",
    "link",
    "band",
    "power_dbm",
    "u",
    "sinr_db",
    "xi",
    "hsse_v2i_sum",
    "hsr_v2v",
    "sd_remaining",
    "reward",
];

/// Appends one row per V2V link for a completed step.
pub fn write_step_rows<W: std::io::Write>(
    wtr: &mut csv::Writer<W>,
    episode: usize,
    step: usize,
    cfg: &EnvConfig,
    result: &StepResult,
) -> Result<()> {
    let m = &result.metrics;
    for (k, a) in m.assignment.iter().enumerate() {
        wtr.write_record([
            episode.to_string(),
            step.to_string(),
            k.to_string(),
            a.band.to_string(),
            cfg.power_levels_dbm[a.power_index].to_string(),
            a.u.to_string(),
            lin_to_db(m.sinr_v2v[k]).to_string(),
            m.xi_v2v[k].to_string(),
            m.r1.to_string(),
            m.hsr_v2v[k].to_string(),
            m.remaining[k].to_string(),
            result.reward.to_string(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::default_similarity_model;
    use approx::assert_relative_eq;
    use ndarray::{Array2, Array3};

    fn env_with(cfg: EnvConfig, mode: PayloadMode, seed: u64) -> Environment {
        Environment::new(
            ScenarioConfig::default(),
            ChannelConfig::default(),
            SemanticConfig::default(),
            cfg,
            Arc::new(default_similarity_model()),
            mode,
            seed,
        )
        .unwrap()
    }

    const EPS: f64 = 1e-9;

    #[test]
    fn action_mapping_boundaries() {
        let cfg = EnvConfig::default();
        let sem = SemanticConfig::default();
        let lo = map_action(&[-1.0 + EPS; 12], &cfg, &sem).unwrap();
        assert!(lo.iter().all(|a| a.band == 0 && a.power_index == 0 && a.u == 5.0));
        assert_eq!(cfg.power_levels_dbm[lo[0].power_index], -100.0);
        let hi = map_action(&[1.0 - EPS; 12], &cfg, &sem).unwrap();
        assert!(hi.iter().all(|a| a.band == 3 && a.power_index == 3 && a.u == 40.0));
        assert_eq!(cfg.power_levels_dbm[hi[0].power_index], 23.0);
        let mid = map_action(&[0.0; 12], &cfg, &sem).unwrap();
        // floor(0.5 * 4) = 2; 5 + 0.5 * 35 = 22.5 rounds to 23
        assert!(mid.iter().all(|a| a.band == 2 && a.power_index == 2 && a.u == 23.0));
        assert_eq!(cfg.power_levels_dbm[2], 10.0);
        assert!(map_action(&[0.0; 5], &cfg, &sem).is_err());
        let bits = map_action_bits(&[0.0; 8], &cfg).unwrap();
        assert!(bits.iter().all(|a| a.u == cfg.u_ref && a.band == 2));
    }

    fn unit_realization(q: usize, w: usize) -> ChannelRealization {
        ChannelRealization {
            g_v2i: vec![1e-10; w],
            g_v2v: Array2::from_elem((q, w), 1e-8),
            g_v2v_to_bs: Array2::from_elem((q, w), 1e-12),
            g_v2i_to_v2v: Array2::from_elem((w, q), 1e-13),
            g_cross: Array3::from_elem((q, q, w), 1e-11),
        }
    }

    #[test]
    fn v2i_without_sharing_is_snr() {
        let real = unit_realization(1, 2);
        let (v2i, _) = compute_sinrs_watts(&real, &[1], &[0.1], 0.2, 1e-14);
        assert_eq!(v2i[0], 0.2 * 1e-10 / 1e-14);
    }

    #[test]
    fn off_transmitter_has_zero_sinr_and_no_interference() {
        let cfg = EnvConfig { q: 2, w: 2, ..EnvConfig::default() };
        let real = unit_realization(2, 2);
        let a = [
            LinkAssignment { band: 0, power_index: 0, u: 20.0 },
            LinkAssignment { band: 0, power_index: 3, u: 20.0 },
        ];
        let (v2i, v2v) = compute_sinrs(&real, &a, &cfg);
        assert_eq!(v2v[0], 0.0);
        let noise = dbm_to_watts(-114.0);
        assert!(noise > 0.0);
        let p23 = dbm_to_watts(23.0);
        let want = p23 * 1e-8 / (noise + p23 * 1e-13);
        assert_relative_eq!(v2v[1], want, max_relative = 1e-14);
        let want_v2i = p23 * 1e-10 / (noise + p23 * 1e-12);
        assert_relative_eq!(v2i[0], want_v2i, max_relative = 1e-14);
    }

    #[test]
    fn lambda_one_reward_is_r1() {
        let cfg = EnvConfig { lambda_weight: 1.0, ..EnvConfig::default() };
        let mut env = env_with(cfg.clone(), PayloadMode::Semantic, 3);
        env.reset(0).unwrap();
        let a = map_action(&[0.3; 12], &cfg, &SemanticConfig::default()).unwrap();
        let r = env.step(&a).unwrap();
        assert_eq!(r.reward, r.metrics.r1);
    }

    #[test]
    fn zero_demand_gives_q_varpi() {
        let cfg = EnvConfig { demand_multiplier: 0.0, lambda_weight: 0.0, ..EnvConfig::default() };
        let mut env = env_with(cfg.clone(), PayloadMode::Semantic, 3);
        env.reset(0).unwrap();
        let a = map_action(&[0.3; 12], &cfg, &SemanticConfig::default()).unwrap();
        let r = env.step(&a).unwrap();
        let varpi = cfg.varpi(&SemanticConfig::default());
        assert_eq!(varpi, 800_000.0);
        assert_eq!(r.metrics.r2, 4.0 * varpi);
        assert_eq!(r.reward, 4.0 * varpi);
    }

    #[test]
    fn step_after_done_is_usage_error() {
        let cfg = EnvConfig { steps_per_episode: 2, time_budget: 0.002, ..EnvConfig::default() };
        let mut env = env_with(cfg.clone(), PayloadMode::Semantic, 1);
        env.reset(0).unwrap();
        let a = map_action(&[0.0; 12], &cfg, &SemanticConfig::default()).unwrap();
        assert!(!env.step(&a).unwrap().done);
        assert!(env.step(&a).unwrap().done);
        assert!(matches!(env.step(&a), Err(Error::Usage(_))));
    }

    #[test]
    fn demand_size_from_multiplier() {
        let cfg = EnvConfig { demand_multiplier: 1.0, u_ref: 20.0, ..EnvConfig::default() };
        assert_eq!(cfg.semantic_demand(), 53.0);
        let mut env = env_with(cfg, PayloadMode::Semantic, 1);
        env.reset(0).unwrap();
        assert_eq!(env.remaining_demand(), &[53.0; 4]);
    }

    #[test]
    fn refresh_every_twenty_episodes() {
        let mut env = env_with(EnvConfig::default(), PayloadMode::Semantic, 5);
        env.reset(0).unwrap();
        let s0 = env.scenario().clone();
        for e in 1..20 {
            env.reset(e).unwrap();
            assert_eq!(env.scenario(), &s0, "episode {e}");
        }
        env.reset(20).unwrap();
        assert_ne!(env.scenario(), &s0);
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = env_with(EnvConfig::default(), PayloadMode::Semantic, 8);
        let mut b = env_with(EnvConfig::default(), PayloadMode::Semantic, 8);
        assert_eq!(a.reset(0).unwrap(), b.reset(0).unwrap());
    }

    #[test]
    fn observation_dimensions() {
        let cfg = EnvConfig::default();
        let mut env = env_with(cfg.clone(), PayloadMode::Semantic, 8);
        let obs = env.reset(0).unwrap();
        assert_eq!(obs.per_link[0].len(), cfg.link_obs_dim());
        assert_eq!(obs.dim(), cfg.obs_dim());
        assert_eq!(cfg.obs_dim(), 122);
        assert!(obs.flatten().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn varpi_below_bound_rejected() {
        let cfg = EnvConfig { varpi: Some(10.0), ..EnvConfig::default() };
        assert!(matches!(cfg.validate(&SemanticConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn time_budget_must_match_steps() {
        let cfg = EnvConfig { time_budget: 0.5, ..EnvConfig::default() };
        assert!(cfg.validate(&SemanticConfig::default()).is_err());
    }
}
