//! Python bindings: similarity model, metrics, path loss, a steppable
//! environment, and the train/test entry points.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use semshare::agent::{Agent, AgentKind};
use semshare::channel;
use semshare::env::{Environment, Observation};
use semshare::harness::{self, RunConfig};
use semshare::semantic::{self, SemanticConfig};
use semshare::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn config_from(toml: Option<&str>) -> PyResult<RunConfig> {
    match toml {
        Some(t) => RunConfig::from_toml_str(t, "<python>").map_err(to_py),
        None => Ok(RunConfig::default()),
    }
}

/// Tabulated semantic similarity over (symbols per word, SINR in dB).
#[pyclass(name = "SimilarityModel", frozen)]
struct PySimilarityModel {
    inner: Arc<semantic::SimilarityModel>,
}

#[pymethods]
impl PySimilarityModel {
    /// The built-in surrogate table.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: Arc::new(semantic::default_similarity_model()),
        }
    }

    #[staticmethod]
    fn from_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(semantic::SimilarityModel::from_csv_file(&path).map_err(to_py)?),
        })
    }

    fn similarity(&self, u: f64, sinr_db: f64) -> PyResult<f64> {
        self.inner.similarity(u, sinr_db).map_err(to_py)
    }

    fn u_range(&self) -> (f64, f64) {
        self.inner.u_range()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Semantic rate in suts/s.
#[pyfunction]
#[pyo3(signature = (u, xi, bandwidth_hz = 1e6, ratio = 1.0))]
fn hsr(u: f64, xi: f64, bandwidth_hz: f64, ratio: f64) -> f64 {
    let cfg = SemanticConfig {
        bandwidth_hz,
        info_per_sentence_ratio: ratio,
        ..SemanticConfig::default()
    };
    semantic::hsr(&cfg, u, xi)
}

/// Semantic spectral efficiency in suts/s/Hz.
#[pyfunction]
#[pyo3(signature = (u, xi, ratio = 1.0))]
fn hsse(u: f64, xi: f64, ratio: f64) -> f64 {
    let cfg = SemanticConfig {
        info_per_sentence_ratio: ratio,
        ..SemanticConfig::default()
    };
    semantic::hsse(&cfg, u, xi)
}

#[pyfunction]
#[pyo3(signature = (sinr_linear, u_bits, ratio = 1.0))]
fn bit_equivalent_hsse(sinr_linear: f64, u_bits: f64, ratio: f64) -> f64 {
    semantic::bit_equivalent_hsse(sinr_linear, u_bits, ratio)
}

/// V2I path loss in dB at 3D distance `d3d` metres.
#[pyfunction]
fn v2i_pathloss(d3d: f64) -> PyResult<f64> {
    channel::v2i_pathloss(d3d).map_err(to_py)
}

/// V2V path loss in dB for horizontal/vertical separations in metres.
#[pyfunction]
#[pyo3(signature = (d_hor, d_ver, fc_ghz = 2.0))]
fn v2v_pathloss(d_hor: f64, d_ver: f64, fc_ghz: f64) -> PyResult<f64> {
    channel::v2v_pathloss(d_hor, d_ver, fc_ghz).map_err(to_py)
}

/// The spectrum-sharing environment driven with raw actions in (-1, 1).
#[pyclass(name = "Environment")]
struct PyEnvironment {
    env: Environment,
    decoder: Agent,
    cfg: RunConfig,
}

#[pymethods]
impl PyEnvironment {
    /// `config` is TOML text (defaults when omitted); `agent_kind` selects
    /// the action layout and payload accounting.
    #[new]
    #[pyo3(signature = (config = None, agent_kind = "sss", seed = None))]
    fn new(config: Option<&str>, agent_kind: &str, seed: Option<u64>) -> PyResult<Self> {
        let cfg = config_from(config)?;
        let kind: AgentKind = agent_kind.parse().map_err(to_py)?;
        cfg.validate().map_err(to_py)?;
        let sim = Arc::new(cfg.similarity_model().map_err(to_py)?);
        let env = harness::build_env(&cfg, sim, kind.payload_mode(), seed.unwrap_or(cfg.seed)).map_err(to_py)?;
        let decoder = Agent::new(
            if kind.payload_mode() == semshare::env::PayloadMode::Semantic {
                AgentKind::RandomSemantic
            } else {
                AgentKind::Random
            },
            &cfg.agent,
            &cfg.env,
            0,
        )
        .map_err(to_py)?;
        Ok(Self { env, decoder, cfg })
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.cfg.env.obs_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.decoder.action_dim()
    }

    fn reset(&mut self, episode: usize) -> PyResult<Vec<f64>> {
        Ok(self.env.reset(episode).map_err(to_py)?.flatten())
    }

    /// Returns `(observation, reward, done, info)`.
    fn step(&mut self, raw: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, HashMap<String, Vec<f64>>)> {
        let assignment = self
            .decoder
            .decode(&raw, &self.cfg.env, &self.cfg.semantic)
            .map_err(to_py)?;
        let r = self.env.step(&assignment).map_err(to_py)?;
        let m = &r.metrics;
        let mut info = HashMap::new();
        info.insert("sinr_v2i".to_string(), m.sinr_v2i.clone());
        info.insert("sinr_v2v".to_string(), m.sinr_v2v.clone());
        info.insert("xi_v2v".to_string(), m.xi_v2v.clone());
        info.insert("hsse_v2i".to_string(), m.hsse_v2i.clone());
        info.insert("hsr_v2v".to_string(), m.hsr_v2v.clone());
        info.insert("remaining".to_string(), m.remaining.clone());
        info.insert("r1".to_string(), vec![m.r1]);
        info.insert("r2".to_string(), vec![m.r2]);
        Ok((flat(&r.observation), r.reward, r.done, info))
    }
}

fn flat(o: &Observation) -> Vec<f64> {
    o.flatten()
}

/// Trains per the TOML config and returns the per-episode log as dicts.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn train(py: Python<'_>, config: Option<&str>) -> PyResult<Vec<HashMap<String, f64>>> {
    let cfg = config_from(config)?;
    let outcome = py.detach(|| harness::run_training(&cfg, None)).map_err(to_py)?;
    Ok(outcome
        .log
        .iter()
        .map(|l| {
            let mut d = HashMap::new();
            d.insert("episode".to_string(), l.episode as f64);
            d.insert("mean_reward".to_string(), l.mean_reward);
            d.insert("r1_mean".to_string(), l.r1_mean);
            d.insert("r2_mean".to_string(), l.r2_mean);
            d.insert("buffer_size".to_string(), l.buffer_size as f64);
            d
        })
        .collect())
}

/// Tests per the TOML config; returns summary metrics.
#[pyfunction]
#[pyo3(signature = (config = None, checkpoint = None))]
fn test(py: Python<'_>, config: Option<&str>, checkpoint: Option<PathBuf>) -> PyResult<HashMap<String, f64>> {
    let cfg = config_from(config)?;
    let s = py
        .detach(|| harness::run_testing(&cfg, checkpoint.as_deref()))
        .map_err(to_py)?;
    let mut d = HashMap::new();
    d.insert("srs".to_string(), s.srs);
    d.insert("mean_hsse".to_string(), s.mean_hsse);
    d.insert("hsse_ci".to_string(), s.hsse_ci);
    d.insert("mean_reward".to_string(), s.mean_reward);
    if let Some(t) = s.mean_response_time {
        d.insert("mean_response_time".to_string(), t);
    }
    Ok(d)
}

#[pymodule]
fn pysemshare(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimilarityModel>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_function(wrap_pyfunction!(hsr, m)?)?;
    m.add_function(wrap_pyfunction!(hsse, m)?)?;
    m.add_function(wrap_pyfunction!(bit_equivalent_hsse, m)?)?;
    m.add_function(wrap_pyfunction!(v2i_pathloss, m)?)?;
    m.add_function(wrap_pyfunction!(v2v_pathloss, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(test, m)?)?;
    Ok(())
}
