//! Semantic similarity tables and the semantic rate / spectral-efficiency
//! metrics built on them.
//!
//! Similarity `xi = psi(u, sinr_db)` is a grid over symbols-per-word `u` and
//! SINR in dB, queried by bilinear interpolation. A table can be loaded from
//! CSV or generated from the analytic surrogate
//! `xi(u, g) = (1 - 2^(-c u)) / (1 + exp(-a (g - b)))`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemanticConfig {
    /// Symbols per second available on one sub-band (Hz).
    pub bandwidth_hz: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Information per sentence over sentence length, I/L.
    pub info_per_sentence_ratio: f64,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1.0e6,
            u_min: 5.0,
            u_max: 40.0,
            info_per_sentence_ratio: 1.0,
        }
    }
}

impl SemanticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(Error::Config(format!(
                "semantic.bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.u_min >= 1.0) {
            return Err(Error::Config(format!("semantic.u_min must be >= 1, got {}", self.u_min)));
        }
        if !(self.u_max >= self.u_min && self.u_max.is_finite()) {
            return Err(Error::Config(format!(
                "semantic.u_max ({}) must be >= u_min ({})",
                self.u_max, self.u_min
            )));
        }
        if !(self.info_per_sentence_ratio.is_finite() && self.info_per_sentence_ratio > 0.0) {
            return Err(Error::Config("semantic.info_per_sentence_ratio must be > 0".into()));
        }
        Ok(())
    }
}

/// Parameters of the analytic similarity surrogate and the grid it is
/// sampled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    /// Logistic slope in 1/dB.
    pub a: f64,
    /// Logistic midpoint in dB.
    pub b: f64,
    /// Saturation rate in u.
    pub c: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub u_step: f64,
    pub sinr_min_db: f64,
    pub sinr_max_db: f64,
    pub sinr_step_db: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            a: 0.3,
            b: 0.0,
            c: 0.2,
            u_min: 1.0,
            u_max: 64.0,
            u_step: 1.0,
            sinr_min_db: -30.0,
            sinr_max_db: 50.0,
            sinr_step_db: 1.0,
        }
    }
}

impl SurrogateParams {
    pub fn eval(&self, u: f64, sinr_db: f64) -> f64 {
        (1.0 - 2f64.powf(-self.c * u)) / (1.0 + (-self.a * (sinr_db - self.b)).exp())
    }
}

fn linspace_steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Tabulated similarity `xi[u_index][sinr_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityModel {
    u_grid: Vec<f64>,
    sinr_grid_db: Vec<f64>,
    xi: Vec<Vec<f64>>,
}

/// Location of a table entry that breaks an invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub u_index: usize,
    pub sinr_index: usize,
}

impl SimilarityModel {
    pub fn new(u_grid: Vec<f64>, sinr_grid_db: Vec<f64>, xi: Vec<Vec<f64>>) -> Result<Self> {
        let model = Self {
            u_grid,
            sinr_grid_db,
            xi,
        };
        if let Err((cell, msg)) = model.check() {
            return Err(Error::Config(format!(
                "similarity table invalid at u[{}], sinr[{}]: {msg}",
                cell.u_index, cell.sinr_index
            )));
        }
        Ok(model)
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    pub fn sinr_grid_db(&self) -> &[f64] {
        &self.sinr_grid_db
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.xi
    }

    /// Full-grid scan: shape, strictly increasing axes, bounds and monotonicity
    /// in both u and SINR.
    pub fn check(&self) -> std::result::Result<(), (GridCell, String)> {
        let at = |u_index, sinr_index| GridCell {
            u_index,
            sinr_index,
        };
        if self.u_grid.is_empty() || self.sinr_grid_db.is_empty() {
            return Err((at(0, 0), "empty grid".into()));
        }
        for (i, w) in self.u_grid.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err((at(i + 1, 0), "u grid must be strictly increasing".into()));
            }
        }
        for (j, w) in self.sinr_grid_db.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err((at(0, j + 1), "SINR grid must be strictly increasing".into()));
            }
        }
        if self.xi.len() != self.u_grid.len() {
            return Err((at(self.xi.len(), 0), "row count differs from u grid".into()));
        }
        for (i, row) in self.xi.iter().enumerate() {
            if row.len() != self.sinr_grid_db.len() {
                return Err((at(i, row.len()), "row length differs from SINR grid".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err((at(i, j), format!("similarity {v} outside [0, 1]")));
                }
                if j > 0 && v < row[j - 1] {
                    return Err((at(i, j), "similarity decreases with SINR".into()));
                }
                if i > 0 && v < self.xi[i - 1][j] {
                    return Err((at(i, j), "similarity decreases with u".into()));
                }
            }
        }
        Ok(())
    }

    pub fn u_range(&self) -> (f64, f64) {
        (self.u_grid[0], *self.u_grid.last().unwrap())
    }

    /// Bilinear interpolation; SINR is clamped to the grid, `u` must lie
    /// inside the u grid.
    pub fn similarity(&self, u: f64, sinr_db: f64) -> Result<f64> {
        let (lo, hi) = self.u_range();
        if !(u >= lo && u <= hi) {
            return Err(Error::Domain(format!("u = {u} outside similarity table range [{lo}, {hi}]")));
        }
        let (i0, i1, tu) = bracket(&self.u_grid, u);
        let s = if sinr_db.is_nan() { f64::NEG_INFINITY } else { sinr_db };
        let s = s.clamp(self.sinr_grid_db[0], *self.sinr_grid_db.last().unwrap());
        let (j0, j1, ts) = bracket(&self.sinr_grid_db, s);
        let v00 = self.xi[i0][j0];
        let v01 = self.xi[i0][j1];
        let v10 = self.xi[i1][j0];
        let v11 = self.xi[i1][j1];
        let v = (1.0 - tu) * ((1.0 - ts) * v00 + ts * v01) + tu * ((1.0 - ts) * v10 + ts * v11);
        Ok(v.clamp(0.0, 1.0))
    }

    /// Samples the analytic surrogate onto its grid.
    pub fn from_surrogate(p: &SurrogateParams) -> Result<Self> {
        if !(p.a > 0.0 && p.c > 0.0 && p.u_step > 0.0 && p.sinr_step_db > 0.0) {
            return Err(Error::Config(
                "surrogate a, c and grid steps must be > 0".into(),
            ));
        }
        let u_grid = linspace_steps(p.u_min, p.u_max, p.u_step);
        let sinr = linspace_steps(p.sinr_min_db, p.sinr_max_db, p.sinr_step_db);
        let xi = u_grid
            .iter()
            .map(|&u| sinr.iter().map(|&g| p.eval(u, g)).collect())
            .collect();
        Self::new(u_grid, sinr, xi)
    }

    /// CSV layout: header `label, sinr_0, sinr_1, ...`; each following row
    /// `u, xi_0, xi_1, ...`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u\\sinr_db");
        for g in &self.sinr_grid_db {
            let _ = write!(s, ",{g}");
        }
        s.push('\n');
        for (u, row) in self.u_grid.iter().zip(&self.xi) {
            let _ = write!(s, "{u}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Strict parse with 1-based line/column positions in every error.
    pub fn from_csv_str(text: &str, source_name: &str) -> Result<Self> {
        let err = |line: usize, column: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            column,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or_else(|| err(1, 1, "empty similarity table".into()))?;
        let parse = |line: usize, col: usize, cell: &str| -> Result<f64> {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| err(line, col, format!("expected a number, found `{}`", cell.trim())))?;
            if !v.is_finite() {
                return Err(err(line, col, "non-finite value".into()));
            }
            Ok(v)
        };
        let hcells: Vec<&str> = header.split(',').collect();
        if hcells.len() < 2 {
            return Err(err(hline, 1, "header needs a label cell and at least one SINR value".into()));
        }
        let sinr = hcells[1..]
            .iter()
            .enumerate()
            .map(|(k, c)| parse(hline, k + 2, c))
            .collect::<Result<Vec<_>>>()?;
        for k in 1..sinr.len() {
            if !(sinr[k] > sinr[k - 1]) {
                return Err(err(hline, k + 2, "SINR header must be strictly increasing".into()));
            }
        }
        let mut u_grid = Vec::new();
        let mut xi: Vec<Vec<f64>> = Vec::new();
        let mut row_lines = Vec::new();
        for (ln, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != sinr.len() + 1 {
                return Err(err(
                    ln,
                    cells.len().min(sinr.len() + 1) + 1,
                    format!("expected {} columns, found {}", sinr.len() + 1, cells.len()),
                ));
            }
            let u = parse(ln, 1, cells[0])?;
            if let Some(&prev) = u_grid.last() {
                if !(u > prev) {
                    return Err(err(ln, 1, "u column must be strictly increasing".into()));
                }
            }
            let row = cells[1..]
                .iter()
                .enumerate()
                .map(|(k, c)| parse(ln, k + 2, c))
                .collect::<Result<Vec<_>>>()?;
            u_grid.push(u);
            xi.push(row);
            row_lines.push(ln);
        }
        if u_grid.is_empty() {
            return Err(err(hline + 1, 1, "table has no data rows".into()));
        }
        let model = Self {
            u_grid,
            sinr_grid_db: sinr,
            xi,
        };
        if let Err((cell, msg)) = model.check() {
            let line = row_lines.get(cell.u_index).copied().unwrap_or(hline);
            return Err(err(line, cell.sinr_index + 2, msg));
        }
        Ok(model)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }
}

fn bracket(grid: &[f64], x: f64) -> (usize, usize, f64) {
    if grid.len() == 1 {
        return (0, 0, 0.0);
    }
    let k = grid.partition_point(|&g| g <= x);
    let i1 = k.clamp(1, grid.len() - 1);
    let i0 = i1 - 1;
    let t = ((x - grid[i0]) / (grid[i1] - grid[i0])).clamp(0.0, 1.0);
    (i0, i1, t)
}

/// Surrogate with default parameters.
pub fn default_similarity_model() -> SimilarityModel {
    SimilarityModel::from_surrogate(&SurrogateParams::default())
        .expect("default surrogate satisfies the table invariants")
}

/// Semantic transmission rate in suts/s: `B * (I/L) / u * xi`.
pub fn hsr(cfg: &SemanticConfig, u: f64, xi: f64) -> f64 {
    cfg.bandwidth_hz * hsse(cfg, u, xi)
}

/// Semantic spectral efficiency in suts/s/Hz: `(I/L) / u * xi`.
pub fn hsse(cfg: &SemanticConfig, u: f64, xi: f64) -> f64 {
    cfg.info_per_sentence_ratio / u * xi
}

/// Bit-pipe equivalent of HSSE: Shannon efficiency divided by bits per word,
/// with similarity fixed to 1 (error-free bits).
pub fn bit_equivalent_hsse(sinr_linear: f64, u_bits: f64, ratio: f64) -> f64 {
    (1.0 + sinr_linear.max(0.0)).log2() * ratio / u_bits
}
