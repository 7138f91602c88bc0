//! Large-scale (path loss + shadowing) and small-scale fading for every
//! signal and interference path of the V2V/V2I topology.
//!
//! All gains in a [`ChannelRealization`] are linear power gains that already
//! include antenna gains and the receiver noise figure, so received power is
//! simply `P_tx * g`.

use std::io::Write;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::LinkTopology;

const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub carrier_ghz: f64,
    pub bs_height_m: f64,
    pub vehicle_height_m: f64,
    pub bs_antenna_gain_db: f64,
    pub vehicle_antenna_gain_db: f64,
    pub bs_noise_figure_db: f64,
    pub vehicle_noise_figure_db: f64,
    pub v2v_shadow_std_db: f64,
    pub v2i_shadow_std_db: f64,
    pub v2v_decorrelation_m: f64,
    pub v2i_decorrelation_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 2.0,
            bs_height_m: 25.0,
            vehicle_height_m: 1.5,
            bs_antenna_gain_db: 8.0,
            vehicle_antenna_gain_db: 3.0,
            bs_noise_figure_db: 5.0,
            vehicle_noise_figure_db: 9.0,
            v2v_shadow_std_db: 3.0,
            v2i_shadow_std_db: 8.0,
            v2v_decorrelation_m: 10.0,
            v2i_decorrelation_m: 50.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_ghz", self.carrier_ghz),
            ("bs_height_m", self.bs_height_m),
            ("v2v_decorrelation_m", self.v2v_decorrelation_m),
            ("v2i_decorrelation_m", self.v2i_decorrelation_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("channel.{name} must be > 0, got {v}")));
            }
        }
        if !(self.vehicle_height_m.is_finite() && self.vehicle_height_m > 1.0) {
            return Err(Error::Config(format!(
                "channel.vehicle_height_m must exceed the 1 m effective-height offset, got {}",
                self.vehicle_height_m
            )));
        }
        for (name, v) in [
            ("v2v_shadow_std_db", self.v2v_shadow_std_db),
            ("v2i_shadow_std_db", self.v2i_shadow_std_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("channel.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Macro-cell vehicle-to-BS path loss in dB for a 3D distance in metres.
pub fn v2i_pathloss(d3d: f64) -> Result<f64> {
    if !(d3d.is_finite() && d3d > 0.0) {
        return Err(Error::Domain(format!("V2I distance must be > 0, got {d3d}")));
    }
    Ok(128.1 + 37.6 * (d3d / 1000.0).log10())
}

/// LOS leg of the urban-micro (Manhattan grid) vehicle-to-vehicle model.
///
/// Distances below 3 m are evaluated at 3 m. Beyond the breakpoint
/// `4 h'_tx h'_rx fc / c` (effective heights `h - 1`) the two-slope form applies.
pub fn v2v_los_pathloss(d: f64, fc_ghz: f64, vehicle_height_m: f64) -> f64 {
    let h_eff = vehicle_height_m - 1.0;
    let d_bp = 4.0 * h_eff * h_eff * fc_ghz * 1e9 / SPEED_OF_LIGHT;
    let fc_term = (fc_ghz / 5.0).log10();
    let d = d.max(3.0);
    if d < d_bp {
        22.7 * d.log10() + 41.0 + 20.0 * fc_term
    } else {
        40.0 * d.log10() + 9.45 - 2.0 * 17.3 * h_eff.log10() + 2.7 * fc_term
    }
}

/// NLOS path loss for a route whose first leg is `d_a` and second leg `d_b`.
fn v2v_nlos_leg(d_a: f64, d_b: f64, fc_ghz: f64, vehicle_height_m: f64) -> f64 {
    let n_j = (2.8 - 0.0024 * d_b).max(1.84);
    v2v_los_pathloss(d_a, fc_ghz, vehicle_height_m) + 20.0 - 12.5 * n_j
        + 10.0 * n_j * d_b.log10()
        + 3.0 * (fc_ghz / 5.0).log10()
}

/// V2V path loss in dB with the LOS/NLOS switch at `min(d_hor, d_ver) < 7 m`.
/// The NLOS branch takes the better of the two street-corner orderings, so
/// the result is symmetric in swapping the two legs.
pub fn v2v_pathloss(d_hor: f64, d_ver: f64, fc_ghz: f64) -> Result<f64> {
    v2v_pathloss_with_height(d_hor, d_ver, fc_ghz, ChannelConfig::default().vehicle_height_m)
}

pub fn v2v_pathloss_with_height(
    d_hor: f64,
    d_ver: f64,
    fc_ghz: f64,
    vehicle_height_m: f64,
) -> Result<f64> {
    if !(d_hor.is_finite() && d_ver.is_finite() && d_hor >= 0.0 && d_ver >= 0.0) {
        return Err(Error::Domain(format!(
            "V2V distances must be finite and >= 0, got ({d_hor}, {d_ver})"
        )));
    }
    if d_hor == 0.0 && d_ver == 0.0 {
        return Err(Error::Domain("V2V transmitter and receiver coincide".into()));
    }
    if d_hor.min(d_ver) < 7.0 {
        Ok(v2v_los_pathloss(d_hor.hypot(d_ver), fc_ghz, vehicle_height_m))
    } else {
        Ok(v2v_nlos_leg(d_hor, d_ver, fc_ghz, vehicle_height_m)
            .min(v2v_nlos_leg(d_ver, d_hor, fc_ghz, vehicle_height_m)))
    }
}

/// One AR(1) step of log-normal shadowing after moving `delta_d` metres.
pub fn update_shadowing<R: Rng + ?Sized>(
    old_db: f64,
    delta_d: f64,
    d_dec: f64,
    sigma: f64,
    rng: &mut R,
) -> f64 {
    let x: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
    if delta_d == 0.0 {
        return old_db;
    }
    let rho = (-delta_d / d_dec).exp();
    rho * old_db + (1.0 - (-2.0 * delta_d / d_dec).exp()).sqrt() * x
}

/// Rayleigh power fading factor, `Exp(1)`.
pub fn sample_fast_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let s: f64 = Exp1.sample(rng);
    // Exp1 never returns 0 in practice; keep the support strictly positive
    s.max(f64::MIN_POSITIVE)
}

/// Shadowing for every vehicle pair and every vehicle-to-BS path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingState {
    /// Symmetric `n x n`; the diagonal is unused.
    pub v2v_shadow_db: Vec<Vec<f64>>,
    pub v2i_shadow_db: Vec<f64>,
    pub last_positions: Vec<[f64; 2]>,
}

impl FadingState {
    pub fn new<R: Rng + ?Sized>(positions: &[[f64; 2]], cfg: &ChannelConfig, rng: &mut R) -> Self {
        let n = positions.len();
        let mut v2v = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let s = rng.sample::<f64, _>(StandardNormal) * cfg.v2v_shadow_std_db;
                v2v[i][j] = s;
                v2v[j][i] = s;
            }
        }
        let v2i = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * cfg.v2i_shadow_std_db)
            .collect();
        Self {
            v2v_shadow_db: v2v,
            v2i_shadow_db: v2i,
            last_positions: positions.to_vec(),
        }
    }

    /// Correlated update after vehicles moved to `positions`. V2V paths use
    /// the sum of both endpoint displacements.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        positions: &[[f64; 2]],
        cfg: &ChannelConfig,
        rng: &mut R,
    ) -> Result<()> {
        let n = positions.len();
        if n != self.last_positions.len() {
            return Err(Error::Usage(format!(
                "fading state tracks {} vehicles, got {n} positions",
                self.last_positions.len()
            )));
        }
        let moved: Vec<f64> = positions
            .iter()
            .zip(&self.last_positions)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let s = update_shadowing(
                    self.v2v_shadow_db[i][j],
                    moved[i] + moved[j],
                    cfg.v2v_decorrelation_m,
                    cfg.v2v_shadow_std_db,
                    rng,
                );
                self.v2v_shadow_db[i][j] = s;
                self.v2v_shadow_db[j][i] = s;
            }
        }
        for i in 0..n {
            self.v2i_shadow_db[i] = update_shadowing(
                self.v2i_shadow_db[i],
                moved[i],
                cfg.v2i_decorrelation_m,
                cfg.v2i_shadow_std_db,
                rng,
            );
        }
        self.last_positions = positions.to_vec();
        Ok(())
    }
}

/// Large-scale attenuation of one path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathAttenuation {
    pub pathloss_db: f64,
    pub shadow_db: f64,
    /// `pathloss + shadow - antenna gains + receiver noise figure`.
    pub net_db: f64,
}

impl PathAttenuation {
    pub fn linear(&self) -> f64 {
        10f64.powf(-self.net_db / 10.0)
    }
}

/// Frequency-independent attenuation for every path family, indexed like
/// [`ChannelRealization`] without the sub-band axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    /// `[w]` V2I user w -> BS
    pub v2i: Vec<PathAttenuation>,
    /// `[q]` V2V tx q -> its rx
    pub v2v: Vec<PathAttenuation>,
    /// `[q]` V2V tx q -> BS
    pub v2v_to_bs: Vec<PathAttenuation>,
    /// `[w][q]` V2I user w -> V2V rx q
    pub v2i_to_v2v: Vec<Vec<PathAttenuation>>,
    /// `[q'][q]` V2V tx q' -> V2V rx q (diagonal unused)
    pub cross: Vec<Vec<PathAttenuation>>,
}

fn v2i_path(
    tx: [f64; 2],
    bs: [f64; 2],
    shadow_db: f64,
    cfg: &ChannelConfig,
) -> Result<PathAttenuation> {
    let dh = cfg.bs_height_m - cfg.vehicle_height_m;
    let d3d = ((tx[0] - bs[0]).powi(2) + (tx[1] - bs[1]).powi(2) + dh * dh).sqrt();
    let pathloss_db = v2i_pathloss(d3d)?;
    let net_db = pathloss_db + shadow_db - cfg.vehicle_antenna_gain_db - cfg.bs_antenna_gain_db
        + cfg.bs_noise_figure_db;
    Ok(PathAttenuation {
        pathloss_db,
        shadow_db,
        net_db,
    })
}

fn v2v_path(
    tx: [f64; 2],
    rx: [f64; 2],
    shadow_db: f64,
    cfg: &ChannelConfig,
) -> Result<PathAttenuation> {
    // co-located vehicles are evaluated at a millimetre to stay in the domain
    let d_hor = (tx[0] - rx[0]).abs();
    let d_ver = (tx[1] - rx[1]).abs();
    let (d_hor, d_ver) = if d_hor == 0.0 && d_ver == 0.0 {
        (1e-3, 0.0)
    } else {
        (d_hor, d_ver)
    };
    let pathloss_db = v2v_pathloss_with_height(d_hor, d_ver, cfg.carrier_ghz, cfg.vehicle_height_m)?;
    let net_db = pathloss_db + shadow_db - 2.0 * cfg.vehicle_antenna_gain_db
        + cfg.vehicle_noise_figure_db;
    Ok(PathAttenuation {
        pathloss_db,
        shadow_db,
        net_db,
    })
}

/// Evaluates path loss and shadowing for every path of `topology`.
pub fn large_scale(
    topology: &LinkTopology,
    positions: &[[f64; 2]],
    fading: &FadingState,
    cfg: &ChannelConfig,
) -> Result<LargeScale> {
    let n = positions.len();
    let ids = topology
        .v2i_users
        .iter()
        .chain(topology.v2v_pairs.iter().flat_map(|(a, b)| [a, b]));
    if let Some(bad) = ids.copied().find(|&i| i >= n) {
        return Err(Error::Usage(format!(
            "topology references vehicle {bad} but only {n} positions were given"
        )));
    }
    if fading.v2i_shadow_db.len() != n {
        return Err(Error::Usage("fading state does not match vehicle count".into()));
    }
    let bs = topology.bs_position;
    let v2i = topology
        .v2i_users
        .iter()
        .map(|&u| v2i_path(positions[u], bs, fading.v2i_shadow_db[u], cfg))
        .collect::<Result<Vec<_>>>()?;
    let v2v = topology
        .v2v_pairs
        .iter()
        .map(|&(t, r)| v2v_path(positions[t], positions[r], fading.v2v_shadow_db[t][r], cfg))
        .collect::<Result<Vec<_>>>()?;
    let v2v_to_bs = topology
        .v2v_pairs
        .iter()
        .map(|&(t, _)| v2i_path(positions[t], bs, fading.v2i_shadow_db[t], cfg))
        .collect::<Result<Vec<_>>>()?;
    let v2i_to_v2v = topology
        .v2i_users
        .iter()
        .map(|&u| {
            topology
                .v2v_pairs
                .iter()
                .map(|&(_, r)| v2v_path(positions[u], positions[r], fading.v2v_shadow_db[u][r], cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cross = topology
        .v2v_pairs
        .iter()
        .enumerate()
        .map(|(qi, &(t, _))| {
            topology
                .v2v_pairs
                .iter()
                .enumerate()
                .map(|(qj, &(_, r))| {
                    if qi == qj {
                        Ok(PathAttenuation::default())
                    } else {
                        v2v_path(positions[t], positions[r], fading.v2v_shadow_db[t][r], cfg)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LargeScale {
        v2i,
        v2v,
        v2v_to_bs,
        v2i_to_v2v,
        cross,
    })
}

/// Per-sub-band linear gains for one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// `[w]` V2I user w -> BS on its own sub-band w.
    pub g_v2i: Vec<f64>,
    /// `[q, w]`
    pub g_v2v: Array2<f64>,
    /// `[q, w]`
    pub g_v2v_to_bs: Array2<f64>,
    /// `[w, q]` V2I user w -> V2V rx q on sub-band w.
    pub g_v2i_to_v2v: Array2<f64>,
    /// `[q', q, w]`; entries with `q' == q` are zero and unused.
    pub g_cross: Array3<f64>,
}

impl ChannelRealization {
    pub fn num_v2v(&self) -> usize {
        self.g_v2v.nrows()
    }

    pub fn num_bands(&self) -> usize {
        self.g_v2i.len()
    }
}

/// Draws fresh fast fading on top of `ls`. The number of draws depends only on
/// `(Q, W)`: `W + 3QW + Q(Q-1)W`.
pub fn realize<R: Rng + ?Sized>(ls: &LargeScale, rng: &mut R) -> ChannelRealization {
    let w = ls.v2i.len();
    let q = ls.v2v.len();
    let g_v2i = ls
        .v2i
        .iter()
        .map(|p| p.linear() * sample_fast_fading(rng))
        .collect();
    let mut g_v2v = Array2::zeros((q, w));
    for qi in 0..q {
        for b in 0..w {
            g_v2v[[qi, b]] = ls.v2v[qi].linear() * sample_fast_fading(rng);
        }
    }
    let mut g_v2v_to_bs = Array2::zeros((q, w));
    for qi in 0..q {
        for b in 0..w {
            g_v2v_to_bs[[qi, b]] = ls.v2v_to_bs[qi].linear() * sample_fast_fading(rng);
        }
    }
    let mut g_v2i_to_v2v = Array2::zeros((w, q));
    for b in 0..w {
        for qi in 0..q {
            g_v2i_to_v2v[[b, qi]] = ls.v2i_to_v2v[b][qi].linear() * sample_fast_fading(rng);
        }
    }
    let mut g_cross = Array3::zeros((q, q, w));
    for src in 0..q {
        for dst in 0..q {
            if src == dst {
                continue;
            }
            for b in 0..w {
                g_cross[[src, dst, b]] = ls.cross[src][dst].linear() * sample_fast_fading(rng);
            }
        }
    }
    ChannelRealization {
        g_v2i,
        g_v2v,
        g_v2v_to_bs,
        g_v2i_to_v2v,
        g_cross,
    }
}

/// Large-scale evaluation plus one fast-fading draw.
pub fn build_channel_realization<R: Rng + ?Sized>(
    topology: &LinkTopology,
    positions: &[[f64; 2]],
    fading: &FadingState,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let ls = large_scale(topology, positions, fading, cfg)?;
    Ok(realize(&ls, rng))
}

/// Writes one row per path and sub-band:
/// `path_id, pathloss_db, shadow_db, fast_linear, total_linear`.
pub fn write_realization_csv<W: Write>(
    out: W,
    ls: &LargeScale,
    real: &ChannelRealization,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["path_id", "pathloss_db", "shadow_db", "fast_linear", "total_linear"])?;
    let mut row = |id: String, p: &PathAttenuation, total: f64| -> Result<()> {
        let fast = total / p.linear();
        wtr.write_record([
            id,
            p.pathloss_db.to_string(),
            p.shadow_db.to_string(),
            fast.to_string(),
            total.to_string(),
        ])?;
        Ok(())
    };
    let w = real.num_bands();
    let q = real.num_v2v();
    for b in 0..w {
        row(format!("v2i[{b}]"), &ls.v2i[b], real.g_v2i[b])?;
    }
    for qi in 0..q {
        for b in 0..w {
            row(format!("v2v[{qi}][{b}]"), &ls.v2v[qi], real.g_v2v[[qi, b]])?;
        }
    }
    for qi in 0..q {
        for b in 0..w {
            row(format!("v2v_to_bs[{qi}][{b}]"), &ls.v2v_to_bs[qi], real.g_v2v_to_bs[[qi, b]])?;
        }
    }
    for b in 0..w {
        for qi in 0..q {
            row(format!("v2i_to_v2v[{b}][{qi}]"), &ls.v2i_to_v2v[b][qi], real.g_v2i_to_v2v[[b, qi]])?;
        }
    }
    for src in 0..q {
        for dst in 0..q {
            if src == dst {
                continue;
            }
            for b in 0..w {
                row(format!("cross[{src}][{dst}][{b}]"), &ls.cross[src][dst], real.g_cross[[src, dst, b]])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
