//! Parameter sweeps over the ODE-backed return maps: the devil's staircase of
//! drift slopes over α = a/b, and Arnold-tongue scans over (α, ε).

use crate::circlemap::{
    has_certificate, rotation_number, FlatSpotMap, MonotoneFamily, RotationResult, Spot,
};
use crate::error::{CellflowError, Result};
use crate::hamflow::ForcingParams;
use crate::poincare::{inverse_map_q, locate_flat_spots, return_map_p, FlatSpotData};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

/// The inverse return map Q for fixed (a, b, ε) wrapped as a flat-spot circle
/// map. Lift evaluations integrate the reduced ODE backward, so results are
/// memoized (keyed by the argument's bit pattern).
pub struct DynamicsMap {
    params: ForcingParams,
    flat: FlatSpotData,
    spots: Vec<Spot>,
    lambda: f64,
    memo: Mutex<HashMap<u64, f64>>,
}

impl DynamicsMap {
    pub fn new(params: ForcingParams) -> Result<Self> {
        let flat = locate_flat_spots(&params)?;
        let spots = flat
            .spots
            .iter()
            .map(|s| Spot {
                lo: s.lo,
                hi: s.hi,
                height: s.height,
            })
            .collect();
        // Q expands by at least 1/(max P') and P is an ε-contraction off the
        // spots, so 1/(1−ε) is a safe analytic floor.
        let lambda = 1.0 / (1.0 - params.epsilon).min(1.0 - 1e-12);
        Ok(DynamicsMap {
            params,
            flat,
            spots,
            lambda,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn params(&self) -> &ForcingParams {
        &self.params
    }

    pub fn flat_data(&self) -> &FlatSpotData {
        &self.flat
    }

    /// Tighten the expansion bound empirically: λ = 1/max_z P'(z) over a sample
    /// of off-spot points.
    pub fn refine_lambda(&mut self, samples: usize) -> Result<f64> {
        let mut max_dp: f64 = 0.0;
        for i in 0..samples {
            let z = (i as f64 + 0.5) / samples as f64;
            match return_map_p(z, &self.params) {
                Ok(s) => max_dp = max_dp.max(s.derivative),
                Err(CellflowError::SeparatrixHit { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        if max_dp > 0.0 && max_dp < 1.0 {
            self.lambda = 1.0 / max_dp;
        }
        Ok(self.lambda)
    }
}

impl FlatSpotMap for DynamicsMap {
    fn lift(&self, x: f64) -> Result<f64> {
        let key = x.to_bits();
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = inverse_map_q(x, &self.params, &self.flat)?;
        self.memo.lock().unwrap().insert(key, v);
        Ok(v)
    }
    fn spots(&self) -> &[Spot] {
        &self.spots
    }
    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// The one-parameter family s ↦ Q at a = −s with b, ε fixed. Heights increase
/// with s (the rigid part of Q shifts by (b − a)/(2b)), so this is a monotone
/// family in the sense of Definition 1.
pub struct DynamicsFamily {
    pub b: f64,
    pub epsilon: f64,
    /// Range of a (positive); the family parameter is s = −a.
    pub a_range: (f64, f64),
    nu: f64,
}

impl DynamicsFamily {
    pub fn new(b: f64, epsilon: f64, a_range: (f64, f64)) -> Result<Self> {
        if !(a_range.0 > 0.0 && a_range.1 > a_range.0) {
            return Err(CellflowError::Validation(
                "DynamicsFamily needs 0 < a_min < a_max".into(),
            ));
        }
        Ok(DynamicsFamily {
            b,
            epsilon,
            a_range,
            // Heights move at least as fast as the rigid shift d/ds[(b+s)/(2b)]
            // = 1/(2b), damped by the contraction; keep a conservative floor.
            nu: 0.1 / (2.0 * b),
        })
    }

    /// Finite-difference estimate of the height speed min_j d b̃_j/ds at s.
    pub fn estimate_nu(&self, s: f64, ds: f64) -> Result<f64> {
        let m1 = self.map_at(s)?;
        let m2 = self.map_at(s + ds)?;
        let mut min_speed = f64::INFINITY;
        for (a, b) in m1.spots().iter().zip(m2.spots().iter()) {
            min_speed = min_speed.min((b.height - a.height) / ds);
        }
        Ok(min_speed)
    }
}

impl MonotoneFamily for DynamicsFamily {
    type Map = DynamicsMap;
    fn map_at(&self, s: f64) -> Result<DynamicsMap> {
        DynamicsMap::new(ForcingParams::new(-s, self.b, self.epsilon)?)
    }
    fn s_range(&self) -> (f64, f64) {
        (-self.a_range.1, -self.a_range.0)
    }
    fn nu(&self) -> f64 {
        self.nu
    }
}

/// Staircase sweep configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaircaseConfig {
    pub b: f64,
    pub epsilon: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub count: usize,
    #[serde(default = "default_q_max")]
    pub q_max: u32,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    /// Bisect plateau boundaries between adjacent grid points to this width in
    /// α (0 disables refinement).
    #[serde(default)]
    pub refine_width: f64,
}

fn default_q_max() -> u32 {
    40
}
fn default_n_max() -> u32 {
    400
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseRow {
    pub alpha: f64,
    pub s: f64,
    pub rho_kind: String,
    pub p: Option<i64>,
    pub q: Option<u32>,
    pub rho_lo: Option<f64>,
    pub rho_hi: Option<f64>,
    pub m: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StaircaseTable {
    pub config: StaircaseConfig,
    pub rows: Vec<StaircaseRow>,
    /// Refined plateau boundaries in α: ((p, q), (alpha_lo, alpha_hi)).
    pub plateaus: Vec<((i64, u32), (f64, f64))>,
}

/// Drift slope of the y = const-slope channel walk: m = 1 − 2ρ(Q) (Theorem 3).
pub fn drift_from_rho(rho_q: f64) -> f64 {
    1.0 - 2.0 * rho_q
}

fn staircase_row(alpha: f64, cfg: &StaircaseConfig) -> StaircaseRow {
    let a = alpha * cfg.b;
    let s = -a;
    let run = || -> Result<RotationResult> {
        let params = ForcingParams::new(a, cfg.b, cfg.epsilon)?;
        let map = DynamicsMap::new(params)?;
        rotation_number(&map, cfg.q_max, cfg.n_max)
    };
    match run() {
        Ok(RotationResult::Rational { p, q, .. }) => {
            let v = p as f64 / q as f64;
            StaircaseRow {
                alpha,
                s,
                rho_kind: "rational".into(),
                p: Some(p),
                q: Some(q),
                rho_lo: Some(v),
                rho_hi: Some(v),
                m: Some(drift_from_rho(v)),
                status: "ok".into(),
            }
        }
        Ok(RotationResult::Interval { lo, hi, .. }) => StaircaseRow {
            alpha,
            s,
            rho_kind: "interval".into(),
            p: None,
            q: None,
            rho_lo: Some(lo),
            rho_hi: Some(hi),
            m: Some(drift_from_rho(0.5 * (lo + hi))),
            status: "ok".into(),
        },
        Err(e) => StaircaseRow {
            alpha,
            s,
            rho_kind: "error".into(),
            p: None,
            q: None,
            rho_lo: None,
            rho_hi: None,
            m: None,
            status: e.to_string(),
        },
    }
}

/// Sweep ρ(Q) over an α grid (rows in deterministic grid order; failed rows are
/// kept with their error in `status`).
pub fn staircase_sweep(cfg: &StaircaseConfig) -> Result<StaircaseTable> {
    if cfg.count < 2 {
        return Err(CellflowError::Validation("staircase needs count >= 2".into()));
    }
    if !(cfg.alpha_min > 0.0 && cfg.alpha_max > cfg.alpha_min) {
        return Err(CellflowError::Validation(
            "staircase needs 0 < alpha_min < alpha_max".into(),
        ));
    }
    let alphas: Vec<f64> = (0..cfg.count)
        .map(|i| {
            cfg.alpha_min
                + (cfg.alpha_max - cfg.alpha_min) * i as f64 / (cfg.count - 1) as f64
        })
        .collect();
    let rows: Vec<StaircaseRow> = alphas
        .par_iter()
        .map(|&alpha| staircase_row(alpha, cfg))
        .collect();

    let mut plateaus: Vec<((i64, u32), (f64, f64))> = Vec::new();
    if cfg.refine_width > 0.0 {
        // Group consecutive rows sharing a certified rational and bisect the
        // boundary of each group against its neighbors.
        let cert_at = |alpha: f64, p: i64, q: u32| -> bool {
            ForcingParams::new(alpha * cfg.b, cfg.b, cfg.epsilon)
                .and_then(DynamicsMap::new)
                .and_then(|m| has_certificate(&m, p, q))
                .unwrap_or(false)
        };
        let mut i = 0;
        while i < rows.len() {
            let (p, q) = match (rows[i].p, rows[i].q) {
                (Some(p), Some(q)) => (p, q),
                _ => {
                    i += 1;
                    continue;
                }
            };
            let mut j = i;
            while j + 1 < rows.len() && rows[j + 1].p == Some(p) && rows[j + 1].q == Some(q) {
                j += 1;
            }
            let mut lo = alphas[i];
            if i > 0 {
                let (mut out, mut inn) = (alphas[i - 1], alphas[i]);
                while inn - out > cfg.refine_width {
                    let mid = 0.5 * (out + inn);
                    if cert_at(mid, p, q) {
                        inn = mid;
                    } else {
                        out = mid;
                    }
                }
                lo = inn;
            }
            let mut hi = alphas[j];
            if j + 1 < rows.len() {
                let (mut inn, mut out) = (alphas[j], alphas[j + 1]);
                while out - inn > cfg.refine_width {
                    let mid = 0.5 * (inn + out);
                    if cert_at(mid, p, q) {
                        inn = mid;
                    } else {
                        out = mid;
                    }
                }
                hi = inn;
            }
            plateaus.push(((p, q), (lo, hi)));
            i = j + 1;
        }
    }
    Ok(StaircaseTable {
        config: cfg.clone(),
        rows,
        plateaus,
    })
}

/// Tongue scan configuration: classify ρ(Q) on an (α, ε) grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TongueConfig {
    pub b: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_count: usize,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub epsilon_count: usize,
    #[serde(default = "default_q_max")]
    pub q_max: u32,
    #[serde(default = "default_n_max")]
    pub n_max: u32,
    /// Bisection width in α for tongue boundaries (0 disables).
    #[serde(default)]
    pub refine_width: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TongueCell {
    pub alpha: f64,
    pub epsilon: f64,
    pub rho_kind: String,
    pub p: Option<i64>,
    pub q: Option<u32>,
    pub rho: Option<f64>,
    pub status: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TongueRegion {
    pub p: i64,
    pub q: u32,
    /// Per-ε slices: (epsilon, alpha_lo, alpha_hi).
    pub slices: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TongueScan {
    pub config: TongueConfig,
    pub cells: Vec<TongueCell>,
    pub regions: Vec<TongueRegion>,
}

/// Scan ρ(Q) over an (α, ε) grid and delimit, row by row in ε, the α-extent of
/// each mode-locked rational (the Arnold tongues of §5).
pub fn tongue_scan(cfg: &TongueConfig) -> Result<TongueScan> {
    if cfg.alpha_count < 2 || cfg.epsilon_count < 1 {
        return Err(CellflowError::Validation(
            "tongue scan needs alpha_count >= 2 and epsilon_count >= 1".into(),
        ));
    }
    let alphas: Vec<f64> = (0..cfg.alpha_count)
        .map(|i| {
            cfg.alpha_min
                + (cfg.alpha_max - cfg.alpha_min) * i as f64 / (cfg.alpha_count - 1) as f64
        })
        .collect();
    let epsilons: Vec<f64> = (0..cfg.epsilon_count)
        .map(|i| {
            if cfg.epsilon_count == 1 {
                cfg.epsilon_min
            } else {
                cfg.epsilon_min
                    + (cfg.epsilon_max - cfg.epsilon_min) * i as f64
                        / (cfg.epsilon_count - 1) as f64
            }
        })
        .collect();
    let grid: Vec<(f64, f64)> = epsilons
        .iter()
        .flat_map(|&e| alphas.iter().map(move |&al| (al, e)))
        .collect();
    let cells: Vec<TongueCell> = grid
        .par_iter()
        .map(|&(alpha, eps)| {
            let sub = StaircaseConfig {
                b: cfg.b,
                epsilon: eps,
                alpha_min: alpha,
                alpha_max: alpha + 1.0,
                count: 2,
                q_max: cfg.q_max,
                n_max: cfg.n_max,
                refine_width: 0.0,
            };
            let row = staircase_row(alpha, &sub);
            TongueCell {
                alpha,
                epsilon: eps,
                rho_kind: row.rho_kind,
                p: row.p,
                q: row.q,
                rho: row.rho_lo.map(|lo| 0.5 * (lo + row.rho_hi.unwrap_or(lo))),
                status: row.status,
            }
        })
        .collect();

    // Group locked cells per ε row into α-slices, then collect slices by p/q.
    let mut slices: HashMap<(i64, u32), Vec<(f64, f64, f64)>> = HashMap::new();
    for (ei, &eps) in epsilons.iter().enumerate() {
        let row = &cells[ei * alphas.len()..(ei + 1) * alphas.len()];
        let mut i = 0;
        while i < row.len() {
            if let (Some(p), Some(q)) = (row[i].p, row[i].q) {
                let mut j = i;
                while j + 1 < row.len() && row[j + 1].p == Some(p) && row[j + 1].q == Some(q) {
                    j += 1;
                }
                let (mut lo, mut hi) = (alphas[i], alphas[j]);
                if cfg.refine_width > 0.0 {
                    let cert_at = |alpha: f64| -> bool {
                        ForcingParams::new(alpha * cfg.b, cfg.b, eps)
                            .and_then(DynamicsMap::new)
                            .and_then(|m| has_certificate(&m, p, q))
                            .unwrap_or(false)
                    };
                    if i > 0 {
                        let (mut out, mut inn) = (alphas[i - 1], alphas[i]);
                        while inn - out > cfg.refine_width {
                            let mid = 0.5 * (out + inn);
                            if cert_at(mid) {
                                inn = mid;
                            } else {
                                out = mid;
                            }
                        }
                        lo = inn;
                    }
                    if j + 1 < row.len() {
                        let (mut inn, mut out) = (alphas[j], alphas[j + 1]);
                        while out - inn > cfg.refine_width {
                            let mid = 0.5 * (inn + out);
                            if cert_at(mid) {
                                inn = mid;
                            } else {
                                out = mid;
                            }
                        }
                        hi = inn;
                    }
                }
                slices.entry((p, q)).or_default().push((eps, lo, hi));
                i = j + 1;
            } else {
                i += 1;
            }
        }
    }
    let mut regions: Vec<TongueRegion> = slices
        .into_iter()
        .map(|((p, q), mut v)| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            TongueRegion { p, q, slices: v }
        })
        .collect();
    regions.sort_by(|a, b| {
        (a.p as f64 / a.q as f64)
            .total_cmp(&(b.p as f64 / b.q as f64))
            .then(a.q.cmp(&b.q))
    });
    Ok(TongueScan {
        config: cfg.clone(),
        cells,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ForcingParams {
        ForcingParams::new(0.05, 0.05, 1.0 / 25.0).unwrap()
    }

    #[test]
    fn dynamics_map_is_flat_spot_map() {
        let map = DynamicsMap::new(params()).unwrap();
        assert_eq!(map.spots().len(), 2);
        assert!(map.lambda() > 1.0);
        // Spot membership agrees with the underlying flat data.
        let s = map.spots()[0];
        let mid = 0.5 * (s.lo + s.hi);
        let (j, h) = map.spot_at(mid).unwrap();
        assert_eq!(j, 0);
        assert!((h - s.height).abs() < 1e-14);
    }

    #[test]
    fn lift_memoization_consistent() {
        let map = DynamicsMap::new(params()).unwrap();
        let a = map.lift(0.3).unwrap();
        let b = map.lift(0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equal_forcing_locks_at_zero() {
        // a = b gives rigid shift 0; ρ(Q) = 0 and drift m = 1 (pure channel
        // drift along the diagonal).
        let map = DynamicsMap::new(params()).unwrap();
        let r = rotation_number(&map, 20, 100).unwrap();
        match r {
            RotationResult::Rational { p, q, .. } => {
                assert_eq!((p, q), (0, 1));
                assert_eq!(drift_from_rho(0.0), 1.0);
            }
            _ => panic!("expected locked rotation, got {r:?}"),
        }
    }

    #[test]
    fn dynamics_family_heights_increase_with_s() {
        let fam = DynamicsFamily::new(0.05, 1.0 / 25.0, (0.02, 0.08)).unwrap();
        let nu = fam.estimate_nu(-0.05, 1e-4).unwrap();
        assert!(nu > 0.0, "height speed {nu} not positive");
    }

    #[test]
    fn small_staircase_sweep_columns_and_order() {
        let cfg = StaircaseConfig {
            b: 0.05,
            epsilon: 1.0 / 25.0,
            alpha_min: 0.8,
            alpha_max: 1.2,
            count: 5,
            q_max: 12,
            n_max: 60,
            refine_width: 0.0,
        };
        let table = staircase_sweep(&cfg).unwrap();
        assert_eq!(table.rows.len(), 5);
        for (i, row) in table.rows.iter().enumerate() {
            let expect = 0.8 + 0.4 * i as f64 / 4.0;
            assert!((row.alpha - expect).abs() < 1e-12);
            assert!((row.s + row.alpha * cfg.b).abs() < 1e-12);
        }
        // α = 1 is the middle of the ρ = 0 tongue.
        let mid = &table.rows[2];
        assert_eq!(mid.rho_kind, "rational");
        assert_eq!((mid.p, mid.q), (Some(0), Some(1)));
        assert!((mid.m.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = StaircaseConfig {
            b: 0.05,
            epsilon: 1.0 / 25.0,
            alpha_min: 0.9,
            alpha_max: 1.1,
            count: 4,
            q_max: 8,
            n_max: 40,
            refine_width: 0.0,
        };
        let t1 = staircase_sweep(&cfg).unwrap();
        let t2 = staircase_sweep(&cfg).unwrap();
        for (a, b) in t1.rows.iter().zip(t2.rows.iter()) {
            assert_eq!(a.rho_lo, b.rho_lo);
            assert_eq!(a.m, b.m);
        }
    }
}
