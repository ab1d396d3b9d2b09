//! Strip systems assembled from a family of half-period maps between two
//! cross-section frames.
//!
//! Frames are indexed 0 (`p`) and 1 (`q`); frame coordinates are
//! `(s, u) ∈ [−1, 1]²` with `s` along the stable and `u` along the unstable
//! direction. The `m`-th map of the family sends frame `f` to frame `1 − f`.

use super::check::{certify, CertifyConfig, HorseshoeCertificate};
use super::{uniform, CurveGraph, CurveKind, HorseshoeError, MapError, PlanarMap, PlanePoint, Square, Strip, StripSystem};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub trait FrameMapFamily: Send + Sync {
    /// The `m`-th map from frame `from` into the other frame.
    fn map(&self, m: usize, from: usize, su: Vector2<f64>) -> Result<Vector2<f64>, MapError>;

    /// `map(k, from, su)` for `k = 1..=k_max`, stopping after the first error.
    fn map_sequence(&self, from: usize, su: Vector2<f64>, k_max: usize) -> Vec<Result<Vector2<f64>, MapError>> {
        let mut out = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let r = self.map(k, from, su);
            let stop = r.is_err();
            out.push(r);
            if stop {
                break;
            }
        }
        out
    }

    /// Preimage in frame `1 − to` of a point of frame `to`; `u_hint` selects
    /// the branch when the map is not globally injective.
    fn inverse(&self, _m: usize, _to: usize, _su: Vector2<f64>, _u_hint: f64) -> Option<Result<Vector2<f64>, MapError>> {
        None
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub k_max: usize,
    /// Samples along the unstable axis of each frame.
    pub search_samples: usize,
    /// Values of `m` tried beyond the covering threshold.
    pub extra_m: usize,
    /// Samples per strip boundary built from the family.
    pub curve_samples: usize,
    pub bisection_levels: usize,
    pub certify: CertifyConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k_max: 64,
            search_samples: 801,
            extra_m: 3,
            curve_samples: 513,
            bisection_levels: 20,
            certify: CertifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    /// Component of the covering set containing the frame base point.
    Local,
    /// Component away from the base point.
    Excursion,
}

/// An interval of the unstable axis whose image crosses the target frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringRecord {
    pub frame: usize,
    pub k: usize,
    pub kind: CoveringKind,
    pub u_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTrial {
    pub m: usize,
    pub certified: bool,
    pub nu_h: Option<f64>,
    pub nu_v: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub family: String,
    pub k_max: usize,
    /// First coverings found per frame and kind.
    pub coverings: Vec<CoveringRecord>,
    /// First `k` with an excursion covering from `p`.
    pub k1: Option<usize>,
    /// First `k` with an excursion covering from `q`.
    pub k2: Option<usize>,
    /// First `k` with local coverings from both frames.
    pub k3: Option<usize>,
    pub trials: Vec<MTrial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStep {
    Covering,
    Disjointness,
    MapHandle,
    Certification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("strip construction failed at the {step:?} step: {reason}")]
pub struct BuildFailure {
    pub step: BuildStep,
    pub reason: String,
    pub report: SearchReport,
}

/// The `m`-th map of a family as a map between the two squares.
#[derive(Clone)]
pub struct FamilyMap {
    pub family: Arc<dyn FrameMapFamily>,
    pub m: usize,
    /// Frame and branch hint per symbol.
    pub hints: Vec<(usize, f64)>,
}

impl std::fmt::Debug for FamilyMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FamilyMap").field("family", &self.family.describe()).field("m", &self.m).finish()
    }
}

fn to_su(p: &Vector2<f64>) -> Vector2<f64> {
    p.map(|v| 2.0 * v - 1.0)
}

fn to_unit(su: &Vector2<f64>) -> Vector2<f64> {
    su.map(|v| 0.5 * (v + 1.0))
}

impl PlanarMap for FamilyMap {
    fn forward(&self, x: &PlanePoint) -> Result<PlanePoint, MapError> {
        let y = self.family.map(self.m, x.square, to_su(&x.p))?;
        Ok(PlanePoint { square: 1 - x.square, p: to_unit(&y) })
    }

    fn inverse(&self, y: &PlanePoint, symbol: usize) -> Option<Result<PlanePoint, MapError>> {
        let &(from, hint) = self.hints.get(symbol.checked_sub(1)?)?;
        if y.square != 1 - from {
            return Some(Err(MapError::Undefined(format!("symbol {symbol} does not map into square {}", y.square))));
        }
        let r = self.family.inverse(self.m, y.square, to_su(&y.p), hint)?;
        Some(r.map(|su| PlanePoint { square: from, p: to_unit(&su) }))
    }
}

/// A certified strip system built from a map family.
#[derive(Debug, Clone)]
pub struct FlowStrips {
    pub system: StripSystem,
    pub map: FamilyMap,
    pub m: usize,
    pub certificate: HorseshoeCertificate,
    pub report: SearchReport,
}

/// Minimal intervals of the axis samples over which `u'` runs from one side
/// of the target frame to the other through valid images.
fn crossing_components(us: &[f64], imgs: &[Option<Vector2<f64>>]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (i, img) in imgs.iter().enumerate() {
        let Some(y) = img else {
            last = None;
            continue;
        };
        let side = if y[1] <= -1.0 {
            Some(false)
        } else if y[1] >= 1.0 {
            Some(true)
        } else {
            None
        };
        if let Some(hi) = side {
            if let Some((j, prev)) = last {
                if prev != hi {
                    out.push([us[j], us[i]]);
                }
            }
            last = Some((i, hi));
        }
    }
    out
}

fn valid(r: &Result<Vector2<f64>, MapError>) -> Option<Vector2<f64>> {
    match r {
        Ok(y) if y.iter().all(|v| v.is_finite()) && y[0].abs() <= 1.0 => Some(*y),
        _ => None,
    }
}

/// Local and excursion components at one `k` for one frame.
fn classify(comps: &[[f64; 2]]) -> (Option<[f64; 2]>, Option<[f64; 2]>) {
    let local = comps.iter().find(|c| c[0] <= 0.0 && c[1] >= 0.0).copied();
    let excursion = comps
        .iter()
        .filter(|c| !(c[0] <= 0.0 && c[1] >= 0.0))
        .min_by(|a, b| (a[0] + a[1]).abs().partial_cmp(&(b[0] + b[1]).abs()).expect("finite"))
        .copied();
    (local, excursion)
}

struct AxisScan {
    us: Vec<f64>,
    /// `seq[i][k-1]` is the image of sample `i` under the `k`-th map.
    seq: Vec<Vec<Result<Vector2<f64>, MapError>>>,
}

impl AxisScan {
    fn run(family: &dyn FrameMapFamily, frame: usize, cfg: &SearchConfig, k_max: usize) -> Self {
        let n = cfg.search_samples.max(3);
        let us: Vec<f64> = uniform(n).into_iter().map(|t| 2.0 * t - 1.0).collect();
        let seq = cfg.certify.exec.map(&us, |&u| family.map_sequence(frame, Vector2::new(0.0, u), k_max));
        AxisScan { us, seq }
    }

    fn components(&self, k: usize) -> Vec<[f64; 2]> {
        let imgs: Vec<_> = self.seq.iter().map(|s| s.get(k - 1).and_then(valid)).collect();
        crossing_components(&self.us, &imgs)
    }
}

/// Root of `g` in `[a, b]` (sign change required): bisection for `levels`
/// steps, then secant refinement.
fn bracketed_root(g: &dyn Fn(f64) -> Option<f64>, a: f64, b: f64, levels: usize) -> Option<f64> {
    let (mut a, mut b) = (a, b);
    let (mut ga, gb) = (g(a)?, g(b)?);
    // endpoints already on the level set (up to rounding)
    if ga.abs() <= 1e-13 {
        return Some(a);
    }
    if gb.abs() <= 1e-13 {
        return Some(b);
    }
    if (ga < 0.0) == (gb < 0.0) {
        return None;
    }
    for _ in 0..levels {
        let c = 0.5 * (a + b);
        let gc = g(c)?;
        if gc == 0.0 {
            return Some(c);
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
        } else {
            b = c;
        }
    }
    // secant polish inside the final bracket
    let mut gb = g(b)?;
    for _ in 0..40 {
        if (b - a).abs() <= 1e-15 || ga == gb {
            break;
        }
        let c = (b - (gb * (b - a) / (gb - ga))).clamp(a.min(b), a.max(b));
        let gc = g(c)?;
        if gc == 0.0 {
            return Some(c);
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
        } else {
            b = c;
            gb = gc;
        }
        if gc.abs() < 1e-15 {
            return Some(c);
        }
    }
    Some(if ga.abs() < gb.abs() { a } else { b })
}

/// Widens each component by a third of the gap to its neighbours (or to the
/// frame edge), so each bracket holds exactly one branch.
fn brackets(comps: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut sorted: Vec<[f64; 2]> = comps.to_vec();
    sorted.sort_by(|a, b| a[0].partial_cmp(&b[0]).expect("finite"));
    comps
        .iter()
        .map(|c| {
            let below = sorted.iter().filter(|d| d[1] <= c[0]).map(|d| d[1]).fold(-1.0, f64::max);
            let above = sorted.iter().filter(|d| d[0] >= c[1]).map(|d| d[0]).fold(1.0, f64::min);
            [c[0] - (c[0] - below) / 3.0, c[1] + (above - c[1]) / 3.0]
        })
        .collect()
}

struct BranchStrips {
    h: Strip,
    v: Strip,
    hint: f64,
}

fn build_branch(
    family: &dyn FrameMapFamily,
    m: usize,
    frame: usize,
    bracket: [f64; 2],
    cfg: &SearchConfig,
) -> Result<BranchStrips, (BuildStep, String)> {
    let n = cfg.curve_samples.max(super::MIN_CURVE_SAMPLES);
    let levels = cfg.bisection_levels;
    let u_of = |s: f64, level: f64, lo: f64, hi: f64| -> Result<f64, (BuildStep, String)> {
        let g = |u: f64| family.map(m, frame, Vector2::new(s, u)).ok().map(|y| y[1] - level);
        bracketed_root(&g, lo, hi, levels).ok_or_else(|| {
            (BuildStep::Covering, format!("level u' = {level} not bracketed in [{lo}, {hi}] at s = {s} (frame {frame}, m = {m})"))
        })
    };
    let grid = uniform(n);
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for &xi in &grid {
        let s = 2.0 * xi - 1.0;
        let a = u_of(s, -1.0, bracket[0], bracket[1])?;
        let b = u_of(s, 1.0, bracket[0], bracket[1])?;
        lower.push(0.5 * (a.min(b) + 1.0));
        upper.push(0.5 * (a.max(b) + 1.0));
    }
    let bad = |e: HorseshoeError| (BuildStep::Disjointness, e.to_string());
    let h_lo = CurveGraph::new(CurveKind::Horizontal, grid.clone(), lower).map_err(bad)?;
    let h_hi = CurveGraph::new(CurveKind::Horizontal, grid.clone(), upper).map_err(bad)?;
    let h = Strip::new(h_lo, h_hi, frame, 0).map_err(bad)?;

    // images of the vertical edges s = ±1, as graphs over η'
    let mut edges = Vec::new();
    for s in [-1.0, 1.0] {
        let xi = 0.5 * (s + 1.0);
        let (lo, hi) = (2.0 * h.lower.eval(xi) - 1.0, 2.0 * h.upper.eval(xi) - 1.0);
        let mut vals = Vec::with_capacity(n);
        for &eta in &grid {
            let u = u_of(s, 2.0 * eta - 1.0, lo, hi)?;
            let y = family
                .map(m, frame, Vector2::new(s, u))
                .map_err(|e| (BuildStep::MapHandle, e.to_string()))?;
            vals.push(0.5 * (y[0] + 1.0));
        }
        edges.push(CurveGraph::new(CurveKind::Vertical, grid.clone(), vals).map_err(bad)?);
    }
    let (a, b) = (edges.remove(0), edges.remove(0));
    let (v_lo, v_hi) = if a.eval(0.5) <= b.eval(0.5) { (a, b) } else { (b, a) };
    let v = Strip::new(v_lo, v_hi, 1 - frame, 0).map_err(bad)?;
    Ok(BranchStrips { h, v, hint: 0.5 * (bracket[0] + bracket[1]) })
}

fn system_at(
    family: &Arc<dyn FrameMapFamily>,
    m: usize,
    comps: [(Option<[f64; 2]>, Option<[f64; 2]>); 2],
    cfg: &SearchConfig,
) -> Result<(StripSystem, FamilyMap), (BuildStep, String)> {
    let mut hs = Vec::new();
    let mut vs = Vec::new();
    let mut hints = Vec::new();
    for (frame, (local, excursion)) in comps.iter().enumerate() {
        let (Some(local), Some(excursion)) = (local, excursion) else {
            return Err((BuildStep::Covering, format!("frame {frame} lacks a covering at m = {m}")));
        };
        let br = brackets(&[*excursion, *local]);
        for b in br {
            let strips = build_branch(family.as_ref(), m, frame, b, cfg)?;
            hs.push(strips.h);
            vs.push(strips.v);
            hints.push((frame, strips.hint));
        }
    }
    let squares = vec![Square::new("p", [-1.0, -1.0], [2.0, 2.0]), Square::new("q", [-1.0, -1.0], [2.0, 2.0])];
    let system = StripSystem::new(squares, hs, vs).map_err(|e| (BuildStep::Disjointness, e.to_string()))?;
    Ok((system, FamilyMap { family: family.clone(), m, hints }))
}

impl FlowStrips {
    /// Builds and certifies the strip system of the `m`-th map alone.
    pub fn certify_at(
        family: Arc<dyn FrameMapFamily>,
        m: usize,
        cfg: &SearchConfig,
    ) -> Result<(StripSystem, FamilyMap, HorseshoeCertificate), BuildFailure> {
        let fail = |(step, reason): (BuildStep, String)| BuildFailure {
            step,
            reason,
            report: empty_report(family.as_ref(), cfg),
        };
        let comps = [0, 1].map(|f| {
            classify(&single_scan(family.as_ref(), f, m, cfg))
        });
        let (system, map) = system_at(&family, m, comps, cfg).map_err(fail)?;
        let cert = certify(&map, &system, &cfg.certify);
        Ok((system, map, cert))
    }
}

fn single_scan(family: &dyn FrameMapFamily, frame: usize, m: usize, cfg: &SearchConfig) -> Vec<[f64; 2]> {
    let n = cfg.search_samples.max(3);
    let us: Vec<f64> = uniform(n).into_iter().map(|t| 2.0 * t - 1.0).collect();
    let imgs = cfg.certify.exec.map(&us, |&u| valid(&family.map(m, frame, Vector2::new(0.0, u))));
    crossing_components(&us, &imgs)
}

fn empty_report(family: &dyn FrameMapFamily, cfg: &SearchConfig) -> SearchReport {
    SearchReport {
        family: family.describe(),
        k_max: cfg.k_max,
        coverings: Vec::new(),
        k1: None,
        k2: None,
        k3: None,
        trials: Vec::new(),
    }
}

/// Searches for the covering thresholds along both unstable axes, builds the
/// four strips around the excursion and base points of each frame, and
/// certifies the smallest `m` at or above the thresholds that passes.
pub fn build_strips_from_flow(family: Arc<dyn FrameMapFamily>, cfg: &SearchConfig) -> Result<FlowStrips, BuildFailure> {
    let k_max = cfg.k_max.clamp(1, 64);
    let mut report = empty_report(family.as_ref(), cfg);
    report.k_max = k_max;
    let scans = [0, 1].map(|f| AxisScan::run(family.as_ref(), f, cfg, k_max));

    let mut first_local = [None, None];
    let mut first_exc = [None, None];
    for k in 1..=k_max {
        for f in 0..2 {
            let (local, excursion) = classify(&scans[f].components(k));
            if first_local[f].is_none() {
                if let Some(c) = local {
                    first_local[f] = Some(k);
                    report.coverings.push(CoveringRecord { frame: f, k, kind: CoveringKind::Local, u_range: c });
                }
            }
            if first_exc[f].is_none() {
                if let Some(c) = excursion {
                    first_exc[f] = Some(k);
                    report.coverings.push(CoveringRecord { frame: f, k, kind: CoveringKind::Excursion, u_range: c });
                }
            }
        }
        if first_local.iter().chain(&first_exc).all(Option::is_some) {
            break;
        }
    }
    report.k1 = first_exc[0];
    report.k2 = first_exc[1];
    report.k3 = first_local[0].zip(first_local[1]).map(|(a, b)| a.max(b));
    let (Some(k1), Some(k2), Some(k3)) = (report.k1, report.k2, report.k3) else {
        let mut missing = Vec::new();
        for (name, v) in [("excursion from p", report.k1), ("excursion from q", report.k2), ("local", report.k3)] {
            if v.is_none() {
                missing.push(name);
            }
        }
        return Err(BuildFailure {
            step: BuildStep::Covering,
            reason: format!("no covering ({}) up to k = {k_max}", missing.join(", ")),
            report,
        });
    };

    let m0 = k1.max(k2).max(k3);
    let mut last = (BuildStep::Certification, String::from("no m tried"));
    for m in m0..=m0 + cfg.extra_m {
        let comps = [0, 1].map(|f| {
            let c = if m <= k_max { scans[f].components(m) } else { single_scan(family.as_ref(), f, m, cfg) };
            classify(&c)
        });
        match system_at(&family, m, comps, cfg) {
            Err(e) => {
                report.trials.push(MTrial { m, certified: false, nu_h: None, nu_v: None, note: Some(e.1.clone()) });
                last = e;
            }
            Ok((system, map)) => {
                let cert = certify(&map, &system, &cfg.certify);
                let certified = cert.is_certified();
                report.trials.push(MTrial {
                    m,
                    certified,
                    nu_h: Some(cert.nu_h),
                    nu_v: Some(cert.nu_v),
                    note: (!certified).then(|| format!("{:?}", cert.verdict)),
                });
                if certified {
                    return Ok(FlowStrips { system, map, m, certificate: cert, report });
                }
                last = (BuildStep::Certification, format!("certificate failed at m = {m}: {:?}", cert.verdict));
            }
        }
    }
    Err(BuildFailure { step: last.0, reason: last.1, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_find_both_directions() {
        let us: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let imgs: Vec<_> = us.iter().map(|&u| Some(Vector2::new(0.0, 3.0 * u))).collect();
        let c = crossing_components(&us, &imgs);
        assert_eq!(c.len(), 1);
        assert!(c[0][0] < 0.0 && c[0][1] > 0.0);
        let imgs: Vec<_> = us.iter().map(|&u| Some(Vector2::new(0.0, -3.0 * u))).collect();
        assert_eq!(crossing_components(&us, &imgs).len(), 1);
    }

    #[test]
    fn invalid_samples_break_runs() {
        let us: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
        let imgs: Vec<_> =
            us.iter().map(|&u| if u.abs() < 0.05 { None } else { Some(Vector2::new(0.0, 3.0 * u)) }).collect();
        assert!(crossing_components(&us, &imgs).is_empty());
    }

    #[test]
    fn root_polish_is_tight() {
        let g = |u: f64| Some(u * u * u + u - 0.5);
        let r = bracketed_root(&g, 0.0, 1.0, 20).unwrap();
        assert!(g(r).unwrap().abs() < 1e-14);
    }

    #[test]
    fn brackets_stay_apart() {
        let b = brackets(&[[0.4, 0.8], [-0.2, 0.2]]);
        assert!(b[0][0] > b[1][1]);
        assert!(b[1][0] >= -1.0 && b[0][1] <= 1.0);
    }
}
