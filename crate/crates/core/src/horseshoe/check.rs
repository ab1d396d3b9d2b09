//! The strip-mapping assumptions and the certificate built from them.

use super::shadow::{shadow_unchecked, ShadowPoint};
use super::transport::{pullback_strip, push_forward_strip, TransportMethod};
use super::{uniform, CurveGraph, HorseshoeError, PlanarMap, PlanePoint, Strip, StripSystem};
use crate::exec::Exec;
use crate::symbolic::TransitionMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Geometric tolerance in normalised square units.
    pub tol_geom: f64,
    pub n_boundary_samples: usize,
    /// Equal slices per strip used as Assumption-2 test strips.
    pub n_substrips: usize,
    /// Additional seeded random sub-strips per strip.
    pub n_random_substrips: usize,
    pub seed: u64,
    /// Samples per transported curve.
    pub curve_samples: usize,
    /// Required margin below 1 for the contraction ratios.
    pub margin: f64,
    /// Shadow every admissible word up to this length as a spot check.
    pub spot_check_len: usize,
    pub exec: Exec,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            tol_geom: 1e-6,
            n_boundary_samples: 129,
            n_substrips: 4,
            n_random_substrips: 4,
            seed: 0,
            curve_samples: 129,
            margin: 1e-3,
            spot_check_len: 3,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub symbol: usize,
    pub target_square: usize,
    pub square_ok: bool,
    /// Largest distance of a horizontal-boundary image from the square edge
    /// it lands on (or from the extent of `V`).
    pub horizontal_error: f64,
    /// Largest distance of a vertical-boundary image from the boundary graph
    /// of `V` it lands on.
    pub vertical_error: f64,
    pub monotone: bool,
    pub winding: i64,
    pub passed: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub tol_geom: f64,
    pub n_boundary_samples: usize,
    pub pairs: Vec<PairCheck>,
    pub passed: bool,
    /// What the sampled check stands in for.
    pub proxy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    /// Symbol of the strip the test strip was cut from.
    pub source: usize,
    /// Band of the test strip inside its parent, as fractions.
    pub band: [f64; 2],
    /// Symbol whose strip the transported strip lies in.
    pub through: usize,
    pub ratio: Option<f64>,
    pub lipschitz: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub nu_h: f64,
    pub nu_v: f64,
    pub margin: f64,
    pub horizontal: Vec<RatioSample>,
    pub vertical: Vec<RatioSample>,
    pub methods: Vec<TransportMethod>,
    pub square_mismatches: usize,
    /// Largest Lipschitz estimate among transported boundaries.
    pub mu_h_transported: f64,
    pub mu_v_transported: f64,
    pub seed: u64,
    /// The condition is applied on every square, not only one side.
    pub symmetric_reading: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Assumption1,
    Assumption2,
    Lipschitz,
    Shadowing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Verdict {
    Certified,
    Failed { reasons: Vec<FailureReason> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub word: Vec<usize>,
    pub ok: bool,
    pub point: Option<PlanePoint>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeCertificate {
    pub verdict: Verdict,
    pub matrix: TransitionMatrix,
    pub mu_h: f64,
    pub mu_v: f64,
    pub nu_h: f64,
    pub nu_v: f64,
    pub lipschitz_safety: f64,
    pub assumption1: Assumption1Report,
    pub assumption2: Assumption2Report,
    pub spot_checks: Vec<SpotCheck>,
    pub config: CertifyConfig,
}

impl HorseshoeCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn failed_because(&self, reason: FailureReason) -> bool {
        matches!(&self.verdict, Verdict::Failed { reasons } if reasons.contains(&reason))
    }
}

fn winding_number(loop_pts: &[(f64, f64)], center: (f64, f64)) -> i64 {
    let mut total = 0.0;
    for k in 0..loop_pts.len() {
        let a = loop_pts[k];
        let b = loop_pts[(k + 1) % loop_pts.len()];
        let t0 = (a.1 - center.1).atan2(a.0 - center.0);
        let t1 = (b.1 - center.1).atan2(b.0 - center.0);
        let mut d = t1 - t0;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    (total / (2.0 * PI)).round() as i64
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
}

fn check_pair(map: &dyn PlanarMap, sys: &StripSystem, j: usize, n: usize, tol: f64) -> PairCheck {
    let (h, v) = (sys.h(j), sys.v(j));
    let target = sys.target(j);
    let mut notes = Vec::new();
    let mut square_ok = true;
    let image = |xi: f64, eta: f64, notes: &mut Vec<String>, square_ok: &mut bool| -> Option<(f64, f64)> {
        match map.forward(&PlanePoint::new(h.square, xi, eta)) {
            Ok(y) => {
                if y.square != target {
                    *square_ok = false;
                }
                Some((y.p[0], y.p[1]))
            }
            Err(e) => {
                notes.push(format!("map failed at ({xi}, {eta}): {e}"));
                None
            }
        }
    };
    let ts = uniform(n.max(2));
    let mut sides: Vec<Vec<(f64, f64)>> = Vec::new();
    // bottom, right, top, left: a closed loop around H
    let bottom: Vec<_> = ts.iter().map(|&t| (t, h.lower.eval(t))).collect();
    let right: Vec<_> = ts.iter().map(|&t| (1.0, h.lower.eval(1.0) + t * (h.upper.eval(1.0) - h.lower.eval(1.0)))).collect();
    let top: Vec<_> = ts.iter().rev().map(|&t| (t, h.upper.eval(t))).collect();
    let left: Vec<_> = ts.iter().rev().map(|&t| (0.0, h.lower.eval(0.0) + t * (h.upper.eval(0.0) - h.lower.eval(0.0)))).collect();
    for side in [&bottom, &right, &top, &left] {
        let imgs: Option<Vec<_>> = side.iter().map(|&(x, y)| image(x, y, &mut notes, &mut square_ok)).collect();
        match imgs {
            Some(i) => sides.push(i),
            None => {
                return PairCheck {
                    symbol: j,
                    target_square: target,
                    square_ok,
                    horizontal_error: f64::INFINITY,
                    vertical_error: f64::INFINITY,
                    monotone: false,
                    winding: 0,
                    passed: false,
                    notes,
                };
            }
        }
    }
    if !square_ok {
        notes.push(format!("image of H_{j} does not lie in square {target}"));
    }

    // horizontal boundaries -> square edges η' ∈ {0,1}, within the extent of V
    let mut horizontal_error: f64 = 0.0;
    let mut edges = Vec::new();
    for side in [&sides[0], &sides[2]] {
        let edge = if side[0].1 < 0.5 { 0.0 } else { 1.0 };
        edges.push(edge);
        for &(xi, eta) in side.iter() {
            let off_edge = (eta - edge).abs();
            let off_extent = (v.lower.eval(eta) - xi).max(xi - v.upper.eval(eta)).max(0.0);
            horizontal_error = horizontal_error.max(off_edge).max(off_extent);
        }
    }
    if edges[0] == edges[1] {
        notes.push("both horizontal boundaries land on the same edge".into());
        horizontal_error = horizontal_error.max(1.0);
    }

    // vertical boundaries -> boundary graphs of V
    let mut vertical_error: f64 = 0.0;
    let mut chosen = Vec::new();
    for side in [&sides[1], &sides[3]] {
        let (xi0, eta0) = side[side.len() / 2];
        let use_lower = (xi0 - v.lower.eval(eta0)).abs() <= (xi0 - v.upper.eval(eta0)).abs();
        chosen.push(use_lower);
        let curve: &CurveGraph = if use_lower { &v.lower } else { &v.upper };
        for &(xi, eta) in side.iter() {
            vertical_error = vertical_error.max((xi - curve.eval(eta)).abs());
        }
    }
    if chosen[0] == chosen[1] {
        notes.push("both vertical boundaries land on the same boundary of V".into());
        vertical_error = vertical_error.max(1.0);
    }

    let monotone = strictly_monotone(&sides[0].iter().map(|p| p.0).collect::<Vec<_>>())
        && strictly_monotone(&sides[2].iter().map(|p| p.0).collect::<Vec<_>>())
        && strictly_monotone(&sides[1].iter().map(|p| p.1).collect::<Vec<_>>())
        && strictly_monotone(&sides[3].iter().map(|p| p.1).collect::<Vec<_>>());
    if !monotone {
        notes.push("boundary image is not injective on samples".into());
    }
    let center = ((v.lower.eval(0.5) + v.upper.eval(0.5)) / 2.0, 0.5);
    let loop_pts: Vec<(f64, f64)> = sides.iter().flat_map(|s| s.iter().copied()).collect();
    let winding = winding_number(&loop_pts, center);
    if winding.abs() != 1 {
        notes.push(format!("boundary image winds {winding} times around V_{j}"));
    }
    let passed =
        square_ok && horizontal_error <= tol && vertical_error <= tol && monotone && winding.abs() == 1;
    PairCheck { symbol: j, target_square: target, square_ok, horizontal_error, vertical_error, monotone, winding, passed, notes }
}

/// Boundary correspondence of every pair `(H_j, V_j)`: horizontal boundaries
/// of `H_j` land on the horizontal edges spanned by `V_j`, vertical
/// boundaries on the boundary graphs of `V_j`, with injective sampled
/// boundary images winding once around `V_j`.
pub fn check_assumption1(map: &dyn PlanarMap, sys: &StripSystem, n_boundary_samples: usize, tol_geom: f64) -> Assumption1Report {
    let pairs: Vec<PairCheck> =
        (1..=sys.symbols()).map(|j| check_pair(map, sys, j, n_boundary_samples, tol_geom)).collect();
    let passed = pairs.iter().all(|p| p.passed);
    Assumption1Report {
        tol_geom,
        n_boundary_samples,
        pairs,
        passed,
        proxy: "homeomorphism checked by boundary correspondence, sampled injectivity and degree-1 winding".into(),
    }
}

fn test_bands(cfg: &CertifyConfig, salt: u64) -> Vec<[f64; 2]> {
    let mut bands = vec![[0.0, 1.0]];
    let n = cfg.n_substrips.max(1);
    for i in 0..n {
        bands.push([i as f64 / n as f64, (i + 1) as f64 / n as f64]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    for _ in 0..cfg.n_random_substrips {
        let a: f64 = rng.gen_range(0.0..0.9);
        let b: f64 = rng.gen_range(a + 0.05..=1.0f64.min(a + 0.6));
        bands.push([a, b]);
    }
    bands
}

/// Contraction of transported test strips: for horizontal strips `H` inside
/// the `H`-strips of a square, `d(f⁻¹(H) ∩ H_j) / d(H)` for every `j`
/// mapping into that square; dually `d(f(V ∩ H_j)) / d(V)`. Applied on all
/// squares.
pub fn check_assumption2(map: &dyn PlanarMap, sys: &StripSystem, cfg: &CertifyConfig) -> Assumption2Report {
    let m = sys.symbols();
    let mut h_jobs = Vec::new();
    let mut v_jobs = Vec::new();
    for k in 1..=m {
        for band in test_bands(cfg, k as u64) {
            for j in 1..=m {
                if sys.target(j) == sys.h(k).square {
                    h_jobs.push((k, band, j));
                }
                if sys.h(j).square == sys.v(k).square {
                    v_jobs.push((k, band, j));
                }
            }
        }
    }
    let n = cfg.curve_samples;
    let run = |strip: Result<Strip, HorseshoeError>,
               transport: &dyn Fn(&Strip) -> Result<super::transport::Transported, HorseshoeError>|
     -> (Option<f64>, Option<f64>, Option<String>, Option<TransportMethod>, usize) {
        let s = match strip {
            Ok(s) => s,
            Err(e) => return (None, None, Some(e.to_string()), None, 0),
        };
        match transport(&s) {
            Ok(t) => (Some(t.strip.width / s.width), Some(t.strip.lipschitz()), None, Some(t.method), t.square_mismatches),
            Err(e) => (None, None, Some(e.to_string()), None, 0),
        }
    };
    let h_out = cfg.exec.map(&h_jobs, |&(k, band, j)| {
        run(sys.h(k).sub_strip(band[0], band[1]), &|s| pullback_strip(map, sys, j, s, n))
    });
    let v_out = cfg.exec.map(&v_jobs, |&(k, band, j)| {
        run(sys.v(k).sub_strip(band[0], band[1]), &|s| push_forward_strip(map, sys, j, s, n))
    });
    let mut methods = Vec::new();
    let mut mismatches = 0;
    let mut collect = |jobs: &[(usize, [f64; 2], usize)], out: Vec<(Option<f64>, Option<f64>, Option<String>, Option<TransportMethod>, usize)>| {
        jobs.iter()
            .zip(out)
            .map(|(&(source, band, through), (ratio, lipschitz, error, method, mm))| {
                if let Some(me) = method {
                    if !methods.contains(&me) {
                        methods.push(me);
                    }
                }
                mismatches += mm;
                RatioSample { source, band, through, ratio, lipschitz, error }
            })
            .collect::<Vec<_>>()
    };
    let horizontal = collect(&h_jobs, h_out);
    let vertical = collect(&v_jobs, v_out);
    let max_of = |s: &[RatioSample], f: fn(&RatioSample) -> Option<f64>| s.iter().filter_map(f).fold(0.0, f64::max);
    let nu_h = max_of(&horizontal, |r| r.ratio);
    let nu_v = max_of(&vertical, |r| r.ratio);
    let failures = horizontal.iter().chain(&vertical).filter(|r| r.error.is_some()).count();
    let passed = failures == 0 && !horizontal.is_empty() && !vertical.is_empty() && nu_h < 1.0 - cfg.margin && nu_v < 1.0 - cfg.margin;
    Assumption2Report {
        nu_h,
        nu_v,
        margin: cfg.margin,
        mu_h_transported: max_of(&horizontal, |r| r.lipschitz),
        mu_v_transported: max_of(&vertical, |r| r.lipschitz),
        horizontal,
        vertical,
        methods,
        square_mismatches: mismatches,
        seed: cfg.seed,
        symmetric_reading: true,
        passed,
    }
}

/// Runs both assumption checks, the Lipschitz gate `μ_v·μ_h < 1` and, when
/// those pass, shadowing spot checks on all short admissible words.
pub fn certify(map: &dyn PlanarMap, sys: &StripSystem, cfg: &CertifyConfig) -> HorseshoeCertificate {
    let a1 = check_assumption1(map, sys, cfg.n_boundary_samples, cfg.tol_geom);
    let a2 = check_assumption2(map, sys, cfg);
    let mu_h = sys.mu_h().max(a2.mu_h_transported);
    let mu_v = sys.mu_v().max(a2.mu_v_transported);
    let mut reasons = Vec::new();
    if !a1.passed {
        reasons.push(FailureReason::Assumption1);
    }
    if !a2.passed {
        reasons.push(FailureReason::Assumption2);
    }
    if mu_h * mu_v >= 1.0 {
        reasons.push(FailureReason::Lipschitz);
    }
    let mut spot_checks = Vec::new();
    if reasons.is_empty() {
        let words: Vec<_> = (1..=cfg.spot_check_len).flat_map(|n| sys.pairing.admissible_words(n)).collect();
        let results: Vec<Result<ShadowPoint, HorseshoeError>> =
            cfg.exec.map(&words, |w| shadow_unchecked(map, sys, w, cfg.tol_geom, cfg.curve_samples));
        for (w, r) in words.iter().zip(results) {
            spot_checks.push(match r {
                Ok(sp) => SpotCheck { word: w.symbols().to_vec(), ok: true, point: Some(sp.point), error: None },
                Err(e) => SpotCheck { word: w.symbols().to_vec(), ok: false, point: None, error: Some(e.to_string()) },
            });
        }
        if spot_checks.iter().any(|s| !s.ok) {
            reasons.push(FailureReason::Shadowing);
        }
    }
    let verdict = if reasons.is_empty() { Verdict::Certified } else { Verdict::Failed { reasons } };
    HorseshoeCertificate {
        verdict,
        matrix: sys.pairing.clone(),
        mu_h,
        mu_v,
        nu_h: a2.nu_h,
        nu_v: a2.nu_v,
        lipschitz_safety: super::LIPSCHITZ_SAFETY,
        assumption1: a1,
        assumption2: a2,
        spot_checks,
        config: *cfg,
    }
}
