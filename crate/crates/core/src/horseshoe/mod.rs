//! Strip calculus on unit-normalised squares, the two strip-mapping
//! assumptions, certificates of conjugacy to a subshift of finite type, and
//! shadowing of finite itineraries.
//!
//! All geometry lives in normalised square coordinates `(ξ, η) ∈ [0,1]²`.
//! Horizontal strips are bounded by graphs `η = h(ξ)`, vertical strips by
//! graphs `ξ = v(η)`. Symbol `k` (1-based) owns the horizontal strip `H_k`
//! and its image `V_k = f(H_k)`; the transition matrix is derived from where
//! the strips live: `a_jk = 1` iff `V_j` and `H_k` share a square.

mod build;
mod check;
mod curves;
pub mod export;
mod shadow;
mod transport;

pub use build::{
    build_strips_from_flow, BuildFailure, BuildStep, CoveringKind, CoveringRecord, FamilyMap, FlowStrips, FrameMapFamily, MTrial,
    SearchConfig, SearchReport,
};
pub use check::{
    certify, check_assumption1, check_assumption2, Assumption1Report, Assumption2Report, CertifyConfig,
    FailureReason, HorseshoeCertificate, PairCheck, RatioSample, Verdict,
};
pub use curves::{curve_intersect, nested_limit, Intersection, NestedLimit};
pub use shadow::{
    fixed_point_search, itinerary, periodic_points, shadow, shadow_periodic, PeriodicPoint, ShadowPoint,
};
pub use transport::{pullback_strip, push_forward_strip, TransportMethod, Transported};

use crate::flow::FlowError;
use crate::symbolic::{SymbolicError, TransitionMatrix};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Safety factor applied to the largest sampled slope.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;
/// Minimum number of samples per curve.
pub const MIN_CURVE_SAMPLES: usize = 65;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HorseshoeError {
    #[error("invalid curve: {0}")]
    BadCurve(String),
    #[error("invalid strip: {0}")]
    BadStrip(String),
    #[error("invalid strip system: {0}")]
    BadSystem(String),
    #[error("Lipschitz product {product} is not below 1")]
    LipschitzProduct { product: f64 },
    #[error("intersection iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("strip {level} is not contained in its predecessor")]
    Containment { level: usize },
    #[error("word is not admissible for the certified matrix")]
    Inadmissible,
    #[error("certificate is not certified")]
    NotCertified,
    #[error("nesting broke down at depth {depth}: {reason}")]
    NestingBreakdown { depth: usize, reason: String },
    #[error("iterate {step} left strip {symbol}")]
    ItineraryMismatch { step: usize, symbol: usize },
    #[error("empty preimage: {0}")]
    EmptyPreimage(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("map undefined: {0}")]
    Undefined(String),
    #[error("image is off the frame plane (residual {residual:e} > {limit:e})")]
    OffPlane { residual: f64, limit: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// A point of one of the squares, in normalised coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub square: usize,
    pub p: Vector2<f64>,
}

impl PlanePoint {
    pub fn new(square: usize, xi: f64, eta: f64) -> Self {
        PlanePoint { square, p: Vector2::new(xi, eta) }
    }
}

/// A map between the squares of a strip system.
pub trait PlanarMap: Sync {
    fn forward(&self, x: &PlanePoint) -> Result<PlanePoint, MapError>;

    /// Preimage of `y` lying in the horizontal strip of `symbol`, for maps
    /// that can be inverted directly.
    fn inverse(&self, _y: &PlanePoint, _symbol: usize) -> Option<Result<PlanePoint, MapError>> {
        None
    }
}

/// Rectangle in ambient coordinates that a square normalises.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub name: String,
    pub origin: [f64; 2],
    pub side: [f64; 2],
}

impl Square {
    pub fn new(name: &str, origin: [f64; 2], side: [f64; 2]) -> Self {
        Square { name: name.to_string(), origin, side }
    }

    pub fn unit(name: &str) -> Self {
        Square::new(name, [0.0, 0.0], [1.0, 1.0])
    }

    pub fn to_normalized(&self, a: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((a[0] - self.origin[0]) / self.side[0], (a[1] - self.origin[1]) / self.side[1])
    }

    pub fn to_ambient(&self, p: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.origin[0] + p[0] * self.side[0], self.origin[1] + p[1] * self.side[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// `η = h(ξ)`.
    Horizontal,
    /// `ξ = v(η)`.
    Vertical,
}

/// Piecewise-linear graph over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGraph {
    pub kind: CurveKind,
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub lipschitz: f64,
}

impl CurveGraph {
    pub fn new(kind: CurveKind, params: Vec<f64>, values: Vec<f64>) -> Result<Self, HorseshoeError> {
        if params.len() != values.len() || params.len() < 2 {
            return Err(HorseshoeError::BadCurve("need at least two (param, value) pairs".into()));
        }
        if params.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(HorseshoeError::BadCurve("non-finite sample".into()));
        }
        if params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HorseshoeError::BadCurve("parameters must increase strictly".into()));
        }
        let slope = params
            .windows(2)
            .zip(values.windows(2))
            .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
            .fold(0.0, f64::max);
        Ok(CurveGraph { kind, params, values, lipschitz: LIPSCHITZ_SAFETY * slope })
    }

    /// Samples `f` on `n` uniform parameters in `[0, 1]`.
    pub fn from_fn(kind: CurveKind, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, HorseshoeError> {
        let params = uniform(n.max(2));
        let values = params.iter().map(|&t| f(t)).collect();
        CurveGraph::new(kind, params, values)
    }

    pub fn constant(kind: CurveKind, value: f64, n: usize) -> Self {
        CurveGraph::from_fn(kind, n, |_| value).expect("constant curve is valid")
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Linear interpolation; constant extension outside the sampled range.
    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.params;
        let n = p.len();
        if t <= p[0] {
            return self.values[0];
        }
        if t >= p[n - 1] {
            return self.values[n - 1];
        }
        let i = p.partition_point(|&q| q <= t).clamp(1, n - 1);
        let (t0, t1) = (p[i - 1], p[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] + w * (self.values[i] - self.values[i - 1])
    }

    /// Largest sampled slope (without the safety factor).
    pub fn max_slope(&self) -> f64 {
        self.lipschitz / LIPSCHITZ_SAFETY
    }

    /// `self + t·(other − self)` on the union of both parameter grids.
    pub fn blend(&self, other: &CurveGraph, t: f64) -> Result<CurveGraph, HorseshoeError> {
        let params = merged_params(&self.params, &other.params);
        let values = params.iter().map(|&s| self.eval(s) + t * (other.eval(s) - self.eval(s))).collect();
        CurveGraph::new(self.kind, params, values)
    }
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn merged_params(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a == b {
        return a.to_vec();
    }
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    out
}

/// Region between two graphs of the same kind, `lower < upper` pointwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub kind: CurveKind,
    pub lower: CurveGraph,
    pub upper: CurveGraph,
    pub square: usize,
    pub label: usize,
    pub width: f64,
}

impl Strip {
    pub fn new(lower: CurveGraph, upper: CurveGraph, square: usize, label: usize) -> Result<Self, HorseshoeError> {
        if lower.kind != upper.kind {
            return Err(HorseshoeError::BadStrip("boundary kinds differ".into()));
        }
        let grid = merged_params(&lower.params, &upper.params);
        let mut width: f64 = 0.0;
        for &t in &grid {
            let gap = upper.eval(t) - lower.eval(t);
            if gap <= 0.0 {
                return Err(HorseshoeError::BadStrip(format!("boundaries touch or cross at {t}")));
            }
            width = width.max(gap);
        }
        Ok(Strip { kind: lower.kind, lower, upper, square, label, width })
    }

    /// Horizontal band `lo ≤ η ≤ hi` (or vertical band in ξ).
    pub fn band(kind: CurveKind, lo: f64, hi: f64, square: usize, label: usize, n: usize) -> Result<Self, HorseshoeError> {
        Strip::new(CurveGraph::constant(kind, lo, n), CurveGraph::constant(kind, hi, n), square, label)
    }

    /// Sub-strip between the fractional levels `a < b` of this strip.
    pub fn sub_strip(&self, a: f64, b: f64) -> Result<Strip, HorseshoeError> {
        let lo = self.lower.blend(&self.upper, a)?;
        let hi = self.lower.blend(&self.upper, b)?;
        Strip::new(lo, hi, self.square, self.label)
    }

    pub fn midline(&self) -> CurveGraph {
        self.lower.blend(&self.upper, 0.5).expect("boundaries are valid curves")
    }

    /// (along, across) coordinates of a point relative to the strip kind.
    fn split(&self, p: &Vector2<f64>) -> (f64, f64) {
        match self.kind {
            CurveKind::Horizontal => (p[0], p[1]),
            CurveKind::Vertical => (p[1], p[0]),
        }
    }

    pub fn contains(&self, x: &PlanePoint, tol: f64) -> bool {
        if x.square != self.square {
            return false;
        }
        let (t, v) = self.split(&x.p);
        (-tol..=1.0 + tol).contains(&t) && v >= self.lower.eval(t) - tol && v <= self.upper.eval(t) + tol
    }

    /// Signed distance outside the strip (0 when inside), in the across
    /// coordinate.
    pub fn excess(&self, x: &PlanePoint) -> f64 {
        let (t, v) = self.split(&x.p);
        let along = (-t).max(t - 1.0).max(0.0);
        let across = (self.lower.eval(t) - v).max(v - self.upper.eval(t)).max(0.0);
        along.max(across)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lower.lipschitz.max(self.upper.lipschitz)
    }
}

/// Design constants a layout was constructed to meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripConstants {
    pub mu_h: f64,
    pub mu_v: f64,
    pub nu_h: f64,
    pub nu_v: f64,
}

/// Squares, horizontal strips `H_k`, their images `V_k`, and the derived
/// transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSystem {
    pub squares: Vec<Square>,
    pub h_strips: Vec<Strip>,
    pub v_strips: Vec<Strip>,
    pub pairing: TransitionMatrix,
    pub declared: Option<StripConstants>,
}

impl StripSystem {
    pub fn new(squares: Vec<Square>, h_strips: Vec<Strip>, v_strips: Vec<Strip>) -> Result<Self, HorseshoeError> {
        let m = h_strips.len();
        if m < 2 || v_strips.len() != m {
            return Err(HorseshoeError::BadSystem("need matching H and V strips, at least two symbols".into()));
        }
        for (k, (h, v)) in h_strips.iter().zip(&v_strips).enumerate() {
            if h.kind != CurveKind::Horizontal || v.kind != CurveKind::Vertical {
                return Err(HorseshoeError::BadSystem(format!("symbol {} has strips of the wrong kind", k + 1)));
            }
            if h.square >= squares.len() || v.square >= squares.len() {
                return Err(HorseshoeError::BadSystem(format!("symbol {} refers to a missing square", k + 1)));
            }
        }
        for strips in [&h_strips, &v_strips] {
            for i in 0..m {
                for j in i + 1..m {
                    if strips[i].square == strips[j].square && overlap(&strips[i], &strips[j]) {
                        return Err(HorseshoeError::BadSystem(format!(
                            "strips {} and {} overlap",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        let rows = (0..m)
            .map(|j| (0..m).map(|k| u8::from(v_strips[j].square == h_strips[k].square)).collect())
            .collect();
        let pairing = TransitionMatrix::new(rows)?;
        let mut h_strips = h_strips;
        let mut v_strips = v_strips;
        for (k, s) in h_strips.iter_mut().chain(v_strips.iter_mut()).enumerate() {
            s.label = k % m + 1;
        }
        Ok(StripSystem { squares, h_strips, v_strips, pairing, declared: None })
    }

    pub fn with_declared(mut self, c: StripConstants) -> Self {
        self.declared = Some(c);
        self
    }

    pub fn symbols(&self) -> usize {
        self.h_strips.len()
    }

    pub fn h(&self, symbol: usize) -> &Strip {
        &self.h_strips[symbol - 1]
    }

    pub fn v(&self, symbol: usize) -> &Strip {
        &self.v_strips[symbol - 1]
    }

    /// Square that `H_symbol` maps into.
    pub fn target(&self, symbol: usize) -> usize {
        self.v(symbol).square
    }

    /// Symbol of the horizontal strip containing `x`, if any.
    pub fn h_symbol_of(&self, x: &PlanePoint, tol: f64) -> Option<usize> {
        (1..=self.symbols()).find(|&k| self.h(k).contains(x, tol))
    }

    pub fn mu_h(&self) -> f64 {
        self.h_strips.iter().map(Strip::lipschitz).fold(0.0, f64::max)
    }

    pub fn mu_v(&self) -> f64 {
        self.v_strips.iter().map(Strip::lipschitz).fold(0.0, f64::max)
    }
}

fn overlap(a: &Strip, b: &Strip) -> bool {
    let grid = merged_params(&a.lower.params, &b.lower.params);
    let grid = merged_params(&grid, &a.upper.params);
    let grid = merged_params(&grid, &b.upper.params);
    // disjoint iff one lies strictly below the other everywhere
    let below = grid.iter().all(|&t| a.upper.eval(t) < b.lower.eval(t));
    let above = grid.iter().all(|&t| b.upper.eval(t) < a.lower.eval(t));
    !(below || above)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_is_max_gap() {
        let lo = CurveGraph::from_fn(CurveKind::Horizontal, 65, |x| 0.1 * x).unwrap();
        let hi = CurveGraph::constant(CurveKind::Horizontal, 0.3, 65);
        let s = Strip::new(lo, hi, 0, 1).unwrap();
        assert!((s.width - 0.3).abs() < 1e-15);
        let sub = s.sub_strip(0.25, 0.75).unwrap();
        assert!(sub.width <= s.width);
        assert!((sub.width - 0.15).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_uses_safety_factor() {
        let c = CurveGraph::from_fn(CurveKind::Vertical, 65, |y| 0.2 * y + 0.1).unwrap();
        assert!((c.lipschitz - 0.22).abs() < 1e-12);
        assert!((c.eval(0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn crossing_boundaries_rejected() {
        let lo = CurveGraph::from_fn(CurveKind::Horizontal, 65, |x| x).unwrap();
        let hi = CurveGraph::constant(CurveKind::Horizontal, 0.5, 65);
        assert!(Strip::new(lo, hi, 0, 1).is_err());
    }

    #[test]
    fn pairing_is_derived_from_squares() {
        let n = 65;
        let h = |sq, lo, k| Strip::band(CurveKind::Horizontal, lo, lo + 0.25, sq, k, n).unwrap();
        let v = |sq, lo, k| Strip::band(CurveKind::Vertical, lo, lo + 0.25, sq, k, n).unwrap();
        let sys = StripSystem::new(
            vec![Square::unit("D1"), Square::unit("D2")],
            vec![h(0, 0.05, 1), h(0, 0.55, 2), h(1, 0.05, 3), h(1, 0.55, 4)],
            vec![v(1, 0.05, 1), v(1, 0.55, 2), v(0, 0.05, 3), v(0, 0.55, 4)],
        )
        .unwrap();
        assert_eq!(sys.pairing, TransitionMatrix::a4());
    }
}
