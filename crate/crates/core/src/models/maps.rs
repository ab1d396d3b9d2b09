//! Planar horseshoe models and the synthetic half-period map family.

use crate::horseshoe::{
    CurveGraph, CurveKind, FrameMapFamily, HorseshoeError, MapError, PlanarMap, PlanePoint, Square, Strip,
    StripConstants, StripSystem,
};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

const CURVE_SAMPLES: usize = 129;

/// `H = {band[0] ≤ η ≤ band[1]}` of square `from`, mapped affinely onto the
/// vertical strip `image[0] ≤ ξ ≤ image[1]` of square `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub from: usize,
    pub band: [f64; 2],
    pub to: usize,
    pub image: [f64; 2],
}

/// One affine branch per horizontal strip:
/// `(ξ, η) ↦ (c₀ + (c₁−c₀)(ξ + tilt·(η′−½)), η′)` with
/// `η′ = (η − b₀)/(b₁ − b₀)`. Off the strips, the branch of the nearest
/// strip in the same square is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffine {
    pub squares: Vec<Square>,
    pub pieces: Vec<AffinePiece>,
    pub tilt: f64,
}

impl PiecewiseAffine {
    fn piece_for(&self, x: &PlanePoint) -> Option<&AffinePiece> {
        let dist = |p: &AffinePiece| (p.band[0] - x.p[1]).max(x.p[1] - p.band[1]).max(0.0);
        self.pieces
            .iter()
            .filter(|p| p.from == x.square)
            .min_by(|a, b| dist(a).partial_cmp(&dist(b)).expect("finite"))
    }

    fn apply(&self, pc: &AffinePiece, p: &Vector2<f64>) -> Vector2<f64> {
        let eta = (p[1] - pc.band[0]) / (pc.band[1] - pc.band[0]);
        let xi = pc.image[0] + (pc.image[1] - pc.image[0]) * (p[0] + self.tilt * (eta - 0.5));
        Vector2::new(xi, eta)
    }

    /// The exact strips: horizontal bands and their affine images.
    pub fn strip_system(&self) -> Result<StripSystem, HorseshoeError> {
        let mut hs = Vec::new();
        let mut vs = Vec::new();
        for (k, pc) in self.pieces.iter().enumerate() {
            hs.push(Strip::band(CurveKind::Horizontal, pc.band[0], pc.band[1], pc.from, k + 1, CURVE_SAMPLES)?);
            let edge = |xi: f64| {
                CurveGraph::from_fn(CurveKind::Vertical, CURVE_SAMPLES, |eta| {
                    pc.image[0] + (pc.image[1] - pc.image[0]) * (xi + self.tilt * (eta - 0.5))
                })
            };
            vs.push(Strip::new(edge(0.0)?, edge(1.0)?, pc.to, k + 1)?);
        }
        let sys = StripSystem::new(self.squares.clone(), hs, vs)?;
        let height = self.pieces.iter().map(|p| p.band[1] - p.band[0]).fold(0.0, f64::max);
        let width = self.pieces.iter().map(|p| p.image[1] - p.image[0]).fold(0.0, f64::max);
        let tilt_slope = width * self.tilt.abs();
        Ok(sys.with_declared(StripConstants { mu_h: 0.0, mu_v: tilt_slope, nu_h: height, nu_v: width }))
    }
}

impl PlanarMap for PiecewiseAffine {
    fn forward(&self, x: &PlanePoint) -> Result<PlanePoint, MapError> {
        let pc = self.piece_for(x).ok_or_else(|| MapError::Undefined(format!("no branch on square {}", x.square)))?;
        Ok(PlanePoint { square: pc.to, p: self.apply(pc, &x.p) })
    }

    fn inverse(&self, y: &PlanePoint, symbol: usize) -> Option<Result<PlanePoint, MapError>> {
        let pc = self.pieces.get(symbol.checked_sub(1)?)?;
        if y.square != pc.to {
            return Some(Err(MapError::Undefined(format!("branch {symbol} does not reach square {}", y.square))));
        }
        let eta = y.p[1];
        let xi = (y.p[0] - pc.image[0]) / (pc.image[1] - pc.image[0]) - self.tilt * (eta - 0.5);
        Some(Ok(PlanePoint::new(pc.from, xi, pc.band[0] + eta * (pc.band[1] - pc.band[0]))))
    }
}

/// The two-square horseshoe: `D₁ = [−2,−1]×[0,1]`, `D₂ = [1,2]×[0,1]`,
/// bands `[0.05, 0.30]` and `[0.55, 0.80]` in both directions, contraction and
/// expansion factor 4, pairing matrix A.
pub fn make_affine_model(tilt: f64) -> Result<(PiecewiseAffine, StripSystem), HorseshoeError> {
    let bands = [[0.05, 0.30], [0.55, 0.80]];
    let mut pieces = Vec::new();
    for (from, to) in [(0, 1), (1, 0)] {
        for b in bands {
            pieces.push(AffinePiece { from, band: b, to, image: b });
        }
    }
    let map = PiecewiseAffine {
        squares: vec![Square::new("D1", [-2.0, 0.0], [1.0, 1.0]), Square::new("D2", [1.0, 0.0], [1.0, 1.0])],
        pieces,
        tilt,
    };
    let sys = map.strip_system()?;
    Ok((map, sys))
}

/// Three squares `P, Q, R` carrying eight strips whose pairing is matrix B:
/// strips 1, 2 in `P`, 3–6 in `Q`, 7, 8 in `R`; strips 1, 2, 7, 8 map into
/// `Q`, 3, 4 into `P`, 5, 6 into `R`. All factors are 5.
pub fn make_two_orbit_layout() -> Result<(PiecewiseAffine, StripSystem), HorseshoeError> {
    let (p, q, r) = (0, 1, 2);
    let pr = [[0.1, 0.3], [0.6, 0.8]];
    let qb = [[0.02, 0.22], [0.27, 0.47], [0.52, 0.72], [0.77, 0.97]];
    let pieces = vec![
        AffinePiece { from: p, band: pr[0], to: q, image: qb[0] },
        AffinePiece { from: p, band: pr[1], to: q, image: qb[1] },
        AffinePiece { from: q, band: qb[0], to: p, image: pr[0] },
        AffinePiece { from: q, band: qb[1], to: p, image: pr[1] },
        AffinePiece { from: q, band: qb[2], to: r, image: pr[0] },
        AffinePiece { from: q, band: qb[3], to: r, image: pr[1] },
        AffinePiece { from: r, band: pr[0], to: q, image: qb[2] },
        AffinePiece { from: r, band: pr[1], to: q, image: qb[3] },
    ];
    let map = PiecewiseAffine {
        squares: vec![
            Square::new("P", [0.0, 0.0], [1.0, 1.0]),
            Square::new("Q", [2.0, 0.0], [1.0, 1.0]),
            Square::new("R", [4.0, 0.0], [1.0, 1.0]),
        ],
        pieces,
        tilt: 0.0,
    };
    let sys = map.strip_system()?;
    Ok((map, sys))
}

/// The identity on a strip system's squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl PlanarMap for IdentityMap {
    fn forward(&self, x: &PlanePoint) -> Result<PlanePoint, MapError> {
        Ok(*x)
    }

    fn inverse(&self, y: &PlanePoint, _symbol: usize) -> Option<Result<PlanePoint, MapError>> {
        Some(Ok(*y))
    }
}

/// A smooth family of maps between two frames in `(s, u)` coordinates
/// standing in for half-period flow maps. With `L = λᵐ`, `K = κᵐ` and
/// `w(t) = t + knob·c·(t³ − t)`:
///
/// * near the base point (`u < local_limit`):
///   `u′ = w(L·u + b·s²)`, `s′ = K·s·(1 + knob·s²/3) + knob·u′²/5`;
/// * on the excursion (`u ≥ local_limit`): `u′ = w(−L·(u − u₀) + b·s²)` and
///   `s′` as above shifted by `σ`,
///
/// with `b = 0.3·knob`. The same formula is used in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHalfPeriod {
    pub lambda: f64,
    pub kappa: f64,
    pub u0: f64,
    pub sigma: f64,
    pub c: f64,
    pub knob: f64,
    pub local_limit: f64,
}

impl Default for SyntheticHalfPeriod {
    fn default() -> Self {
        SyntheticHalfPeriod { lambda: 5.0, kappa: 0.2, u0: 0.6, sigma: -0.65, c: 1.8, knob: 0.1, local_limit: 0.3 }
    }
}

/// Solves `g(t) = y` for increasing `g` by bracketing and bisection.
fn invert_increasing(g: impl Fn(f64) -> f64, y: f64) -> f64 {
    let (mut a, mut b) = (-1.0, 1.0);
    while g(a) > y {
        a *= 2.0;
    }
    while g(b) < y {
        b *= 2.0;
    }
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if c == a || c == b {
            break;
        }
        if g(c) < y {
            a = c;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}

impl SyntheticHalfPeriod {
    pub fn with_knob(knob: f64) -> Self {
        SyntheticHalfPeriod { knob, ..Default::default() }
    }

    fn w(&self, t: f64) -> f64 {
        t + self.knob * self.c * (t * t * t - t)
    }

    fn stable(&self, k: f64, s: f64, u1: f64) -> f64 {
        k * s * (1.0 + self.knob * s * s / 3.0) + self.knob * 0.2 * u1 * u1
    }

    fn bend(&self) -> f64 {
        0.3 * self.knob
    }

    /// Checks that `w` and the stable factor are increasing.
    pub fn validate(&self) -> Result<(), super::ModelError> {
        use super::ModelError::Range;
        if !(self.knob >= 0.0 && self.knob * self.c < 1.0) {
            return Err(Range { name: "knob", value: self.knob, range: "[0, 1/c)" });
        }
        if !(self.lambda > 1.0) {
            return Err(Range { name: "lambda", value: self.lambda, range: "(1, inf)" });
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Range { name: "kappa", value: self.kappa, range: "(0, 1)" });
        }
        Ok(())
    }

    /// Frame squares in `(s, u)` coordinates.
    pub fn squares() -> Vec<Square> {
        vec![Square::new("p", [-1.0, -1.0], [2.0, 2.0]), Square::new("q", [-1.0, -1.0], [2.0, 2.0])]
    }
}

impl FrameMapFamily for SyntheticHalfPeriod {
    fn map(&self, m: usize, _from: usize, su: Vector2<f64>) -> Result<Vector2<f64>, MapError> {
        let (l, k) = (self.lambda.powi(m as i32), self.kappa.powi(m as i32));
        let (s, u) = (su[0], su[1]);
        let (arg, shift) = if u < self.local_limit {
            (l * u + self.bend() * s * s, 0.0)
        } else {
            (-l * (u - self.u0) + self.bend() * s * s, self.sigma)
        };
        let u1 = self.w(arg);
        Ok(Vector2::new(self.stable(k, s, u1) + shift, u1))
    }

    fn inverse(&self, m: usize, _to: usize, su: Vector2<f64>, u_hint: f64) -> Option<Result<Vector2<f64>, MapError>> {
        let (l, k) = (self.lambda.powi(m as i32), self.kappa.powi(m as i32));
        let (s1, u1) = (su[0], su[1]);
        let local = u_hint < self.local_limit;
        let shift = if local { 0.0 } else { self.sigma };
        let s = invert_increasing(|s| self.stable(k, s, u1) + shift, s1);
        let arg = invert_increasing(|t| self.w(t), u1) - self.bend() * s * s;
        let u = if local { arg / l } else { self.u0 - arg / l };
        Some(Ok(Vector2::new(s, u)))
    }

    fn describe(&self) -> String {
        format!(
            "synthetic half-period family (lambda={}, kappa={}, u0={}, sigma={}, c={}, knob={}, local_limit={})",
            self.lambda, self.kappa, self.u0, self.sigma, self.c, self.knob, self.local_limit
        )
    }
}

/// The synthetic family with the given perturbation strength.
pub fn make_synthetic_halfperiod(knob: f64) -> Result<SyntheticHalfPeriod, super::ModelError> {
    let f = SyntheticHalfPeriod::with_knob(knob);
    f.validate()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_branches_hit_their_images() {
        let (map, sys) = make_affine_model(0.0).unwrap();
        for k in 1..=4 {
            let h = sys.h(k);
            let corner = PlanePoint::new(h.square, 0.0, h.lower.eval(0.0));
            let y = map.forward(&corner).unwrap();
            assert_eq!(y.square, sys.target(k));
            assert!((y.p[0] - sys.v(k).lower.eval(0.0)).abs() < 1e-15);
            assert!(y.p[1].abs() < 1e-15);
        }
    }

    #[test]
    fn affine_inverse_round_trips() {
        let (map, _) = make_affine_model(0.3).unwrap();
        let x = PlanePoint::new(1, 0.37, 0.61);
        let y = map.forward(&x).unwrap();
        let back = map.inverse(&y, 4).unwrap().unwrap();
        assert!((back.p - x.p).norm() < 1e-14);
    }

    #[test]
    fn synthetic_inverse_round_trips() {
        let f = SyntheticHalfPeriod::default();
        for (s, u) in [(0.3, 0.05), (-0.7, -0.12), (0.9, 0.55), (-0.2, 0.7)] {
            let y = f.map(1, 0, Vector2::new(s, u)).unwrap();
            let x = f.inverse(1, 1, y, u).unwrap().unwrap();
            assert!((x - Vector2::new(s, u)).norm() < 1e-12, "{x} vs ({s},{u})");
        }
    }

    #[test]
    fn synthetic_base_point_maps_to_base_point() {
        let f = SyntheticHalfPeriod::default();
        for m in 0..5 {
            assert!(f.map(m, 0, Vector2::zeros()).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn knob_range_is_checked() {
        assert!(make_synthetic_halfperiod(0.6).is_err());
        assert!(make_synthetic_halfperiod(0.5).is_ok());
    }
}
