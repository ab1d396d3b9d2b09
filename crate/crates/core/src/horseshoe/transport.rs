//! Moving strips through the map: pullbacks of horizontal strips and
//! push-forwards of vertical strips.

use super::{curve_intersect, uniform, CurveGraph, CurveKind, HorseshoeError, PlanarMap, PlanePoint, Strip, StripSystem};
use serde::{Deserialize, Serialize};

/// Points sampled along a boundary before resampling onto the output grid.
const TRANSPORT_SAMPLES: usize = 257;
/// Sampled images must reach the square edges to within this.
const SPAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    /// Direct inversion of the map on boundary samples.
    Inverse,
    /// Root-finding on forward evaluations, one per output parameter.
    ForwardRootFinding,
    /// Forward images of boundary samples.
    ForwardSampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transported {
    pub strip: Strip,
    pub method: TransportMethod,
    /// Evaluations whose square did not match the expected one.
    pub square_mismatches: usize,
}

/// Builds a graph over `[0,1]` from scattered `(param, value)` samples.
fn resample(mut pts: Vec<(f64, f64)>, n: usize, kind: CurveKind) -> Result<CurveGraph, HorseshoeError> {
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite samples"));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 2 {
        return Err(HorseshoeError::EmptyPreimage("fewer than two distinct samples".into()));
    }
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    if t0 > SPAN_TOL || t1 < 1.0 - SPAN_TOL {
        return Err(HorseshoeError::EmptyPreimage(format!("samples span [{t0}, {t1}] instead of [0, 1]")));
    }
    let eval = |t: f64| {
        let i = pts.partition_point(|p| p.0 <= t).clamp(1, pts.len() - 1);
        let (a, b) = (pts[i - 1], pts[i]);
        a.1 + (t - a.0) / (b.0 - a.0) * (b.1 - a.1)
    };
    CurveGraph::from_fn(kind, n, eval)
}

fn check_monotone(params: &[f64], what: &str) -> Result<(), HorseshoeError> {
    let inc = params.windows(2).all(|w| w[1] > w[0]);
    let dec = params.windows(2).all(|w| w[1] < w[0]);
    if inc || dec {
        Ok(())
    } else {
        Err(HorseshoeError::EmptyPreimage(format!("{what} is not a graph (non-monotone samples)")))
    }
}

/// Point of the horizontal curve `c` at fractional position `s` across `V_j`.
fn point_across(v: &Strip, c: &CurveGraph, s: f64) -> (f64, f64) {
    let mut xi = v.lower.eval(0.5) + s * (v.upper.eval(0.5) - v.lower.eval(0.5));
    for _ in 0..200 {
        let eta = c.eval(xi);
        let next = v.lower.eval(eta) + s * (v.upper.eval(eta) - v.lower.eval(eta));
        let done = (next - xi).abs() < 1e-16;
        xi = next;
        if done {
            break;
        }
    }
    (xi, c.eval(xi))
}

/// Preimage of the horizontal curve `c` (in the square of `V_j`) inside `H_j`.
fn pullback_curve(
    map: &dyn PlanarMap,
    sys: &StripSystem,
    j: usize,
    c: &CurveGraph,
    n: usize,
) -> Result<(CurveGraph, TransportMethod, usize), HorseshoeError> {
    let (hj, vj) = (sys.h(j), sys.v(j));
    let target = sys.target(j);
    let mut mismatches = 0;

    let mut pts = Vec::with_capacity(TRANSPORT_SAMPLES);
    let mut invertible = true;
    for s in uniform(TRANSPORT_SAMPLES) {
        let (xi, eta) = point_across(vj, c, s);
        match map.inverse(&PlanePoint::new(target, xi, eta), j) {
            Some(Ok(x)) => {
                if x.square != hj.square {
                    mismatches += 1;
                }
                pts.push((x.p[0], x.p[1]));
            }
            _ => {
                invertible = false;
                break;
            }
        }
    }
    if invertible {
        let params: Vec<f64> = pts.iter().map(|p| p.0).collect();
        check_monotone(&params, "pulled-back boundary")?;
        let curve = resample(pts, n, CurveKind::Horizontal)?;
        return Ok((curve, TransportMethod::Inverse, mismatches));
    }

    mismatches = 0;
    let mut values = Vec::with_capacity(n);
    for xi in uniform(n) {
        let mut g = |eta: f64| -> Result<f64, HorseshoeError> {
            let y = map.forward(&PlanePoint::new(hj.square, xi, eta))?;
            if y.square != target {
                mismatches += 1;
            }
            Ok(y.p[1] - c.eval(y.p[0]))
        };
        let (mut a, mut b) = (hj.lower.eval(xi), hj.upper.eval(xi));
        let (mut ga, mut gb) = (g(a)?, g(b)?);
        if ga == 0.0 {
            values.push(a);
            continue;
        }
        if gb == 0.0 {
            values.push(b);
            continue;
        }
        if (ga > 0.0) == (gb > 0.0) {
            return Err(HorseshoeError::EmptyPreimage(format!("no crossing inside H_{j} at ξ = {xi}")));
        }
        // Illinois false position with a bisection guard
        let mut side = 0i8;
        for it in 0..200 {
            let mut t = (a * gb - b * ga) / (gb - ga);
            if !(t > a.min(b) && t < a.max(b)) || it % 8 == 7 {
                t = 0.5 * (a + b);
            }
            let gt = g(t)?;
            if gt == 0.0 {
                a = t;
                b = t;
                break;
            }
            if (gt > 0.0) == (ga > 0.0) {
                a = t;
                ga = gt;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            } else {
                b = t;
                gb = gt;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
            if (b - a).abs() < 1e-15 {
                break;
            }
        }
        values.push(0.5 * (a + b));
    }
    let curve = CurveGraph::new(CurveKind::Horizontal, uniform(n), values)?;
    Ok((curve, TransportMethod::ForwardRootFinding, mismatches))
}

/// `f⁻¹(H) ∩ H_j` for a horizontal strip `H` lying in the square of `V_j`.
pub fn pullback_strip(
    map: &dyn PlanarMap,
    sys: &StripSystem,
    j: usize,
    h: &Strip,
    n: usize,
) -> Result<Transported, HorseshoeError> {
    let (a, method_a, ma) = pullback_curve(map, sys, j, &h.lower, n)?;
    let (b, method_b, mb) = pullback_curve(map, sys, j, &h.upper, n)?;
    let (lo, hi) = if a.eval(0.5) <= b.eval(0.5) { (a, b) } else { (b, a) };
    let method = if method_a == method_b { method_a } else { TransportMethod::ForwardRootFinding };
    let strip = Strip::new(lo, hi, sys.h(j).square, j)?;
    Ok(Transported { strip, method, square_mismatches: ma + mb })
}

/// Image of the vertical curve `c` restricted to `H_j`.
fn push_curve(
    map: &dyn PlanarMap,
    sys: &StripSystem,
    j: usize,
    c: &CurveGraph,
    n: usize,
) -> Result<(CurveGraph, usize), HorseshoeError> {
    let hj = sys.h(j);
    let lo = curve_intersect(c, &hj.lower)?.eta;
    let hi = curve_intersect(c, &hj.upper)?.eta;
    let mut pts = Vec::with_capacity(TRANSPORT_SAMPLES);
    let mut mismatches = 0;
    for t in uniform(TRANSPORT_SAMPLES) {
        let eta = lo + t * (hi - lo);
        let y = map.forward(&PlanePoint::new(hj.square, c.eval(eta), eta))?;
        if y.square != sys.target(j) {
            mismatches += 1;
        }
        pts.push((y.p[1], y.p[0]));
    }
    let params: Vec<f64> = pts.iter().map(|p| p.0).collect();
    check_monotone(&params, "pushed-forward boundary")?;
    Ok((resample(pts, n, CurveKind::Vertical)?, mismatches))
}

/// `f(V ∩ H_j)` for a vertical strip `V` lying in the square of `H_j`.
pub fn push_forward_strip(
    map: &dyn PlanarMap,
    sys: &StripSystem,
    j: usize,
    v: &Strip,
    n: usize,
) -> Result<Transported, HorseshoeError> {
    let (a, ma) = push_curve(map, sys, j, &v.lower, n)?;
    let (b, mb) = push_curve(map, sys, j, &v.upper, n)?;
    let (lo, hi) = if a.eval(0.5) <= b.eval(0.5) { (a, b) } else { (b, a) };
    let strip = Strip::new(lo, hi, sys.target(j), j)?;
    Ok(Transported { strip, method: TransportMethod::ForwardSampling, square_mismatches: ma + mb })
}
