use super::{CurveGraph, CurveKind, HorseshoeError, Strip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub xi: f64,
    pub eta: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Unique intersection of a vertical graph `ξ = v(η)` and a horizontal graph
/// `η = h(ξ)`, as the fixed point of `ξ ↦ v(h(ξ))`.
pub fn curve_intersect(v: &CurveGraph, h: &CurveGraph) -> Result<Intersection, HorseshoeError> {
    if v.kind != CurveKind::Vertical || h.kind != CurveKind::Horizontal {
        return Err(HorseshoeError::BadCurve("expected a vertical and a horizontal curve".into()));
    }
    let product = v.lipschitz * h.lipschitz;
    if product >= 1.0 {
        return Err(HorseshoeError::LipschitzProduct { product });
    }
    let mut xi = 0.5;
    let mut residual = f64::INFINITY;
    for it in 1..=1000 {
        let next = v.eval(h.eval(xi));
        residual = (next - xi).abs();
        xi = next;
        if residual < 1e-12 {
            let eta = h.eval(xi);
            let residual = (v.eval(eta) - xi).abs().max(residual);
            return Ok(Intersection { xi, eta, iterations: it, residual });
        }
    }
    Err(HorseshoeError::NoConvergence { residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedLimit {
    pub midline: CurveGraph,
    pub error_bound: f64,
    pub widths: Vec<f64>,
    /// Largest ratio of successive widths.
    pub observed_ratio: f64,
}

/// Approximates the limit curve of a nested sequence of strips by the midline
/// of the deepest one.
pub fn nested_limit(strips: &[Strip]) -> Result<NestedLimit, HorseshoeError> {
    const TOL: f64 = 1e-12;
    let last = strips.last().ok_or_else(|| HorseshoeError::BadStrip("empty strip sequence".into()))?;
    for (k, pair) in strips.windows(2).enumerate() {
        let (outer, inner) = (&pair[0], &pair[1]);
        let level = k + 1;
        if inner.kind != outer.kind || inner.square != outer.square || inner.width >= outer.width {
            return Err(HorseshoeError::Containment { level });
        }
        let grid = inner.lower.params.iter().chain(&inner.upper.params).chain(&outer.lower.params);
        for &t in grid {
            if inner.lower.eval(t) < outer.lower.eval(t) - TOL || inner.upper.eval(t) > outer.upper.eval(t) + TOL {
                return Err(HorseshoeError::Containment { level });
            }
        }
    }
    let widths: Vec<f64> = strips.iter().map(|s| s.width).collect();
    let observed_ratio = widths.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok(NestedLimit { midline: last.midline(), error_bound: last.width / 2.0, widths, observed_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_curves() {
        let v = CurveGraph::constant(CurveKind::Vertical, 0.3, 65);
        let h = CurveGraph::constant(CurveKind::Horizontal, 0.7, 65);
        let p = curve_intersect(&v, &h).unwrap();
        assert_eq!((p.xi, p.eta), (0.3, 0.7));
        assert!(p.iterations <= 2);
    }

    #[test]
    fn linear_fixed_point() {
        let v = CurveGraph::from_fn(CurveKind::Vertical, 65, |y| 0.1 * y + 0.2).unwrap();
        let h = CurveGraph::from_fn(CurveKind::Horizontal, 65, |x| 0.1 * x + 0.3).unwrap();
        let p = curve_intersect(&v, &h).unwrap();
        let x = 0.23 / 0.99;
        assert!((p.xi - x).abs() < 1e-12);
        assert!((p.eta - (0.1 * x + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn steep_pair_rejected() {
        let v = CurveGraph::from_fn(CurveKind::Vertical, 65, |y| y).unwrap();
        let h = CurveGraph::from_fn(CurveKind::Horizontal, 65, |x| 0.5 + 0.0 * x).unwrap();
        assert!(curve_intersect(&v, &h).is_ok());
        let h2 = CurveGraph::from_fn(CurveKind::Horizontal, 65, |x| 1.0 - x / 1.1 * 0.99).unwrap();
        assert!(matches!(curve_intersect(&v, &h2), Err(HorseshoeError::LipschitzProduct { .. })));
    }

    #[test]
    fn nested_halving() {
        let strips: Vec<Strip> = (0..5)
            .map(|k| {
                let w = 0.5f64.powi(k);
                Strip::band(CurveKind::Horizontal, 0.5 - w / 4.0, 0.5 + w / 4.0, 0, 1, 65).unwrap()
            })
            .collect();
        let lim = nested_limit(&strips).unwrap();
        assert!((lim.observed_ratio - 0.5).abs() < 1e-12);
        assert!((lim.error_bound - strips[4].width / 2.0).abs() < 1e-15);
        assert!((lim.midline.eval(0.3) - 0.5).abs() < 1e-15);
        let single = nested_limit(&strips[..1]).unwrap();
        assert_eq!(single.error_bound, strips[0].width / 2.0);
        let mut bad = strips.clone();
        bad.swap(1, 2);
        assert!(matches!(nested_limit(&bad), Err(HorseshoeError::Containment { level: 2 })));
    }
}
