//! Cross-section frames at two orbit points and the fixed-time maps
//! `φ(T/2 + mT, ·)` between them.

use super::{FloquetData, OrbitError, PeriodicOrbit};
use crate::flow::{flow, variational_flow, IntegratorConfig, SystemDef};
use crate::horseshoe::{FrameMapFamily, MapError};
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Images further than this fraction of the frame half-width from the frame
/// plane (along the flow) are rejected.
const OFF_PLANE_FRACTION: f64 = 1e-3;

/// Affine chart `(s, u) ↦ base + s·e_s + u·e_u` on `[−δ_s, δ_s] × [−δ_u, δ_u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionFrame {
    pub base: Vector3<f64>,
    pub e_s: Vector3<f64>,
    pub e_u: Vector3<f64>,
    pub half_widths: [f64; 2],
    /// Φ(base).
    pub flow_direction: Vector3<f64>,
}

impl CrossSectionFrame {
    pub fn chart(&self, s: f64, u: f64) -> Vector3<f64> {
        self.base + self.e_s * s + self.e_u * u
    }

    /// Chart point of normalised coordinates in `[−1, 1]²`.
    pub fn chart_unit(&self, su: &Vector2<f64>) -> Vector3<f64> {
        self.chart(su[0] * self.half_widths[0], su[1] * self.half_widths[1])
    }

    /// Normalised frame coordinates of `x` projected along Φ(base), and the
    /// length of the projection.
    pub fn project_unit(&self, x: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
        let a = Matrix3::from_columns(&[self.e_s, self.e_u, self.flow_direction]);
        let c = a.lu().solve(&(x - self.base))?;
        let off = (c[2] * self.flow_direction).norm();
        Some((Vector2::new(c[0] / self.half_widths[0], c[1] / self.half_widths[1]), off))
    }

    fn off_plane_limit(&self) -> f64 {
        OFF_PLANE_FRACTION * self.half_widths[0].min(self.half_widths[1])
    }
}

/// Frames at `p = orbit.x0` (monodromy eigenvectors) and at `q = φ(T/2, p)`
/// (the same vectors transported by `Dφ^{T/2}`).
pub fn build_frames(
    sys: &SystemDef,
    orbit: &PeriodicOrbit,
    floquet: &FloquetData,
    half_widths: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<(CrossSectionFrame, CrossSectionFrame), OrbitError> {
    let (Some(e_s), Some(e_u)) = (floquet.e_s, floquet.e_u) else {
        return Err(OrbitError::NonHyperbolic);
    };
    let p = orbit.x0;
    let (q, m) = variational_flow(sys, &p, 0.5 * orbit.period, cfg)?;
    let frame = |base: Vector3<f64>, es: Vector3<f64>, eu: Vector3<f64>| -> Result<CrossSectionFrame, OrbitError> {
        let phi = sys.eval(&base);
        let det = Matrix3::from_columns(&[es, eu, phi]).determinant();
        if det.abs() < 1e-10 * phi.norm() {
            return Err(OrbitError::Frames("frame vectors are not transversal to the flow".into()));
        }
        Ok(CrossSectionFrame { base, e_s: es, e_u: eu, half_widths, flow_direction: phi })
    };
    let fp = frame(p, e_s, e_u)?;
    let fq = frame(q, (m * e_s).normalize(), (m * e_u).normalize())?;
    Ok((fp, fq))
}

/// The maps `φ(T/2 + mT, ·)` between the frames at `p` (frame 0) and `q`
/// (frame 1), in normalised frame coordinates.
#[derive(Debug, Clone)]
pub struct HalfPeriodFamily {
    pub sys: SystemDef,
    pub period: f64,
    pub frames: [CrossSectionFrame; 2],
    pub cfg: IntegratorConfig,
}

impl HalfPeriodFamily {
    pub fn new(
        sys: SystemDef,
        orbit: &PeriodicOrbit,
        frames: (CrossSectionFrame, CrossSectionFrame),
        cfg: IntegratorConfig,
    ) -> Result<Self, OrbitError> {
        let q = flow(&sys, &frames.0.base, 0.5 * orbit.period, &cfg)?;
        let gap = (q - frames.1.base).norm();
        if gap > 1e-8 {
            return Err(OrbitError::Frames(format!("|φ(T/2, p) − q| = {gap:e}")));
        }
        Ok(HalfPeriodFamily { sys, period: orbit.period, frames: [frames.0, frames.1], cfg })
    }

    fn time(&self, m: usize) -> f64 {
        (0.5 + m as f64) * self.period
    }

    fn land(&self, to: usize, x: &Vector3<f64>) -> Result<Vector2<f64>, MapError> {
        let frame = &self.frames[to];
        let (su, off) = frame
            .project_unit(x)
            .ok_or_else(|| MapError::Undefined("degenerate frame".into()))?;
        let limit = frame.off_plane_limit();
        if off > limit {
            return Err(MapError::OffPlane { residual: off, limit });
        }
        Ok(su)
    }
}

impl FrameMapFamily for HalfPeriodFamily {
    fn map(&self, m: usize, from: usize, su: Vector2<f64>) -> Result<Vector2<f64>, MapError> {
        let x = self.frames[from].chart_unit(&su);
        let y = flow(&self.sys, &x, self.time(m), &self.cfg)?;
        self.land(1 - from, &y)
    }

    fn map_sequence(&self, from: usize, su: Vector2<f64>, k_max: usize) -> Vec<Result<Vector2<f64>, MapError>> {
        let mut out = Vec::with_capacity(k_max);
        let mut x = match flow(&self.sys, &self.frames[from].chart_unit(&su), self.time(1), &self.cfg) {
            Ok(x) => x,
            Err(e) => return vec![Err(e.into())],
        };
        for k in 1..=k_max {
            if k > 1 {
                x = match flow(&self.sys, &x, self.period, &self.cfg) {
                    Ok(x) => x,
                    Err(e) => {
                        out.push(Err(e.into()));
                        break;
                    }
                };
            }
            let r = self.land(1 - from, &x);
            let stop = matches!(r, Err(MapError::Flow(_)));
            out.push(r);
            if stop {
                break;
            }
        }
        out
    }

    /// Backward-time integration of the same fixed-time map.
    fn inverse(&self, m: usize, to: usize, su: Vector2<f64>, _u_hint: f64) -> Option<Result<Vector2<f64>, MapError>> {
        let x = self.frames[to].chart_unit(&su);
        Some(
            flow(&self.sys, &x, -self.time(m), &self.cfg)
                .map_err(MapError::from)
                .and_then(|y| self.land(1 - to, &y)),
        )
    }

    fn describe(&self) -> String {
        format!("half-period maps of '{}' (T = {})", self.sys.name, self.period)
    }
}

/// One member of a [`HalfPeriodFamily`] from the frame at `p` to the frame at `q`.
#[derive(Debug, Clone)]
pub struct HalfPeriodMap {
    pub family: HalfPeriodFamily,
    pub m: usize,
}

pub fn half_period_map(
    sys: &SystemDef,
    orbit: &PeriodicOrbit,
    frames: (CrossSectionFrame, CrossSectionFrame),
    m: usize,
    cfg: &IntegratorConfig,
) -> Result<HalfPeriodMap, OrbitError> {
    Ok(HalfPeriodMap { family: HalfPeriodFamily::new(sys.clone(), orbit, frames, *cfg)?, m })
}

impl HalfPeriodMap {
    /// `(s, u)` in frame-at-`p` units to frame-at-`q` units, with the
    /// off-plane distance of the image.
    pub fn eval(&self, s: f64, u: f64) -> Result<(Vector2<f64>, f64), MapError> {
        let [fp, fq] = &self.family.frames;
        let x = fp.chart(s, u);
        let y = flow(&self.family.sys, &x, self.family.time(self.m), &self.family.cfg)?;
        let (su, off) = fq.project_unit(&y).ok_or_else(|| MapError::Undefined("degenerate frame".into()))?;
        if off > fq.off_plane_limit() {
            return Err(MapError::OffPlane { residual: off, limit: fq.off_plane_limit() });
        }
        Ok((Vector2::new(su[0] * fq.half_widths[0], su[1] * fq.half_widths[1]), off))
    }

    /// Preimage in frame-at-`p` units by backward integration.
    pub fn inverse(&self, s: f64, u: f64) -> Result<Vector2<f64>, MapError> {
        let [fp, fq] = &self.family.frames;
        let su = Vector2::new(s / fq.half_widths[0], u / fq.half_widths[1]);
        let r = self.family.inverse(self.m, 1, su, 0.0).expect("flow maps are invertible")?;
        Ok(Vector2::new(r[0] * fp.half_widths[0], r[1] * fp.half_widths[1]))
    }

    /// True when the map reverses the unstable direction of the frames
    /// (`∂u′/∂u < 0` at the base point).
    pub fn orientation_flip(&self) -> Result<bool, MapError> {
        let h = 1e-4 * self.family.frames[0].half_widths[1];
        let (a, _) = self.eval(0.0, -h)?;
        let (b, _) = self.eval(0.0, h)?;
        Ok(b[1] < a[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_mobius;
    use crate::orbits::{floquet, refine_orbit};

    #[test]
    fn mobius_map_flips_after_a_gluing() {
        let sys = make_mobius();
        let cfg = IntegratorConfig::default();
        let orbit = refine_orbit(&sys, &Vector3::new(0.0, 0.0, 1.25), 1.0, &cfg).unwrap();
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        let frames = build_frames(&sys, &orbit, &fl, [0.2, 0.2], &cfg).unwrap();
        assert!((frames.1.base - Vector3::new(0.0, 0.0, 1.75)).norm() < 1e-9);
        let m0 = half_period_map(&sys, &orbit, frames.clone(), 0, &cfg).unwrap();
        let m1 = half_period_map(&sys, &orbit, frames, 1, &cfg).unwrap();
        assert!(!m0.orientation_flip().unwrap());
        assert!(m1.orientation_flip().unwrap());
        let (y, _) = m1.eval(0.0, 0.0).unwrap();
        assert!(y.norm() < 1e-8);
    }
}
