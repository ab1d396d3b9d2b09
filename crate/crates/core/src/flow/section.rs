//! Cross-section events and first-return maps.

use super::dopri::{integrate, Segment, StepEvent};
use super::{variational_flow, Base, FlowError, IntegratorConfig, SystemDef};
use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::ControlFlow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Positive,
    Negative,
    Both,
}

impl Orientation {
    fn accepts(self, dot: f64) -> bool {
        match self {
            Orientation::Positive => dot > 0.0,
            Orientation::Negative => dot < 0.0,
            Orientation::Both => true,
        }
    }
}

/// The plane `(x − anchor)·n = 0`, restricted to the max-norm ball of radius
/// `in_bounds` around the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDef {
    pub anchor: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub direction: Orientation,
    pub in_bounds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionHit {
    pub t: f64,
    pub x: Vector3<f64>,
    /// Φ(x)·n at the hit.
    pub dot: f64,
}

/// |Φ·n| below this fraction of |Φ| counts as tangential.
const TRANSVERSALITY: f64 = 1e-6;
/// Hits closer than this to the start time are the start point itself.
const START_SKIP: f64 = 1e-9;

impl SectionDef {
    pub fn new(anchor: Vector3<f64>, normal: Vector3<f64>, direction: Orientation) -> Result<Self, FlowError> {
        let n = normal.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(FlowError::BadSection);
        }
        Ok(SectionDef { anchor, normal: normal / n, direction, in_bounds: f64::INFINITY })
    }

    pub fn with_bounds(mut self, in_bounds: f64) -> Self {
        self.in_bounds = in_bounds;
        self
    }

    pub fn signed_distance(&self, x: &Vector3<f64>) -> f64 {
        (x - self.anchor).dot(&self.normal)
    }

    fn in_bounds(&self, x: &Vector3<f64>) -> bool {
        (x - self.anchor).amax() <= self.in_bounds
    }

    fn crosses(&self, ga: f64, gb: f64) -> bool {
        let up = ga < 0.0 && gb >= 0.0;
        let down = ga > 0.0 && gb <= 0.0;
        match self.direction {
            Orientation::Positive => up,
            Orientation::Negative => down,
            Orientation::Both => up || down,
        }
    }

    /// Orthonormal basis `(e1, e2)` of the plane with `e1 × e2 = n`.
    pub fn basis(&self) -> Matrix3x2<f64> {
        let n = self.normal;
        let i = n.iamin();
        let mut a = Vector3::zeros();
        a[i] = 1.0;
        let e1 = (a - n * n.dot(&a)).normalize();
        let e2 = n.cross(&e1);
        Matrix3x2::from_columns(&[e1, e2])
    }
}

/// Root of `g(t) = (seg(t) − anchor)·n` in `[a, b]`: safeguarded Newton on
/// the interpolant with bisection fallback, capped at 60 iterations.
fn locate(seg: &Segment<3>, sec: &SectionDef, mut a: f64, mut b: f64) -> f64 {
    let g = |t: f64| sec.signed_distance(&seg.eval(t));
    let mut ga = g(a);
    let mut t = 0.5 * (a + b);
    for _ in 0..60 {
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if (gt < 0.0) == (ga < 0.0) {
            a = t;
            ga = gt;
        } else {
            b = t;
        }
        if (b - a).abs() <= 1e-12 * t.abs().max(1.0) {
            break;
        }
        let dg = seg.eval_dt(t).dot(&sec.normal);
        let newton = t - gt / dg;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        t = if dg != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (a + b) };
    }
    let (ta, tb) = (g(a).abs(), g(b).abs());
    if ta < tb {
        a
    } else {
        b
    }
}

/// The first `count` crossings of the section with the requested orientation
/// within `|t| ≤ |t_max|` (backward in time when `t_max < 0`).
pub fn section_hits(
    sys: &SystemDef,
    x0: &Vector3<f64>,
    section: &SectionDef,
    count: usize,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<SectionHit>, FlowError> {
    let mut hits: Vec<SectionHit> = Vec::new();
    let mut failure: Option<FlowError> = None;
    let mut accept = |t: f64, x: Vector3<f64>, hits: &mut Vec<SectionHit>| -> ControlFlow<()> {
        if t.abs() < START_SKIP || !section.in_bounds(&x) {
            return ControlFlow::Continue(());
        }
        let f = sys.eval(&x);
        let dot = f.dot(&section.normal);
        if dot.abs() < TRANSVERSALITY * f.norm() {
            failure = Some(FlowError::TangentialCrossing { t, x: [x[0], x[1], x[2]], dot });
            return ControlFlow::Break(());
        }
        if !section.direction.accepts(dot) {
            return ControlFlow::Continue(());
        }
        hits.push(SectionHit { t, x, dot });
        if hits.len() >= count {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let orientation_for_time = |ga: f64, gb: f64| {
        // backward integration reverses the sign convention of a crossing
        if t_max < 0.0 {
            section.crosses(-ga, -gb)
        } else {
            section.crosses(ga, gb)
        }
    };
    if count == 0 {
        return Ok(hits);
    }
    integrate(&Base(sys), *x0, t_max, cfg, &mut |ev| match ev {
        StepEvent::Step(seg) => {
            const SUB: usize = 4;
            let mut ta = seg.t0;
            let mut ga = section.signed_distance(&seg.start());
            for k in 1..=SUB {
                let tb = if k == SUB { seg.t1 } else { seg.t0 + (seg.t1 - seg.t0) * k as f64 / SUB as f64 };
                let gb = section.signed_distance(&seg.eval(tb));
                if orientation_for_time(ga, gb) {
                    let t = locate(seg, section, ta, tb);
                    let mut x = seg.eval(t);
                    x -= section.normal * section.signed_distance(&x);
                    if accept(t, x, &mut hits).is_break() {
                        return ControlFlow::Break(());
                    }
                }
                ta = tb;
                ga = gb;
            }
            ControlFlow::Continue(())
        }
        StepEvent::Glue { t, after, .. } => {
            let x = Vector3::new(after[0], after[1], after[2]);
            if section.signed_distance(&x).abs() < 1e-10 {
                accept(t, x, &mut hits)
            } else {
                ControlFlow::Continue(())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    if hits.len() < count {
        return Err(FlowError::MissingHits { wanted: count, found: hits.len(), t_max });
    }
    Ok(hits)
}

fn return_section(sys: &SystemDef, section: &SectionDef, x: &Vector3<f64>) -> Result<SectionDef, FlowError> {
    let d = section.signed_distance(x);
    if d.abs() >= 1e-10 {
        return Err(FlowError::NotOnSection { distance: d.abs() });
    }
    let f = sys.eval(x);
    let dot = f.dot(&section.normal);
    if dot.abs() < TRANSVERSALITY * f.norm() {
        return Err(FlowError::TangentialCrossing { t: 0.0, x: [x[0], x[1], x[2]], dot });
    }
    let mut s = section.clone();
    if s.direction == Orientation::Both {
        s.direction = if dot > 0.0 { Orientation::Positive } else { Orientation::Negative };
    }
    Ok(s)
}

/// First return `x ↦ φ(τ(x), x)` to the section with the orientation of the
/// crossing at `x`.
pub fn poincare_map(
    sys: &SystemDef,
    section: &SectionDef,
    x: &Vector3<f64>,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vector3<f64>, f64), FlowError> {
    let s = return_section(sys, section, x)?;
    let hit = section_hits(sys, x, &s, 1, t_max, cfg)?[0];
    Ok((hit.x, hit.t))
}

/// Derivative of the first-return map in the section basis
/// [`SectionDef::basis`]: `DP = Bᵀ (I − Φ nᵀ/(n·Φ)) M B` at the return point.
pub fn poincare_jacobian(
    sys: &SystemDef,
    section: &SectionDef,
    x: &Vector3<f64>,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> Result<(Matrix2<f64>, Vector3<f64>, f64), FlowError> {
    let (p, tau) = poincare_map(sys, section, x, t_max, cfg)?;
    let (end, m) = variational_flow(sys, x, tau, cfg)?;
    let end = sys.normalize(&end);
    let f = sys.eval(&end);
    let n = section.normal;
    let proj = Matrix3::identity() - f * n.transpose() / n.dot(&f);
    let b = section.basis();
    Ok((b.transpose() * proj * m * b, p, tau))
}

/// Section coordinates of a point relative to the anchor.
pub fn section_coords(section: &SectionDef, x: &Vector3<f64>) -> Vector2<f64> {
    section.basis().transpose() * (x - section.anchor)
}
