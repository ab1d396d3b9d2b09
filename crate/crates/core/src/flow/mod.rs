//! Flow engine: adaptive integration of `ẋ = Φ(x)` in ℝ³ with dense output,
//! the variational equation, quotient-chart gluing and cross-section events.

mod dopri;
pub mod export;
mod section;

pub use dopri::Segment;
pub use section::{
    poincare_jacobian, poincare_map, section_coords, section_hits, Orientation, SectionDef, SectionHit,
};

use crate::exec::Exec;
use dopri::{integrate, Problem, StepEvent};
use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};
use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("step limit of {steps} reached at t = {t}")]
    StepLimit { steps: usize, t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("state left the domain box at t = {t}: {x:?}")]
    DomainEscape { t: f64, x: [f64; 3] },
    #[error("non-finite value in field evaluation at t = {t}")]
    NonFinite { t: f64 },
    #[error("integration time must be finite, got {0}")]
    BadDuration(f64),
    #[error("invalid integrator configuration: {0}")]
    BadConfig(String),
    #[error("point is {distance:e} away from the section plane")]
    NotOnSection { distance: f64 },
    #[error("tangential crossing at t = {t}: |Φ·n| = {dot:e}")]
    TangentialCrossing { t: f64, x: [f64; 3], dot: f64 },
    #[error("only {found} of {wanted} section hits before t_max = {t_max}")]
    MissingHits { wanted: usize, found: usize, t_max: f64 },
    #[error("section normal must be a nonzero finite vector")]
    BadSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { abs_tol: 1e-10, rel_tol: 1e-10, max_step: f64::INFINITY, max_steps: 10_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorConfig { abs_tol, rel_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(FlowError::BadConfig("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(FlowError::BadConfig("max_step must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(FlowError::BadConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned box the state must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl DomainBox {
    pub fn unbounded() -> Self {
        DomainBox { lo: [f64::NEG_INFINITY; 3], hi: [f64::INFINITY; 3] }
    }

    pub fn cube(r: f64) -> Self {
        DomainBox { lo: [-r; 3], hi: [r; 3] }
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn check(&self, x: &Vector3<f64>, t: f64) -> Result<(), FlowError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(FlowError::DomainEscape { t, x: [x[0], x[1], x[2]] })
        }
    }
}

/// Identification of the faces `x[axis] = upper` and `x[axis] = lower` of a
/// chart. Leaving through the upper face, a point `x` re-enters at the lower
/// face as `L·x` with the axis coordinate moved to `lower`; the lower face
/// uses `L⁻¹`. `L` must fix the axis direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gluing {
    pub axis: usize,
    pub lower: f64,
    pub upper: f64,
    pub linear: Matrix3<f64>,
    /// Points this close to the upper face are normalised onto the lower one.
    pub face_tol: f64,
}

impl Gluing {
    pub fn new(axis: usize, lower: f64, upper: f64, linear: Matrix3<f64>) -> Self {
        Gluing { axis, lower, upper, linear, face_tol: 1e-12 }
    }

    fn inverse(&self) -> Matrix3<f64> {
        self.linear.try_inverse().unwrap_or_else(Matrix3::identity)
    }

    /// Map through the upper face.
    pub fn up(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut y = self.linear * x;
        y[self.axis] = self.lower + (x[self.axis] - self.upper);
        y
    }

    /// Map through the lower face.
    pub fn down(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let mut y = self.inverse() * x;
        y[self.axis] = self.upper + (x[self.axis] - self.lower);
        y
    }

    pub fn derivative(&self, up: bool) -> Matrix3<f64> {
        if up {
            self.linear
        } else {
            self.inverse()
        }
    }
}

/// A vector field on ℝ³.
pub trait VectorField: Send + Sync {
    fn eval(&self, x: &Vector3<f64>) -> Vector3<f64>;

    /// Analytic Jacobian, if the field provides one.
    fn jacobian(&self, _x: &Vector3<f64>) -> Option<Matrix3<f64>> {
        None
    }

    /// Distance from the model's known periodic orbit, when it has one.
    fn orbit_residual(&self, _x: &Vector3<f64>) -> Option<f64> {
        None
    }

    fn as_any(&self) -> &dyn Any;
}

#[derive(Clone)]
pub struct SystemDef {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub field: Arc<dyn VectorField>,
    pub domain: DomainBox,
    pub gluing: Option<Gluing>,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .field("domain", &self.domain)
            .field("gluing", &self.gluing)
            .finish()
    }
}

impl SystemDef {
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField>) -> Self {
        SystemDef {
            name: name.into(),
            parameters: BTreeMap::new(),
            field,
            domain: DomainBox::unbounded(),
            gluing: None,
        }
    }

    pub fn with_parameter(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_gluing(mut self, gluing: Gluing) -> Self {
        self.gluing = Some(gluing);
        self
    }

    pub fn eval(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.field.eval(x)
    }

    /// Analytic Jacobian when available, else central differences with step
    /// `1e-6·max(1,|x_i|)`.
    pub fn jacobian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        if let Some(j) = self.field.jacobian(x) {
            return j;
        }
        self.fd_jacobian(x)
    }

    pub fn fd_jacobian(&self, x: &Vector3<f64>) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for i in 0..3 {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            let col = (self.eval(&xp) - self.eval(&xm)) / (2.0 * h);
            j.set_column(i, &col);
        }
        j
    }

    pub fn divergence(&self, x: &Vector3<f64>) -> f64 {
        self.jacobian(x).trace()
    }

    /// Canonical chart representative: points on the upper glued face are
    /// moved to the lower one.
    pub fn normalize(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match &self.gluing {
            Some(g) if x[g.axis] >= g.upper - g.face_tol => g.up(x),
            _ => *x,
        }
    }
}

struct Base<'a>(&'a SystemDef);

impl Problem<3> for Base<'_> {
    fn sys(&self) -> &SystemDef {
        self.0
    }
    fn rhs(&self, y: &SVector<f64, 3>) -> SVector<f64, 3> {
        self.0.eval(y)
    }
    fn glue(&self, y: &mut SVector<f64, 3>, up: bool) {
        if let Some(g) = &self.0.gluing {
            *y = if up { g.up(y) } else { g.down(y) };
        }
    }
}

struct Variational<'a>(&'a SystemDef);

fn pack(x: &Vector3<f64>, m: &Matrix3<f64>) -> SVector<f64, 12> {
    let mut y = SVector::<f64, 12>::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(x);
    for (k, v) in m.iter().enumerate() {
        y[3 + k] = *v;
    }
    y
}

fn unpack(y: &SVector<f64, 12>) -> (Vector3<f64>, Matrix3<f64>) {
    let x = Vector3::new(y[0], y[1], y[2]);
    let m = Matrix3::from_column_slice(&y.as_slice()[3..12]);
    (x, m)
}

impl Problem<12> for Variational<'_> {
    fn sys(&self) -> &SystemDef {
        self.0
    }
    fn rhs(&self, y: &SVector<f64, 12>) -> SVector<f64, 12> {
        let (x, m) = unpack(y);
        pack(&self.0.eval(&x), &(self.0.jacobian(&x) * m))
    }
    fn glue(&self, y: &mut SVector<f64, 12>, up: bool) {
        if let Some(g) = &self.0.gluing {
            let (x, m) = unpack(y);
            let x2 = if up { g.up(&x) } else { g.down(&x) };
            *y = pack(&x2, &(g.derivative(up) * m));
        }
    }
}

/// φ(t, x0).
pub fn flow(sys: &SystemDef, x0: &Vector3<f64>, t: f64, cfg: &IntegratorConfig) -> Result<Vector3<f64>, FlowError> {
    let (y, _) = integrate(&Base(sys), *x0, t, cfg, &mut |_| ControlFlow::Continue(()))?;
    Ok(y)
}

/// φ(t, x0) together with `M = Dφ^t(x0)`, integrated as one 12-dimensional
/// system. Gluing events apply their linearisation to `M`.
pub fn variational_flow(
    sys: &SystemDef,
    x0: &Vector3<f64>,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vector3<f64>, Matrix3<f64>), FlowError> {
    let y0 = pack(x0, &Matrix3::identity());
    let (y, _) = integrate(&Variational(sys), y0, t, cfg, &mut |_| ControlFlow::Continue(()))?;
    Ok(unpack(&y))
}

/// φ(t, ·) over many initial points.
pub fn flow_batch(
    sys: &SystemDef,
    xs: &[Vector3<f64>],
    t: f64,
    cfg: &IntegratorConfig,
    exec: Exec,
) -> Vec<Result<Vector3<f64>, FlowError>> {
    exec.map(xs, |x| flow(sys, x, t, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; 3],
}

/// Integrated path: step-end samples (strictly monotone in time; after a
/// gluing event the sample holds the glued state) plus dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub segments: Vec<Segment<3>>,
    pub config: IntegratorConfig,
}

impl Trajectory {
    pub fn end(&self) -> Vector3<f64> {
        let s = self.samples.last().expect("trajectory has at least one sample");
        Vector3::from(s.x)
    }

    /// ∫ f(x(t)) dt along the stored interpolant (Gauss–Legendre, 5 nodes per
    /// segment). Signed for backward trajectories.
    pub fn integrate_along(&self, f: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let mut acc = 0.0;
        for seg in &self.segments {
            let half = 0.5 * (seg.t1 - seg.t0);
            let mid = 0.5 * (seg.t1 + seg.t0);
            let mut s = 0.0;
            for (n, w) in NODES.iter().zip(WEIGHTS) {
                s += w * f(&seg.eval(mid + half * n));
            }
            acc += half * s;
        }
        acc
    }
}

pub fn integrate_trajectory(
    sys: &SystemDef,
    x0: &Vector3<f64>,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, FlowError> {
    let mut samples = vec![Sample { t: 0.0, x: [x0[0], x0[1], x0[2]] }];
    let mut segments = Vec::new();
    integrate(&Base(sys), *x0, t, cfg, &mut |ev| {
        match ev {
            StepEvent::Step(seg) => {
                let e = seg.end();
                samples.push(Sample { t: seg.t1, x: [e[0], e[1], e[2]] });
                segments.push(seg.clone());
            }
            StepEvent::Glue { t, after, .. } => {
                let s = Sample { t, x: [after[0], after[1], after[2]] };
                match samples.last_mut() {
                    Some(last) if last.t == t => *last = s,
                    _ => samples.push(s),
                }
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(Trajectory { samples, segments, config: *cfg })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear(Matrix3<f64>);
    impl VectorField for Linear {
        fn eval(&self, x: &Vector3<f64>) -> Vector3<f64> {
            self.0 * x
        }
        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    fn rotation() -> SystemDef {
        SystemDef::new("rot", Arc::new(Linear(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -0.5))))
    }

    #[test]
    fn zero_time_is_identity() {
        let x = Vector3::new(0.3, -0.2, 1.0);
        let cfg = IntegratorConfig::default();
        assert_eq!(flow(&rotation(), &x, 0.0, &cfg).unwrap(), x);
        let (_, m) = variational_flow(&rotation(), &x, 0.0, &cfg).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn linear_flow_matches_exponential() {
        let sys = rotation();
        let x = Vector3::new(1.0, 0.0, 2.0);
        let cfg = IntegratorConfig::default();
        let t = 3.7;
        let y = flow(&sys, &x, t, &cfg).unwrap();
        let exact = Vector3::new(t.cos(), t.sin(), 2.0 * (-0.5 * t).exp());
        assert!((y - exact).norm() < 1e-9, "{:?}", y - exact);
        let back = flow(&sys, &y, -t, &cfg).unwrap();
        assert!((back - x).norm() < 1e-9);
    }

    #[test]
    fn dense_output_reproduces_steps() {
        let sys = rotation();
        let tr = integrate_trajectory(&sys, &Vector3::new(1.0, 0.0, 1.0), 5.0, &IntegratorConfig::default()).unwrap();
        for seg in &tr.segments {
            let mid = 0.5 * (seg.t0 + seg.t1);
            let exact = Vector3::new(mid.cos(), mid.sin(), (-0.5 * mid).exp());
            assert!((seg.eval(mid) - exact).norm() < 1e-8);
            let d = seg.eval_dt(mid);
            assert!((d - sys.eval(&seg.eval(mid))).norm() < 1e-6);
        }
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn gluing_round_trip_is_exact_on_faces() {
        let g = Gluing::new(2, 1.0, 2.0, Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)));
        let x = Vector3::new(0.37, -0.81, 2.0);
        assert_eq!(g.down(&g.up(&x)), x);
        let y = Vector3::new(-0.5, 0.25, 1.0);
        assert_eq!(g.up(&g.down(&y)), y);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = IntegratorConfig { abs_tol: 0.0, ..Default::default() };
        assert!(matches!(flow(&rotation(), &Vector3::x(), 1.0, &cfg), Err(FlowError::BadConfig(_))));
    }
}
