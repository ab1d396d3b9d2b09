//! The reference vector fields.

use crate::flow::{DomainBox, Gluing, SystemDef, VectorField};
use nalgebra::{Matrix3, Vector3};
use std::any::Any;
use std::sync::Arc;

use super::ModelError;

/// `ẋ = −y + (x²+y²−1)F₁`, `ẏ = x + (x²+y²−1)F₂`, `ż = (z+x²+y²−1)F₃` with
/// `F₁ = −αx(x²+y²)`, `F₂ = −αy(x²+y²)`, `F₃ = γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1 {
    pub alpha: f64,
    pub gamma: f64,
}

/// F-terms and their gradients at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTerms {
    pub f: [f64; 3],
    pub grad: [[f64; 3]; 3],
}

fn radial_f_terms(alpha: f64, x: &Vector3<f64>, f3: f64) -> FTerms {
    let (px, py) = (x[0], x[1]);
    let s = px * px + py * py;
    FTerms {
        f: [-alpha * px * s, -alpha * py * s, f3],
        grad: [
            [-alpha * (s + 2.0 * px * px), -2.0 * alpha * px * py, 0.0],
            [-2.0 * alpha * px * py, -alpha * (s + 2.0 * py * py), 0.0],
            [0.0, 0.0, 0.0],
        ],
    }
}

fn circle_residual(x: &Vector3<f64>) -> f64 {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    ((r - 1.0).powi(2) + x[2] * x[2]).sqrt()
}

impl Example1 {
    pub fn f_terms(&self, x: &Vector3<f64>) -> FTerms {
        radial_f_terms(self.alpha, x, self.gamma)
    }

    /// The system without range checks (used for boundary-case analyses).
    pub fn system(self) -> SystemDef {
        SystemDef::new("example1", Arc::new(self))
            .with_parameter("alpha", self.alpha)
            .with_parameter("gamma", self.gamma)
            .with_domain(DomainBox::cube(100.0))
    }
}

impl VectorField for Example1 {
    fn eval(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let ft = self.f_terms(x);
        let w = x[0] * x[0] + x[1] * x[1] - 1.0;
        Vector3::new(-x[1] + w * ft.f[0], x[0] + w * ft.f[1], (x[2] + w) * ft.f[2])
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Option<Matrix3<f64>> {
        let FTerms { f, grad: g } = self.f_terms(x);
        let (px, py) = (x[0], x[1]);
        let w = px * px + py * py - 1.0;
        let w3 = x[2] + w;
        Some(Matrix3::new(
            2.0 * px * f[0] + w * g[0][0],
            -1.0 + 2.0 * py * f[0] + w * g[0][1],
            w * g[0][2],
            1.0 + 2.0 * px * f[1] + w * g[1][0],
            2.0 * py * f[1] + w * g[1][1],
            w * g[1][2],
            2.0 * px * f[2] + w3 * g[2][0],
            2.0 * py * f[2] + w3 * g[2][1],
            f[2] + w3 * g[2][2],
        ))
    }

    fn orbit_residual(&self, x: &Vector3<f64>) -> Option<f64> {
        Some(circle_residual(x))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// `ẋ = −y + (z+x²+y²−1)F₁`, `ẏ = x + (z+x²+y²−1)F₂`, `ż = (z+x²+y²−1)F₃`
/// with the same `F₁, F₂` as [`Example1`] and constant `F₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2 {
    pub alpha: f64,
    pub f3: f64,
}

impl Example2 {
    pub fn f_terms(&self, x: &Vector3<f64>) -> FTerms {
        radial_f_terms(self.alpha, x, self.f3)
    }

    pub fn system(self) -> SystemDef {
        SystemDef::new("example2", Arc::new(self))
            .with_parameter("alpha", self.alpha)
            .with_parameter("f3", self.f3)
            .with_domain(DomainBox::cube(100.0))
    }
}

impl VectorField for Example2 {
    fn eval(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let ft = self.f_terms(x);
        let w = x[2] + x[0] * x[0] + x[1] * x[1] - 1.0;
        Vector3::new(-x[1] + w * ft.f[0], x[0] + w * ft.f[1], w * ft.f[2])
    }

    fn jacobian(&self, x: &Vector3<f64>) -> Option<Matrix3<f64>> {
        let FTerms { f, grad: g } = self.f_terms(x);
        let (px, py) = (x[0], x[1]);
        let w = x[2] + px * px + py * py - 1.0;
        Some(Matrix3::new(
            2.0 * px * f[0] + w * g[0][0],
            -1.0 + 2.0 * py * f[0] + w * g[0][1],
            f[0] + w * g[0][2],
            1.0 + 2.0 * px * f[1] + w * g[1][0],
            2.0 * py * f[1] + w * g[1][1],
            f[1] + w * g[1][2],
            2.0 * px * f[2] + w * g[2][0],
            2.0 * py * f[2] + w * g[2][1],
            f[2] + w * g[2][2],
        ))
    }

    fn orbit_residual(&self, x: &Vector3<f64>) -> Option<f64> {
        Some(circle_residual(x))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// `−x ∂x + y ∂y + ∂z` on `[−1,1]²×[1,2]` with `(x,y,2) ~ (−x,−y,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mobius;

impl Mobius {
    pub fn gluing() -> Gluing {
        Gluing::new(2, 1.0, 2.0, Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)))
    }

    pub fn system(self) -> SystemDef {
        SystemDef::new("mobius", Arc::new(self))
            .with_domain(DomainBox { lo: [-1.0, -1.0, 1.0], hi: [1.0, 1.0, 2.0] })
            .with_gluing(Self::gluing())
    }
}

impl VectorField for Mobius {
    fn eval(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(-x[0], x[1], 1.0)
    }

    fn jacobian(&self, _x: &Vector3<f64>) -> Option<Matrix3<f64>> {
        Some(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 0.0)))
    }

    fn orbit_residual(&self, x: &Vector3<f64>) -> Option<f64> {
        Some((x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Example 1 with `α ∈ (0,1)`, `γ > 0`.
pub fn make_example1(alpha: f64, gamma: f64) -> Result<SystemDef, ModelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ModelError::Range { name: "alpha", value: alpha, range: "(0, 1)" });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::Range { name: "gamma", value: gamma, range: "(0, inf)" });
    }
    Ok(Example1 { alpha, gamma }.system())
}

/// Example 2 with `α > 0` and constant `F₃`.
pub fn make_example2(alpha: f64, f3: f64) -> Result<SystemDef, ModelError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::Range { name: "alpha", value: alpha, range: "(0, inf)" });
    }
    if !f3.is_finite() {
        return Err(ModelError::Range { name: "f3", value: f3, range: "finite" });
    }
    Ok(Example2 { alpha, f3 }.system())
}

pub fn make_mobius() -> SystemDef {
    Mobius.system()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_field_on_circle() {
        let sys = make_example1(0.5, 0.3).unwrap();
        assert_eq!(sys.eval(&Vector3::new(1.0, 0.0, 0.0)), Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        let pts = [Vector3::new(0.7, -0.4, 0.2), Vector3::new(1.1, 0.3, -0.5)];
        for sys in [make_example1(0.4, 0.8).unwrap(), make_example2(0.3, 2.5).unwrap(), make_mobius()] {
            for p in &pts {
                let d = sys.jacobian(p) - sys.fd_jacobian(p);
                assert!(d.amax() < 1e-7, "{}: {d}", sys.name);
            }
        }
    }

    #[test]
    fn range_checks() {
        assert!(make_example1(1.0, 0.3).is_err());
        assert!(make_example1(0.5, 0.0).is_err());
        assert!(make_example2(0.0, 1.0).is_err());
    }
}
