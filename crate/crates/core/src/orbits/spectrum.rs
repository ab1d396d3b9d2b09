//! On-orbit Jacobian spectra and the saddle-focus conditions of the two
//! example fields.

use super::OrbitError;
use crate::flow::SystemDef;
use crate::linalg::{eigenvalues3, C64};
use crate::models::{Example1, Example2};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Largest distance from the model's periodic orbit accepted as on-orbit.
const ON_ORBIT_TOL: f64 = 1e-8;

fn check_on_orbit(sys: &SystemDef, x: &Vector3<f64>) -> Result<(), OrbitError> {
    match sys.field.orbit_residual(x) {
        Some(r) if r > ON_ORBIT_TOL => Err(OrbitError::NotOnOrbit { residual: r }),
        _ => Ok(()),
    }
}

/// Eigenvalues of `DΦ(x)` at a point of the model's periodic orbit.
pub fn onorbit_jacobian_spectrum(sys: &SystemDef, x: &Vector3<f64>) -> Result<[C64; 3], OrbitError> {
    check_on_orbit(sys, x)?;
    Ok(eigenvalues3(&sys.jacobian(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleFocusReport {
    pub model: String,
    pub conditions: Vec<Condition>,
    pub saddle_focus: bool,
}

fn cond(name: &str, value: f64, holds: bool) -> Condition {
    Condition { name: name.to_string(), value, holds }
}

/// Coefficients `[c2, c1, c0]` of `det(λI − DΦ) = λ³ + (2α − F₃)λ² + λ − F₃`
/// on the unit circle of the second example.
pub fn example2_char_poly(alpha: f64, f3: f64) -> [f64; 3] {
    [2.0 * alpha - f3, 1.0, -f3]
}

/// Evaluates the sufficient conditions for a saddle-focus at `x`:
/// for the first example `F₃ > 0`, `b = −2yF₂ − 2xF₁ > 0` and
/// `b² − 4(1 + 2xF₂ − 2yF₁) < 0`; for the second `F₃ > 0` (a positive
/// root, since the cubic is `−F₃` at 0) and the depressed-cubic
/// discriminant `(q/2)² + (p/3)³ > 0` with `λ = t − (2α − F₃)/3`.
pub fn saddle_focus_test(sys: &SystemDef, x: &Vector3<f64>) -> Result<SaddleFocusReport, OrbitError> {
    check_on_orbit(sys, x)?;
    let any = sys.field.as_any();
    if let Some(e) = any.downcast_ref::<Example1>() {
        let f = e.f_terms(x).f;
        let (px, py) = (x[0], x[1]);
        let b = -2.0 * py * f[1] - 2.0 * px * f[0];
        let c = 1.0 + 2.0 * px * f[1] - 2.0 * py * f[0];
        let disc = b * b - 4.0 * c;
        let conditions = vec![cond("F3 > 0", f[2], f[2] > 0.0), cond("b > 0", b, b > 0.0), cond("b^2 - 4c < 0", disc, disc < 0.0)];
        let saddle_focus = conditions.iter().all(|c| c.holds);
        return Ok(SaddleFocusReport { model: "example1".into(), conditions, saddle_focus });
    }
    if let Some(e) = any.downcast_ref::<Example2>() {
        let [a, b, c] = example2_char_poly(e.alpha, e.f3);
        let half_q = a.powi(3) / 27.0 - a * b / 6.0 + c / 2.0;
        let third_p = b / 3.0 - a * a / 9.0;
        let disc = half_q * half_q + third_p.powi(3);
        let conditions = vec![cond("F3 > 0", e.f3, e.f3 > 0.0), cond("(q/2)^2 + (p/3)^3 > 0", disc, disc > 0.0)];
        let saddle_focus = conditions.iter().all(|c| c.holds);
        return Ok(SaddleFocusReport { model: "example2".into(), conditions, saddle_focus });
    }
    Err(OrbitError::UnsupportedModel(sys.name.clone()))
}

/// The closed-form unstable eigenvector of the second example,
/// `((F₁λ₀ − F₂)/D, (F₁ + λ₀F₂)/D, 1)` with `D = λ₀² + 2αλ₀ + 1`, valid on
/// the unit circle.
pub fn example2_unstable_direction(
    x: &Vector3<f64>,
    lambda0: f64,
    alpha: f64,
    f: [f64; 3],
) -> Result<Vector3<f64>, OrbitError> {
    let d = lambda0 * lambda0 + 2.0 * alpha * lambda0 + 1.0;
    // the 2x2 minor of DΦ − λ₀I equals D on the circle
    let minor = Matrix3::new(
        2.0 * x[0] * f[0] - lambda0,
        -1.0 + 2.0 * x[1] * f[0],
        0.0,
        1.0 + 2.0 * x[0] * f[1],
        2.0 * x[1] * f[1] - lambda0,
        0.0,
        0.0,
        0.0,
        1.0,
    )
    .determinant();
    if d.abs() < 1e-12 || minor.abs() < 1e-12 {
        return Err(OrbitError::Degenerate(format!("minor {minor:e}, denominator {d:e}")));
    }
    Ok(Vector3::new((f[0] * lambda0 - f[1]) / d, (f[0] + lambda0 * f[1]) / d, 1.0))
}
