//! Periodic orbits: Newton shooting, Floquet data, on-orbit Jacobian
//! spectra, local invariant manifolds, cross-section frames and fixed-time
//! half-period maps between frames.

mod frames;
mod manifolds;
mod spectrum;

pub use frames::{build_frames, half_period_map, CrossSectionFrame, HalfPeriodFamily, HalfPeriodMap};
pub use manifolds::{
    local_manifolds, manifold_surface_csv, orbit_manifold_export, LocalManifold, ManifoldKind, ManifoldSurface,
};
pub use spectrum::{
    example2_char_poly, example2_unstable_direction, onorbit_jacobian_spectrum, saddle_focus_test, Condition,
    SaddleFocusReport,
};

use crate::flow::{integrate_trajectory, variational_flow, FlowError, IntegratorConfig, Sample, SystemDef};
use crate::linalg::{canonical_sign, eigenvalues3, real_eigenvector, C64};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Newton stops once `|F| <` this.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
/// Singular values below this fraction of the largest are dropped from the
/// shooting step.
const RANK_TOL: f64 = 1e-9;
/// Transversal multipliers this close to the unit circle are not hyperbolic.
pub const HYPERBOLICITY_GAP: f64 = 1e-6;

/// Gap actually applied: a triple multiplier 1 in a Jordan block is split
/// by about the cube root of the integration error.
pub fn hyperbolicity_gap(cfg: &IntegratorConfig) -> f64 {
    HYPERBOLICITY_GAP.max(2.0 * cfg.abs_tol.max(cfg.rel_tol).cbrt())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrbitError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Newton diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
    #[error("singular shooting Jacobian at iteration {iteration}")]
    Singular { iteration: usize },
    #[error("point is off the model's periodic orbit (residual {residual:e})")]
    NotOnOrbit { residual: f64 },
    #[error("operation needs a built-in model: {0}")]
    UnsupportedModel(String),
    #[error("orbit is not hyperbolic")]
    NonHyperbolic,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("manifold growth failed: {0}")]
    Growth(String),
    #[error("contraction check failed at {point:?} (ratio {ratio})")]
    Contraction { point: [f64; 3], ratio: f64 },
    #[error("frames inconsistent: {0}")]
    Frames(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub x0: Vector3<f64>,
    pub period: f64,
    /// `|φ(T, x0) − x0|`.
    pub residual: f64,
    pub iterations: usize,
    pub samples: Vec<Sample>,
}

fn shooting_residual(
    sys: &SystemDef,
    x: &Vector3<f64>,
    t: f64,
    guess: &Vector3<f64>,
    phase: &Vector3<f64>,
    cfg: &IntegratorConfig,
) -> Result<(Vector4<f64>, Vector3<f64>, Matrix3<f64>), FlowError> {
    let (end, m) = variational_flow(sys, x, t, cfg)?;
    let d = end - x;
    Ok((Vector4::new(d[0], d[1], d[2], phase.dot(&(x - guess))), end, m))
}

/// Newton shooting on `(φ(T,x) − x, Φ(g)·(x − g))` from the guess `g`, with
/// step halving when the residual grows.
pub fn refine_orbit(
    sys: &SystemDef,
    guess: &Vector3<f64>,
    t_guess: f64,
    cfg: &IntegratorConfig,
) -> Result<PeriodicOrbit, OrbitError> {
    if !(t_guess > 0.0 && t_guess.is_finite()) {
        return Err(OrbitError::Degenerate(format!("period guess {t_guess}")));
    }
    let phase = sys.eval(guess);
    let diverged = |iteration: usize, e: FlowError| OrbitError::Diverged { iteration, reason: e.to_string() };
    let (mut x, mut t) = (*guess, t_guess);
    let (mut f, mut end, mut m) = shooting_residual(sys, &x, t, guess, &phase, cfg).map_err(|e| diverged(0, e))?;
    for it in 0..=NEWTON_MAX_ITER {
        if f.norm() < NEWTON_TOL {
            let samples = integrate_trajectory(sys, &x, t, cfg)?.samples;
            return Ok(PeriodicOrbit { x0: x, period: t, residual: (end - x).norm(), iterations: it, samples });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let fe = sys.eval(&end);
        let mut j = Matrix4::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(m - Matrix3::identity()));
        j.fixed_view_mut::<3, 1>(0, 3).copy_from(&fe);
        j.fixed_view_mut::<1, 3>(3, 0).copy_from(&phase.transpose());
        // minimum-norm step: orbits inside a continuum of periodic orbits
        // make the shooting matrix rank deficient
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0 && smax.is_finite()) {
            return Err(OrbitError::Singular { iteration: it });
        }
        let step = svd
            .solve(&(-f), RANK_TOL * smax)
            .map_err(|_| OrbitError::Singular { iteration: it })?;
        let mut lambda = 1.0;
        let mut last_err = None;
        let mut accepted = None;
        for _ in 0..8 {
            let xn = x + step.fixed_rows::<3>(0) * lambda;
            let tn = t + step[3] * lambda;
            if tn > 0.0 {
                match shooting_residual(sys, &xn, tn, guess, &phase, cfg) {
                    Ok(r) if r.0.norm() < f.norm() || lambda < 0.01 => {
                        accepted = Some((xn, tn, r));
                        break;
                    }
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
            }
            lambda *= 0.5;
        }
        let Some((xn, tn, r)) = accepted else {
            return Err(match last_err {
                Some(e) => diverged(it + 1, e),
                None => OrbitError::Diverged { iteration: it + 1, reason: "no step reduces the residual".into() },
            });
        };
        x = xn;
        t = tn;
        (f, end, m) = r;
    }
    Err(OrbitError::NoConvergence { iterations: NEWTON_MAX_ITER, residual: f.norm() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    /// Real transversal multipliers `0 < λ_s < 1 < λ_u`.
    Saddle,
    /// Both transversal multipliers negative, `|λ_s| < 1 < |λ_u|`.
    OrientationReversingSaddle,
    /// Real transversal multipliers of opposite signs across the unit circle.
    MixedSaddle,
    /// Real transversal multipliers on the same side of the unit circle.
    Node,
    /// Complex transversal pair off the unit circle.
    Focus,
    NonHyperbolic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetData {
    pub monodromy: Matrix3<f64>,
    pub multipliers: [C64; 3],
    pub trivial_index: usize,
    /// `|MΦ − Φ| / |Φ|` at the base point.
    pub trivial_residual: f64,
    pub classification: OrbitClass,
    pub lambda_s: Option<f64>,
    pub lambda_u: Option<f64>,
    /// `−log|λ_s| / T`.
    pub mu_s: Option<f64>,
    /// `log|λ_u| / T`.
    pub mu_u: Option<f64>,
    pub e_s: Option<Vector3<f64>>,
    pub e_u: Option<Vector3<f64>>,
    /// Fitted transient constant over monodromy powers `k = 1..3`; an
    /// estimate, not a certified bound.
    pub c_estimate: Option<f64>,
    /// Product of the multipliers and `exp(∫ div Φ dt)` over one period.
    pub liouville: [f64; 2],
}

impl FloquetData {
    pub fn is_hyperbolic(&self) -> bool {
        self.classification != OrbitClass::NonHyperbolic
    }

    /// True when some transversal direction is reversed after one period.
    pub fn orientation_flip(&self) -> bool {
        self.lambda_s.is_some_and(|l| l < 0.0) || self.lambda_u.is_some_and(|l| l < 0.0)
    }
}

/// Transient constant `max_k |Mᵏv| e^{μ_s kT} / |v|` for the stable
/// eigenvector together with the backward analogue for the unstable one.
fn transient_constant(m: &Matrix3<f64>, floq: (&Vector3<f64>, f64), unst: (&Vector3<f64>, f64), t: f64) -> Option<f64> {
    let inv = m.try_inverse()?;
    let (mut vs, mut vu) = (*floq.0, *unst.0);
    let mut c: f64 = 1.0;
    for k in 1..=3 {
        vs = m * vs;
        vu = inv * vu;
        let kt = k as f64 * t;
        c = c.max(vs.norm() * (floq.1 * kt).exp()).max(vu.norm() * (unst.1 * kt).exp());
    }
    Some(c)
}

/// Monodromy, multipliers and the hyperbolic splitting of a periodic orbit.
pub fn floquet(sys: &SystemDef, orbit: &PeriodicOrbit, cfg: &IntegratorConfig) -> Result<FloquetData, OrbitError> {
    let t = orbit.period;
    let (_, m) = variational_flow(sys, &orbit.x0, t, cfg)?;
    let mult = eigenvalues3(&m);
    let trivial_index = (0..3)
        .min_by(|&a, &b| (mult[a] - 1.0).norm().partial_cmp(&(mult[b] - 1.0).norm()).expect("finite"))
        .expect("three multipliers");
    let phi = sys.eval(&orbit.x0);
    let trivial_residual = (m * phi - phi).norm() / phi.norm();
    let others: Vec<C64> = (0..3).filter(|&i| i != trivial_index).map(|i| mult[i]).collect();
    let near_unit = others.iter().any(|z| (z.norm() - 1.0).abs() < hyperbolicity_gap(cfg));
    let real = others.iter().all(|z| z.im == 0.0);
    let (mut lambda_s, mut lambda_u) = (None, None);
    let classification = if near_unit {
        OrbitClass::NonHyperbolic
    } else if !real {
        OrbitClass::Focus
    } else {
        let (a, b) = if others[0].re.abs() < others[1].re.abs() {
            (others[0].re, others[1].re)
        } else {
            (others[1].re, others[0].re)
        };
        if a.abs() < 1.0 && b.abs() > 1.0 {
            lambda_s = Some(a);
            lambda_u = Some(b);
            match (a > 0.0, b > 0.0) {
                (true, true) => OrbitClass::Saddle,
                (false, false) => OrbitClass::OrientationReversingSaddle,
                _ => OrbitClass::MixedSaddle,
            }
        } else {
            OrbitClass::Node
        }
    };
    let e_s = lambda_s.map(|l| canonical_sign(real_eigenvector(&m, l)));
    let e_u = lambda_u.map(|l| canonical_sign(real_eigenvector(&m, l)));
    let mu_s = lambda_s.map(|l| -l.abs().ln() / t);
    let mu_u = lambda_u.map(|l| l.abs().ln() / t);
    let c_estimate = match (&e_s, mu_s, &e_u, mu_u) {
        (Some(vs), Some(ms), Some(vu), Some(mu)) => transient_constant(&m, (vs, ms), (vu, mu), t),
        _ => None,
    };
    let div = integrate_trajectory(sys, &orbit.x0, t, cfg)?.integrate_along(|x| sys.divergence(x));
    let product = (mult[0] * mult[1] * mult[2]).re;
    Ok(FloquetData {
        monodromy: m,
        multipliers: mult,
        trivial_index,
        trivial_residual,
        classification,
        lambda_s,
        lambda_u,
        mu_s,
        mu_u,
        e_s,
        e_u,
        c_estimate,
        liouville: [product, div.exp()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_example1, make_mobius};

    #[test]
    fn example1_orbit_and_multipliers() {
        let sys = make_example1(0.5, 0.3).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-12);
        let orbit = refine_orbit(&sys, &Vector3::new(1.05, 0.0, 0.02), 6.3, &cfg).unwrap();
        let r = orbit.x0.xy().norm();
        assert!((r - 1.0).abs() < 1e-8 && orbit.x0[2].abs() < 1e-8, "{:?}", orbit.x0);
        assert!((orbit.period - std::f64::consts::TAU).abs() < 1e-8);
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        assert_eq!(fl.classification, OrbitClass::Saddle);
        let tau = std::f64::consts::TAU;
        assert!((fl.lambda_s.unwrap() / (-0.5 * 2.0 * tau).exp() - 1.0).abs() < 1e-6);
        assert!((fl.lambda_u.unwrap() / (0.3 * tau).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mobius_orbit_reverses_orientation() {
        let sys = make_mobius();
        let cfg = IntegratorConfig::default();
        let orbit = refine_orbit(&sys, &Vector3::new(0.0, 0.0, 1.25), 1.0, &cfg).unwrap();
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        assert_eq!(fl.classification, OrbitClass::OrientationReversingSaddle);
        assert!((fl.lambda_s.unwrap() + (-1.0f64).exp()).abs() < 1e-8);
        assert!((fl.lambda_u.unwrap() + 1.0f64.exp()).abs() < 1e-8);
        assert!(fl.orientation_flip());
    }

    #[test]
    fn far_guess_fails() {
        let sys = make_example1(0.5, 0.3).unwrap();
        assert!(refine_orbit(&sys, &Vector3::new(5.0, 5.0, 5.0), 6.3, &IntegratorConfig::default()).is_err());
    }
}
