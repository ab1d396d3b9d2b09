use chaoscert::flow::{flow, IntegratorConfig};
use chaoscert::horseshoe::{FrameMapFamily, MapError};
use chaoscert::linalg::{char_poly, line_angle};
use chaoscert::models::{make_example1, make_example2, make_mobius, Example1, Example2};
use chaoscert::orbits::*;
use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn tight() -> IntegratorConfig {
    IntegratorConfig::with_tolerances(1e-12, 1e-12)
}

fn example1_orbit(alpha: f64, gamma: f64) -> (chaoscert::flow::SystemDef, PeriodicOrbit, FloquetData) {
    let sys = make_example1(alpha, gamma).unwrap();
    let orbit = refine_orbit(&sys, &Vector3::new(1.02, 0.0, 0.01), 6.3, &tight()).unwrap();
    let fl = floquet(&sys, &orbit, &tight()).unwrap();
    (sys, orbit, fl)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn floquet_invariants(alpha in 0.2..0.9f64, gamma in 0.1..0.8f64) {
        let (sys, orbit, fl) = example1_orbit(alpha, gamma);
        prop_assert!(orbit.period > 0.0);
        prop_assert!(orbit.residual < 1e-8 * orbit.x0.norm().max(1.0));
        // trivial multiplier: MΦ = Φ
        let phi = sys.eval(&orbit.x0);
        prop_assert!((fl.monodromy * phi - phi).norm() < 1e-6 * phi.norm());
        // Liouville
        let [prod, div] = fl.liouville;
        prop_assert!((prod - div).abs() < 1e-6 * div.abs());
        let prod_direct: f64 = fl.multipliers.iter().map(|z| z.re).product();
        prop_assert!((prod_direct - div).abs() < 1e-6 * div.abs());
        // analytic exponents −2α and γ
        let mut re: Vec<f64> = fl.multipliers.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        let want = [(-2.0 * alpha * TAU).exp(), 1.0, (gamma * TAU).exp()];
        for (a, b) in re.iter().zip(want) {
            prop_assert!((a - b).abs() < 1e-6 * b, "{} vs {}", a, b);
        }
    }

    #[test]
    fn stable_exponent_bound(alpha in 0.2..0.9f64, gamma in 0.1..0.8f64) {
        let (_, orbit, fl) = example1_orbit(alpha, gamma);
        let (c, mu, v) = (fl.c_estimate.unwrap(), fl.mu_s.unwrap(), fl.e_s.unwrap());
        let mut w = v;
        for k in 1..=3 {
            w = fl.monodromy * w;
            let bound = c * (-mu * k as f64 * orbit.period).exp() * v.norm();
            prop_assert!(w.norm() <= bound * (1.0 + 1e-9), "k = {}: {} > {}", k, w.norm(), bound);
        }
    }

    #[test]
    fn example1_circle_identities(alpha in 0.05..0.95f64, gamma in 0.05..2.0f64, th in 0.0..TAU) {
        let e = Example1 { alpha, gamma };
        let x = Vector3::new(th.cos(), th.sin(), 0.0);
        let f = e.f_terms(&x).f;
        prop_assert!((-2.0 * x[1] * f[1] - 2.0 * x[0] * f[0] - 2.0 * alpha).abs() < 1e-12);
        let ev = onorbit_jacobian_spectrum(&e.system(), &x).unwrap();
        // λ² + 2αλ + 1 = 0 for the planar pair, λ = γ for the vertical one
        let mut on_quadratic = 0;
        let mut on_gamma = 0;
        for z in ev {
            if (z * z + z * (2.0 * alpha) + 1.0).norm() < 1e-9 {
                on_quadratic += 1;
            } else if (z - gamma).norm() < 1e-9 {
                on_gamma += 1;
            }
        }
        prop_assert_eq!((on_quadratic, on_gamma), (2, 1));
    }

    #[test]
    fn example2_characteristic_polynomial(alpha in 0.05..3.0f64, f3 in -5.0..50.0f64, th in 0.0..TAU) {
        let e = Example2 { alpha, f3 };
        let x = Vector3::new(th.cos(), th.sin(), 0.0);
        let f = e.f_terms(&x).f;
        let c = char_poly(&e.system().jacobian(&x));
        // det(J − λI) = −λ³ + λ²(2xF₁+2yF₂+F₃) − λ(1+2xF₂−2yF₁) + F₃, since det J = F₃
        let a = 2.0 * x[0] * f[0] + 2.0 * x[1] * f[1] + f[2];
        let b = 1.0 + 2.0 * x[0] * f[1] - 2.0 * x[1] * f[0];
        let general = [-a, b, -f[2]];
        let closed = example2_char_poly(alpha, f3);
        for i in 0..3 {
            prop_assert!((c[i] - general[i]).abs() < 1e-10);
            prop_assert!((c[i] - closed[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn refinement_is_idempotent() {
    let (sys, orbit, _) = example1_orbit(0.5, 0.3);
    let again = refine_orbit(&sys, &orbit.x0, orbit.period, &tight()).unwrap();
    assert!((again.x0 - orbit.x0).norm() < 1e-12);
    assert!((again.period - orbit.period).abs() < 1e-12);
}

#[test]
fn example1_jacobian_spectrum_at_gamma_one() {
    let ev = onorbit_jacobian_spectrum(&make_example1(0.5, 1.0).unwrap(), &Vector3::new(1.0, 0.0, 0.0)).unwrap();
    let want = [(1.0, 0.0), (-0.5, 0.75f64.sqrt()), (-0.5, -(0.75f64.sqrt()))];
    for (re, im) in want {
        assert!(ev.iter().any(|z| (z.re - re).abs() < 1e-10 && (z.im - im).abs() < 1e-10), "{ev:?}");
    }
}

#[test]
fn example2_unstable_direction_tilts_to_z() {
    let alpha = 0.01;
    let f3 = 1e3 * alpha;
    let sys = make_example2(alpha, f3).unwrap();
    let x = Vector3::new(1.0, 0.0, 0.0);
    let ev = onorbit_jacobian_spectrum(&sys, &x).unwrap();
    let l0 = ev.iter().filter(|z| z.im.abs() < 1e-12).map(|z| z.re).fold(f64::MIN, f64::max);
    let v = example2_unstable_direction(&x, l0, alpha, Example2 { alpha, f3 }.f_terms(&x).f).unwrap();
    assert!(line_angle(&v, &Vector3::z()) < 0.05);
    let r = (sys.jacobian(&x) - Matrix3::identity() * l0) * v;
    assert!(r.norm() < 1e-8 * v.norm() * l0);
}

#[test]
fn saddle_focus_conditions() {
    let r = saddle_focus_test(&make_example2(0.5, 3.0).unwrap(), &Vector3::new(0.0, 1.0, 0.0)).unwrap();
    let disc = r.conditions[1].value;
    // two complex roots exactly when the cubic discriminant is negative
    let c = example2_char_poly(0.5, 3.0);
    let (p, q) = (c[1] - c[0] * c[0] / 3.0, 2.0 * c[0].powi(3) / 27.0 - c[0] * c[1] / 3.0 + c[2]);
    assert!((disc - ((q / 2.0).powi(2) + (p / 3.0).powi(3))).abs() < 1e-12);
    let ev = onorbit_jacobian_spectrum(&make_example2(0.5, 3.0).unwrap(), &Vector3::new(0.0, 1.0, 0.0)).unwrap();
    assert_eq!(ev.iter().filter(|z| z.im.abs() > 1e-12).count() == 2, r.saddle_focus);
}

#[test]
fn local_manifolds_of_example1() {
    let (alpha, gamma) = (0.5, 0.3);
    let (sys, orbit, fl) = example1_orbit(alpha, gamma);
    let frames = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &tight()).unwrap();
    let (ws, wu) = local_manifolds(&sys, &orbit, &fl, &frames.0, 0.02, 41, &tight()).unwrap();
    assert!(line_angle(&wu.direction, &Vector3::z()) < 1e-3);
    let radial = orbit.x0.normalize();
    let tilt = ws.direction[2] / ws.direction.dot(&radial);
    assert!((tilt + 2.0 * gamma / (2.0 * alpha + gamma)).abs() < 1e-6);
    for m in [&ws, &wu] {
        let mid = m.curve.len() / 2;
        let tangent = m.curve[mid + 1] - m.curve[mid - 1];
        assert!(line_angle(&tangent, &m.direction) < 1e-4, "{:?}", m.kind);
        assert!(m.contraction_ratio < 1.0);
    }
    let surf = orbit_manifold_export(&sys, &orbit, &wu, &[0.0], &tight()).unwrap();
    assert_eq!(surf.rows[0].len(), wu.curve.len());
    assert!(!surf.one_sided);
    let far = orbit_manifold_export(&sys, &orbit, &wu, &[0.0, PI, TAU], &tight()).unwrap();
    assert_eq!(far.rows.len(), 3);
    let csv = manifold_surface_csv(&far);
    assert!(csv.starts_with("row,col,t,arclength,x,y,z\n"));
}

#[test]
fn frames_are_transversal() {
    let (sys, orbit, fl) = example1_orbit(0.5, 0.3);
    let (fp, fq) = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &tight()).unwrap();
    for f in [&fp, &fq] {
        let det = Matrix3::from_columns(&[f.e_s, f.e_u, f.flow_direction]).determinant();
        assert!(det.abs() > 1e-3 * f.flow_direction.norm());
    }
    assert!((fq.base - flow(&sys, &fp.base, 0.5 * orbit.period, &tight()).unwrap()).norm() < 1e-9);
}

#[test]
fn half_period_map_round_trip_and_errors() {
    let (sys, orbit, fl) = example1_orbit(0.5, 0.3);
    let frames = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &tight()).unwrap();
    let map = half_period_map(&sys, &orbit, frames.clone(), 0, &tight()).unwrap();
    for (s, u) in [(0.02, 0.001), (-0.05, -0.002), (0.0, 0.0)] {
        let (y, off) = map.eval(s, u).unwrap();
        assert!(off < 1e-9);
        let back = map.inverse(y[0], y[1]).unwrap();
        assert!((back - Vector2::new(s, u)).norm() < 1e-8, "{back}");
    }
    // a target frame not at φ(T/2, p) violates the precondition
    let mut shifted = frames.clone();
    shifted.1.base += Vector3::new(0.0, 0.0, 1e-6);
    assert!(HalfPeriodFamily::new(sys.clone(), &orbit, shifted, tight()).is_err());
    // a target plane tilted toward the flow makes images land off it
    let mut tilted = frames;
    let phi = tilted.1.flow_direction.normalize();
    tilted.1.e_s = (tilted.1.e_s + phi * 0.5).normalize();
    let fam = HalfPeriodFamily::new(sys, &orbit, tilted, tight()).unwrap();
    assert!(matches!(fam.map(0, 0, Vector2::new(1.0, 0.0)), Err(MapError::OffPlane { .. })));
}

#[test]
fn mobius_orbit_and_return() {
    let sys = make_mobius();
    let orbit = refine_orbit(&sys, &Vector3::new(0.01, -0.01, 1.25), 1.1, &tight()).unwrap();
    assert!(orbit.x0.xy().norm() < 1e-10);
    assert!((orbit.period - 1.0).abs() < 1e-10);
    let fl = floquet(&sys, &orbit, &tight()).unwrap();
    assert_eq!(fl.classification, OrbitClass::OrientationReversingSaddle);
    assert!((fl.lambda_s.unwrap() + (-1.0f64).exp()).abs() < 1e-8);
    assert!((fl.lambda_u.unwrap() + 1.0f64.exp()).abs() < 1e-8);
}

#[test]
fn degenerate_orbits_are_non_hyperbolic() {
    let sys = Example1 { alpha: 0.5, gamma: 0.0 }.system();
    let orbit = refine_orbit(&sys, &Vector3::new(1.02, 0.0, 0.0), 6.3, &tight()).unwrap();
    let fl = floquet(&sys, &orbit, &tight()).unwrap();
    assert_eq!(fl.classification, OrbitClass::NonHyperbolic);
    let sys = make_example2(0.5, 1.0).unwrap();
    let orbit = refine_orbit(&sys, &Vector3::new(1.0, 0.0, 0.0), TAU, &tight()).unwrap();
    assert!(!floquet(&sys, &orbit, &tight()).unwrap().is_hyperbolic());
}
