use chaoscert::horseshoe::*;
use chaoscert::models::{make_affine_model, make_example1, make_synthetic_halfperiod, make_two_orbit_layout};
use chaoscert::orbits::{build_frames, floquet, refine_orbit, HalfPeriodFamily};
use chaoscert::flow::IntegratorConfig;
use chaoscert::symbolic::{count_periodic, Word};
use nalgebra::Vector3;
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

fn affine() -> &'static (chaoscert::models::PiecewiseAffine, StripSystem, HorseshoeCertificate) {
    static CELL: OnceLock<(chaoscert::models::PiecewiseAffine, StripSystem, HorseshoeCertificate)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (map, sys) = make_affine_model(0.0).unwrap();
        let cert = certify(&map, &sys, &CertifyConfig::default());
        (map, sys, cert)
    })
}

/// Admissible A4 word: after 1, 2 come 3, 4 and vice versa.
fn a4_word(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    (1usize..=4, proptest::collection::vec(0usize..=1, 0..max_len)).prop_map(|(first, steps)| {
        let mut w = vec![first];
        for b in steps {
            let last = *w.last().unwrap();
            w.push(if last <= 2 { 3 + b } else { 1 + b });
        }
        w
    })
}

fn wavy(kind: CurveKind, base: f64, amp: f64, freq: f64) -> CurveGraph {
    CurveGraph::from_fn(kind, 129, |t| base + amp * (freq * t).sin()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sub_strips_are_narrower(lo in 0.0..0.4f64, amp in 0.0..0.05f64, a in 0.0..0.49f64, b in 0.51..1.0f64) {
        let s = Strip::new(
            wavy(CurveKind::Horizontal, lo, amp, 3.0),
            wavy(CurveKind::Horizontal, lo + 0.3, amp, 5.0),
            0,
            1,
        ).unwrap();
        let sub = s.sub_strip(a, b).unwrap();
        prop_assert!(sub.width <= s.width * (b - a) + 1e-12);
        prop_assert!(sub.width < s.width);
    }

    #[test]
    fn curve_intersection_converges_geometrically(
        v0 in 0.1..0.9f64, h0 in 0.1..0.9f64, av in 0.0..0.1f64, ah in 0.0..0.1f64, fv in 1.0..6.0f64, fh in 1.0..6.0f64,
    ) {
        let v = wavy(CurveKind::Vertical, v0, av, fv);
        let h = wavy(CurveKind::Horizontal, h0, ah, fh);
        let x = curve_intersect(&v, &h).unwrap();
        prop_assert!((v.eval(x.eta) - x.xi).abs() < 1e-10);
        prop_assert!((h.eval(x.xi) - x.eta).abs() < 1e-10);
        let q = v.lipschitz * h.lipschitz;
        if q > 0.0 {
            let bound = (1e-12f64.ln() / q.ln()).ceil() as usize + 2;
            prop_assert!(x.iterations <= bound, "{} > {}", x.iterations, bound);
        }
    }

    #[test]
    fn affine_shadows_follow_their_words(w in a4_word(8)) {
        let (map, sys, cert) = affine();
        let word = Word::new(w.clone(), 4).unwrap();
        let p = shadow(cert, map, sys, &word).unwrap();
        let it = itinerary(map, sys, &p.point, w.len(), cert.config.tol_geom);
        prop_assert_eq!(it, w.iter().map(|&s| Some(s)).collect::<Vec<_>>());
        // each level of nesting shrinks the strip by the contraction factor 1/4
        let want = 0.25f64.powi(w.len() as i32);
        prop_assert!((p.width - want).abs() < 1e-9 * want.max(1e-6), "{} vs {}", p.width, want);
    }

    #[test]
    fn shadowing_conjugates_the_shift(w in a4_word(6)) {
        prop_assume!(w.len() >= 2);
        let (map, sys, cert) = affine();
        let p = shadow(cert, map, sys, &Word::new(w.clone(), 4).unwrap()).unwrap();
        let image = map.forward(&p.point).unwrap();
        prop_assert!(sys.h(w[1]).contains(&image, cert.config.tol_geom));
        let it = itinerary(map, sys, &image, w.len() - 1, cert.config.tol_geom);
        prop_assert_eq!(it, w[1..].iter().map(|&s| Some(s)).collect::<Vec<_>>());
    }
}

#[test]
fn affine_certificate_constants() {
    let (_, _, cert) = affine();
    assert!(cert.is_certified(), "{:?}", cert.verdict);
    assert!((cert.nu_h - 0.25).abs() < 1e-6 && (cert.nu_v - 0.25).abs() < 1e-6);
    assert!(cert.mu_h * cert.mu_v < 1.0);
}

#[test]
fn affine_periodic_points() {
    let (map, sys, cert) = affine();
    let two = periodic_points(cert, map, sys, 2).unwrap();
    assert_eq!(two.len() as u128, count_periodic(&cert.matrix, 2).unwrap());
    assert_eq!(two.len(), 8);
    for p in &two {
        assert!(p.residual < 1e-9, "{:?}", p.block);
    }
    assert!(periodic_points(cert, map, sys, 1).unwrap().is_empty());
    assert!(fixed_point_search(map, sys, 16, 1e-10).is_empty());
}

#[test]
fn inadmissible_words_are_refused() {
    let (map, sys, cert) = affine();
    let w = Word::new(vec![1, 2], 4).unwrap();
    assert!(matches!(shadow(cert, map, sys, &w), Err(HorseshoeError::Inadmissible)));
}

#[test]
fn tilted_affine_model_still_certifies() {
    let (map, sys) = make_affine_model(0.2).unwrap();
    let cert = certify(&map, &sys, &CertifyConfig::default());
    assert!(cert.is_certified(), "{:?}", cert.verdict);
    let p = shadow(&cert, &map, &sys, &Word::new(vec![1, 3, 2, 4, 1], 4).unwrap()).unwrap();
    assert_eq!(p.iterates.len(), 5);
}

#[test]
fn two_orbit_layout_realises_b() {
    let (map, sys) = make_two_orbit_layout().unwrap();
    let cert = certify(&map, &sys, &CertifyConfig::default());
    assert!(cert.is_certified());
    assert_eq!(cert.matrix, chaoscert::symbolic::TransitionMatrix::b8());
}

#[test]
fn sequential_and_parallel_certificates_agree() {
    let (map, sys) = make_affine_model(0.1).unwrap();
    let mut cfg = CertifyConfig::default();
    let par = certify(&map, &sys, &cfg);
    cfg.exec = chaoscert::exec::Exec::Sequential;
    let seq = certify(&map, &sys, &cfg);
    assert_eq!(par.verdict, seq.verdict);
    assert_eq!(par.assumption2.horizontal, seq.assumption2.horizontal);
    assert_eq!((par.nu_h, par.nu_v), (seq.nu_h, seq.nu_v));
}

#[test]
fn synthetic_family_certifies_with_a() {
    let fam = Arc::new(make_synthetic_halfperiod(0.1).unwrap());
    let fs = build_strips_from_flow(fam, &SearchConfig::default()).unwrap();
    assert!(fs.certificate.is_certified());
    assert_eq!(fs.certificate.matrix, chaoscert::symbolic::TransitionMatrix::a4());
    let w = Word::new(vec![1, 3, 1, 4, 2, 3], 4).unwrap();
    let p = shadow(&fs.certificate, &fs.map, &fs.system, &w).unwrap();
    let it = itinerary(&fs.map, &fs.system, &p.point, 6, fs.certificate.config.tol_geom);
    assert!(it.iter().zip(w.symbols()).all(|(a, &b)| *a == Some(b)));
}

#[test]
fn example1_strips_fail_at_covering() {
    let cfg = IntegratorConfig::with_tolerances(1e-10, 1e-10);
    let sys = make_example1(0.5, 0.3).unwrap();
    let orbit = refine_orbit(&sys, &Vector3::new(1.05, 0.0, 0.02), 6.3, &cfg).unwrap();
    let fl = floquet(&sys, &orbit, &cfg).unwrap();
    let frames = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &cfg).unwrap();
    let fam = Arc::new(HalfPeriodFamily::new(sys, &orbit, frames, cfg).unwrap());
    let err = build_strips_from_flow(fam, &SearchConfig { k_max: 8, ..SearchConfig::default() }).unwrap_err();
    assert_eq!(err.step, BuildStep::Covering);
}
