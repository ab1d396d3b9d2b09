//! Points with prescribed itineraries, built from nested strips.

use super::check::HorseshoeCertificate;
use super::transport::{pullback_strip, push_forward_strip};
use super::{curve_intersect, HorseshoeError, PlanarMap, PlanePoint, StripSystem};
use crate::symbolic::{admissible, PeriodicSequence, Word};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowPoint {
    pub word: Vec<usize>,
    pub point: PlanePoint,
    /// Width of the innermost nested strip.
    pub width: f64,
    pub iterates: Vec<PlanePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub block: Vec<usize>,
    pub point: PlanePoint,
    /// `|f^p(x) − x|` in normalised coordinates.
    pub residual: f64,
    pub h_width: f64,
    pub v_width: f64,
}

/// Symbols of the horizontal strips visited by `x, f(x), …` (`None` once an
/// iterate lies in no strip or the map fails).
pub fn itinerary(map: &dyn PlanarMap, sys: &StripSystem, x: &PlanePoint, n: usize, tol: f64) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(n);
    let mut y = Some(*x);
    for _ in 0..n {
        let s = y.as_ref().and_then(|p| sys.h_symbol_of(p, tol));
        out.push(s);
        y = match (y, s) {
            (Some(p), Some(_)) => map.forward(&p).ok(),
            _ => None,
        };
    }
    out
}

/// Shadowing without certificate checks (used while assembling one).
pub(crate) fn shadow_unchecked(
    map: &dyn PlanarMap,
    sys: &StripSystem,
    w: &Word,
    tol: f64,
    n: usize,
) -> Result<ShadowPoint, HorseshoeError> {
    let s = w.symbols();
    let last = s.len() - 1;
    let mut strip = sys.h(s[last]).clone();
    for i in (0..last).rev() {
        if sys.target(s[i]) != sys.h(s[i + 1]).square {
            return Err(HorseshoeError::Inadmissible);
        }
        strip = pullback_strip(map, sys, s[i], &strip, n)
            .map_err(|e| HorseshoeError::NestingBreakdown { depth: last - i, reason: e.to_string() })?
            .strip;
    }
    let point = PlanePoint::new(strip.square, 0.5, strip.midline().eval(0.5));
    let mut iterates = vec![point];
    let mut y = point;
    for (i, &sym) in s.iter().enumerate() {
        if !sys.h(sym).contains(&y, tol) {
            return Err(HorseshoeError::ItineraryMismatch { step: i, symbol: sym });
        }
        if i < last {
            y = map.forward(&y)?;
            iterates.push(y);
        }
    }
    Ok(ShadowPoint { word: s.to_vec(), point, width: strip.width, iterates })
}

fn check_word(cert: &HorseshoeCertificate, w: &Word) -> Result<(), HorseshoeError> {
    if !cert.is_certified() {
        return Err(HorseshoeError::NotCertified);
    }
    if !admissible(w, &cert.matrix)? {
        return Err(HorseshoeError::Inadmissible);
    }
    Ok(())
}

/// A point whose first `|w|` iterates visit the strips `H_{w_0}, H_{w_1}, …`,
/// taken on the midline of the nested pullback strip at `ξ = 0.5` and
/// verified by direct iteration.
pub fn shadow(
    cert: &HorseshoeCertificate,
    map: &dyn PlanarMap,
    sys: &StripSystem,
    w: &Word,
) -> Result<ShadowPoint, HorseshoeError> {
    check_word(cert, w)?;
    shadow_unchecked(map, sys, w, cert.config.tol_geom, cert.config.curve_samples)
}

fn depth_for(nu: f64) -> usize {
    const TARGET_WIDTH: f64 = 1e-12;
    if !(nu > 0.0 && nu < 1.0) {
        return 40;
    }
    ((TARGET_WIDTH.ln() / nu.ln()).ceil() as usize + 1).clamp(2, 60)
}

/// The periodic point with itinerary `…b b b…`: intersection of the nested
/// future (horizontal) and past (vertical) strips.
pub fn shadow_periodic(
    cert: &HorseshoeCertificate,
    map: &dyn PlanarMap,
    sys: &StripSystem,
    block: &Word,
) -> Result<PeriodicPoint, HorseshoeError> {
    if !cert.is_certified() {
        return Err(HorseshoeError::NotCertified);
    }
    if !PeriodicSequence::new(block.clone()).cyclically_admissible(&cert.matrix)? {
        return Err(HorseshoeError::Inadmissible);
    }
    let b = block.symbols();
    let p = b.len() as i64;
    let at = |i: i64| b[i.rem_euclid(p) as usize];
    let n = cert.config.curve_samples;
    let breakdown = |depth: usize, e: HorseshoeError| HorseshoeError::NestingBreakdown { depth, reason: e.to_string() };

    let future = depth_for(cert.nu_h);
    let mut h = sys.h(at(future as i64 - 1)).clone();
    for i in (0..future as i64 - 1).rev() {
        h = pullback_strip(map, sys, at(i), &h, n).map_err(|e| breakdown(future - i as usize, e))?.strip;
    }
    let past = depth_for(cert.nu_v);
    let mut v = sys.v(at(-(past as i64))).clone();
    for i in (1..past as i64).rev() {
        v = push_forward_strip(map, sys, at(-i), &v, n).map_err(|e| breakdown(past - i as usize, e))?.strip;
    }
    let x = curve_intersect(&v.midline(), &h.midline())?;
    let point = PlanePoint::new(h.square, x.xi, x.eta);
    let mut y = point;
    for k in 0..p {
        let sym = at(k);
        if !sys.h(sym).contains(&y, cert.config.tol_geom) {
            return Err(HorseshoeError::ItineraryMismatch { step: k as usize, symbol: sym });
        }
        y = map.forward(&y)?;
    }
    let residual = if y.square == point.square { (y.p - point.p).norm() } else { f64::INFINITY };
    Ok(PeriodicPoint { block: b.to_vec(), point, residual, h_width: h.width, v_width: v.width })
}

/// One periodic point per cyclically admissible word of length `n`.
pub fn periodic_points(
    cert: &HorseshoeCertificate,
    map: &dyn PlanarMap,
    sys: &StripSystem,
    n: usize,
) -> Result<Vec<PeriodicPoint>, HorseshoeError> {
    let words: Vec<Word> = cert
        .matrix
        .admissible_words(n)
        .into_iter()
        .filter(|w| PeriodicSequence::new(w.clone()).cyclically_admissible(&cert.matrix).unwrap_or(false))
        .collect();
    let out: Vec<_> = cert.config.exec.map(&words, |w| shadow_periodic(cert, map, sys, w));
    out.into_iter().collect()
}

/// Grid-seeded Newton search for fixed points of the map inside the
/// horizontal strips.
pub fn fixed_point_search(map: &dyn PlanarMap, sys: &StripSystem, grid: usize, tol: f64) -> Vec<PlanePoint> {
    let mut found: Vec<PlanePoint> = Vec::new();
    let g = grid.max(2);
    for k in 1..=sys.symbols() {
        let h = sys.h(k);
        for a in 0..g {
            for b in 0..g {
                let xi = a as f64 / (g - 1) as f64;
                let t = b as f64 / (g - 1) as f64;
                let eta = h.lower.eval(xi) + t * (h.upper.eval(xi) - h.lower.eval(xi));
                if let Some(p) = newton_fixed(map, PlanePoint::new(h.square, xi, eta)) {
                    if h.contains(&p, tol) && !found.iter().any(|q| q.square == p.square && (q.p - p.p).norm() < 1e-8) {
                        found.push(p);
                    }
                }
            }
        }
    }
    found
}

fn newton_fixed(map: &dyn PlanarMap, mut x: PlanePoint) -> Option<PlanePoint> {
    let resid = |x: &PlanePoint| -> Option<Vector2<f64>> {
        let y = map.forward(x).ok()?;
        (y.square == x.square).then(|| y.p - x.p)
    };
    for _ in 0..30 {
        let r = resid(&x)?;
        if r.norm() < 1e-12 {
            return Some(x);
        }
        let hstep = 1e-7;
        let mut j = Matrix2::zeros();
        for c in 0..2 {
            let mut xp = x;
            xp.p[c] += hstep;
            j.set_column(c, &((resid(&xp)? - r) / hstep));
        }
        let dx = j.try_inverse()? * r;
        x.p -= dx;
        if !x.p.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}
