//! Local stable and unstable manifolds of the period map and their sweeps
//! along the flow.

use super::{FloquetData, OrbitError, PeriodicOrbit};
use crate::exec::Exec;
use crate::flow::{flow, flow_batch, variational_flow, IntegratorConfig, SystemDef};
use super::CrossSectionFrame;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Seeds per fundamental segment.
const SEEDS: usize = 64;
const MAX_ITERATIONS: usize = 200;
/// Distances below this are integration noise in the contraction check and
/// count as contracted.
const NOISE_FLOOR: f64 = 1e-9;
/// Seeds are not advanced once their image would pass `REACH·radius`.
const REACH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalManifold {
    pub base: Vector3<f64>,
    pub kind: ManifoldKind,
    pub direction: Vector3<f64>,
    pub multiplier: f64,
    /// Samples ordered along the curve; the base point sits in the middle.
    pub curve: Vec<Vector3<f64>>,
    /// Signed arclength of each sample from the base.
    pub arclength: Vec<f64>,
    pub radius: f64,
    pub seed_distance: f64,
    /// Largest distance ratio seen in the contraction check.
    pub contraction_ratio: f64,
}

fn cumulative(points: &[Vector3<f64>], base: &Vector3<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    let mut prev = *base;
    for p in points {
        acc += (p - prev).norm();
        out.push(acc);
        prev = *p;
    }
    out
}

/// One branch of the manifold, grown from seeds `base + side·a·dir` with `a`
/// spanning a fundamental segment, iterated until its arclength passes
/// `radius`.
#[allow(clippy::too_many_arguments)]
fn grow_branch(
    sys: &SystemDef,
    frame: &CrossSectionFrame,
    kind: ManifoldKind,
    dir: &Vector3<f64>,
    side: f64,
    eps: f64,
    factor: f64,
    time: f64,
    radius: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vector3<f64>>, OrbitError> {
    let base = &frame.base;
    let linear: Vec<Vector3<f64>> = (0..SEEDS)
        .map(|i| base + dir * (side * eps * factor.powf(i as f64 / SEEDS as f64)))
        .collect();
    let mut seeds = correct_seeds(sys, frame, kind, &linear, time, cfg)?;
    let mut branch = seeds.clone();
    for _ in 0..MAX_ITERATIONS {
        if cumulative(&branch, base).last().copied().unwrap_or(0.0) >= radius {
            return Ok(branch);
        }
        // keep only seeds whose next image stays in the near-linear range
        seeds.retain(|x| (x - base).norm() * factor <= REACH * radius);
        if seeds.is_empty() {
            break;
        }
        seeds = flow_batch(sys, &seeds, time, cfg, Exec::default())
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| OrbitError::Growth(e.to_string()))?;
        branch.extend_from_slice(&seeds);
    }
    Err(OrbitError::Growth(format!("arclength did not reach {radius} in {MAX_ITERATIONS} iterations")))
}

/// One graph-transform step on the linear seeds: carry them towards the base
/// with `φ(−time, ·)`, drop the component transverse to the manifold, and
/// carry them back. The seeds' quadratic offset from the manifold shrinks by
/// `factor²` times the transverse multiplier.
fn correct_seeds(
    sys: &SystemDef,
    frame: &CrossSectionFrame,
    kind: ManifoldKind,
    seeds: &[Vector3<f64>],
    time: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vector3<f64>>, OrbitError> {
    let grow = |e: crate::flow::FlowError| OrbitError::Growth(e.to_string());
    let inward = flow_batch(sys, seeds, -time, cfg, Exec::default())
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(grow)?;
    let projected = inward
        .iter()
        .map(|y| {
            let (su, _) = frame
                .project_unit(y)
                .ok_or_else(|| OrbitError::Frames("degenerate frame".into()))?;
            Ok(match kind {
                ManifoldKind::Stable => frame.chart_unit(&nalgebra::Vector2::new(su[0], 0.0)),
                ManifoldKind::Unstable => frame.chart_unit(&nalgebra::Vector2::new(0.0, su[1])),
            })
        })
        .collect::<Result<Vec<_>, OrbitError>>()?;
    flow_batch(sys, &projected, time, cfg, Exec::default())
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(grow)
}

/// `neg ⧺ base ⧺ pos` with signed arclength.
fn join(base: &Vector3<f64>, neg: &[Vector3<f64>], pos: &[Vector3<f64>]) -> Vec<(f64, Vector3<f64>)> {
    let mut pts: Vec<(f64, Vector3<f64>)> = Vec::new();
    for (s, p) in cumulative(neg, base).iter().zip(neg).rev() {
        pts.push((-s, *p));
    }
    pts.push((0.0, *base));
    for (s, p) in cumulative(pos, base).iter().zip(pos) {
        pts.push((*s, *p));
    }
    pts
}

/// Uniform-arclength resampling on `[−r, r]`.
fn resample(pts: &[(f64, Vector3<f64>)], r: f64, n: usize) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let n = n.max(3) | 1;
    let mut curve = Vec::with_capacity(n);
    let mut arclength = Vec::with_capacity(n);
    for i in 0..n {
        let s = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        let j = pts.partition_point(|q| q.0 <= s).clamp(1, pts.len() - 1);
        let (a, b) = (pts[j - 1], pts[j]);
        let w = if b.0 > a.0 { ((s - a.0) / (b.0 - a.0)).clamp(0.0, 1.0) } else { 0.0 };
        curve.push(a.1 + (b.1 - a.1) * w);
        arclength.push(s);
    }
    (curve, arclength)
}

/// `|φ(kτ, x) − φ(kτ, base)|` must shrink for `k = 1..3` (`τ = T` for the
/// stable, `−T` for the unstable manifold) on five grown points near
/// arclength `±r`, `±r/2` and `r/4`. Interpolated samples are not used: the
/// transverse interpolation error is amplified by the other multiplier.
fn contraction_check(
    sys: &SystemDef,
    base: &Vector3<f64>,
    pts: &[(f64, Vector3<f64>)],
    r: f64,
    tau: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, OrbitError> {
    let nearest = |s: f64| {
        pts.iter()
            .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
            .map(|p| p.1)
            .unwrap_or(*base)
    };
    let mut worst: f64 = 0.0;
    for s in [-r, -0.5 * r, 0.25 * r, 0.5 * r, r] {
        let p = nearest(s);
        let (mut x, mut b) = (p, *base);
        let mut d = (x - b).norm();
        for _ in 0..3 {
            if d < NOISE_FLOOR {
                break;
            }
            x = flow(sys, &x, tau, cfg)?;
            b = flow(sys, &b, tau, cfg)?;
            let dn = (x - b).norm();
            if dn < NOISE_FLOOR {
                break;
            }
            let ratio = dn / d;
            worst = worst.max(ratio);
            if ratio >= 1.0 {
                return Err(OrbitError::Contraction { point: [p[0], p[1], p[2]], ratio });
            }
            d = dn;
        }
    }
    Ok(worst)
}

/// Local stable and unstable curves of the period map at the frame base
/// `w`: fundamental segments seeded at distance `ε = 10⁻⁴·δ` along the
/// eigenvectors, iterated by `φ(±T, ·)` (twice per step for negative
/// multipliers), resampled to uniform arclength on `[−radius, radius]`.
pub fn local_manifolds(
    sys: &SystemDef,
    orbit: &PeriodicOrbit,
    floquet: &FloquetData,
    frame: &CrossSectionFrame,
    radius: f64,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<(LocalManifold, LocalManifold), OrbitError> {
    let (Some(ls), Some(lu)) = (floquet.lambda_s, floquet.lambda_u) else {
        return Err(OrbitError::NonHyperbolic);
    };
    let t = orbit.period;
    let w = frame.base;
    let build = |kind: ManifoldKind| -> Result<LocalManifold, OrbitError> {
        let (dir, lambda, step, delta) = match kind {
            ManifoldKind::Unstable => (frame.e_u, lu, t, frame.half_widths[1]),
            ManifoldKind::Stable => (frame.e_s, 1.0 / ls, -t, frame.half_widths[0]),
        };
        let power = if lambda < 0.0 { 2 } else { 1 };
        let factor = lambda.abs().powi(power);
        let eps = 1e-4 * delta;
        let time = step * power as f64;
        let pos = grow_branch(sys, frame, kind, &dir, 1.0, eps, factor, time, radius, cfg)?;
        let neg = grow_branch(sys, frame, kind, &dir, -1.0, eps, factor, time, radius, cfg)?;
        let pts = join(&w, &neg, &pos);
        let (curve, arclength) = resample(&pts, radius, n_samples);
        let contraction_ratio = contraction_check(sys, &w, &pts, radius, -step, cfg)?;
        Ok(LocalManifold {
            base: w,
            kind,
            direction: dir,
            multiplier: if kind == ManifoldKind::Unstable { lu } else { ls },
            curve,
            arclength,
            radius,
            seed_distance: eps,
            contraction_ratio,
        })
    };
    Ok((build(ManifoldKind::Stable)?, build(ManifoldKind::Unstable)?))
}

/// The local curve swept along the flow: one row per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSurface {
    pub kind: ManifoldKind,
    pub times: Vec<f64>,
    pub arclength: Vec<f64>,
    pub rows: Vec<Vec<[f64; 3]>>,
    /// The manifold direction comes back reversed after one period.
    pub one_sided: bool,
}

pub fn orbit_manifold_export(
    sys: &SystemDef,
    orbit: &PeriodicOrbit,
    manifold: &LocalManifold,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<ManifoldSurface, OrbitError> {
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let row = flow_batch(sys, &manifold.curve, t, cfg, Exec::default())
            .into_iter()
            .map(|r| r.map(|x| [x[0], x[1], x[2]]))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let (_, m) = variational_flow(sys, &manifold.base, orbit.period, cfg)?;
    let one_sided = (m * manifold.direction).dot(&manifold.direction) < 0.0;
    Ok(ManifoldSurface {
        kind: manifold.kind,
        times: times.to_vec(),
        arclength: manifold.arclength.clone(),
        rows,
        one_sided,
    })
}

/// `row,col,t,arclength,x,y,z`.
pub fn manifold_surface_csv(s: &ManifoldSurface) -> String {
    let mut out = String::from("row,col,t,arclength,x,y,z\n");
    for (i, (t, row)) in s.times.iter().zip(&s.rows).enumerate() {
        for (j, (a, p)) in s.arclength.iter().zip(row).enumerate() {
            let _ = writeln!(out, "{i},{j},{t},{a},{},{},{}", p[0], p[1], p[2]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::line_angle;
    use crate::models::{make_example1, make_mobius};
    use crate::orbits::{build_frames, floquet, refine_orbit};

    #[test]
    fn example1_unstable_curve_is_vertical() {
        let sys = make_example1(0.5, 0.3).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-12);
        let orbit = refine_orbit(&sys, &Vector3::new(1.0, 0.0, 0.0), std::f64::consts::TAU, &cfg).unwrap();
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        let frames = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &cfg).unwrap();
        let (_, wu) = local_manifolds(&sys, &orbit, &fl, &frames.0, 0.05, 41, &cfg).unwrap();
        assert!(line_angle(&wu.direction, &Vector3::z()) < 1e-3);
        let end = wu.curve.last().unwrap() - wu.base;
        assert!(line_angle(&end, &Vector3::z()) < 1e-3);
        assert!(wu.contraction_ratio < 1.0);
    }

    #[test]
    fn example1_stable_curve_tilt() {
        let (alpha, gamma) = (0.5, 0.3);
        let sys = make_example1(alpha, gamma).unwrap();
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-12);
        let orbit = refine_orbit(&sys, &Vector3::new(1.0, 0.0, 0.0), std::f64::consts::TAU, &cfg).unwrap();
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        let frames = build_frames(&sys, &orbit, &fl, [0.1, 0.1], &cfg).unwrap();
        let (ws, _) = local_manifolds(&sys, &orbit, &fl, &frames.0, 0.02, 21, &cfg).unwrap();
        // linearised radial/vertical equations: z-drift over r-contraction
        let radial = ws.base.normalize();
        let tilt = ws.direction[2] / ws.direction.dot(&radial);
        assert!((tilt + 2.0 * gamma / (2.0 * alpha + gamma)).abs() < 1e-6, "{tilt}");
        assert_eq!(ws.curve.len(), 21);
        assert!((ws.curve[10] - ws.base).norm() < 1e-15);
    }

    #[test]
    fn mobius_manifolds_alternate_and_are_one_sided() {
        let sys = make_mobius();
        let cfg = IntegratorConfig::default();
        let orbit = refine_orbit(&sys, &Vector3::new(0.0, 0.0, 1.25), 1.0, &cfg).unwrap();
        let fl = floquet(&sys, &orbit, &cfg).unwrap();
        let frames = build_frames(&sys, &orbit, &fl, [0.2, 0.2], &cfg).unwrap();
        let (ws, wu) = local_manifolds(&sys, &orbit, &fl, &frames.0, 0.1, 11, &cfg).unwrap();
        assert!(line_angle(&wu.direction, &Vector3::y()) < 1e-9);
        assert!(line_angle(&ws.direction, &Vector3::x()) < 1e-9);
        for p in &wu.curve {
            assert!(p[0].abs() < 1e-9 && (p[2] - 1.25).abs() < 1e-9);
        }
        let x = wu.base + wu.direction * 0.01;
        let y = flow(&sys, &x, orbit.period, &cfg).unwrap();
        assert!((y - wu.base).dot(&wu.direction) < 0.0);
        let surf = orbit_manifold_export(&sys, &orbit, &wu, &[0.0, 0.5], &cfg).unwrap();
        assert!(surf.one_sided);
        for (a, b) in surf.rows[0].iter().zip(&wu.curve) {
            assert_eq!(*a, [b[0], b[1], b[2]]);
        }
        let csv = manifold_surface_csv(&surf);
        assert_eq!(csv.lines().count(), 1 + 2 * 11);
    }
}
