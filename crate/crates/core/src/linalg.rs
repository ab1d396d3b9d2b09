//! Small dense linear algebra for 3x3 problems: characteristic polynomials,
//! cubic roots with a companion-matrix fallback, and real eigenvectors.

use nalgebra::{Complex, Matrix3, Vector3};

pub type C64 = Complex<f64>;

/// Coefficients `[c2, c1, c0]` of the monic characteristic polynomial
/// `λ³ + c2 λ² + c1 λ + c0 = det(λI − M)`.
pub fn char_poly(m: &Matrix3<f64>) -> [f64; 3] {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
        + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    [-tr, minors, -m.determinant()]
}

fn eval_poly(c: &[f64; 3], z: C64) -> (C64, C64) {
    let p = ((z + c[0]) * z + c[1]) * z + c[2];
    let dp = (z * 3.0 + c[0] * 2.0) * z + c[1];
    (p, dp)
}

fn polish(c: &[f64; 3], mut z: C64) -> C64 {
    for _ in 0..8 {
        let (p, dp) = eval_poly(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.norm() <= 1e-16 * z.norm().max(1e-300) {
            break;
        }
    }
    z
}

/// One real root of a monic cubic by the trigonometric / Cardano formulas.
fn real_cubic_root(c: &[f64; 3]) -> f64 {
    let (a, b, d) = (c[0], c[1], c[2]);
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let t = if disc >= 0.0 {
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = ((-q / 2.0) / (r * r * r)).clamp(-1.0, 1.0).acos();
        2.0 * r * (phi / 3.0).cos()
    };
    t - a / 3.0
}

fn quadratic_roots(b: f64, c: f64) -> [C64; 2] {
    // λ² + bλ + c
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let q = -0.5 * (b + b.signum() * s);
        if q == 0.0 {
            return [C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        }
        [C64::new(q, 0.0), C64::new(c / q, 0.0)]
    } else {
        let im = 0.5 * (-disc).sqrt();
        [C64::new(-0.5 * b, im), C64::new(-0.5 * b, -im)]
    }
}

/// Roots of `λ³ + c2 λ² + c1 λ + c0`, sorted by decreasing modulus.
///
/// Closed form plus deflation and Newton polishing; falls back to the
/// eigenvalues of the companion matrix when the polished residual is poor.
pub fn cubic_roots(c: [f64; 3]) -> [C64; 3] {
    let scale = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r0 = real_cubic_root(&c);
    r0 = polish(&c, C64::new(r0, 0.0)).re;
    // deflate: λ³ + aλ² + bλ + d = (λ − r0)(λ² + pλ + q)
    let p = c[0] + r0;
    let q = c[1] + r0 * p;
    let [r1, r2] = quadratic_roots(p, q);
    let mut roots = [C64::new(r0, 0.0), polish(&c, r1), polish(&c, r2)];
    if roots[1].im != 0.0 && (roots[1].im + roots[2].im).abs() > 1e-12 * roots[1].norm() {
        // keep exact conjugate symmetry after polishing
        roots[2] = roots[1].conj();
    }
    let bad = roots.iter().any(|z| {
        let (pz, _) = eval_poly(&c, *z);
        !pz.re.is_finite() || pz.norm() > 1e-9 * scale * (1.0 + z.norm()).powi(3)
    });
    if bad {
        roots = companion_roots(c);
    }
    sort_by_modulus(&mut roots);
    roots
}

/// Eigenvalues of the companion matrix of the monic cubic.
pub fn companion_roots(c: [f64; 3]) -> [C64; 3] {
    let comp = Matrix3::new(-c[0], -c[1], -c[2], 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let ev = comp.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    sort_by_modulus(&mut out);
    out
}

fn sort_by_modulus(z: &mut [C64; 3]) {
    z.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Eigenvalues of a real 3x3 matrix via its characteristic polynomial.
pub fn eigenvalues3(m: &Matrix3<f64>) -> [C64; 3] {
    cubic_roots(char_poly(m))
}

/// Unit vector spanning the (numerical) kernel of `M − λI` for real `λ`.
pub fn real_eigenvector(m: &Matrix3<f64>, lambda: f64) -> Vector3<f64> {
    let a = m - Matrix3::identity() * lambda;
    let rows = [
        a.row(0).transpose(),
        a.row(1).transpose(),
        a.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .copied()
        .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or_else(Vector3::zeros);
    let mut v = if best.norm() > 0.0 {
        best.normalize()
    } else {
        // λI − M vanishes: any vector is an eigenvector
        Vector3::x()
    };
    // one inverse-iteration sweep sharpens nearly-degenerate cases
    let shifted = m - Matrix3::identity() * (lambda + 1e-10 * (1.0 + lambda.abs()));
    if let Some(inv) = shifted.try_inverse() {
        let w = inv * v;
        if w.norm().is_finite() && w.norm() > 0.0 {
            v = w.normalize();
        }
    }
    canonical_sign(v)
}

/// Fixes the sign so the largest-magnitude component is positive.
pub fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}

/// Angle between two lines (direction sign ignored), in radians.
pub fn line_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    let s = a.cross(b).norm() / (a.norm() * b.norm());
    s.atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_roots_of_known_factorisation() {
        // (λ-1)(λ-2)(λ+3) = λ³ - 7λ + 6
        let r = cubic_roots([0.0, -7.0, 6.0]);
        let mut re: Vec<f64> = r.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 3.0).abs() < 1e-13);
        assert!((re[1] - 1.0).abs() < 1e-13);
        assert!((re[2] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn complex_pair_and_companion_agree() {
        // (λ² + λ + 1)(λ − 1) = λ³ − 1
        let c = [0.0, 0.0, -1.0];
        let r = cubic_roots(c);
        let k = companion_roots(c);
        for z in r {
            assert!(k.iter().any(|w| (z - w).norm() < 1e-10));
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn widely_separated_roots_keep_relative_accuracy() {
        let roots = [1.0f64, (-2.0 * std::f64::consts::PI).exp(), 6.5];
        let c = [
            -(roots[0] + roots[1] + roots[2]),
            roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2],
            -(roots[0] * roots[1] * roots[2]),
        ];
        let r = cubic_roots(c);
        for t in roots {
            assert!(r.iter().any(|z| ((z.re - t) / t).abs() < 1e-12 && z.im == 0.0));
        }
    }

    #[test]
    fn eigenvector_of_diagonal() {
        let m = Matrix3::from_diagonal(&Vector3::new(2.0, -1.0, 0.5));
        let v = real_eigenvector(&m, -1.0);
        assert!((v - Vector3::y()).norm() < 1e-12);
        assert!(line_angle(&v, &Vector3::new(0.0, -3.0, 0.0)) < 1e-15);
    }
}
