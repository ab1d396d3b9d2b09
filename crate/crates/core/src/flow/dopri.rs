//! Dormand–Prince 5(4) with PI step-size control and the quartic dense output
//! of the embedded pair. Fields are autonomous, so the node times `c_i` do
//! not appear.

use super::{FlowError, IntegratorConfig, SystemDef};
use nalgebra::{SVector, Vector3};
use std::ops::ControlFlow;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    /// Full step used to build the polynomial (signed).
    pub h: f64,
    /// End of the valid range; differs from `t0 + h` when the step was cut at
    /// a chart face.
    pub t1: f64,
    rcont: [SVector<f64, N>; 5],
}

impl<const N: usize> Segment<N> {
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        r[0] + (r[1] + (r[2] + (r[3] + r[4] * th1) * th) * th1) * th
    }

    /// Time derivative of the interpolant.
    pub fn eval_dt(&self, t: f64) -> SVector<f64, N> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let p = r[3] + r[4] * th1;
        let dp = -&r[4];
        let q = r[2] + p * th;
        let dq = p + dp * th;
        let rr = r[1] + q * th1;
        let drr = -&q + dq * th1;
        (rr + drr * th) / self.h
    }

    pub fn start(&self) -> SVector<f64, N> {
        self.rcont[0]
    }

    pub fn end(&self) -> SVector<f64, N> {
        self.eval(self.t1)
    }

    /// Copies the first three components into a 3-D segment.
    pub fn project3(&self) -> Segment<3> {
        let f = |v: &SVector<f64, N>| Vector3::new(v[0], v[1], v[2]);
        Segment {
            t0: self.t0,
            h: self.h,
            t1: self.t1,
            rcont: [f(&self.rcont[0]), f(&self.rcont[1]), f(&self.rcont[2]), f(&self.rcont[3]), f(&self.rcont[4])],
        }
    }

    fn truncated(&self, t1: f64) -> Self {
        Segment { t1, ..self.clone() }
    }
}

/// What the driver reports to observers.
pub enum StepEvent<'a, const N: usize> {
    Step(&'a Segment<N>),
    /// State crossed a chart face at time `t` and was re-expressed.
    Glue { t: f64, after: &'a SVector<f64, N> },
}

/// An autonomous ODE built on a [`SystemDef`]: the base flow (N = 3) or the
/// flow plus its variational matrix (N = 12).
pub(crate) trait Problem<const N: usize>: Sync {
    fn sys(&self) -> &SystemDef;
    fn rhs(&self, y: &SVector<f64, N>) -> SVector<f64, N>;
    /// Applies the chart gluing through the upper (`up`) or lower face.
    fn glue(&self, y: &mut SVector<f64, N>, up: bool);

    fn position(y: &SVector<f64, N>) -> Vector3<f64> {
        Vector3::new(y[0], y[1], y[2])
    }
}

fn err_norm<const N: usize>(
    y0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    err: &SVector<f64, N>,
    cfg: &IntegratorConfig,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    (acc / N as f64).sqrt()
}

fn check_finite<const N: usize>(y: &SVector<f64, N>, t: f64) -> Result<(), FlowError> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FlowError::NonFinite { t })
    }
}

fn initial_step<const N: usize, P: Problem<N>>(
    p: &P,
    y0: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    dir: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let scale = |y: &SVector<f64, N>, i: usize| cfg.abs_tol + cfg.rel_tol * y[i].abs();
    let dnf = (0..N).map(|i| (f0[i] / scale(y0, i)).powi(2)).sum::<f64>() / N as f64;
    let dny = (0..N).map(|i| (y0[i] / scale(y0, i)).powi(2)).sum::<f64>() / N as f64;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(cfg.max_step);
    let y1 = y0 + f0 * (h * dir);
    let f1 = p.rhs(&y1);
    let der2 = ((0..N).map(|i| ((f1[i] - f0[i]) / scale(y0, i)).powi(2)).sum::<f64>() / N as f64).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    (100.0 * h).min(h1).min(cfg.max_step)
}

/// Bisection for the time where `component` reaches `level` inside `seg`.
fn face_crossing<const N: usize>(seg: &Segment<N>, component: usize, level: f64) -> f64 {
    let (mut a, mut b) = (seg.t0, seg.t1);
    let ga = seg.eval(a)[component] - level;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let gm = seg.eval(mid)[component] - level;
        if (gm > 0.0) == (ga > 0.0) && gm != 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    b
}

/// Integrates from `y0` over the signed duration `duration`, reporting every
/// accepted step and every gluing event to `observer`. Returns the final
/// state and the time reached (less than `duration` in magnitude when the
/// observer breaks).
pub(crate) fn integrate<const N: usize, P: Problem<N>>(
    p: &P,
    y0: SVector<f64, N>,
    duration: f64,
    cfg: &IntegratorConfig,
    observer: &mut dyn FnMut(StepEvent<'_, N>) -> ControlFlow<()>,
) -> Result<(SVector<f64, N>, f64), FlowError> {
    cfg.validate()?;
    if !duration.is_finite() {
        return Err(FlowError::BadDuration(duration));
    }
    let sys = p.sys();
    let mut y = y0;
    check_finite(&y, 0.0)?;
    if duration == 0.0 {
        return Ok((y, 0.0));
    }
    let dir = duration.signum();
    let gluing = sys.gluing.clone();
    if let Some(g) = &gluing {
        if dir > 0.0 && y[g.axis] >= g.upper - g.face_tol {
            p.glue(&mut y, true);
            if observer(StepEvent::Glue { t: 0.0, after: &y }).is_break() {
                return Ok((y, 0.0));
            }
        }
    }
    sys.domain.check(&P::position(&y), 0.0)?;

    let mut t = 0.0f64;
    let mut k1 = p.rhs(&y);
    check_finite(&k1, t)?;
    let mut h = initial_step(p, &y, &k1, dir, cfg) * dir;
    let mut facold: f64 = 1e-4;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let (facc1, facc2, safe): (f64, f64, f64) = (1.0 / 0.2, 1.0 / 10.0, 0.9);
    let mut steps = 0usize;
    let mut last = false;

    loop {
        if steps >= cfg.max_steps {
            return Err(FlowError::StepLimit { steps, t });
        }
        if ((t + h) - duration) * dir >= 0.0 || (duration - t).abs() <= 1e-14 * duration.abs().max(1.0) {
            h = duration - t;
            last = true;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) && !last {
            return Err(FlowError::StepUnderflow { t });
        }
        steps += 1;
        let k2 = p.rhs(&(y + k1 * (h * A21)));
        let k3 = p.rhs(&(y + (k1 * A31 + k2 * A32) * h));
        let k4 = p.rhs(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = p.rhs(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let ysti = y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h;
        let k6 = p.rhs(&ysti);
        let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = p.rhs(&y1);
        let errv = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let err = err_norm(&y, &y1, &errv, cfg);

        if !err.is_finite() {
            h *= 0.1;
            last = false;
            continue;
        }
        let fac11 = err.powf(expo1);
        let mut fac = fac11 / facold.powf(beta);
        fac = facc2.max(facc1.min(fac / safe));
        let mut hnew = h / fac;

        if err > 1.0 {
            hnew = h / facc1.min(fac11 / safe);
            h = hnew;
            last = false;
            continue;
        }
        facold = err.max(1e-4);
        check_finite(&y1, t + h)?;

        let rc2 = y1 - y;
        let rc3 = k1 * h - rc2;
        let rc4 = rc2 - k7 * h - rc3;
        let rc5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
        let mut seg = Segment { t0: t, h, t1: t + h, rcont: [y, rc2, rc3, rc4, rc5] };
        let mut y_next = y1;
        let mut k_next = k7;
        let mut glued: Option<bool> = None;

        if let Some(g) = &gluing {
            let up = y1[g.axis] > g.upper;
            let down = y1[g.axis] < g.lower;
            if up || down {
                let level = if up { g.upper } else { g.lower };
                let tc = face_crossing(&seg, g.axis, level);
                seg = seg.truncated(tc);
                y_next = seg.eval(tc);
                y_next[g.axis] = level;
                glued = Some(up);
                last = false;
            }
        }

        if observer(StepEvent::Step(&seg)).is_break() {
            return Ok((seg.end(), seg.t1));
        }
        t = seg.t1;
        if let Some(up) = glued {
            p.glue(&mut y_next, up);
            k_next = p.rhs(&y_next);
            if observer(StepEvent::Glue { t, after: &y_next }).is_break() {
                return Ok((y_next, t));
            }
        }
        y = y_next;
        k1 = k_next;
        sys.domain.check(&P::position(&y), t)?;

        if last {
            if let Some(g) = &gluing {
                if y[g.axis] >= g.upper - g.face_tol {
                            p.glue(&mut y, true);
                    let _ = observer(StepEvent::Glue { t, after: &y });
                }
            }
            return Ok((y, t));
        }
        if hnew.abs() > cfg.max_step {
            hnew = cfg.max_step * dir;
        }
        h = if glued.is_some() { hnew.min(h.abs()).copysign(dir) } else { hnew };
    }
}
