//! Adaptive Dormand–Prince 5(4) integration with quartic dense output.
//!
//! The return-map machinery differentiates section crossings downstream, so event
//! locations must be far more accurate than finite-difference steps; crossings are
//! found by bisection on the dense output of each accepted step. Integration runs
//! in either time direction (the inverse map Q is a backward first-return map).

use crate::error::{CellflowError, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

/// 4th-order embedded weights (for the error estimate).
const BHAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dense-output weights (Hairer, Nørsett & Wanner, DOPRI5 `rcont5`).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its interpolating polynomial.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluate the quartic interpolant at `t` (valid for t between t0 and t1).
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let theta = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - theta;
        let mut y = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            y[i] = c[0][i] + theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
        }
        y
    }
}

/// What the step observer tells the integrator to do next.
pub enum Control {
    Continue,
    /// Stop inside the current step; `integrate` returns the state at this time.
    Stop(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_min: 1e-14,
        }
    }
}

impl Dopri5 {
    /// Integrate from `t0` to `t_end` (either direction). Every accepted step is
    /// handed to `on_step`; returning `Control::Stop(t)` ends the run at `t` on the
    /// dense output of that step.
    pub fn integrate<const N: usize>(
        &self,
        f: impl Fn(f64, &[f64; N]) -> [f64; N],
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut on_step: impl FnMut(&DenseStep<N>) -> Control,
    ) -> Result<(f64, [f64; N])> {
        if t_end == t0 {
            return Ok((t0, y0));
        }
        let dir = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let mut t = t0;
        let mut y = y0;
        let mut h = dir * (0.01 * span).min(self.h_max).min(1.0).max(1e-8);
        let mut k1 = f(t, &y);
        let max_steps = 50_000_000u64;
        let mut n_steps = 0u64;

        loop {
            n_steps += 1;
            if n_steps > max_steps {
                return Err(CellflowError::StepFailure {
                    t,
                    min_step: self.h_min,
                });
            }
            if h.abs() < self.h_min {
                return Err(CellflowError::StepFailure {
                    t,
                    min_step: self.h_min,
                });
            }
            // Don't overshoot the end time.
            if (t + h - t_end) * dir > 0.0 {
                h = t_end - t;
            }

            let stage = |coeff: &[f64], ks: &[&[f64; N]], y: &[f64; N]| {
                let mut out = *y;
                for i in 0..N {
                    let mut acc = 0.0;
                    for (a, k) in coeff.iter().zip(ks) {
                        acc += a * k[i];
                    }
                    out[i] += h * acc;
                }
                out
            };

            let k2 = f(t + C[1] * h, &stage(&A2, &[&k1], &y));
            let k3 = f(t + C[2] * h, &stage(&A3, &[&k1, &k2], &y));
            let k4 = f(t + C[3] * h, &stage(&A4, &[&k1, &k2, &k3], &y));
            let k5 = f(t + C[4] * h, &stage(&A5, &[&k1, &k2, &k3, &k4], &y));
            let k6 = f(t + C[5] * h, &stage(&A6, &[&k1, &k2, &k3, &k4, &k5], &y));
            let y1 = stage(&A7, &[&k1, &k2, &k3, &k4, &k5, &k6], &y);
            let k7 = f(t + h, &y1);

            let ks = [&k1, &k2, &k3, &k4, &k5, &k6, &k7];
            let mut err_sq = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                // b - bhat difference: b is A7 row extended with 0 for k7.
                for (j, k) in ks.iter().enumerate() {
                    let b = if j < 6 { A7[j] } else { 0.0 };
                    e += (b - BHAT[j]) * k[i];
                }
                e *= h;
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err_sq += (e / sc) * (e / sc);
            }
            let err = (err_sq / N as f64).sqrt();

            if err <= 1.0 {
                // Accept: build the dense interpolant.
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let mut d5 = 0.0;
                    for (j, k) in ks.iter().enumerate() {
                        d5 += D[j] * k[i];
                    }
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k7[i] - bspl;
                    cont[4][i] = h * d5;
                }
                let step = DenseStep {
                    t0: t,
                    t1: t + h,
                    y0: y,
                    y1,
                    cont,
                };
                match on_step(&step) {
                    Control::Stop(ts) => {
                        let ys = step.eval(ts);
                        return Ok((ts, ys));
                    }
                    Control::Continue => {}
                }
                t += h;
                y = y1;
                k1 = k7; // FSAL
                if (t - t_end) * dir >= 0.0 {
                    return Ok((t, y));
                }
                let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                h = (h * fac).clamp(-self.h_max, self.h_max);
                if h == 0.0 {
                    h = dir * self.h_min;
                }
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
            }
        }
    }
}

/// Locate a zero of `g` composed with the dense output on an accepted step,
/// assuming a sign change between the step endpoints. Bisection in time until the
/// residual |g| drops below `tol` (and the bracket is at machine width).
pub fn locate_crossing<const N: usize>(
    step: &DenseStep<N>,
    g: impl Fn(&[f64; N]) -> f64,
    tol: f64,
) -> Option<(f64, [f64; N])> {
    let ga = g(&step.y0);
    let gb = g(&step.y1);
    if ga == 0.0 {
        return Some((step.t0, step.y0));
    }
    if gb == 0.0 {
        return Some((step.t1, step.y1));
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    let (mut ta, mut tb) = (step.t0, step.t1);
    let mut ga = ga;
    for _ in 0..200 {
        let tm = 0.5 * (ta + tb);
        if tm == ta || tm == tb {
            break;
        }
        let ym = step.eval(tm);
        let gm = g(&ym);
        if gm.abs() < tol {
            return Some((tm, ym));
        }
        if gm.signum() == ga.signum() {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
        }
    }
    let tm = 0.5 * (ta + tb);
    let ym = step.eval(tm);
    if g(&ym).abs() < tol.max(1e-9) {
        Some((tm, ym))
    } else {
        None
    }
}
