//! Inertial dynamics: the 4D Maxey–Riley-type system ẍ = −(ẋ − v(x))/ε, the
//! first-order slow-manifold reduced planar field v + εf with its divergence,
//! event-detecting planar integration, and the force-to-velocity embedding.

use crate::error::{CellflowError, Result};
use crate::hamflow::{ham_field, ForcingParams};
use crate::ode::{locate_crossing, Control, Dopri5};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhaseState4 {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Hamiltonian,
    Reduced,
    Custom,
}

/// A planar field with analytic divergence and Jacobian.
pub trait PlanarField: Sync {
    fn eval(&self, p: [f64; 2]) -> [f64; 2];
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2];
    fn divergence(&self, p: [f64; 2]) -> f64 {
        let j = self.jacobian(p);
        j[0][0] + j[1][1]
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Custom
    }
}

/// The ε = 0 Hamiltonian carrying field v (divergence-free).
#[derive(Clone, Copy, Debug)]
pub struct HamiltonianField(pub ForcingParams);

impl PlanarField for HamiltonianField {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        ham_field(p, &self.0)
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = p;
        [
            [x.sin() * y.sin(), -x.cos() * y.cos()],
            [x.cos() * y.cos(), -x.sin() * y.sin()],
        ]
    }
    fn divergence(&self, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Hamiltonian
    }
}

/// Leading-order slow-manifold perturbation f (Appendix C).
pub fn perturbation_f(p: [f64; 2], params: &ForcingParams) -> [f64; 2] {
    let [x, y] = p;
    let (a, b) = (params.a, params.b);
    [
        0.5 * (2.0 * x).sin() + a * x.cos() * y.cos() - b * x.sin() * y.sin(),
        0.5 * (2.0 * y).sin() + a * x.sin() * y.sin() - b * x.cos() * y.cos(),
    ]
}

fn perturbation_jacobian(p: [f64; 2], params: &ForcingParams) -> [[f64; 2]; 2] {
    let [x, y] = p;
    let (a, b) = (params.a, params.b);
    [
        [
            (2.0 * x).cos() - a * x.sin() * y.cos() - b * x.cos() * y.sin(),
            -a * x.cos() * y.sin() - b * x.sin() * y.cos(),
        ],
        [
            a * x.cos() * y.sin() + b * x.sin() * y.cos(),
            (2.0 * y).cos() + a * x.sin() * y.cos() + b * x.cos() * y.sin(),
        ],
    ]
}

/// The reduced slow-manifold field v + εf; Div = ε(cos 2x + cos 2y).
#[derive(Clone, Copy, Debug)]
pub struct ReducedField(pub ForcingParams);

impl PlanarField for ReducedField {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let v = ham_field(p, &self.0);
        let f = perturbation_f(p, &self.0);
        [v[0] + self.0.epsilon * f[0], v[1] + self.0.epsilon * f[1]]
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let jv = HamiltonianField(self.0).jacobian(p);
        let jf = perturbation_jacobian(p, &self.0);
        let e = self.0.epsilon;
        [
            [jv[0][0] + e * jf[0][0], jv[0][1] + e * jf[0][1]],
            [jv[1][0] + e * jf[1][0], jv[1][1] + e * jf[1][1]],
        ]
    }
    fn divergence(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        self.0.epsilon * ((2.0 * x).cos() + (2.0 * y).cos())
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Reduced
    }
}

/// Spec op: reduced field vector and divergence at a point.
pub fn reduced_field(point: [f64; 2], params: &ForcingParams) -> ([f64; 2], f64) {
    let f = ReducedField(*params);
    (f.eval(point), f.divergence(point))
}

/// A fluid field shifted by a constant terminal velocity (Appendix A embedding).
#[derive(Clone, Copy, Debug)]
pub struct ShiftedField<F: PlanarField> {
    pub base: F,
    pub w: [f64; 2],
}

impl<F: PlanarField> PlanarField for ShiftedField<F> {
    fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let v = self.base.eval(p);
        [v[0] + self.w[0], v[1] + self.w[1]]
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        self.base.jacobian(p)
    }
    fn divergence(&self, p: [f64; 2]) -> f64 {
        self.base.divergence(p)
    }
}

/// Appendix A: constant external force mg with Stokes drag k is absorbed into the
/// carrying field as the terminal velocity w = m·g/k, with ε = m/k.
pub fn embed_external_force<F: PlanarField>(
    fluid_field: F,
    mass: f64,
    drag_coefficient: f64,
    gravity: [f64; 2],
) -> Result<(ShiftedField<F>, f64)> {
    if !(drag_coefficient > 0.0) {
        return Err(CellflowError::Domain(format!(
            "drag coefficient must be positive, got {drag_coefficient}"
        )));
    }
    let w = [
        mass * gravity[0] / drag_coefficient,
        mass * gravity[1] / drag_coefficient,
    ];
    Ok((ShiftedField { base: fluid_field, w }, mass / drag_coefficient))
}

/// Integrate the 4D inertial system, returning accepted-step samples (t, state).
pub fn integrate_mr4d(
    initial: PhaseState4,
    params: &ForcingParams,
    t_end: f64,
) -> Result<Vec<(f64, PhaseState4)>> {
    if !(params.epsilon > 0.0) {
        return Err(CellflowError::Domain(
            "4D integration requires epsilon > 0".into(),
        ));
    }
    let eps = params.epsilon;
    let rhs = |_t: f64, s: &[f64; 4]| {
        let v = ham_field([s[0], s[1]], params);
        [
            s[2],
            s[3],
            -(s[2] - v[0]) / eps,
            -(s[3] - v[1]) / eps,
        ]
    };
    let ode = Dopri5::default();
    let mut samples = vec![(0.0, initial)];
    ode.integrate(
        rhs,
        0.0,
        [initial.x, initial.y, initial.vx, initial.vy],
        t_end,
        |step| {
            samples.push((
                step.t1,
                PhaseState4 {
                    x: step.y1[0],
                    y: step.y1[1],
                    vx: step.y1[2],
                    vy: step.y1[3],
                },
            ));
            Control::Continue
        },
    )?;
    Ok(samples)
}

#[derive(Clone, Copy, Debug)]
pub enum Direction {
    Forward,
    Backward,
}

/// Crossings of vertical sections x = const collected along a planar trajectory.
#[derive(Clone, Debug)]
pub struct EventTrace {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    /// Net signed section-crossing count (+1 per crossing with increasing x).
    pub winding: i64,
    pub end_time: f64,
    pub end_state: [f64; 2],
}

/// Dense-output planar integration recording every crossing of the given vertical
/// sections; optionally stops at the first crossing. Crossing x located to 1e−12.
pub fn integrate_planar<F: PlanarField>(
    initial: [f64; 2],
    field: &F,
    sections: &[f64],
    t_end: f64,
    direction: Direction,
    stop_at_first: bool,
) -> Result<EventTrace> {
    let t1 = match direction {
        Direction::Forward => t_end.abs(),
        Direction::Backward => -t_end.abs(),
    };
    let ode = Dopri5::default();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut winding = 0i64;
    let (end_time, end_state) = ode.integrate(
        |_t, y: &[f64; 2]| field.eval(*y),
        0.0,
        initial,
        t1,
        |step| {
            // Events are examined per section; a DOPRI5 step is short enough here
            // that at most one section crossing occurs per step.
            for &sx in sections {
                if let Some((tc, yc)) = locate_crossing(step, |y| y[0] - sx, 1e-12) {
                    if tc == step.t0 && !times.is_empty() {
                        continue; // crossing already recorded at the previous step end
                    }
                    times.push(tc);
                    states.push(yc);
                    winding += if step.y1[0] > step.y0[0] { 1 } else { -1 };
                    if stop_at_first {
                        return Control::Stop(tc);
                    }
                }
            }
            Control::Continue
        },
    )?;
    if stop_at_first && times.is_empty() {
        return Err(CellflowError::NoEvent { t_end: t1 });
    }
    Ok(EventTrace {
        times,
        states,
        winding,
        end_time,
        end_state,
    })
}

/// Locate the elliptic center of the cell containing the origin (v = 0, ccw).
pub fn cell_center(params: &ForcingParams) -> Result<[f64; 2]> {
    let mut p = [-params.a, params.b]; // first-order seed
    for _ in 0..50 {
        let v = ham_field(p, params);
        if v[0].hypot(v[1]) < 1e-13 {
            return Ok(p);
        }
        let j = HamiltonianField(*params).jacobian(p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        p = [
            p[0] - (j[1][1] * v[0] - j[0][1] * v[1]) / det,
            p[1] - (j[0][0] * v[1] - j[1][0] * v[0]) / det,
        ];
    }
    Err(CellflowError::NonConvergence("cell center Newton".into()))
}

/// Trace the closed ε = 0 orbit at Hamiltonian level `h0` inside the central cell
/// and return (∬ Div f dxdy, enclosed area) via Green's-theorem quadrature:
/// ∬ (cos 2x + cos 2y) = ∮ −½ sin 2y dx + ½ sin 2x dy, area = ∮ x dy.
pub fn divergence_area_check(h0: f64, params: &ForcingParams) -> Result<(f64, f64)> {
    let ham0 = ForcingParams { epsilon: 0.0, ..*params };
    let center = cell_center(&ham0);
    let center = center?;
    let h_center = crate::hamflow::hamiltonian(center, &ham0);
    // Bracket the start abscissa on the horizontal ray from the center.
    let g = |x: f64| crate::hamflow::hamiltonian([x, center[1]], &ham0) - h0;
    if g(center[0]).signum() == g(center[0] + std::f64::consts::FRAC_PI_2).signum() {
        return Err(CellflowError::NotClosed(format!(
            "level {h0} not bracketed from the cell center (H_center = {h_center})"
        )));
    }
    let (mut lo, mut hi) = (center[0], center[0] + std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == g(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    let start = [x0, center[1]];

    // Augmented state: (x, y, ∮ x dy, ∮ −½ sin 2y dx + ½ sin 2x dy).
    let rhs = |_t: f64, s: &[f64; 4]| {
        let v = ham_field([s[0], s[1]], &ham0);
        [
            v[0],
            v[1],
            s[0] * v[1],
            -0.5 * (2.0 * s[1]).sin() * v[0] + 0.5 * (2.0 * s[0]).sin() * v[1],
        ]
    };
    let ode = Dopri5::default();
    let mut done: Option<[f64; 4]> = None;
    let mut left_cell = false;
    let res = ode.integrate(
        rhs,
        0.0,
        [start[0], start[1], 0.0, 0.0],
        5000.0,
        |step| {
            if (step.y1[0] - center[0]).abs() > 3.2 || (step.y1[1] - center[1]).abs() > 3.2 {
                left_cell = true;
                return Control::Stop(step.t1);
            }
            // Full revolution: upward crossing of y = y_center right of the center.
            if step.t0 > 1e-6 && step.y1[1] >= center[1] && step.y0[1] < center[1] {
                if let Some((tc, yc)) = locate_crossing(step, |s| s[1] - center[1], 1e-12) {
                    if yc[0] > center[0] {
                        done = Some(yc);
                        return Control::Stop(tc);
                    }
                }
            }
            Control::Continue
        },
    );
    res?;
    if left_cell {
        return Err(CellflowError::NotClosed(format!(
            "level {h0} escapes the cell (not a closed orbit)"
        )));
    }
    let end = done.ok_or_else(|| {
        CellflowError::NotClosed(format!("level {h0} did not close within the time cap"))
    })?;
    Ok((end[3], end[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::hamiltonian;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn p(a: f64, b: f64, eps: f64) -> ForcingParams {
        ForcingParams::new(a, b, eps).unwrap()
    }

    #[test]
    fn perturbation_values_at_reference_points() {
        let params = p(0.03, 0.07, 0.0);
        let f0 = perturbation_f([0.0, 0.0], &params);
        assert_abs_diff_eq!(f0[0], params.a, epsilon = 1e-15);
        assert_abs_diff_eq!(f0[1], -params.b, epsilon = 1e-15);
        let f1 = perturbation_f([PI / 4.0, PI / 4.0], &params);
        let expect = 0.5 + (params.a - params.b) / 2.0;
        assert_abs_diff_eq!(f1[0], expect, epsilon = 1e-15);
        assert_abs_diff_eq!(f1[1], expect, epsilon = 1e-15);
    }

    #[test]
    fn divergence_of_f_is_cos2x_plus_cos2y() {
        let params = p(0.04, 0.09, 1.0 / 25.0);
        for i in 0..50 {
            let q = [1.7 * i as f64 % 6.0 - 3.0, 2.3 * i as f64 % 6.0 - 3.0];
            let d = ReducedField(params).divergence(q);
            let j = ReducedField(params).jacobian(q);
            assert_abs_diff_eq!(d, j[0][0] + j[1][1], epsilon = 1e-12);
            assert_abs_diff_eq!(
                d,
                params.epsilon * ((2.0 * q[0]).cos() + (2.0 * q[1]).cos()),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn f_matches_convective_derivative() {
        // Proposition 1: f = −Dv·v + O(ε), with Dv by finite differences of v.
        let params = p(0.05, 0.08, 0.0);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let q = [0.37 * i as f64 - 18.0, -0.23 * i as f64 + 11.0];
            let v = ham_field(q, &params);
            let dvx = [
                (ham_field([q[0] + h, q[1]], &params)[0] - ham_field([q[0] - h, q[1]], &params)[0])
                    / (2.0 * h),
                (ham_field([q[0], q[1] + h], &params)[0] - ham_field([q[0], q[1] - h], &params)[0])
                    / (2.0 * h),
            ];
            let dvy = [
                (ham_field([q[0] + h, q[1]], &params)[1] - ham_field([q[0] - h, q[1]], &params)[1])
                    / (2.0 * h),
                (ham_field([q[0], q[1] + h], &params)[1] - ham_field([q[0], q[1] - h], &params)[1])
                    / (2.0 * h),
            ];
            let conv = [-(dvx[0] * v[0] + dvx[1] * v[1]), -(dvy[0] * v[0] + dvy[1] * v[1])];
            let f = perturbation_f(q, &params);
            // −Dv·v = f + O(a,b terms of second order); tolerance covers the O(ab) part.
            worst = worst.max((conv[0] - f[0]).abs()).max((conv[1] - f[1]).abs());
        }
        assert!(worst < 2e-2, "convective-derivative mismatch {worst:e}");
    }

    #[test]
    fn f_matches_convective_derivative_exactly_at_zero_forcing() {
        let params = p(0.0, 1e-12, 0.0);
        let h = 1e-6;
        for i in 0..50 {
            let q = [0.37 * i as f64 - 9.0, -0.53 * i as f64 + 7.0];
            let v = ham_field(q, &params);
            let vf = |p: [f64; 2]| ham_field(p, &params);
            let conv = [
                -((vf([q[0] + h, q[1]])[0] - vf([q[0] - h, q[1]])[0]) / (2.0 * h) * v[0]
                    + (vf([q[0], q[1] + h])[0] - vf([q[0], q[1] - h])[0]) / (2.0 * h) * v[1]),
                -((vf([q[0] + h, q[1]])[1] - vf([q[0] - h, q[1]])[1]) / (2.0 * h) * v[0]
                    + (vf([q[0], q[1] + h])[1] - vf([q[0], q[1] - h])[1]) / (2.0 * h) * v[1]),
            ];
            let f = perturbation_f(q, &params);
            assert_abs_diff_eq!(conv[0], f[0], epsilon = 1e-5);
            assert_abs_diff_eq!(conv[1], f[1], epsilon = 1e-5);
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let params = p(0.06, 0.04, 1.0 / 25.0);
        let h = 1e-6;
        for field in [&ReducedField(params) as &dyn PlanarField, &HamiltonianField(params)] {
            for i in 0..40 {
                let q = [0.41 * i as f64 - 8.0, 0.29 * i as f64 - 6.0];
                let j = field.jacobian(q);
                for c in 0..2 {
                    let mut qp = q;
                    let mut qm = q;
                    qp[c] += h;
                    qm[c] -= h;
                    let vp = field.eval(qp);
                    let vm = field.eval(qm);
                    for r in 0..2 {
                        let fd = (vp[r] - vm[r]) / (2.0 * h);
                        assert_abs_diff_eq!(j[r][c], fd, epsilon = 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn embedding_zero_force_is_identity() {
        let params = p(0.02, 0.05, 0.0);
        let (field, _eps) =
            embed_external_force(HamiltonianField(params), 3.0, 7.0, [0.0, 0.0]).unwrap();
        let q = [0.3, -1.2];
        assert_eq!(field.eval(q), HamiltonianField(params).eval(q));
    }

    #[test]
    fn embedding_arithmetic() {
        let params = p(0.0, 1e-9, 0.0);
        let (field, eps) =
            embed_external_force(HamiltonianField(params), 1.0, 2.0, [0.0, -9.8]).unwrap();
        assert_abs_diff_eq!(field.w[1], -4.9, epsilon = 1e-15);
        assert_abs_diff_eq!(eps, 0.5, epsilon = 1e-15);
        assert!(embed_external_force(HamiltonianField(params), 1.0, 0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn embedding_reproduces_forced_cellular_field() {
        // Pure cellular fluid (a = b = 0 limit) + terminal velocity (b, a) = Eq. (3).
        let fluid = |q: [f64; 2]| [-q[0].cos() * q[1].sin(), q[0].sin() * q[1].cos()];
        struct Fluid;
        impl PlanarField for Fluid {
            fn eval(&self, p: [f64; 2]) -> [f64; 2] {
                [-p[0].cos() * p[1].sin(), p[0].sin() * p[1].cos()]
            }
            fn jacobian(&self, _p: [f64; 2]) -> [[f64; 2]; 2] {
                unimplemented!("not needed")
            }
        }
        let (a, b) = (0.04, 0.09);
        let (field, _) = embed_external_force(Fluid, 1.0, 1.0, [b, a]).unwrap();
        let params = p(a, b, 0.0);
        for i in 0..100 {
            let q = [0.13 * i as f64 - 6.0, 0.37 * i as f64 - 17.0];
            let got = field.eval(q);
            let want = ham_field(q, &params);
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-14);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-14);
            let _ = fluid(q);
        }
    }

    #[test]
    fn mr4d_constant_field_closed_form() {
        // v ≡ w: x(t) = x0 + w t + ε(1 − e^{−t/ε})(ẋ0 − w).
        // Realized by the cellular field along y = 0 with x-velocity b only when the
        // cell terms vanish; instead integrate the real 4D system with the cellular
        // part switched off via a huge-scale trick is not available, so check the
        // closed form directly on a custom 4D integration.
        let eps = 0.1;
        let rhs = |_t: f64, s: &[f64; 4]| [s[2], s[3], -(s[2] - 1.0) / eps, -s[3] / eps];
        let ode = Dopri5::default();
        let (_, yf) = ode
            .integrate(rhs, 0.0, [0.0, 0.0, 0.0, 0.0], 1.0, |_| Control::Continue)
            .unwrap();
        assert_abs_diff_eq!(yf[0], 1.0 - 0.1 * (1.0 - (-10.0f64).exp()), epsilon = 1e-8);
        assert_abs_diff_eq!(yf[2], 1.0 - (-10.0f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn planar_h_conserved_and_reversible() {
        let params = p(0.05, 0.05, 0.0);
        let field = HamiltonianField(params);
        let start = [-PI / 2.0, 0.37];
        let h0 = hamiltonian(start, &params);
        let trace = integrate_planar(start, &field, &[PI / 2.0], 500.0, Direction::Forward, true)
            .unwrap();
        let hit = trace.states[0];
        assert!((hit[0] - PI / 2.0).abs() < 1e-12);
        assert_abs_diff_eq!(hamiltonian(hit, &params), h0, epsilon = 1e-8);
        // Reversibility round trip.
        let back = integrate_planar(hit, &field, &[-PI / 2.0], 500.0, Direction::Backward, true)
            .unwrap();
        assert_abs_diff_eq!(back.states[0][0], start[0], epsilon = 1e-8);
        assert_abs_diff_eq!(back.states[0][1], start[1], epsilon = 1e-8);
    }

    #[test]
    fn h_drift_along_reduced_flow_is_order_epsilon() {
        let params = p(0.05, 0.05, 1.0 / 25.0);
        let field = ReducedField(params);
        for k in 0..8 {
            let start = [-PI / 2.0, -1.2 + 0.35 * k as f64];
            let h0 = hamiltonian(start, &params);
            let trace =
                integrate_planar(start, &field, &[PI / 2.0], 500.0, Direction::Forward, true)
                    .unwrap();
            let h1 = hamiltonian(trace.states[0], &params);
            assert!(
                (h1 - h0).abs() < 10.0 * params.epsilon,
                "|ΔH| = {} at start {start:?}",
                (h1 - h0).abs()
            );
        }
    }

    #[test]
    fn tiny_orbit_divergence_ratio_is_two() {
        // For orbits shrinking onto the cell center the mean of cos 2x + cos 2y
        // tends to its value at the center (2 exactly only when a = b = 0, since
        // forcing displaces the center to ≈ (−a, b)).
        let params = p(0.05, 0.05, 0.0);
        let center = cell_center(&params).unwrap();
        let hc = hamiltonian(center, &params);
        let expected = (2.0 * center[0]).cos() + (2.0 * center[1]).cos();
        let (integral, area) = divergence_area_check(hc - 1e-5, &params).unwrap();
        assert!(area > 0.0);
        assert_abs_diff_eq!(integral / area, expected, epsilon = 2e-3);
    }

    #[test]
    fn larger_orbit_integral_positive() {
        let params = p(0.05, 0.05, 0.0);
        let center = cell_center(&params).unwrap();
        let hc = hamiltonian(center, &params);
        let (integral, area) = divergence_area_check(hc - 0.5, &params).unwrap();
        assert!(integral > 0.0 && area > 0.0);
    }

    #[test]
    fn unclosed_level_rejected() {
        let params = p(0.05, 0.05, 0.0);
        assert!(matches!(
            divergence_area_check(10.0, &params),
            Err(CellflowError::NotClosed(_))
        ));
    }
}
