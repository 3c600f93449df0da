//! The slow-manifold reduction against the full 4D inertial dynamics: a particle
//! started on the slow manifold stays O(ε)-close to the reduced planar flow.

use cellflow::hamflow::ForcingParams;
use cellflow::inertial::{
    integrate_mr4d, reduced_field, PhaseState4, PlanarField, ReducedField,
};
use cellflow::ode::{Control, Dopri5};

/// Endpoint distance between the 4D trajectory (started with the slow-manifold
/// velocity v + εf) and the reduced planar trajectory, after time t_end.
fn reduction_gap(start: [f64; 2], a: f64, b: f64, eps: f64, t_end: f64) -> f64 {
    let params = ForcingParams::new(a, b, eps).unwrap();
    let (v, _) = reduced_field(start, &params);
    let init = PhaseState4 {
        x: start[0],
        y: start[1],
        vx: v[0],
        vy: v[1],
    };
    let four_d = integrate_mr4d(init, &params, t_end).unwrap();
    let end4 = four_d.last().unwrap().1;

    let field = ReducedField(params);
    let ode = Dopri5::default();
    let (_, end2) = ode
        .integrate(
            |_t, y: &[f64; 2]| field.eval(*y),
            0.0,
            start,
            t_end,
            |_s| Control::Continue,
        )
        .unwrap();
    (end4.x - end2[0]).hypot(end4.y - end2[1])
}

#[test]
fn four_d_stays_order_epsilon_close_to_reduced() {
    let mut gaps = Vec::new();
    for eps in [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0] {
        let gap = reduction_gap([0.3, 0.2], 0.04, 0.05, eps, 30.0);
        assert!(gap <= 5.0 * eps, "gap {gap} > 5ε at ε = {eps}");
        gaps.push(gap);
    }
    // Second-order accuracy of the v + εf reduction: halving ε should shrink the
    // gap clearly faster than linearly.
    assert!(
        gaps[1] < 0.6 * gaps[0] && gaps[2] < 0.6 * gaps[1],
        "gaps {gaps:?} do not contract"
    );
}

#[test]
fn channel_trajectory_also_tracks() {
    // A start in the open channel (level beyond the homoclinic loops) drifts
    // across many cells; tracking must still hold.
    let eps = 1.0 / 50.0;
    let gap = reduction_gap([-1.0, 1.45], 0.05, 0.05, eps, 30.0);
    assert!(gap <= 5.0 * eps, "channel gap {gap} > 5ε");
}
