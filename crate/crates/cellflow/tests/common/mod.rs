//! Shared test helpers: an independent trajectory-based oracle for the lattice
//! walk of a level line, built only from ODE integration and event extraction.

use cellflow::hamflow::{ham_field, ForcingParams, Node, Turn};
use cellflow::ode::{locate_crossing, Control, Dopri5};
use std::f64::consts::PI;

/// A directed lattice edge extracted from a single grid-line crossing.
/// Vertical line x = πk crossed rightward: (k−1, r) → (k, r) with
/// r = round((y − π/2)/π); analogously for the other direction and for
/// horizontal lines y = πk.
fn edge_from_crossing(pos: [f64; 2], vel: [f64; 2], vertical: bool) -> (Node, Node) {
    if vertical {
        let k = (pos[0] / PI).round() as i64;
        let r = ((pos[1] - PI / 2.0) / PI).round() as i64;
        if vel[0] > 0.0 {
            ((k - 1, r), (k, r))
        } else {
            ((k, r), (k - 1, r))
        }
    } else {
        let k = (pos[1] / PI).round() as i64;
        let r = ((pos[0] - PI / 2.0) / PI).round() as i64;
        if vel[1] > 0.0 {
            ((r, k - 1), (r, k))
        } else {
            ((r, k), (r, k - 1))
        }
    }
}

/// Walk of the ε = 0 level line through `start`: integrate the Hamiltonian field
/// and read the node sequence off the grid-line crossings (x ∈ πZ and y ∈ πZ).
/// Immediate back-and-forth repeats (grazing a line without passing a saddle)
/// are dropped.
pub fn oracle_walk(start: [f64; 2], params: &ForcingParams, t_end: f64) -> Vec<Node> {
    let ode = Dopri5::default();
    let mut edges: Vec<(Node, Node)> = Vec::new();
    ode.integrate(
        |_t, y: &[f64; 2]| ham_field(*y, params),
        0.0,
        start,
        t_end,
        |step| {
            // At most one grid line fits inside a DOPRI5 step here.
            for vertical in [true, false] {
                let g = |y: &[f64; 2]| {
                    let c = if vertical { y[0] } else { y[1] };
                    (c / PI) - (c / PI).round()
                };
                // Skip steps that merely start on a line already handled.
                if g(&step.y0).abs() < 1e-12 {
                    continue;
                }
                if let Some((tc, yc)) = locate_crossing(step, g, 1e-12) {
                    let vel = ham_field(step.eval(tc), params);
                    edges.push(edge_from_crossing(yc, vel, vertical));
                }
            }
            Control::Continue
        },
    )
    .expect("oracle integration failed");

    // Edge list → vertex walk, cancelling immediate reversals.
    let mut walk: Vec<Node> = Vec::new();
    for (from, to) in edges {
        if walk.is_empty() {
            walk.push(from);
            walk.push(to);
            continue;
        }
        let last = *walk.last().unwrap();
        if last != from {
            // A grazing pair put us off by one; resynchronize conservatively.
            continue;
        }
        if walk.len() >= 2 && walk[walk.len() - 2] == to {
            walk.pop();
        } else {
            walk.push(to);
        }
    }
    walk
}

/// Turn letters read off a vertex walk (L for a left turn, R for right);
/// straight continuations are not expected and panic.
pub fn turns_of_walk(walk: &[Node]) -> Vec<Turn> {
    let mut turns = Vec::new();
    for w in walk.windows(3) {
        let h1 = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        let h2 = (w[2].0 - w[1].0, w[2].1 - w[1].1);
        let cross = h1.0 * h2.1 - h1.1 * h2.0;
        match cross {
            1 => turns.push(Turn::L),
            -1 => turns.push(Turn::R),
            _ => panic!("straight or reversing step at {:?}", w),
        }
    }
    turns
}
