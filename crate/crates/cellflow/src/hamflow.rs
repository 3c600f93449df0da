//! The unperturbed (ε = 0) Hamiltonian system H = cos x cos y − a x + b y:
//! field evaluation, saddle analysis, the chess-rule combinatorics of unbounded
//! trajectories, and the exact rigid-rotation return map.

use crate::error::{CellflowError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Forcing triple (a, b, ε). b > 0 keeps vertical sections transversal; ε = 0
/// selects the Hamiltonian limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingParams {
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl ForcingParams {
    pub fn new(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(CellflowError::Validation(format!("b must be positive, got {b}")));
        }
        if !(epsilon >= 0.0) {
            return Err(CellflowError::Validation(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(CellflowError::Validation("non-finite forcing".into()));
        }
        Ok(ForcingParams { a, b, epsilon })
    }

    /// Forcing slope α = a/b.
    pub fn alpha(&self) -> f64 {
        self.a / self.b
    }

    /// The theorem regime additionally assumes a > 0.
    pub fn require_positive_a(&self) -> Result<()> {
        if self.a > 0.0 {
            Ok(())
        } else {
            Err(CellflowError::Domain(format!(
                "operation requires a > 0 (tilted-cell regime), got a = {}",
                self.a
            )))
        }
    }
}

pub fn hamiltonian(p: [f64; 2], params: &ForcingParams) -> f64 {
    let [x, y] = p;
    x.cos() * y.cos() - params.a * x + params.b * y
}

/// The symplectic gradient (H_y, −H_x): ẋ = −cos x sin y + b, ẏ = sin x cos y + a.
pub fn ham_field(p: [f64; 2], params: &ForcingParams) -> [f64; 2] {
    let [x, y] = p;
    [-x.cos() * y.sin() + params.b, x.sin() * y.cos() + params.a]
}

pub fn eval_hamiltonian_system(p: [f64; 2], params: &ForcingParams) -> (f64, [f64; 2]) {
    (hamiltonian(p, params), ham_field(p, params))
}

/// K = ½(f(b−a) − f(b+a)) with f(x) = √(1−x²) + x·arcsin x (Appendix B).
pub fn k_constant(params: &ForcingParams) -> Result<f64> {
    let f = |x: f64| (1.0 - x * x).sqrt() + x * x.asin();
    let (a, b) = (params.a, params.b);
    if (a + b).abs() >= 1.0 || (b - a).abs() >= 1.0 {
        return Err(CellflowError::Domain(format!(
            "|a±b| must be < 1 for the saddle-value formula, got a={a}, b={b}"
        )));
    }
    Ok(0.5 * (f(b - a) - f(b + a)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

/// Lattice node (π/2 + π k1, π/2 + π k2) indexed by (k1, k2).
pub type Node = (i64, i64);

pub fn node_position(node: Node) -> [f64; 2] {
    [PI / 2.0 + PI * node.0 as f64, PI / 2.0 + PI * node.1 as f64]
}

pub fn node_parity(node: Node) -> Parity {
    if (node.0 + node.1).rem_euclid(2) == 1 {
        Parity::Odd
    } else {
        Parity::Even
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SaddlePoint {
    pub position: [f64; 2],
    pub parity: Parity,
    pub h_value: f64,
    pub grid_node: Node,
}

/// Closed-form Appendix B seed for the saddle at a given node, in the shear
/// variables X = x + y, Y = x − y.
fn saddle_seed(node: Node, params: &ForcingParams) -> [f64; 2] {
    let [nx, ny] = node_position(node);
    let (xn, yn) = (nx + ny, nx - ny);
    let d1 = (params.b - params.a).asin();
    let d2 = (params.a + params.b).asin();
    let (xs, ys) = match node_parity(node) {
        // X ∈ arcsin(b−a) + 2πZ, Y ∈ π + arcsin(a+b) + 2πZ; node has X ∈ 2πZ, Y ∈ π + 2πZ.
        Parity::Odd => (xn + d1, yn + d2),
        // X ∈ π − arcsin(b−a) + 2πZ, Y ∈ −arcsin(a+b) + 2πZ; node has X ∈ π + 2πZ, Y ∈ 2πZ.
        Parity::Even => (xn - d1, yn - d2),
    };
    [(xs + ys) / 2.0, (xs - ys) / 2.0]
}

/// Polish a saddle seed by Newton on ∇H = 0.
fn newton_saddle(seed: [f64; 2], params: &ForcingParams) -> Result<[f64; 2]> {
    let mut p = seed;
    for _ in 0..50 {
        let [x, y] = p;
        let gx = -x.sin() * y.cos() - params.a;
        let gy = -x.cos() * y.sin() + params.b;
        if gx.hypot(gy) < 1e-12 {
            return Ok(p);
        }
        // Hessian of H.
        let hxx = -x.cos() * y.cos();
        let hxy = x.sin() * y.sin();
        let hyy = -x.cos() * y.cos();
        let det = hxx * hyy - hxy * hxy;
        if det.abs() < 1e-14 {
            break;
        }
        p = [x - (hyy * gx - hxy * gy) / det, y - (hxx * gy - hxy * gx) / det];
    }
    let [x, y] = p;
    let gx = -x.sin() * y.cos() - params.a;
    let gy = -x.cos() * y.sin() + params.b;
    if gx.hypot(gy) < 1e-10 {
        Ok(p)
    } else {
        Err(CellflowError::NonConvergence(format!(
            "saddle Newton stalled near ({:.4}, {:.4}); parameters likely outside the \
             validity range",
            seed[0], seed[1]
        )))
    }
}

/// The saddle of the ε = 0 field nearest a given lattice node.
pub fn saddle_near_node(node: Node, params: &ForcingParams) -> Result<SaddlePoint> {
    let position = newton_saddle(saddle_seed(node, params), params)?;
    Ok(SaddlePoint {
        position,
        parity: node_parity(node),
        h_value: hamiltonian(position, params),
        grid_node: node,
    })
}

/// All saddles whose lattice node lies inside the window [xmin, xmax] × [ymin, ymax].
pub fn find_saddles(params: &ForcingParams, window: [f64; 4]) -> Result<Vec<SaddlePoint>> {
    params.require_positive_a()?;
    if params.a > 0.1 + 1e-12 || params.b > 0.1 + 1e-12 {
        return Err(CellflowError::Domain(format!(
            "find_saddles assumes 0 < a, b <= 0.1 (Appendix B regime), got a={}, b={}",
            params.a, params.b
        )));
    }
    let [xmin, xmax, ymin, ymax] = window;
    let k1_lo = ((xmin - PI / 2.0) / PI).ceil() as i64;
    let k1_hi = ((xmax - PI / 2.0) / PI).floor() as i64;
    let k2_lo = ((ymin - PI / 2.0) / PI).ceil() as i64;
    let k2_hi = ((ymax - PI / 2.0) / PI).floor() as i64;
    let mut saddles = Vec::new();
    for k1 in k1_lo..=k1_hi {
        for k2 in k2_lo..=k2_hi {
            saddles.push(saddle_near_node((k1, k2), params)?);
        }
    }
    Ok(saddles)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    L,
    R,
}

/// Tunables for the chess-rule combinatorics.
#[derive(Clone, Copy, Debug)]
pub struct ChessConfig {
    /// The chess rule is only trusted for |a|, |b| ≤ 0.1; we do not claim more.
    pub validity_bound: f64,
    /// Levels whose line passes this close to a node are rejected as non-generic.
    pub on_line_tol: f64,
}

impl Default for ChessConfig {
    fn default() -> Self {
        ChessConfig {
            validity_bound: 0.1,
            on_line_tol: 1e-9,
        }
    }
}

/// Turn direction at a saddle for the trajectory at level `h0` (Appendix B):
/// odd saddles compare b·y_Γ − a·x_Γ against c_o = h0 − K, even ones against
/// c_e = h0 + K; the turn is right iff the value exceeds the constant. Here
/// (x_Γ, y_Γ) are the lattice-node coordinates; since the saddle level is
/// exactly b·y_Γ − a·x_Γ ± K, the rule amounts to comparing H(saddle) with h0.
pub fn chess_turn_label(
    node: Node,
    params: &ForcingParams,
    h0: f64,
    cfg: &ChessConfig,
) -> Result<Turn> {
    params.require_positive_a()?;
    if params.a > cfg.validity_bound || params.b > cfg.validity_bound {
        return Err(CellflowError::Domain(format!(
            "chess rule validated only for a, b <= {}",
            cfg.validity_bound
        )));
    }
    let k = k_constant(params)?;
    let c = match node_parity(node) {
        Parity::Odd => h0 - k,
        Parity::Even => h0 + k,
    };
    let [nx, ny] = node_position(node);
    let val = params.b * ny - params.a * nx;
    if (val - c).abs() < cfg.on_line_tol {
        return Err(CellflowError::OnLine {
            dist: (val - c).abs(),
        });
    }
    Ok(if val > c { Turn::R } else { Turn::L })
}

/// A directed lattice edge (from node to a neighboring node).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectedEdge {
    pub from: Node,
    pub to: Node,
}

impl DirectedEdge {
    pub fn new(from: Node, to: Node) -> Result<Self> {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        if dx.abs() + dy.abs() != 1 {
            return Err(CellflowError::Validation(format!(
                "edge endpoints must be lattice neighbors, got {from:?} -> {to:?}"
            )));
        }
        Ok(DirectedEdge { from, to })
    }
}

#[derive(Clone, Debug)]
pub struct ChessPath {
    pub vertices: Vec<Node>,
    pub turns: Vec<Turn>,
    pub h0: f64,
    /// (c_o, c_e) = (h0 − K, h0 + K).
    pub lines: (f64, f64),
}

/// Grow the chess path from a starting edge by applying the turn rule n_turns times.
pub fn chess_path(
    start_edge: DirectedEdge,
    params: &ForcingParams,
    h0: f64,
    n_turns: usize,
    cfg: &ChessConfig,
) -> Result<ChessPath> {
    let k = k_constant(params)?;
    let mut vertices = vec![start_edge.from, start_edge.to];
    let mut turns = Vec::with_capacity(n_turns);
    let mut heading = (
        start_edge.to.0 - start_edge.from.0,
        start_edge.to.1 - start_edge.from.1,
    );
    let mut at = start_edge.to;
    for _ in 0..n_turns {
        let turn = chess_turn_label(at, params, h0, cfg)?;
        heading = match turn {
            Turn::L => (-heading.1, heading.0),
            Turn::R => (heading.1, -heading.0),
        };
        at = (at.0 + heading.0, at.1 + heading.1);
        vertices.push(at);
        turns.push(turn);
    }
    Ok(ChessPath {
        vertices,
        turns,
        h0,
        lines: (h0 - k, h0 + k),
    })
}

/// The exact ε = 0 return-map lift: z ↦ z + (a − b)/(2b) (§3.2).
pub fn rigid_rotation_p0(z: f64, params: &ForcingParams) -> f64 {
    z + (params.a - params.b) / (2.0 * params.b)
}

/// Rigid-rotation shift of the forward map P at ε = 0.
pub fn rigid_shift(params: &ForcingParams) -> f64 {
    (params.a - params.b) / (2.0 * params.b)
}
