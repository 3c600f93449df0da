//! Minimal native SVG 1.1 output: staircase step plots, tongue heat maps,
//! trajectory polylines, and chessboard-path overlays.

use crate::hamflow::ChessPath;
use crate::sweep::{StaircaseTable, TongueScan};
use std::fmt::Write as _;

const W: f64 = 900.0;
const H: f64 = 600.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" \
         text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{by}\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"18\" y=\"{cy}\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {cy})\">{yl}</text>\n",
        m = MARGIN,
        w = W - 2.0 * MARGIN,
        h = H - 2.0 * MARGIN,
        cx = W / 2.0,
        by = H - 18.0,
        cy = H / 2.0,
        xl = xml_escape(x_label),
        yl = xml_escape(y_label),
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.4}</text>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{:.4}</text>\n",
            f.px(xv),
            H - MARGIN + 18.0,
            xv,
            MARGIN - 6.0,
            f.py(yv) + 4.0,
            yv,
        );
    }
}

/// Step plot of the drift slope m against α.
pub fn staircase_svg(table: &StaircaseTable) -> String {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter_map(|r| r.m.map(|m| (r.alpha, m)))
        .collect();
    let (y0, y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, m)| {
            (lo.min(m), hi.max(m))
        });
    let pad = 0.05 * (y1 - y0).max(1e-9);
    let f = Frame {
        x0: table.config.alpha_min,
        x1: table.config.alpha_max,
        y0: y0 - pad,
        y1: y1 + pad,
    };
    let mut out = header(&format!(
        "Drift slope staircase (b = {}, eps = {})",
        table.config.b, table.config.epsilon
    ));
    axes(&mut out, &f, "alpha = a/b", "drift slope m");
    // Step plot: horizontal segment to the next α, vertical riser.
    let mut path = String::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        if i == 0 {
            let _ = write!(path, "M {:.3} {:.3}", f.px(x), f.py(y));
        } else {
            let _ = write!(path, " H {:.3} V {:.3}", f.px(x), f.py(y));
        }
    }
    let _ = write!(
        out,
        "<path d=\"{path}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"/>\n"
    );
    for &(x, y) in &pts {
        let _ = write!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"1.6\" fill=\"#1f5fa8\"/>\n",
            f.px(x),
            f.py(y)
        );
    }
    out + "</svg>\n"
}

/// Heat map of locked rationals on the (α, ε) grid.
pub fn tongues_svg(scan: &TongueScan) -> String {
    let c = &scan.config;
    let f = Frame {
        x0: c.alpha_min,
        x1: c.alpha_max,
        y0: c.epsilon_min,
        y1: if c.epsilon_count > 1 {
            c.epsilon_max
        } else {
            c.epsilon_min + 1e-9
        },
    };
    let mut out = header(&format!("Arnold tongues of the return map (b = {})", c.b));
    axes(&mut out, &f, "alpha = a/b", "epsilon");
    let cw = (W - 2.0 * MARGIN) / c.alpha_count as f64;
    let ch = (H - 2.0 * MARGIN) / c.epsilon_count as f64;
    for cell in &scan.cells {
        let color = match (cell.p, cell.q) {
            (Some(_), Some(q)) => {
                // Hue by rotation value, darker for higher q.
                let v = cell.rho.unwrap_or(0.0);
                let hue = 240.0 - 200.0 * (v + 0.5).clamp(0.0, 1.0);
                let light = (70.0 - 6.0 * (q as f64).min(5.0)) as i32;
                format!("hsl({hue:.0},70%,{light}%)")
            }
            _ if cell.rho_kind == "error" => "#dddddd".to_string(),
            _ => "#f4f4f4".to_string(),
        };
        let _ = write!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
            f.px(cell.alpha) - cw / 2.0,
            f.py(cell.epsilon) - ch / 2.0,
            cw,
            ch,
            color
        );
    }
    out + "</svg>\n"
}

/// Polyline of a planar trajectory (x, y samples), with cell grid lines.
pub fn trajectory_svg(samples: &[[f64; 2]], title: &str) -> String {
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        x0 = x0.min(s[0]);
        x1 = x1.max(s[0]);
        y0 = y0.min(s[1]);
        y1 = y1.max(s[1]);
    }
    let padx = 0.05 * (x1 - x0).max(1.0);
    let pady = 0.05 * (y1 - y0).max(1.0);
    let f = Frame {
        x0: x0 - padx,
        x1: x1 + padx,
        y0: y0 - pady,
        y1: y1 + pady,
    };
    let mut out = header(title);
    axes(&mut out, &f, "x", "y");
    let pi = std::f64::consts::PI;
    // Cell boundary lines x, y ∈ π/2 + πZ.
    let mut k = ((f.x0 - pi / 2.0) / pi).ceil() as i64;
    while (pi / 2.0 + k as f64 * pi) < f.x1 {
        let xv = pi / 2.0 + k as f64 * pi;
        let _ = write!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" \
             stroke=\"#cccccc\" stroke-width=\"0.7\"/>\n",
            f.px(xv),
            f.py(f.y0),
            f.py(f.y1)
        );
        k += 1;
    }
    let mut k = ((f.y0 - pi / 2.0) / pi).ceil() as i64;
    while (pi / 2.0 + k as f64 * pi) < f.y1 {
        let yv = pi / 2.0 + k as f64 * pi;
        let _ = write!(
            out,
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" \
             stroke=\"#cccccc\" stroke-width=\"0.7\"/>\n",
            f.px(f.x0),
            f.py(yv),
            f.px(f.x1)
        );
        k += 1;
    }
    let mut path = String::new();
    for (i, s) in samples.iter().enumerate() {
        let _ = write!(
            path,
            "{} {:.3} {:.3}",
            if i == 0 { "M" } else { " L" },
            f.px(s[0]),
            f.py(s[1])
        );
    }
    let _ = write!(
        out,
        "<path d=\"{path}\" fill=\"none\" stroke=\"#a82020\" stroke-width=\"1.2\"/>\n"
    );
    out + "</svg>\n"
}

/// Chessboard path: trajectory polyline plus the predicted lattice walk.
pub fn chess_overlay_svg(samples: &[[f64; 2]], path: &ChessPath) -> String {
    let mut out = trajectory_svg(samples, "Trajectory with chessboard-rule prediction");
    // Re-derive the frame used by trajectory_svg.
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        x0 = x0.min(s[0]);
        x1 = x1.max(s[0]);
        y0 = y0.min(s[1]);
        y1 = y1.max(s[1]);
    }
    let padx = 0.05 * (x1 - x0).max(1.0);
    let pady = 0.05 * (y1 - y0).max(1.0);
    let f = Frame {
        x0: x0 - padx,
        x1: x1 + padx,
        y0: y0 - pady,
        y1: y1 + pady,
    };
    let pi = std::f64::consts::PI;
    let mut seg = String::new();
    for (i, v) in path.vertices.iter().enumerate() {
        let (nx, ny) = (v.0 as f64 * pi, v.1 as f64 * pi);
        let _ = write!(
            seg,
            "{} {:.3} {:.3}",
            if i == 0 { "M" } else { " L" },
            f.px(nx),
            f.py(ny)
        );
    }
    let body = format!(
        "<path d=\"{seg}\" fill=\"none\" stroke=\"#208a3c\" stroke-width=\"2\" \
         stroke-dasharray=\"6 4\"/>\n</svg>\n"
    );
    out.truncate(out.len() - "</svg>\n".len());
    out + &body
}
