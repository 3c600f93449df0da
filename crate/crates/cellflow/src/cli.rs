//! Command-line front end: simulate | staircase | tongues | chess | rotnum | hausdorff.
//!
//! Exit codes: 0 success, 2 validation/config error, 3 numerical failure,
//! 4 topology/structure error, 5 I/O error.

use crate::circlemap::{hausdorff_estimate, make_boyd_family, rotation_number, PlateauOpts};
use crate::error::{CellflowError, Result};
use crate::hamflow::{chess_path, hamiltonian, ChessConfig, DirectedEdge, ForcingParams, Turn};
use crate::inertial::{integrate_mr4d, PhaseState4, PlanarField, ReducedField};
use crate::ode::{Control, Dopri5};
use crate::poincare::locate_flat_spots;
use crate::svg;
use crate::sweep::{
    drift_from_rho, staircase_sweep, tongue_scan, DynamicsMap, StaircaseConfig, StaircaseTable,
    TongueConfig, TongueScan,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

/// Inclusive range grid "lo:hi:count".
#[derive(Clone, Copy, Debug)]
pub struct RangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl FromStr for RangeSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:count, got {s:?}"));
        }
        let lo: f64 = parts[0].parse().map_err(|e| format!("bad lo: {e}"))?;
        let hi: f64 = parts[1].parse().map_err(|e| format!("bad hi: {e}"))?;
        let count: usize = parts[2].parse().map_err(|e| format!("bad count: {e}"))?;
        if count < 1 {
            return Err("count must be >= 1".into());
        }
        Ok(RangeSpec { lo, hi, count })
    }
}

fn parse_node(s: &str) -> std::result::Result<(i64, i64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected i,j, got {s:?}"));
    }
    Ok((
        parts[0].trim().parse().map_err(|e| format!("{e}"))?,
        parts[1].trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

#[derive(Parser, Debug)]
#[command(
    name = "cellflow",
    version,
    about = "Inertial particles in cellular flows: return maps, drift staircases, tongues"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate a trajectory of the reduced planar or full 4D inertial model.
    Simulate(SimulateArgs),
    /// Sweep the drift-slope staircase over alpha = a/b.
    Staircase(StaircaseArgs),
    /// Scan mode-locking tongues on an (alpha, epsilon) grid.
    Tongues(TonguesArgs),
    /// Predict the lattice walk with the chessboard turn rule.
    Chess(ChessArgs),
    /// Rotation number of the inverse return map Q at fixed parameters.
    Rotnum(RotnumArgs),
    /// Hausdorff pre-measure table for a piecewise-linear flat-spot family.
    Hausdorff(HausdorffArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub x0: f64,
    #[arg(long)]
    pub y0: f64,
    /// Initial velocity (4D model only; defaults to the fluid velocity).
    #[arg(long)]
    pub vx0: Option<f64>,
    #[arg(long)]
    pub vy0: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    /// "reduced" (planar slow-manifold field) or "inertial" (full 4D).
    #[arg(long, default_value = "reduced")]
    pub model: String,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StaircaseArgs {
    /// JSON config file (same fields as the flags; unknown keys rejected).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Alpha grid "lo:hi:count" (inclusive).
    #[arg(long)]
    pub alpha: Option<RangeSpec>,
    #[arg(long)]
    pub q_max: Option<u32>,
    #[arg(long)]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub refine_width: Option<f64>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TonguesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<RangeSpec>,
    #[arg(long)]
    pub epsilon: Option<RangeSpec>,
    #[arg(long)]
    pub q_max: Option<u32>,
    #[arg(long)]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub refine_width: Option<f64>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ChessArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    /// Starting lattice edge: from node "i,j" ...
    #[arg(long, value_parser = parse_node)]
    pub from: (i64, i64),
    /// ... to neighboring node "i,j".
    #[arg(long, value_parser = parse_node)]
    pub to: (i64, i64),
    /// Streamline level h0 (alternatively derived from --x0/--y0).
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub y0: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub n_turns: usize,
    /// Integrate the reduced trajectory for this long and render the overlay.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RotnumArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 200)]
    pub q_max: u32,
    #[arg(long, default_value_t = 100_000)]
    pub n_max: u32,
}

#[derive(Args, Debug)]
pub struct HausdorffArgs {
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub flat_fraction: f64,
    #[arg(long, default_value_t = 3.0)]
    pub slope: f64,
    #[arg(long, default_value_t = 6)]
    pub n_max: u32,
    /// Plateau scan resolution in s.
    #[arg(long, default_value_t = 1e-6)]
    pub resolution: f64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

/// 17 significant digits; round-trips f64 exactly.
fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let params = ForcingParams::new(args.a, args.b, args.epsilon)?;
    let mut csv = String::new();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    match args.model.as_str() {
        "reduced" => {
            csv.push_str("t,x,y\n");
            let field = ReducedField(params);
            let ode = Dopri5::default();
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_f(0.0),
                fmt_f(args.x0),
                fmt_f(args.y0)
            ));
            pts.push([args.x0, args.y0]);
            ode.integrate(
                |_t, y: &[f64; 2]| field.eval(*y),
                0.0,
                [args.x0, args.y0],
                args.t_end,
                |step| {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        fmt_f(step.t1),
                        fmt_f(step.y1[0]),
                        fmt_f(step.y1[1])
                    ));
                    pts.push([step.y1[0], step.y1[1]]);
                    Control::Continue
                },
            )?;
        }
        "inertial" => {
            csv.push_str("t,x,y,vx,vy\n");
            let v0 = crate::hamflow::ham_field([args.x0, args.y0], &params);
            let init = PhaseState4 {
                x: args.x0,
                y: args.y0,
                vx: args.vx0.unwrap_or(v0[0]),
                vy: args.vy0.unwrap_or(v0[1]),
            };
            for (t, s) in integrate_mr4d(init, &params, args.t_end)? {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f(t),
                    fmt_f(s.x),
                    fmt_f(s.y),
                    fmt_f(s.vx),
                    fmt_f(s.vy)
                ));
                pts.push([s.x, s.y]);
            }
        }
        other => {
            return Err(CellflowError::Validation(format!(
                "unknown model {other:?}; use \"reduced\" or \"inertial\""
            )))
        }
    }
    if let Some(p) = &args.out_csv {
        write_file(p, &csv)?;
    }
    if let Some(p) = &args.out_svg {
        write_file(
            p,
            &svg::trajectory_svg(&pts, &format!("{} trajectory", args.model)),
        )?;
    }
    let last = pts.last().unwrap();
    println!(
        "{}",
        serde_json::json!({
            "model": args.model,
            "samples": pts.len(),
            "end": {"x": last[0], "y": last[1]},
        })
    );
    Ok(())
}

fn staircase_config(args: &StaircaseArgs) -> Result<StaircaseConfig> {
    let mut cfg: Option<StaircaseConfig> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CellflowError::Validation(format!("config: {e}")))?,
            )
        }
        None => None,
    };
    if let (Some(b), Some(eps), Some(r)) = (args.b, args.epsilon, args.alpha) {
        if cfg.is_none() {
            cfg = Some(StaircaseConfig {
                b,
                epsilon: eps,
                alpha_min: r.lo,
                alpha_max: r.hi,
                count: r.count,
                q_max: 40,
                n_max: 400,
                refine_width: 0.0,
            });
        }
    }
    let mut cfg = cfg.ok_or_else(|| {
        CellflowError::Validation(
            "need --config or all of --b, --epsilon, --alpha".into(),
        )
    })?;
    if let Some(b) = args.b {
        cfg.b = b;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(r) = args.alpha {
        cfg.alpha_min = r.lo;
        cfg.alpha_max = r.hi;
        cfg.count = r.count;
    }
    if let Some(q) = args.q_max {
        cfg.q_max = q;
    }
    if let Some(n) = args.n_max {
        cfg.n_max = n;
    }
    if let Some(w) = args.refine_width {
        cfg.refine_width = w;
    }
    Ok(cfg)
}

pub fn staircase_csv(table: &StaircaseTable) -> String {
    let mut out = String::from("alpha,s,rho_kind,p,q,rho_lo,rho_hi,m,status\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f(r.alpha),
            fmt_f(r.s),
            r.rho_kind,
            r.p.map(|v| v.to_string()).unwrap_or_default(),
            r.q.map(|v| v.to_string()).unwrap_or_default(),
            r.rho_lo.map(fmt_f).unwrap_or_default(),
            r.rho_hi.map(fmt_f).unwrap_or_default(),
            r.m.map(fmt_f).unwrap_or_default(),
            r.status.replace(',', ";"),
        ));
    }
    out
}

#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
}

fn meta(cmd: &'static str) -> Meta {
    Meta {
        tool: "cellflow",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd,
    }
}

fn run_staircase(args: &StaircaseArgs) -> Result<()> {
    let cfg = staircase_config(args)?;
    // Canonical config echo.
    println!("{}", serde_json::to_string(&cfg).unwrap());
    let table = staircase_sweep(&cfg)?;
    if let Some(p) = &args.out_csv {
        write_file(p, &staircase_csv(&table))?;
    }
    if let Some(p) = &args.out_json {
        let doc = serde_json::json!({
            "meta": meta("staircase"),
            "config": table.config,
            "rows": table.rows,
            "plateaus": table.plateaus,
        });
        write_file(p, &serde_json::to_string_pretty(&doc).unwrap())?;
    }
    if let Some(p) = &args.out_svg {
        write_file(p, &svg::staircase_svg(&table))?;
    }
    let locked = table
        .rows
        .iter()
        .filter(|r| r.rho_kind == "rational")
        .count();
    println!(
        "{}",
        serde_json::json!({"rows": table.rows.len(), "locked": locked})
    );
    Ok(())
}

fn tongue_config(args: &TonguesArgs) -> Result<TongueConfig> {
    let mut cfg: Option<TongueConfig> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| CellflowError::Validation(format!("config: {e}")))?,
            )
        }
        None => None,
    };
    if let (Some(b), Some(ar), Some(er)) = (args.b, args.alpha, args.epsilon) {
        if cfg.is_none() {
            cfg = Some(TongueConfig {
                b,
                alpha_min: ar.lo,
                alpha_max: ar.hi,
                alpha_count: ar.count,
                epsilon_min: er.lo,
                epsilon_max: er.hi,
                epsilon_count: er.count,
                q_max: 40,
                n_max: 400,
                refine_width: 0.0,
            });
        }
    }
    let mut cfg = cfg.ok_or_else(|| {
        CellflowError::Validation("need --config or all of --b, --alpha, --epsilon".into())
    })?;
    if let Some(b) = args.b {
        cfg.b = b;
    }
    if let Some(r) = args.alpha {
        cfg.alpha_min = r.lo;
        cfg.alpha_max = r.hi;
        cfg.alpha_count = r.count;
    }
    if let Some(r) = args.epsilon {
        cfg.epsilon_min = r.lo;
        cfg.epsilon_max = r.hi;
        cfg.epsilon_count = r.count;
    }
    if let Some(q) = args.q_max {
        cfg.q_max = q;
    }
    if let Some(n) = args.n_max {
        cfg.n_max = n;
    }
    if let Some(w) = args.refine_width {
        cfg.refine_width = w;
    }
    Ok(cfg)
}

pub fn tongues_csv(scan: &TongueScan) -> String {
    let mut out = String::from("alpha,epsilon,rho_kind,p,q,rho,status\n");
    for c in &scan.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f(c.alpha),
            fmt_f(c.epsilon),
            c.rho_kind,
            c.p.map(|v| v.to_string()).unwrap_or_default(),
            c.q.map(|v| v.to_string()).unwrap_or_default(),
            c.rho.map(fmt_f).unwrap_or_default(),
            c.status.replace(',', ";"),
        ));
    }
    out
}

fn run_tongues(args: &TonguesArgs) -> Result<()> {
    let cfg = tongue_config(args)?;
    println!("{}", serde_json::to_string(&cfg).unwrap());
    let scan = tongue_scan(&cfg)?;
    if let Some(p) = &args.out_csv {
        write_file(p, &tongues_csv(&scan))?;
    }
    if let Some(p) = &args.out_json {
        let doc = serde_json::json!({
            "meta": meta("tongues"),
            "config": scan.config,
            "cells": scan.cells,
            "regions": scan.regions,
        });
        write_file(p, &serde_json::to_string_pretty(&doc).unwrap())?;
    }
    if let Some(p) = &args.out_svg {
        write_file(p, &svg::tongues_svg(&scan))?;
    }
    println!(
        "{}",
        serde_json::json!({"cells": scan.cells.len(), "regions": scan.regions.len()})
    );
    Ok(())
}

fn run_chess(args: &ChessArgs) -> Result<()> {
    let params = ForcingParams::new(args.a, args.b, args.epsilon)?;
    let h0 = match (args.h0, args.x0, args.y0) {
        (Some(h), _, _) => h,
        (None, Some(x), Some(y)) => hamiltonian([x, y], &params),
        _ => {
            return Err(CellflowError::Validation(
                "need --h0 or both --x0 and --y0".into(),
            ))
        }
    };
    let edge = DirectedEdge::new(args.from, args.to)?;
    let path = chess_path(edge, &params, h0, args.n_turns, &ChessConfig::default())?;
    let turn_string: String = path
        .turns
        .iter()
        .map(|t| if *t == Turn::L { 'L' } else { 'R' })
        .collect();
    println!(
        "{}",
        serde_json::json!({
            "h0": h0,
            "lines": {"c_odd": path.lines.0, "c_even": path.lines.1},
            "turns": turn_string,
            "vertices": path.vertices,
        })
    );
    if let Some(out) = &args.out_svg {
        let (x0, y0, t_end) = match (args.x0, args.y0, args.t_end) {
            (Some(x), Some(y), Some(t)) => (x, y, t),
            _ => {
                return Err(CellflowError::Validation(
                    "--out-svg needs --x0, --y0 and --t-end for the trajectory overlay".into(),
                ))
            }
        };
        let field = ReducedField(params);
        let ode = Dopri5::default();
        let mut pts = vec![[x0, y0]];
        ode.integrate(
            |_t, y: &[f64; 2]| field.eval(*y),
            0.0,
            [x0, y0],
            t_end,
            |step| {
                pts.push([step.y1[0], step.y1[1]]);
                Control::Continue
            },
        )?;
        write_file(out, &svg::chess_overlay_svg(&pts, &path))?;
    }
    Ok(())
}

fn run_rotnum(args: &RotnumArgs) -> Result<()> {
    let params = ForcingParams::new(args.a, args.b, args.epsilon)?;
    let map = DynamicsMap::new(params)?;
    let r = rotation_number(&map, args.q_max, args.n_max)?;
    let (lo, hi) = r.bounds();
    let flat = locate_flat_spots(&params)?;
    let spots: Vec<_> = flat
        .spots
        .iter()
        .map(|s| serde_json::json!({"lo": s.lo, "hi": s.hi, "height": s.height}))
        .collect();
    println!(
        "{}",
        serde_json::json!({
            "rho": r,
            "rho_lo": lo,
            "rho_hi": hi,
            "drift_slope_m": drift_from_rho(r.value()),
            "spots": spots,
        })
    );
    Ok(())
}

fn run_hausdorff(args: &HausdorffArgs) -> Result<()> {
    let fam = make_boyd_family(args.flat_fraction, args.slope)?;
    let opts = PlateauOpts {
        scan_floor: args.resolution,
        refine_width: args.resolution.min(1e-10),
    };
    let table = hausdorff_estimate(&fam, args.n_max, &opts)?;
    if let Some(p) = &args.out_csv {
        let mut csv = String::from("d,N,m_d\n");
        for (d, n, md) in &table.rows {
            csv.push_str(&format!("{},{},{}\n", d, n, fmt_f(*md)));
        }
        write_file(p, &csv)?;
    }
    println!(
        "{}",
        serde_json::json!({"rows": table.rows, "slopes": table.slopes})
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::Simulate(a) => run_simulate(a),
        Command::Staircase(a) => run_staircase(a),
        Command::Tongues(a) => run_tongues(a),
        Command::Chess(a) => run_chess(a),
        Command::Rotnum(a) => run_rotnum(a),
        Command::Hausdorff(a) => run_hausdorff(a),
    }
}

/// Exit-code contract for the binary.
pub fn exit_code(err: &CellflowError) -> i32 {
    match err {
        CellflowError::Validation(_) | CellflowError::Domain(_) => 2,
        CellflowError::Io(_) => 5,
        CellflowError::Topology(_) | CellflowError::NotClosed(_) | CellflowError::NotFound(_) => 4,
        _ => 3,
    }
}
