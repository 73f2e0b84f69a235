//! Command-line front end.
//!
//! Machine-readable output goes to stdout, or to `<out>/<command>.json` and
//! `<out>/<command>.csv` with `--out`; a human-readable summary goes to
//! stderr. Exit codes: 0 success, 1 malformed input, 2 analysis error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::calculus::{kernel_generator_with, shift_map, KernelOptions, PointMap, DEFAULT_HORIZON};
use crate::diffeo::{convexity_probe, diffeo_classify, fmt_float, ConvexityOptions, ConvexityReport, Orientation};
use crate::error::{Error, Result};
use crate::flow::{classify_trajectory, Flow, TrajectoryKind};
use crate::grid::{Domain, Grid};
use crate::jordan::{build_jordan_matrix, jordan_exp, matrix_exp_oracle, max_abs_diff, Block, JordanSpec, Matrix};
use crate::maps::parse_map;
use crate::numeric::norm;
use crate::recovery::{
    counterexample_alpha_xn, counterexample_quadrature, recover_shift_minimal, recover_shift_regular_extension,
    recover_shift_regular_point, recover_shift_rotation, RecoveredShift,
};
use crate::report::{to_csv, to_json};
use crate::selftest::run_selftest;
use crate::shift::ShiftFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "flowshift", version, about = "Flows, shift maps along trajectories, and shift-function recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flow spec (JSON file).
    #[arg(long, global = true)]
    pub flow: Option<PathBuf>,

    /// Shift function, e.g. `sin:0.5,1+const:0.2`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,

    /// Map for `recover`, e.g. `scale:2` or `shift:sin:0.5,1`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub map: Option<String>,

    /// Box `xmin,xmax[,ymin,ymax,...]`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub domain: Option<String>,

    /// Nodes per axis, `n` or `n,m,...`.
    #[arg(long, global = true)]
    pub grid: Option<String>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tol: Option<f64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form matrix exponential against the series oracle.
    Exp {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// Orbit type at a point or over the grid.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
    },
    /// Tabulates `Sh(alpha)` on the grid.
    Shift,
    /// Diffeomorphism criterion for `Sh(alpha)`.
    CheckDiffeo,
    /// Convexity of the orientation classes along `s alpha + (1 - s) alpha1`.
    Convexity {
        #[arg(long, allow_hyphen_values = true)]
        alpha1: String,
        #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        s: String,
        /// Probe the orientation-reversing class.
        #[arg(long)]
        reversing: bool,
    },
    /// Structure of the kernel of the shift operator.
    Kernel {
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
    },
    /// Recovers the shift function of `--map`.
    Recover {
        /// Time-of-flight recovery at a single regular point.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Branch anchor for pure rotations (default: domain center).
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<String>,
    },
    /// Runs the invariant suites at reduced size.
    Selftest {
        /// Comma-separated suite names; empty runs nothing.
        #[arg(long)]
        suites: Option<String>,
        /// Replaces every suite tolerance.
        #[arg(long)]
        inject_tol: Option<f64>,
    },
}

/// A command's results.
struct Output {
    name: &'static str,
    json: String,
    csv: String,
    summary: String,
    /// Exit code for completed runs that report a failure.
    code: i32,
}

/// Exit code of an error: 1 for malformed input, 2 for analysis failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::Dimension { .. } => 1,
        _ => 2,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli).and_then(|out| emit(&cli, &out).map(|_| out.code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(cli: &Cli, out: &Output) -> Result<()> {
    let want_json = cli.format != Format::Csv;
    let want_csv = cli.format != Format::Json;
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            if want_json {
                let path = dir.join(format!("{}.json", out.name));
                fs::write(&path, &out.json).map_err(|e| io_error(&path, e))?;
            }
            if want_csv {
                let path = dir.join(format!("{}.csv", out.name));
                fs::write(&path, &out.csv).map_err(|e| io_error(&path, e))?;
            }
            println!("{}", out.summary);
        }
        None => {
            if want_json {
                print!("{}", out.json);
            }
            if want_csv {
                print!("{}", out.csv);
            }
            eprintln!("{}", out.summary);
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidSpec(format!("{}: {e}", path.display()))
}

fn flow_text(cli: &Cli) -> Result<String> {
    let path = cli.flow.as_ref().ok_or_else(|| Error::InvalidSpec("--flow is required".into()))?;
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn load_flow(cli: &Cli) -> Result<Flow> {
    Flow::from_json(&flow_text(cli)?)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidSpec(format!("bad number `{p}` in {what}")))
        })
        .collect()
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>> {
    let p = parse_list(text, "point")?;
    crate::error::check_dim(dim, p.len())?;
    Ok(p)
}

fn default_domain(flow: &Flow) -> Result<Domain> {
    match flow {
        Flow::PowerLine { radius, .. } => Domain::interval(-0.5 * radius, 0.5 * radius),
        _ => Domain::cube(flow.dim(), 1.0),
    }
}

fn build_grid(cli: &Cli, flow: &Flow) -> Result<Grid> {
    let dim = flow.dim();
    let domain = match &cli.domain {
        Some(text) => {
            let v = parse_list(text, "--domain")?;
            if v.len() != 2 * dim {
                return Err(Error::InvalidSpec(format!("--domain needs {} values for a {dim}-dimensional flow", 2 * dim)));
            }
            Domain::new(v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect())?
        }
        None => default_domain(flow)?,
    };
    let counts = match &cli.grid {
        Some(text) => {
            let c = text
                .split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|_| Error::InvalidSpec(format!("bad grid count `{p}`"))))
                .collect::<Result<Vec<_>>>()?;
            if c.len() == 1 {
                vec![c[0]; dim]
            } else {
                c
            }
        }
        None => vec![
            match dim {
                1 => 201,
                2 => 21,
                _ => 5,
            };
            dim
        ],
    };
    Grid::new(domain, counts)
}

fn tolerance(cli: &Cli, default: f64) -> Result<f64> {
    match cli.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(Error::InvalidSpec("--tol must be positive".into())),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn alpha_arg(text: Option<&String>, flag: &str, dim: usize) -> Result<ShiftFunction> {
    let text = text.ok_or_else(|| Error::InvalidSpec(format!("{flag} is required")))?;
    let alpha = ShiftFunction::parse(text)?;
    let need = alpha.expr().map_or(0, |e| e.min_dim());
    if need > dim {
        return Err(Error::Dimension { expected: dim, got: need });
    }
    Ok(alpha)
}

fn floats(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| fmt_float(*x)).collect()
}

fn coord_header(dim: usize, prefix: &str) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}{i}")).collect()
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    to_json(v)
}

fn execute(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Exp { t } => cmd_exp(cli, *t),
        Command::Classify { point, horizon } => cmd_classify(cli, point.as_deref(), *horizon),
        Command::Shift => cmd_shift(cli),
        Command::CheckDiffeo => cmd_check_diffeo(cli),
        Command::Convexity { alpha1, s, reversing } => cmd_convexity(cli, alpha1, s, *reversing),
        Command::Kernel { horizon } => cmd_kernel(cli, *horizon),
        Command::Recover { point, anchor } => cmd_recover(cli, point.as_deref(), anchor.as_deref()),
        Command::Selftest { suites, inject_tol } => cmd_selftest(suites.as_deref(), *inject_tol),
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn cmd_exp(cli: &Cli, t: f64) -> Result<Output> {
    // A bare block list is accepted as well as a linear flow.
    let text = flow_text(cli)?;
    let spec = match Flow::from_json(&text) {
        Ok(Flow::Linear(spec)) => spec,
        Ok(_) => return Err(Error::InvalidSpec("exp needs a linear flow".into())),
        Err(e) => JordanSpec::from_json(&text).map_err(|_| e)?,
    };
    if !t.is_finite() {
        return Err(Error::InvalidSpec("--t must be finite".into()));
    }
    let closed = jordan_exp(&spec, t);
    let oracle = matrix_exp_oracle(&build_jordan_matrix(&spec), t)?;
    let discrepancy = max_abs_diff(&closed, &oracle);
    let closed_rows = rows(&closed);
    let json = json(&json!({
        "t": t,
        "dim": spec.dim(),
        "closed_form": closed_rows,
        "oracle": rows(&oracle),
        "max_discrepancy": discrepancy,
    }))?;
    let csv = to_csv(&coord_header(spec.dim(), "c"), &closed_rows.iter().map(|r| floats(r)).collect::<Vec<_>>())?;
    let mut summary = format!("e^(A t) at t = {t}:\n");
    for r in &closed_rows {
        summary.push_str(&format!("  [{}]\n", r.iter().map(|v| format!("{v:>12.6}")).collect::<Vec<_>>().join(" ")));
    }
    summary.push_str(&format!("max |closed form - oracle| = {discrepancy:.3e}"));
    Ok(Output { name: "exp", json, csv, summary, code: 0 })
}

fn kind_fields(kind: &TrajectoryKind) -> (&'static str, Option<f64>) {
    match kind {
        TrajectoryKind::Fixed => ("fixed", None),
        TrajectoryKind::Periodic { theta } => ("periodic", Some(*theta)),
        TrajectoryKind::NonClosed => ("nonclosed", None),
    }
}

fn cmd_classify(cli: &Cli, point: Option<&str>, horizon: f64) -> Result<Output> {
    let flow = load_flow(cli)?;
    let tol = tolerance(cli, 1e-8)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSpec("--horizon must be positive".into()));
    }
    let points = match point {
        Some(p) => vec![parse_point(p, flow.dim())?],
        None => build_grid(cli, &flow)?.points(),
    };
    let mut records = Vec::with_capacity(points.len());
    let mut table = Vec::with_capacity(points.len());
    for p in &points {
        let info = classify_trajectory(&flow, p, horizon, tol)?;
        let (kind, theta) = kind_fields(&info.kind);
        records.push(json!({"point": p, "kind": kind, "theta": theta}));
        let mut row = floats(p);
        row.push(kind.to_string());
        row.push(theta.map(fmt_float).unwrap_or_default());
        table.push(row);
    }
    let mut header = coord_header(flow.dim(), "x");
    header.extend(["kind".to_string(), "theta".to_string()]);
    let summary = if records.len() == 1 {
        format!("trajectory: {}", table[0][flow.dim()..].join(" "))
    } else {
        let count = |k: &str| table.iter().filter(|r| r[flow.dim()] == k).count();
        format!(
            "{} points: {} fixed, {} periodic, {} non-closed (horizon {horizon})",
            records.len(),
            count("fixed"),
            count("periodic"),
            count("nonclosed")
        )
    };
    Ok(Output {
        name: "classify",
        json: json(&json!({"horizon": horizon, "tol": tol, "points": records}))?,
        csv: to_csv(&header, &table)?,
        summary,
        code: 0,
    })
}

fn cmd_shift(cli: &Cli) -> Result<Output> {
    let flow = load_flow(cli)?;
    let alpha = alpha_arg(cli.alpha.as_ref(), "--alpha", flow.dim())?;
    let grid = build_grid(cli, &flow)?;
    let map = shift_map(&flow, &alpha);
    let mut records = Vec::new();
    let mut table = Vec::new();
    for p in grid.points() {
        let a = alpha.try_value(&p)?;
        let img = map.apply(&p)?;
        let mut row = floats(&p);
        row.push(fmt_float(a));
        row.extend(floats(&img));
        table.push(row);
        records.push(json!({"point": p, "alpha": a, "image": img}));
    }
    let mut header = coord_header(flow.dim(), "x");
    header.push("alpha".into());
    header.extend(coord_header(flow.dim(), "h"));
    Ok(Output {
        name: "shift",
        json: json(&json!({"points": records}))?,
        csv: to_csv(&header, &table)?,
        summary: format!("Sh(alpha) evaluated at {} grid points", grid.len()),
        code: 0,
    })
}

fn cmd_check_diffeo(cli: &Cli) -> Result<Output> {
    let flow = load_flow(cli)?;
    let alpha = alpha_arg(cli.alpha.as_ref(), "--alpha", flow.dim())?;
    let grid = build_grid(cli, &flow)?;
    let report = diffeo_classify(&flow, &alpha, &grid, tolerance(cli, 1e-9)?)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    Ok(Output {
        name: "check-diffeo",
        json: json(&report)?,
        csv: String::from_utf8(buf).map_err(|e| Error::InvalidSpec(e.to_string()))?,
        summary: format!(
            "{:?}: d alpha(F) in [{:.6}, {:.6}] (properness assumed)",
            report.classification, report.min, report.max
        ),
        code: 0,
    })
}

fn cmd_convexity(cli: &Cli, alpha1: &str, s: &str, reversing: bool) -> Result<Output> {
    let flow = load_flow(cli)?;
    let a0 = alpha_arg(cli.alpha.as_ref(), "--alpha", flow.dim())?;
    let a1 = alpha_arg(Some(&alpha1.to_string()), "--alpha1", flow.dim())?;
    let s_values = parse_list(s, "--s")?;
    let grid = build_grid(cli, &flow)?;
    let opts = ConvexityOptions {
        target: if reversing { Orientation::Reversing } else { Orientation::Preserving },
        tol: tolerance(cli, 1e-9)?,
    };
    let report = convexity_probe(&flow, &a0, &a1, &s_values, &grid, &opts)?;
    let header: Vec<String> =
        ["s", "classification", "collisions", "linearity_error", "pass"].iter().map(|h| h.to_string()).collect();
    let (table, summary) = match &report {
        ConvexityReport::Probed { samples, failures } => (
            samples
                .iter()
                .map(|x| {
                    vec![
                        fmt_float(x.s),
                        serde_json::to_value(x.classification)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        x.collisions.to_string(),
                        fmt_float(x.linearity_error),
                        x.pass.to_string(),
                    ]
                })
                .collect(),
            format!("{} interpolants probed, {failures} failures", samples.len()),
        ),
        ConvexityReport::PreconditionFailed { alpha0, alpha1 } => {
            (Vec::new(), format!("precondition failed: alpha0 {alpha0:?}, alpha1 {alpha1:?}"))
        }
        ConvexityReport::EmptyClass { fixed_point } => {
            (Vec::new(), format!("reversing class is empty: fixed point at {fixed_point:?}"))
        }
    };
    Ok(Output { name: "convexity", json: json(&report)?, csv: to_csv(&header, &table)?, summary, code: 0 })
}

fn cmd_kernel(cli: &Cli, horizon: f64) -> Result<Output> {
    let flow = load_flow(cli)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidSpec("--horizon must be positive".into()));
    }
    let grid = build_grid(cli, &flow)?;
    let opts = KernelOptions { tol: tolerance(cli, 1e-9)?, ..KernelOptions::new(horizon) };
    let report = kernel_generator_with(&flow, &grid, &opts)?;
    let mut header = coord_header(flow.dim(), "x");
    header.extend(["kind".to_string(), "theta".to_string()]);
    let table: Vec<Vec<String>> = report
        .evidence
        .iter()
        .map(|e| {
            let (kind, theta) = kind_fields(&e.orbit);
            let mut row = floats(&e.point);
            row.push(kind.into());
            row.push(theta.map(fmt_float).unwrap_or_default());
            row
        })
        .collect();
    Ok(Output {
        name: "kernel",
        json: json(&report)?,
        csv: to_csv(&header, &table)?,
        summary: format!("kernel: {:?}", report.verdict),
        code: 0,
    })
}

fn recovered_output(rec: &RecoveredShift, how: &str) -> Result<Output> {
    let mut buf = Vec::new();
    rec.write_csv(&mut buf)?;
    Ok(Output {
        name: "recover",
        json: json(rec)?,
        csv: String::from_utf8(buf).map_err(|e| Error::InvalidSpec(e.to_string()))?,
        summary: format!("{how}: {} points, max round-trip residual {:.3e}", rec.samples.len(), rec.max_residual),
        code: 0,
    })
}

fn cmd_recover(cli: &Cli, point: Option<&str>, anchor: Option<&str>) -> Result<Output> {
    let flow = load_flow(cli)?;
    let text = cli.map.as_ref().ok_or_else(|| Error::InvalidSpec("--map is required".into()))?;
    let h: Arc<dyn PointMap> = parse_map(text, Some(&flow))?;
    if let Some(p) = point {
        let x = parse_point(p, flow.dim())?;
        let t = recover_shift_regular_point(&flow, h.as_ref(), &x)?;
        let mut row = floats(&x);
        row.push(fmt_float(t));
        let mut header = coord_header(flow.dim(), "x");
        header.push("alpha".into());
        return Ok(Output {
            name: "recover",
            json: json(&json!({"method": "time_of_flight", "point": x, "alpha": t}))?,
            csv: to_csv(&header, &[row])?,
            summary: format!("time of flight from {x:?}: {t}"),
            code: 0,
        });
    }
    let grid = build_grid(cli, &flow)?;
    match &flow {
        Flow::Linear(spec) if spec.blocks().len() == 1 => {
            if let [Block::Rotation { alpha, beta, p: 1 }] = spec.blocks() {
                let anchor = anchor.map(|a| parse_point(a, 2)).transpose()?;
                let rec = recover_shift_rotation(h, *alpha, *beta, &grid, anchor.as_deref())?;
                return recovered_output(&rec, "rotation quotient");
            }
            recovered_output(&recover_shift_minimal(spec, h, &grid)?, "closed-form quotient")
        }
        Flow::Extension(_) => recovered_output(&recover_shift_regular_extension(&flow, h, &grid)?, "factor lift"),
        Flow::PowerLine { n, .. } => {
            let mut records = Vec::new();
            let mut table = Vec::new();
            for p in grid.points() {
                let z = p[0];
                if z == 0.0 {
                    continue;
                }
                let hz = |u: f64| h.apply(&[u]).map(|v| v[0]).unwrap_or(f64::NAN);
                let a = counterexample_alpha_xn(hz, *n, z)?;
                let q = counterexample_quadrature(*n, z, hz(z));
                records.push(json!({"z": z, "alpha": a, "z_alpha": z * a, "quadrature": q}));
                table.push(floats(&[z, a, z * a, q]));
            }
            let header: Vec<String> = ["z", "alpha", "z_alpha", "quadrature"].iter().map(|s| s.to_string()).collect();
            Ok(Output {
                name: "recover",
                json: json(&json!({"method": "power_line_time", "n": n, "points": records}))?,
                csv: to_csv(&header, &table)?,
                summary: format!("time of flight under x' = x^{n} at {} points", table.len()),
                code: 0,
            })
        }
        _ => {
            let mut records = Vec::new();
            let mut table = Vec::new();
            for p in grid.points() {
                if norm(&flow.generator(&p)?) <= 1e-12 {
                    continue;
                }
                let t = recover_shift_regular_point(&flow, h.as_ref(), &p)?;
                let mut row = floats(&p);
                row.push(fmt_float(t));
                table.push(row);
                records.push(json!({"point": p, "alpha": t}));
            }
            let mut header = coord_header(flow.dim(), "x");
            header.push("alpha".into());
            Ok(Output {
                name: "recover",
                json: json(&json!({"method": "time_of_flight", "points": records}))?,
                csv: to_csv(&header, &table)?,
                summary: format!("time of flight at {} regular grid points", table.len()),
                code: 0,
            })
        }
    }
}

fn cmd_selftest(suites: Option<&str>, inject_tol: Option<f64>) -> Result<Output> {
    if let Some(t) = inject_tol {
        if !(t > 0.0) {
            return Err(Error::InvalidSpec("--inject-tol must be positive".into()));
        }
    }
    let filter: Option<Vec<String>> =
        suites.map(|s| s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect());
    let report = run_selftest(filter.as_deref(), inject_tol)?;
    let header: Vec<String> = ["suite", "passed", "worst", "tolerance"].iter().map(|s| s.to_string()).collect();
    let table: Vec<Vec<String>> = report
        .suites
        .iter()
        .map(|s| vec![s.name.clone(), s.passed.to_string(), fmt_float(s.worst), fmt_float(s.tolerance)])
        .collect();
    let mut summary = String::new();
    for s in &report.suites {
        summary.push_str(&format!(
            "{} {:<15} worst {:.3e} tol {:.1e} ({:.2} s) {}\n",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.worst,
            s.tolerance,
            s.seconds,
            s.detail
        ));
    }
    summary.push_str(if report.passed { "selftest passed" } else { "selftest FAILED" });
    Ok(Output {
        name: "selftest",
        json: json(&report)?,
        csv: to_csv(&header, &table)?,
        summary,
        code: if report.passed { 0 } else { 2 },
    })
}
