//! End-to-end acceptance run: every criterion at full size, one PASS/FAIL
//! line each. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use flowshift::calculus::{
    compose_shift_functions, injectivity_bound, invert_shift_function, is_multiple_of, kernel_generator, shift_map,
    KernelReport, KernelVerdict, PointMap,
};
use flowshift::diffeo::{convexity_probe, jacobian_det_identity_check, ConvexityOptions, ConvexityReport};
use flowshift::error::Result;
use flowshift::flow::{classify_trajectory, Coupler, Flow, TrajectoryKind};
use flowshift::grid::{Domain, Grid};
use flowshift::jordan::{
    build_jordan_matrix, jordan_exp, matrix_exp_oracle, max_abs_diff, min_closed_period, min_period_block, Block, JordanSpec,
};
use flowshift::numeric::{central_difference, distance};
use flowshift::recovery::{
    counterexample_alpha_xn, counterexample_quadrature, recover_shift_minimal, recover_shift_regular_extension,
    time_of_flight_candidates, RecoveredShift,
};
use flowshift::sampling::{random_alpha, random_imaginary_spec, random_point, random_spec, rng, signed};
use flowshift::shift::ShiftFunction;

/// Outcome of one criterion: pass flag and a one-line measurement.
type Verdict = Result<(bool, String)>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "1 matrix exponential closed forms", budget: Duration::from_secs(5), run: exp_closed_forms },
        Criterion { name: "2 semigroup and inverse laws", budget: Duration::from_secs(10), run: semigroup_inverse },
        Criterion { name: "3 determinant identity", budget: Duration::from_secs(5), run: determinant_identity },
        Criterion { name: "4 convexity of the preserving class", budget: Duration::from_secs(10), run: convexity },
        Criterion { name: "5 kernel structure", budget: Duration::from_secs(10), run: kernel_structure },
        Criterion { name: "6 recovery round trips", budget: Duration::from_secs(20), run: recovery_round_trips },
        Criterion { name: "7 x' = x^2 counterexample", budget: Duration::from_secs(2), run: counterexample },
        Criterion { name: "8 period analysis", budget: Duration::from_secs(10), run: periods },
        Criterion { name: "9 injectivity bound", budget: Duration::from_secs(5), run: injectivity },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= c.budget;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:<38} {:>7.3} s (budget {} s{}) {}",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { ", over budget" },
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn line(n: usize) -> Grid {
    Grid::uniform(Domain::interval(-1.0, 1.0).unwrap(), n).unwrap()
}

fn square(n: usize) -> Grid {
    Grid::uniform(Domain::cube(2, 1.0).unwrap(), n).unwrap()
}

fn exp_closed_forms() -> Verdict {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let spec = random_spec(&mut r, 12, 5.0);
        let t = r.random_range(-2.0..=2.0);
        let oracle = matrix_exp_oracle(&build_jordan_matrix(&spec), t)?;
        worst = worst.max(max_abs_diff(&jordan_exp(&spec, t), &oracle));
    }
    Ok((worst <= 1e-9, format!("500 specs, worst entry error {worst:.2e} (tol 1e-9)")))
}

fn semigroup_inverse() -> Verdict {
    let plane = Grid::new(Domain::cube(2, 1.0)?, vec![20, 10])?;
    let flows = [
        (Flow::Translation, line(200)),
        (Flow::linear(JordanSpec::real(0.7, 1)?), line(200)),
        (Flow::linear(JordanSpec::rotation(0.0, 1.0, 1)?), plane.clone()),
        (Flow::linear(JordanSpec::rotation(-0.3, 1.5, 1)?), plane),
    ];
    let mut r = rng(102);
    let (mut compose_err, mut inverse_err): (f64, f64) = (0.0, 0.0);
    for (flow, grid) in &flows {
        let points = grid.points();
        for _ in 0..100 {
            let a = random_alpha(&mut r, flow.dim(), 1.0);
            let b = random_alpha(&mut r, flow.dim(), 1.0);
            let sigma = compose_shift_functions(&a, &b, flow);
            let (fa, fb, fs) = (shift_map(flow, &a), shift_map(flow, &b), shift_map(flow, &sigma));
            for p in &points {
                compose_err = compose_err.max(distance(&fs.apply(p)?, &fa.apply(&fb.apply(p)?)?));
            }
            let g = random_alpha(&mut r, flow.dim(), 0.3);
            let inv = invert_shift_function(&g, flow, grid)?;
            let (fg, fi) = (shift_map(flow, &g), shift_map(flow, &inv));
            for p in &points {
                inverse_err = inverse_err.max(distance(&fi.apply(&fg.apply(p)?)?, p));
            }
        }
    }
    Ok((
        compose_err <= 1e-6 && inverse_err <= 1e-6,
        format!("4 flows x 100 pairs, composition {compose_err:.2e}, inverse {inverse_err:.2e} (tol 1e-6)"),
    ))
}

fn determinant_identity() -> Verdict {
    let flows = [
        Flow::Translation,
        Flow::linear(JordanSpec::real(0.7, 1)?),
        Flow::linear(JordanSpec::rotation(0.0, 1.0, 1)?),
        Flow::linear(JordanSpec::rotation(0.4, -2.0, 1)?),
        Flow::linear(JordanSpec::real(0.0, 2)?),
        Flow::linear(JordanSpec::new(vec![Block::Real { lambda: -0.5, p: 1 }, Block::Rotation { alpha: 0.0, beta: 1.0, p: 1 }])?),
    ];
    let mut r = rng(103);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let flow = &flows[k % flows.len()];
        let z = random_point(&mut r, flow.dim(), 1.0);
        let raw = random_alpha(&mut r, flow.dim(), 1.0);
        let alpha = raw.offset(-raw.value(&z));
        let rep = jacobian_det_identity_check(flow, &alpha, &z, 1e-4)?;
        worst = worst.max((rep.lhs - rep.rhs).abs());
    }
    // On the line, Sh(alpha)(x) = x + alpha(x), so h' = 1 + alpha'.
    let mut line_err: f64 = 0.0;
    for _ in 0..20 {
        let alpha = random_alpha(&mut r, 1, 1.0);
        let h = shift_map(&Flow::Translation, &alpha);
        let x = r.random_range(-1.0..=1.0);
        let dh = central_difference(|u| h.apply(&[u]).map(|v| v[0]).unwrap_or(f64::NAN), x, 1e-5);
        line_err = line_err.max((dh - 1.0 - alpha.gradient(&[x]).unwrap()[0]).abs());
    }
    Ok((
        worst <= 1e-4 && line_err <= 1e-8,
        format!("100 cases, worst {worst:.2e} (tol 1e-4); line h' error {line_err:.2e} (tol 1e-8)"),
    ))
}

fn convexity() -> Verdict {
    let s: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    // Gradient bounds keep d alpha(F) > -1 on these domains.
    let cases = [
        (Flow::Translation, Grid::uniform(Domain::interval(-2.0, 2.0)?, 201)?, 0.5),
        (Flow::linear(JordanSpec::rotation(0.0, 1.0, 1)?), square(21), 0.3),
    ];
    let mut r = rng(104);
    let (mut failures, mut worst_linearity) = (0usize, 0.0f64);
    for (flow, grid, scale) in &cases {
        for _ in 0..25 {
            let a0 = random_alpha(&mut r, flow.dim(), *scale);
            let a1 = random_alpha(&mut r, flow.dim(), *scale);
            match convexity_probe(flow, &a0, &a1, &s, grid, &ConvexityOptions::default())? {
                ConvexityReport::Probed { samples, failures: f } => {
                    failures += f;
                    worst_linearity = samples.iter().map(|x| x.linearity_error).fold(worst_linearity, f64::max);
                }
                other => return Ok((false, format!("pair outside the class: {other:?}"))),
            }
        }
    }
    Ok((
        failures == 0 && worst_linearity <= 1e-10,
        format!("50 pairs x 9 interpolants, {failures} failures, linearity {worst_linearity:.2e} (tol 1e-10)"),
    ))
}

/// Every sampled period divides the generator to 1e-4 relative.
fn periods_divide(report: &KernelReport, nu: f64) -> bool {
    report.evidence.iter().all(|e| match e.orbit {
        TrajectoryKind::Periodic { theta } => is_multiple_of(nu, theta, 1e-4),
        _ => true,
    })
}

fn kernel_structure() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    let tr = kernel_generator(&Flow::Translation, &line(21), 20.0)?;
    let pl = kernel_generator(&Flow::power_line(2, 1.0)?, &Grid::uniform(Domain::interval(-0.5, 0.5)?, 21)?, 20.0)?;
    for (name, rep) in [("translation", &tr), ("powerline", &pl)] {
        let trivial = matches!(rep.verdict, KernelVerdict::Trivial { .. });
        ok &= trivial;
        if !trivial {
            notes.push(format!("{name}: {:?}", rep.verdict));
        }
    }
    let rot = kernel_generator(&Flow::linear(JordanSpec::rotation(0.0, 1.0, 1)?), &square(9), 20.0)?;
    let two = JordanSpec::new(vec![
        Block::Rotation { alpha: 0.0, beta: 1.0, p: 1 },
        Block::Rotation { alpha: 0.0, beta: 2.0, p: 1 },
    ])?;
    let box4 = Grid::new(Domain::cube(4, 1.0)?, vec![3, 5, 3, 5])?;
    let both = kernel_generator(&Flow::linear(two), &box4, 20.0)?;
    let mut worst: f64 = 0.0;
    for (name, rep) in [("rotation", &rot), ("two-block", &both)] {
        match rep.verdict {
            KernelVerdict::InfiniteCyclic { nu } => {
                let residual = rep.generator_residual.unwrap_or(f64::INFINITY);
                worst = worst.max(residual);
                let good = (nu - 2.0 * PI).abs() <= 1e-6 && residual <= 1e-8 && periods_divide(rep, nu);
                ok &= good;
                notes.push(format!("{name} nu {nu:.12}"));
            }
            ref v => {
                ok = false;
                notes.push(format!("{name}: {v:?}"));
            }
        }
    }
    notes.push(format!("|Sh(nu) - id| {worst:.2e} (tol 1e-8)"));
    Ok((ok, notes.join(", ")))
}

fn max_error(rec: &RecoveredShift, alpha: &ShiftFunction, period: Option<f64>) -> f64 {
    rec.samples
        .iter()
        .map(|s| {
            let mut e = s.alpha - alpha.value(&s.point);
            if let Some(p) = period {
                e -= p * (e / p).round();
            }
            e.abs()
        })
        .fold(0.0, f64::max)
}

fn recovery_round_trips() -> Verdict {
    let mut r = rng(106);
    let mut notes = Vec::new();
    let mut ok = true;
    let linear = [
        ("real", JordanSpec::real(0.8, 1)?, line(21), None),
        ("spiral", JordanSpec::rotation(0.5, 1.0, 1)?, square(9), None),
        ("rotation", JordanSpec::rotation(0.0, 1.0, 1)?, square(9), Some(2.0 * PI)),
        ("nilpotent", JordanSpec::real(0.0, 2)?, square(9), None),
    ];
    for (name, spec, grid, period) in &linear {
        let flow = Flow::linear(spec.clone());
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let a = random_alpha(&mut r, spec.dim(), 1.0);
            let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &a));
            worst = worst.max(max_error(&recover_shift_minimal(spec, h, grid)?, &a, *period));
        }
        ok &= worst <= 1e-6;
        notes.push(format!("{name} {worst:.1e}"));
    }
    let ext = Flow::extension(JordanSpec::real(0.8, 1)?, Coupler::Scaled { mu: 0.5, fiber_dim: 1 })?;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_alpha(&mut r, 2, 1.0);
        let h: Arc<dyn PointMap> = Arc::new(shift_map(&ext, &a));
        worst = worst.max(max_error(&recover_shift_regular_extension(&ext, h, &square(9))?, &a, None));
    }
    ok &= worst <= 1e-6;
    notes.push(format!("extension {worst:.1e}"));
    Ok((ok, format!("100 shifts each, max error: {} (tol 1e-6)", notes.join(", "))))
}

fn counterexample() -> Verdict {
    let mut zs = Vec::new();
    for k in 0..=60 {
        let z = 10f64.powf(-4.0 + 3.0 * k as f64 / 60.0);
        zs.push(z);
        zs.push(-z);
    }
    let (mut diverging, mut smooth, mut quad): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &z in &zs {
        let a = counterexample_alpha_xn(|u| 2.0 * u, 2, z)?;
        diverging = diverging.max((z * a - 0.5).abs());
        quad = quad.max((a - counterexample_quadrature(2, z, 2.0 * z)).abs());
        let b = counterexample_alpha_xn(|u| u + u * u, 2, z)?;
        smooth = smooth.max((b - 1.0 / (1.0 + z)).abs());
        quad = quad.max((b - counterexample_quadrature(2, z, z + z * z)).abs());
    }
    Ok((
        diverging <= 1e-6 && smooth <= 1e-8 && quad <= 1e-8,
        format!("|z a - 1/2| {diverging:.1e} (tol 1e-6), |a - 1/(1+z)| {smooth:.1e} (tol 1e-8), quadrature {quad:.1e} (tol 1e-8)"),
    ))
}

/// A point whose orbit realizes the least period: nonzero in the last
/// coordinate pair of the realizing block.
fn realizing_point(spec: &JordanSpec, block: usize) -> Vec<f64> {
    let offset = spec.offsets()[block];
    let width = spec.blocks()[block].dim();
    let mut x = vec![0.0; spec.dim()];
    x[offset + width - 2] = 0.7;
    x[offset + width - 1] = -0.2;
    x
}

fn periods() -> Verdict {
    let mut r = rng(108);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let spec = random_imaginary_spec(&mut r, 3);
        let theta = min_closed_period(&spec).expect("pure rotation present");
        let x = realizing_point(&spec, min_period_block(&spec).expect("pure rotation present"));
        let info = classify_trajectory(&Flow::linear(spec), &x, 1.5 * theta, 1e-9)?;
        worst = worst.max((info.period().unwrap_or(f64::INFINITY) - theta).abs() / theta);
    }
    let mut spirals_ok = true;
    for _ in 0..20 {
        let beta = signed(&mut r, 0.3, 4.0);
        let spec = JordanSpec::rotation(signed(&mut r, 0.05, 0.5), beta, r.random_range(1..=2))?;
        let x = realizing_point(&spec, 0);
        let info = classify_trajectory(&Flow::linear(spec.clone()), &x, 10.0 * 2.0 * PI / beta.abs(), 1e-9)?;
        spirals_ok &= min_closed_period(&spec).is_none() && info.kind == TrajectoryKind::NonClosed;
    }
    Ok((
        worst <= 1e-6 && spirals_ok,
        format!("20 rotation specs, relative period error {worst:.1e} (tol 1e-6); 20 spirals non-closed: {spirals_ok}"),
    ))
}

fn injectivity() -> Verdict {
    let flow = Flow::linear(JordanSpec::rotation(0.0, 1.0, 1)?);
    let theta = 2.0 * PI;
    let mut r = rng(109);
    let (mut unique, mut widened_multiple) = (0usize, 0usize);
    for _ in 0..1000 {
        // The origin is fixed; orbits through it have no time of flight.
        let x = loop {
            let x = random_point(&mut r, 2, 1.0);
            if x.iter().any(|v| v.abs() >= 1e-3) {
                break x;
            }
        };
        let delta = injectivity_bound(&flow, &x, 0.05)?;
        let t = r.random_range(-delta..=delta);
        let target = flow.evaluate(&x, t)?;
        if time_of_flight_candidates(&flow, &x, &target, delta)?.len() == 1 {
            unique += 1;
        }
        if time_of_flight_candidates(&flow, &x, &target, 1.1 * theta)?.len() > 1 {
            widened_multiple += 1;
        }
    }
    Ok((
        unique == 1000 && widened_multiple >= 1,
        format!("{unique}/1000 unique within delta(x); {widened_multiple} trials with several roots at 1.1 theta"),
    ))
}
