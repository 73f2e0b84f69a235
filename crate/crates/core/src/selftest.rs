//! Reduced-size invariant suites run by `flowshift selftest`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::calculus::{
    compose_shift_functions, injectivity_bound, invert_shift_function, kernel_generator, shift_map, KernelVerdict, PointMap,
};
use crate::diffeo::{convexity_probe, jacobian_det_identity_check, ConvexityOptions, ConvexityReport};
use crate::error::{Error, Result};
use crate::flow::{classify_trajectory, Flow};
use crate::grid::{Domain, Grid};
use crate::jordan::{build_jordan_matrix, jordan_exp, matrix_exp_oracle, max_abs_diff, min_closed_period, JordanSpec};
use crate::numeric::distance;
use crate::recovery::{counterexample_alpha_xn, recover_shift_minimal, time_of_flight_candidates};
use crate::sampling::{random_alpha, random_imaginary_spec, random_point, random_spec, rng};

pub const SUITES: [&str; 10] = [
    "exp",
    "semigroup",
    "inverse",
    "determinant",
    "convexity",
    "kernel",
    "recovery",
    "counterexample",
    "periods",
    "injectivity",
];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    /// Largest observed error.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    /// Wall time; left out of reports so they stay reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub passed: bool,
    pub suites: Vec<SuiteOutcome>,
}

/// Runs the named suites (all of them when `filter` is `None`). An empty
/// filter runs nothing and passes. `inject_tol` replaces every suite's
/// tolerance.
pub fn run_selftest(filter: Option<&[String]>, inject_tol: Option<f64>) -> Result<SelftestReport> {
    let names: Vec<String> = match filter {
        Some(f) => {
            for name in f {
                if !SUITES.contains(&name.as_str()) {
                    return Err(Error::InvalidSpec(format!("unknown suite `{name}`")));
                }
            }
            f.to_vec()
        }
        None => SUITES.iter().map(|s| s.to_string()).collect(),
    };
    let mut suites = Vec::new();
    for name in names {
        let start = Instant::now();
        let (tol, outcome) = run_suite(&name, inject_tol);
        let (worst, detail, ok) = match outcome {
            Ok((worst, detail, structural)) => (worst, detail, structural && worst <= tol),
            Err(e) => (f64::INFINITY, e.to_string(), false),
        };
        suites.push(SuiteOutcome {
            name,
            passed: ok,
            worst,
            tolerance: tol,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(SelftestReport { passed: suites.iter().all(|s| s.passed), suites })
}

/// `(worst error, detail, structural checks passed)`.
type Measured = Result<(f64, String, bool)>;

fn run_suite(name: &str, inject: Option<f64>) -> (f64, Measured) {
    let (default, outcome): (f64, fn() -> Measured) = match name {
        "exp" => (1e-9, suite_exp),
        "semigroup" => (1e-8, suite_semigroup),
        "inverse" => (1e-6, suite_inverse),
        "determinant" => (1e-4, suite_determinant),
        "convexity" => (1e-10, suite_convexity),
        "kernel" => (1e-8, suite_kernel),
        "recovery" => (1e-6, suite_recovery),
        "counterexample" => (1e-6, suite_counterexample),
        "periods" => (1e-6, suite_periods),
        _ => (1e-8, suite_injectivity),
    };
    (inject.unwrap_or(default), outcome())
}

fn suite_exp() -> Measured {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let spec = random_spec(&mut r, 12, 5.0);
        let t = r.random_range(-2.0..=2.0);
        let oracle = matrix_exp_oracle(&build_jordan_matrix(&spec), t)?;
        worst = worst.max(max_abs_diff(&jordan_exp(&spec, t), &oracle));
    }
    Ok((worst, "50 random specs against the series oracle".into(), true))
}

fn test_flows() -> Vec<(Flow, Grid)> {
    let line = Grid::uniform(Domain::interval(-1.0, 1.0).unwrap(), 50).unwrap();
    let square = Grid::uniform(Domain::cube(2, 1.0).unwrap(), 7).unwrap();
    vec![
        (Flow::Translation, line.clone()),
        (Flow::linear(JordanSpec::real(0.7, 1).unwrap()), line),
        (Flow::linear(JordanSpec::rotation(0.0, 1.0, 1).unwrap()), square),
    ]
}

fn suite_semigroup() -> Measured {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for (flow, grid) in test_flows() {
        for _ in 0..5 {
            let a = random_alpha(&mut r, flow.dim(), 1.0);
            let b = random_alpha(&mut r, flow.dim(), 1.0);
            let sigma = compose_shift_functions(&a, &b, &flow);
            let (fa, fb, fs) = (shift_map(&flow, &a), shift_map(&flow, &b), shift_map(&flow, &sigma));
            for p in grid.points() {
                worst = worst.max(distance(&fs.apply(&p)?, &fa.apply(&fb.apply(&p)?)?));
            }
        }
    }
    Ok((worst, "Sh(compose(a, b)) against Sh(a) o Sh(b)".into(), true))
}

fn suite_inverse() -> Measured {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for (flow, grid) in test_flows() {
        for _ in 0..3 {
            let g = random_alpha(&mut r, flow.dim(), 0.3);
            let sigma = invert_shift_function(&g, &flow, &grid)?;
            let (fg, fs) = (shift_map(&flow, &g), shift_map(&flow, &sigma));
            for p in grid.points() {
                worst = worst.max(distance(&fs.apply(&fg.apply(&p)?)?, &p));
            }
        }
    }
    Ok((worst, "Sh(invert(g)) o Sh(g) against the identity".into(), true))
}

fn suite_determinant() -> Measured {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for (flow, _) in test_flows() {
        for _ in 0..5 {
            let a = random_alpha(&mut r, flow.dim(), 1.0);
            let z = random_point(&mut r, flow.dim(), 1.0);
            let rep = jacobian_det_identity_check(&flow, &a, &z, 1e-4)?;
            worst = worst.max((rep.lhs - rep.rhs).abs());
        }
    }
    Ok((worst, "det D Sh(a)(z) against 1 + da(F(z))".into(), true))
}

fn suite_convexity() -> Measured {
    let mut r = rng(5);
    let grid = Grid::uniform(Domain::interval(-2.0, 2.0).unwrap(), 81).unwrap();
    let s: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let mut worst: f64 = 0.0;
    let mut all_pass = true;
    for _ in 0..5 {
        let a0 = random_alpha(&mut r, 1, 0.5);
        let a1 = random_alpha(&mut r, 1, 0.5);
        match convexity_probe(&Flow::Translation, &a0, &a1, &s, &grid, &ConvexityOptions::default())? {
            ConvexityReport::Probed { samples, failures } => {
                all_pass &= failures == 0;
                worst = samples.iter().map(|x| x.linearity_error).fold(worst, f64::max);
            }
            _ => all_pass = false,
        }
    }
    Ok((worst, "interpolants preserve orientation and injectivity".into(), all_pass))
}

fn suite_kernel() -> Measured {
    let square = Grid::uniform(Domain::cube(2, 1.0).unwrap(), 6).unwrap();
    let rot = kernel_generator(&Flow::linear(JordanSpec::rotation(0.0, 1.0, 1).unwrap()), &square, 20.0)?;
    let line = Grid::uniform(Domain::interval(-1.0, 1.0).unwrap(), 9).unwrap();
    let tr = kernel_generator(&Flow::Translation, &line, 20.0)?;
    let trivial = matches!(tr.verdict, KernelVerdict::Trivial { .. });
    match rot.verdict {
        KernelVerdict::InfiniteCyclic { nu } => {
            let worst = (nu - 2.0 * PI).abs().max(rot.generator_residual.unwrap_or(f64::INFINITY));
            Ok((worst, "rotation generator 2 pi, translation trivial".into(), trivial))
        }
        v => Ok((f64::INFINITY, format!("rotation verdict {v:?}"), false)),
    }
}

fn suite_recovery() -> Measured {
    let mut r = rng(6);
    let grid = Grid::uniform(Domain::cube(2, 1.0).unwrap(), 9).unwrap();
    let line = Grid::uniform(Domain::interval(-1.0, 1.0).unwrap(), 21).unwrap();
    let cases = [
        (JordanSpec::real(0.8, 1).unwrap(), &line, None),
        (JordanSpec::rotation(0.5, 1.0, 1).unwrap(), &grid, None),
        (JordanSpec::rotation(0.0, 1.0, 1).unwrap(), &grid, Some(2.0 * PI)),
        (JordanSpec::real(0.0, 2).unwrap(), &grid, None),
    ];
    let mut worst: f64 = 0.0;
    for (spec, g, period) in cases {
        let flow = Flow::linear(spec.clone());
        for _ in 0..3 {
            let a = random_alpha(&mut r, spec.dim(), 1.0);
            let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &a));
            let rec = recover_shift_minimal(&spec, h, g)?;
            for smp in &rec.samples {
                let mut err = smp.alpha - a.value(&smp.point);
                if let Some(p) = period {
                    err -= p * (err / p).round();
                }
                worst = worst.max(err.abs());
            }
        }
    }
    Ok((worst, "closed-form recoveries of random shifts".into(), true))
}

fn suite_counterexample() -> Measured {
    let mut worst: f64 = 0.0;
    for z in [1e-4, -3e-4, 1e-3, -0.01, 0.05, 0.1] {
        let a = counterexample_alpha_xn(|u| 2.0 * u, 2, z)?;
        worst = worst.max((z * a - 0.5).abs());
        let b = counterexample_alpha_xn(|u| u + u * u, 2, z)?;
        worst = worst.max((b - 1.0 / (1.0 + z)).abs());
    }
    Ok((worst, "x' = x^2 time of flight".into(), true))
}

fn suite_periods() -> Measured {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let spec = random_imaginary_spec(&mut r, 2);
        let theta = min_closed_period(&spec).unwrap_or(f64::NAN);
        let block = crate::jordan::min_period_block(&spec).unwrap_or(0);
        let offset = spec.offsets()[block];
        let width = spec.blocks()[block].dim();
        let mut x = vec![0.0; spec.dim()];
        x[offset + width - 2] = 0.7;
        let info = classify_trajectory(&Flow::linear(spec), &x, 1.5 * theta, 1e-9)?;
        let got = info.period().unwrap_or(f64::INFINITY);
        worst = worst.max((got - theta).abs() / theta);
    }
    Ok((worst, "min closed period against return times".into(), true))
}

fn suite_injectivity() -> Measured {
    let mut r = rng(9);
    let flow = Flow::linear(JordanSpec::rotation(0.0, 1.0, 1).unwrap());
    let mut worst: f64 = 0.0;
    let mut unique = true;
    for _ in 0..50 {
        let x = random_point(&mut r, 2, 1.0);
        let delta = injectivity_bound(&flow, &x, 0.05)?;
        let t = r.random_range(-delta..=delta);
        let target = flow.evaluate(&x, t)?;
        let hits = time_of_flight_candidates(&flow, &x, &target, delta)?;
        unique &= hits.len() == 1;
        for h in hits {
            worst = worst.max(distance(&flow.evaluate(&x, h)?, &target));
        }
    }
    Ok((worst, "time of flight is unique within the bound".into(), unique))
}
