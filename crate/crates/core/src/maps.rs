//! Named closed-form maps for the command line.
//!
//! ```text
//! identity               x -> x
//! scale:c                x -> c x
//! poly:c1,...,c6         x -> c1 x + ... + c6 x^6, coordinatewise
//! xexp:a                 x -> x e^{a x}, coordinatewise
//! rotate:theta           planar rotation by theta
//! shear:c                (x, y) -> (x + c y, y)
//! shearsin:c             (x, y) -> (x + c y sin x, y)
//! shift:<function>       Sh(alpha) along the given flow, e.g. shift:sin:0.5,1
//! ```

use std::sync::Arc;

use crate::calculus::{shift_map, PointMap};
use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::shift::ShiftFunction;

fn params(name: &str, text: &str, lo: usize, hi: usize) -> Result<Vec<f64>> {
    let nums: Vec<f64> = if text.trim().is_empty() {
        Vec::new()
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad number `{p}` in map `{name}`"))))
            .collect::<Result<_>>()?
    };
    if nums.len() < lo || nums.len() > hi || nums.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("map `{name}` takes {lo}..={hi} finite parameters")));
    }
    Ok(nums)
}

fn planar(x: &[f64]) -> Result<()> {
    crate::error::check_dim(2, x.len())
}

/// Parses a map spec; `shift:` maps need the flow they shift along.
pub fn parse_map(text: &str, flow: Option<&Flow>) -> Result<Arc<dyn PointMap>> {
    let text = text.trim();
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    if name == "shift" {
        let flow = flow.ok_or_else(|| Error::InvalidSpec("map `shift` needs --flow".into()))?;
        let alpha = ShiftFunction::parse(rest)?;
        return Ok(Arc::new(shift_map(flow, &alpha)));
    }
    let map: Arc<dyn PointMap> = match name {
        "identity" => {
            params(name, rest, 0, 0)?;
            Arc::new(|x: &[f64]| Ok(x.to_vec()))
        }
        "scale" => {
            let c = params(name, rest, 1, 1)?[0];
            Arc::new(move |x: &[f64]| Ok(x.iter().map(|v| c * v).collect()))
        }
        "poly" => {
            let c = params(name, rest, 1, 6)?;
            Arc::new(move |x: &[f64]| {
                Ok(x.iter().map(|&v| c.iter().rev().fold(0.0, |acc, a| (acc + a) * v)).collect())
            })
        }
        "xexp" => {
            let a = params(name, rest, 1, 1)?[0];
            Arc::new(move |x: &[f64]| Ok(x.iter().map(|v| v * (a * v).exp()).collect()))
        }
        "rotate" => {
            let th = params(name, rest, 1, 1)?[0];
            let (c, s) = (th.cos(), th.sin());
            Arc::new(move |x: &[f64]| {
                planar(x)?;
                Ok(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
            })
        }
        "shear" => {
            let c = params(name, rest, 1, 1)?[0];
            Arc::new(move |x: &[f64]| {
                planar(x)?;
                Ok(vec![x[0] + c * x[1], x[1]])
            })
        }
        "shearsin" => {
            let c = params(name, rest, 1, 1)?[0];
            Arc::new(move |x: &[f64]| {
                planar(x)?;
                Ok(vec![x[0] + c * x[1] * x[0].sin(), x[1]])
            })
        }
        other => return Err(Error::InvalidSpec(format!("unknown map `{other}`"))),
    };
    Ok(map)
}
