//! Log-log least squares and the friction rules of the ν sweeps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Friction coefficient as a constant or as `α = ν^p` (`"nu_pow:p"`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    Constant(f64),
    NuPow(f64),
}

impl AlphaRule {
    pub fn alpha(&self, nu: f64) -> f64 {
        match *self {
            AlphaRule::Constant(a) => a,
            AlphaRule::NuPow(p) => nu.powf(p),
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("alpha must be a nonnegative number or \"nu_pow:p\", got {s:?}"));
        if let Some(p) = s.strip_prefix("nu_pow:") {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            return if p.is_finite() { Ok(AlphaRule::NuPow(p)) } else { Err(bad()) };
        }
        match s.parse::<f64>() {
            Ok(a) if a >= 0.0 && a.is_finite() => Ok(AlphaRule::Constant(a)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::Constant(a) => write!(f, "{a:?}"),
            AlphaRule::NuPow(p) => write!(f, "nu_pow:{p:?}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Number(f64),
    Rule(String),
}

impl Serialize for AlphaRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaRule::Constant(a) => AlphaRepr::Number(*a),
            AlphaRule::NuPow(_) => AlphaRepr::Rule(self.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlphaRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match AlphaRepr::deserialize(d)? {
            AlphaRepr::Number(a) => format!("{a:?}").parse(),
            AlphaRepr::Rule(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `log y = log C + s log x` fitted by least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Standard error of the slope (0 with two points).
    pub stderr: f64,
    pub constant: f64,
    /// Residual standard deviation of the fit in log space.
    pub residual_std: f64,
    /// The coarsest point was excluded by the pre-asymptotic rule.
    pub dropped_coarsest: bool,
    pub points_used: usize,
}

fn logs(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!("slope fit needs matching series of at least 2 points, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("slope fit needs positive finite values".into()));
    }
    Ok((x.iter().map(|v| v.ln()).collect(), y.iter().map(|v| v.ln()).collect()))
}

/// Plain least squares on all points.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let (lx, ly) = logs(x, y)?;
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope fit needs distinct abscissae".into()));
    }
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let residual_std = if lx.len() > 2 { (ssr / (n - 2.0)).sqrt() } else { 0.0 };
    Ok(SlopeFit {
        slope,
        stderr: residual_std / sxx.sqrt(),
        constant: icpt.exp(),
        residual_std,
        dropped_coarsest: false,
        points_used: lx.len(),
    })
}

/// Fit with the pre-asymptotic rule: the first (coarsest) point is dropped
/// when its residual from the fit of the remaining points exceeds three
/// residual standard deviations of that fit. Needs four points.
pub fn fit_rate(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    let all = fit_loglog(x, y)?;
    if x.len() < 4 {
        return Ok(all);
    }
    let mut rest = fit_loglog(&x[1..], &y[1..])?;
    let res0 = y[0].ln() - rest.constant.ln() - rest.slope * x[0].ln();
    if res0.abs() > 3.0 * rest.residual_std {
        rest.dropped_coarsest = true;
        return Ok(rest);
    }
    Ok(all)
}

/// Common slope of several series and the constant of each under it.
pub fn pooled_constants(series: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, Vec<f64>)> {
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut means = Vec::new();
    for (x, y) in series {
        let (lx, ly) = logs(x, y)?;
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        sxy += lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>();
        sxx += lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        means.push((mx, my));
    }
    if sxx == 0.0 {
        return Err(Error::InvalidInput("pooled fit needs distinct abscissae".into()));
    }
    let s = sxy / sxx;
    Ok((s, means.iter().map(|(mx, my)| (my - s * mx).exp()).collect()))
}

/// `true` when no value increases by more than `tol` (relative) over its
/// predecessor.
pub fn nonincreasing_within(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
