//! Initial data presets.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::forms::{interpolate, NodalFunction};
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `c cos(πx/2)`
    Cosine(f64),
    /// `c (1 - x²)`
    Parabola(f64),
    /// `c (exp(-x²) - exp(-1))`
    Gauss(f64),
    /// Tabulated `(x, u)` pairs, linearly interpolated. Abscissae must be
    /// strictly increasing and cover `[0, 1]`.
    Table { x: Vec<f64>, u: Vec<f64> },
}

impl InitialData {
    pub fn table(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if x.len() != u.len() || x.len() < 2 {
            return invalid("tabulated initial data needs matching x/u arrays of length >= 2");
        }
        if x[0] > 0.0 || *x.last().unwrap() < 1.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("tabulated abscissae must be increasing and cover [0, 1]");
        }
        Ok(Self::Table { x, u })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Cosine(c) => c * (FRAC_PI_2 * x).cos(),
            Self::Parabola(c) => c * (1.0 - x * x),
            Self::Gauss(c) => c * ((-x * x).exp() - (-1.0f64).exp()),
            Self::Table { x: xs, u } => {
                let j = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
                let s = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                u[j - 1] * (1.0 - s) + u[j] * s
            }
        }
    }

    /// `Π_h u⁰` on `mesh`.
    pub fn interpolate(&self, mesh: &Arc<Mesh>) -> Result<NodalFunction> {
        interpolate(|x| self.eval(x), mesh)
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cosine(c) => write!(f, "cosine({c})"),
            Self::Parabola(c) => write!(f, "parabola({c})"),
            Self::Gauss(c) => write!(f, "gauss({c})"),
            Self::Table { x, .. } => write!(f, "table({} points)", x.len()),
        }
    }
}

impl FromStr for InitialData {
    type Err = Error;

    /// Parses `cosine(c)`, `parabola(c)` or `gauss(c)`; a bare name means `c = 1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, coef) = match s.find('(') {
            Some(open) => {
                let Some(inner) = s[open + 1..].strip_suffix(')') else {
                    return invalid(format!("malformed initial data `{s}`"));
                };
                let c: f64 = inner.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("bad coefficient in initial data `{s}`"))
                })?;
                (s[..open].trim(), c)
            }
            None => (s, 1.0),
        };
        if !coef.is_finite() {
            return invalid(format!("non-finite coefficient in `{s}`"));
        }
        match name {
            "cosine" => Ok(Self::Cosine(coef)),
            "parabola" => Ok(Self::Parabola(coef)),
            "gauss" => Ok(Self::Gauss(coef)),
            _ => invalid(format!("unknown initial data preset `{name}`")),
        }
    }
}
