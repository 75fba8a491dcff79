//! Partitions of the unit interval `[0, 1]`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Result};

/// A node partition `0 = x_0 < x_1 < ... < x_m = 1` together with its
/// element widths and quasi-uniformity ratio `beta = h / h_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    widths: Vec<f64>,
    h: f64,
    h_min: f64,
    beta: f64,
}

impl Mesh {
    /// Uniform mesh `x_j = j / m`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("uniform mesh needs m >= 2, got {m}"));
        }
        let nodes = (0..=m).map(|j| j as f64 / m as f64).collect();
        Self::from_nodes(nodes)
    }

    /// Sine-graded mesh `x_i = sin(i pi / (2m))`, clustering nodes near `x = 1`.
    pub fn sine_graded(m: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("sine-graded mesh needs m >= 2, got {m}"));
        }
        let mut nodes: Vec<f64> = (0..=m)
            .map(|i| (i as f64 * FRAC_PI_2 / m as f64).sin())
            .collect();
        nodes[0] = 0.0;
        nodes[m] = 1.0;
        Self::from_nodes(nodes)
    }

    /// Builds a mesh from explicit nodes. The first node must be exactly 0,
    /// the last exactly 1, and the sequence strictly increasing.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("a mesh needs at least two nodes");
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return invalid("mesh nodes must start at 0 and end at 1");
        }
        let widths: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(j) = widths.iter().position(|&w| !(w > 0.0)) {
            return invalid(format!(
                "mesh nodes must be strictly increasing (violated at element {})",
                j + 1
            ));
        }
        let h = widths.iter().cloned().fold(f64::MIN, f64::max);
        let h_min = widths.iter().cloned().fold(f64::MAX, f64::min);
        Ok(Self {
            nodes,
            widths,
            h,
            h_min,
            beta: h / h_min,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Element widths `h_j = x_j - x_{j-1}`, `j = 1..=m`, stored at index `j - 1`.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Number of elements `m`.
    pub fn num_elements(&self) -> usize {
        self.widths.len()
    }

    /// Largest element width.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Named mesh families used in refinement sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFamily {
    Uniform,
    Sine,
}

impl MeshFamily {
    pub fn build(self, m: usize) -> Result<Mesh> {
        match self {
            Self::Uniform => Mesh::uniform(m),
            Self::Sine => Mesh::sine_graded(m),
        }
    }
}

impl std::str::FromStr for MeshFamily {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "sine" => Ok(Self::Sine),
            other => invalid(format!("unknown mesh family `{other}`")),
        }
    }
}
