//! Symmetric tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// super-diagonal (`off[i] = a_{i,i+1} = a_{i+1,i}`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i as isize) - (j as isize) {
            0 => self.diag[i],
            1 => self.off[j],
            -1 => self.off[i],
            _ => 0.0,
        }
    }

    /// `y = self * x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.mul_into(x, &mut y);
        y
    }

    /// Bilinear form `x^T self y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            s += x[i] * self.diag[i] * y[i];
            if i + 1 < n {
                s += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        s
    }

    /// `scale * self + diag(shift)`.
    pub fn scaled_plus_diag(&self, scale: f64, shift: &[f64]) -> Self {
        Self {
            diag: self
                .diag
                .iter()
                .zip(shift)
                .map(|(d, s)| scale * d + s)
                .collect(),
            off: self.off.iter().map(|o| scale * o).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            diag: self
                .diag
                .iter()
                .zip(&other.diag)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            off: self
                .off
                .iter()
                .zip(&other.off)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn factor(&self) -> Result<TridiagLu> {
        TridiagLu::new(self)
    }
}

/// LU factors of a tridiagonal matrix without pivoting (Thomas algorithm).
/// Stable for the diagonally dominant M-matrices produced by the schemes.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    /// Multipliers `l_i = a_{i,i-1} / d_{i-1}`, `i = 1..n`.
    lower: Vec<f64>,
    /// Pivots `d_i`.
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagLu {
    pub fn new(mat: &SymTridiag) -> Result<Self> {
        let n = mat.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut d = mat.diag[i];
            if i > 0 {
                let l = mat.off[i - 1] / pivots[i - 1];
                d -= l * mat.off[i - 1];
                lower.push(l);
            }
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Singular(i));
            }
            pivots.push(d);
        }
        Ok(Self {
            lower,
            pivots,
            upper: mat.off.clone(),
        })
    }

    /// Overwrites `rhs` with the solution of `A x = rhs`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.pivots.len();
        debug_assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.lower[i - 1] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivots[i];
        }
    }
}
