//! Weighted bilinear forms with weight `x^(N-1)` on P1 elements.
//!
//! The node `x_m = 1` carries the homogeneous Dirichlet condition and is
//! eliminated: every matrix and nodal vector is indexed by `i = 0..m-1`.
//!
//! Element integrals of `x^(N-1) p(x)` with `p` of degree at most two are
//! evaluated in closed form. On `I_j = (a, a + h)` we write `x = a + h s` and
//! expand `(a + h s)^(N-1)` binomially; every term of the resulting sum of
//! Beta integrals is nonnegative, so there is no cancellation for elements
//! far from the origin.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::quadrature::GaussLegendre;
use crate::tridiag::SymTridiag;

/// Default number of Gauss–Legendre points per element for nonlinear loads.
pub const DEFAULT_QUAD_POINTS: usize = 5;

/// Tolerance on `|g(1)|` when interpolating initial data.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// `B(a, b)` for positive integers.
fn beta_int(a: usize, b: usize) -> f64 {
    let a = a as f64;
    let mut v = 1.0 / a;
    for i in 1..b {
        v *= i as f64 / (a + i as f64);
    }
    v
}

/// `∫_I x^(N-1) (1-s)^p s^q dx` over the element starting at `a` with width `h`.
pub(crate) fn element_moment(a: f64, h: f64, n_dim: usize, p: usize, q: usize) -> f64 {
    let deg = n_dim - 1;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..=deg {
        if k > 0 {
            binom = binom * (deg - k + 1) as f64 / k as f64;
        }
        sum += binom * a.powi((deg - k) as i32) * h.powi(k as i32) * beta_int(k + q + 1, p + 1);
    }
    h * sum
}

/// `∫_a^b x^(N-1) dx / h^2` with the power difference in factored form.
fn element_stiffness(a: f64, b: f64, n_dim: usize) -> f64 {
    let h = b - a;
    let s: f64 = (0..n_dim)
        .map(|k| b.powi(k as i32) * a.powi((n_dim - 1 - k) as i32))
        .sum();
    s / (n_dim as f64 * h)
}

/// Exact `∫_0^1 x^(N-1) v dx` for the piecewise-linear `v` with nodal values
/// `values` at every node of `mesh` (including `x_m`).
pub fn weighted_integral_linear(mesh: &Mesh, n_dim: usize, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), mesh.nodes().len());
    let nodes = mesh.nodes();
    let mut sum = 0.0;
    for (j, &h) in mesh.widths().iter().enumerate() {
        let a = nodes[j];
        sum += values[j] * element_moment(a, h, n_dim, 1, 0)
            + values[j + 1] * element_moment(a, h, n_dim, 0, 1);
    }
    sum
}

/// A function of `S_h`, stored by its nodal values at `x_0..x_{m-1}`.
/// The value at `x_m = 1` is zero.
#[derive(Debug, Clone)]
pub struct NodalFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl NodalFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_elements() {
            return invalid(format!(
                "expected {} nodal values, got {}",
                mesh.num_elements(),
                values.len()
            ));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let m = mesh.num_elements();
        Self {
            mesh,
            values: vec![0.0; m],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Nodal values at all `m + 1` nodes, with the Dirichlet zero appended.
    pub fn full_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.push(0.0);
        v
    }

    /// Point evaluation of the piecewise-linear function.
    pub fn eval(&self, x: f64) -> f64 {
        let nodes = self.mesh.nodes();
        let m = self.values.len();
        if x <= 0.0 {
            return self.values[0];
        }
        if x >= 1.0 {
            return 0.0;
        }
        let j = nodes.partition_point(|&xn| xn <= x).clamp(1, m);
        let (a, b) = (nodes[j - 1], nodes[j]);
        let left = self.values[j - 1];
        let right = if j < m { self.values[j] } else { 0.0 };
        let s = (x - a) / (b - a);
        left * (1.0 - s) + right * s
    }

    pub fn same_mesh(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}

/// Lagrange interpolation `Π_h g` onto `S_h`. Requires `g(1) = 0` up to
/// [`BOUNDARY_TOL`].
pub fn interpolate<G: Fn(f64) -> f64>(g: G, mesh: &Arc<Mesh>) -> Result<NodalFunction> {
    let g1 = g(1.0);
    if !(g1.abs() <= BOUNDARY_TOL) {
        return invalid(format!(
            "function must vanish at x = 1 (got g(1) = {g1:e})"
        ));
    }
    let nodes = mesh.nodes();
    let values = nodes[..nodes.len() - 1].iter().map(|&x| g(x)).collect();
    NodalFunction::new(mesh.clone(), values)
}

/// Assembled stiffness, lumped mass and consistent mass for weight `x^(N-1)`.
#[derive(Debug, Clone)]
pub struct WeightedForms {
    mesh: Arc<Mesh>,
    n_dim: usize,
    stiffness: SymTridiag,
    lumped_mass: Vec<f64>,
    consistent_mass: SymTridiag,
}

impl WeightedForms {
    pub fn assemble(mesh: Arc<Mesh>, n_dim: usize) -> Result<Self> {
        if n_dim < 2 {
            return invalid(format!("spatial dimension must be >= 2, got {n_dim}"));
        }
        let m = mesh.num_elements();
        let nodes = mesh.nodes();
        let mut stiffness = SymTridiag::zeros(m);
        let mut consistent = SymTridiag::zeros(m);
        let mut lumped = vec![0.0; m];

        for (j, &h) in mesh.widths().iter().enumerate() {
            let (a, b) = (nodes[j], nodes[j + 1]);
            let w = element_stiffness(a, b, n_dim);
            // element j spans nodes j (left) and j + 1 (right)
            stiffness.diag[j] += w;
            lumped[j] += element_moment(a, h, n_dim, 1, 0);
            consistent.diag[j] += element_moment(a, h, n_dim, 2, 0);
            if j + 1 < m {
                stiffness.diag[j + 1] += w;
                stiffness.off[j] -= w;
                lumped[j + 1] += element_moment(a, h, n_dim, 0, 1);
                consistent.diag[j + 1] += element_moment(a, h, n_dim, 0, 2);
                consistent.off[j] += element_moment(a, h, n_dim, 1, 1);
            }
        }

        Ok(Self {
            mesh,
            n_dim,
            stiffness,
            lumped_mass: lumped,
            consistent_mass: consistent,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    /// Number of unknowns `m`.
    pub fn dim(&self) -> usize {
        self.lumped_mass.len()
    }

    /// `a_ij = A(φ_j, φ_i)`.
    pub fn stiffness(&self) -> &SymTridiag {
        &self.stiffness
    }

    /// `m_i = (1, φ_i)`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    /// `(φ_j, φ_i)`.
    pub fn consistent_mass(&self) -> &SymTridiag {
        &self.consistent_mass
    }

    fn check(&self, u: &NodalFunction) -> Result<()> {
        if u.values.len() != self.dim()
            || !(Arc::ptr_eq(&self.mesh, &u.mesh) || *self.mesh == *u.mesh)
        {
            return invalid("nodal function lives on a different mesh");
        }
        Ok(())
    }

    /// Mass-lumped inner product `⟨w, v⟩ = Σ w_i v_i m_i`.
    pub fn lumped_inner(&self, w: &NodalFunction, v: &NodalFunction) -> Result<f64> {
        self.check(w)?;
        self.check(v)?;
        Ok(self.lumped_inner_raw(&w.values, &v.values))
    }

    pub(crate) fn lumped_inner_raw(&self, w: &[f64], v: &[f64]) -> f64 {
        w.iter()
            .zip(v)
            .zip(&self.lumped_mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    /// Weighted `L²` inner product `(w, v)` via the consistent mass.
    pub fn weighted_inner(&self, w: &NodalFunction, v: &NodalFunction) -> Result<f64> {
        self.check(w)?;
        self.check(v)?;
        Ok(self.consistent_mass.bilinear(&w.values, &v.values))
    }

    /// `A(w, v)`.
    pub fn energy_inner(&self, w: &NodalFunction, v: &NodalFunction) -> Result<f64> {
        self.check(w)?;
        self.check(v)?;
        Ok(self.stiffness.bilinear(&w.values, &v.values))
    }

    /// Exact `∫ x^(N-1) w dx` for `w ∈ S_h`.
    pub fn weighted_integral(&self, w: &NodalFunction) -> Result<f64> {
        self.check(w)?;
        Ok(weighted_integral_linear(&self.mesh, self.n_dim, &w.full_values()))
    }

    /// `F_i = ∫ x^(N-1) f(u_h(x)) φ_i(x) dx` by Gauss–Legendre quadrature with
    /// `quad_points` nodes per element.
    pub fn nonlinear_load<F: Fn(f64) -> f64>(
        &self,
        u: &NodalFunction,
        f: F,
        quad_points: usize,
    ) -> Result<Vec<f64>> {
        self.check(u)?;
        if quad_points < 1 {
            return invalid("quad_points must be >= 1");
        }
        let rule = GaussLegendre::new(quad_points);
        Ok(self.load_with(&u.values, &rule, |_, uh| f(uh)))
    }

    /// `∫ x^(N-1) g(x, u_h(x)) φ_i(x) dx` for all `i`, with `u_h` given by
    /// the nodal values `u`.
    pub(crate) fn load_with<G: FnMut(f64, f64) -> f64>(
        &self,
        u: &[f64],
        rule: &GaussLegendre,
        mut g: G,
    ) -> Vec<f64> {
        let m = self.dim();
        let nodes = self.mesh.nodes();
        let pw = (self.n_dim - 1) as i32;
        let mut out = vec![0.0; m];
        for (j, &h) in self.mesh.widths().iter().enumerate() {
            let a = nodes[j];
            let ul = u[j];
            let ur = if j + 1 < m { u[j + 1] } else { 0.0 };
            let (mut left, mut right) = (0.0, 0.0);
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let x = a + h * s;
                let uh = ul * (1.0 - s) + ur * s;
                let val = w * x.powi(pw) * g(x, uh);
                left += val * (1.0 - s);
                right += val * s;
            }
            out[j] += h * left;
            if j + 1 < m {
                out[j + 1] += h * right;
            }
        }
        out
    }

    /// `(1, φ_i) / A(φ_i, φ_i)` for every `i`.
    pub fn stability_quotients(&self) -> Vec<f64> {
        self.lumped_mass
            .iter()
            .zip(&self.stiffness.diag)
            .map(|(m, a)| m / a)
            .collect()
    }
}
