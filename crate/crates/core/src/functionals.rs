//! Discrete energy functionals, norms and cross-mesh error metrics.

use crate::error::{invalid, Result};
use crate::forms::{element_moment, NodalFunction, WeightedForms};
use crate::spectral::{EigenPair, MassKind};

/// Per-step diagnostics of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub n: usize,
    pub t: f64,
    /// Increment that produced step `n` (zero for the initial state).
    pub tau: f64,
    /// `K_h(u)`, available for power nonlinearities.
    pub k_h: Option<f64>,
    /// `I_h(u)`, available when a lumped eigenpair is supplied.
    pub i_h: Option<f64>,
    pub lumped_norm: f64,
    pub max_norm: f64,
    pub min_nodal: f64,
}

pub(crate) fn k_h_raw(forms: &WeightedForms, u: &[f64], alpha: f64) -> f64 {
    let grad = forms.stiffness().bilinear(u, u);
    let p = alpha + 2.0;
    let pot: f64 = u
        .iter()
        .zip(forms.lumped_mass())
        .map(|(v, m)| v.abs().powf(p) * m)
        .sum();
    0.5 * grad - pot / p
}

pub(crate) fn lumped_norm_raw(forms: &WeightedForms, u: &[f64]) -> f64 {
    forms.lumped_inner_raw(u, u).sqrt()
}

pub(crate) fn max_norm_raw(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

pub(crate) fn min_nodal_raw(u: &[f64]) -> f64 {
    u.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `⦀u⦀ = ⟨u, u⟩^{1/2}`.
pub fn lumped_norm(u: &NodalFunction, forms: &WeightedForms) -> Result<f64> {
    Ok(forms.lumped_inner(u, u)?.sqrt())
}

/// Largest nodal magnitude, which equals `‖u‖_∞` for P1 functions.
pub fn max_norm(u: &NodalFunction) -> f64 {
    max_norm_raw(u.values())
}

/// Smallest nodal value over the free nodes.
pub fn min_nodal(u: &NodalFunction) -> f64 {
    min_nodal_raw(u.values())
}

/// `K_h(v) = ½‖v_x‖² − (α+2)^{-1} Σ |v_i|^{α+2} m_i`.
pub fn energy_k(u: &NodalFunction, forms: &WeightedForms, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    forms.lumped_inner(u, u)?;
    Ok(k_h_raw(forms, u.values(), alpha))
}

/// `I_h(v) = ⟨v, ψ̂_h⟩` with the lumped Perron eigenfunction.
pub fn energy_i(u: &NodalFunction, eig: &EigenPair, forms: &WeightedForms) -> Result<f64> {
    if eig.mass_kind != MassKind::Lumped {
        return invalid("I_h needs the lumped-mass eigenfunction");
    }
    forms.lumped_inner(u, &eig.psi)
}

pub(crate) fn report_raw(
    forms: &WeightedForms,
    u: &[f64],
    n: usize,
    t: f64,
    tau: f64,
    alpha: Option<f64>,
    eig: Option<&EigenPair>,
) -> EnergyReport {
    EnergyReport {
        n,
        t,
        tau,
        k_h: alpha.map(|a| k_h_raw(forms, u, a)),
        i_h: eig.map(|e| forms.lumped_inner_raw(u, e.psi.values())),
        lumped_norm: lumped_norm_raw(forms, u),
        max_norm: max_norm_raw(u),
        min_nodal: min_nodal_raw(u),
    }
}

/// Diagnostics of a single state.
pub fn energy_report(
    u: &NodalFunction,
    forms: &WeightedForms,
    alpha: Option<f64>,
    eig: Option<&EigenPair>,
    n: usize,
    t: f64,
    tau: f64,
) -> Result<EnergyReport> {
    forms.lumped_inner(u, u)?;
    if let Some(e) = eig {
        energy_i(u, e, forms)?;
    }
    Ok(report_raw(forms, u.values(), n, t, tau, alpha, eig))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// `‖d‖_{L¹}`, unweighted.
    pub e1: f64,
    /// `‖x^{(N-1)/2} d‖_{L²}`.
    pub e2: f64,
    /// `‖d‖_{L^∞}`.
    pub einf: f64,
}

/// Nodes closer than this are merged when overlaying two meshes.
const MERGE_TOL: f64 = 1e-14;

fn eval_linear(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    let j = nodes.partition_point(|&xn| xn <= x).clamp(1, n - 1);
    let (a, b) = (nodes[j - 1], nodes[j]);
    let s = ((x - a) / (b - a)).clamp(0.0, 1.0);
    values[j - 1] * (1.0 - s) + values[j] * s
}

/// Error metrics of `d = fine − coarse` for piecewise-linear functions given
/// by nodal values at every node (both endpoints included). `d` is
/// piecewise linear on the merged node set, so all three norms are exact.
pub fn error_metrics_full(
    coarse_nodes: &[f64],
    coarse_values: &[f64],
    fine_nodes: &[f64],
    fine_values: &[f64],
    n_dim: usize,
) -> ErrorMetrics {
    let mut merged: Vec<f64> = coarse_nodes.iter().chain(fine_nodes).cloned().collect();
    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    merged.dedup_by(|b, a| (*b - *a).abs() <= MERGE_TOL);

    let d: Vec<f64> = merged
        .iter()
        .map(|&x| {
            eval_linear(fine_nodes, fine_values, x) - eval_linear(coarse_nodes, coarse_values, x)
        })
        .collect();

    let einf = max_norm_raw(&d);
    let mut e1 = 0.0;
    let mut e2_sq = 0.0;
    for j in 0..merged.len() - 1 {
        let (a, h) = (merged[j], merged[j + 1] - merged[j]);
        let (da, db) = (d[j], d[j + 1]);
        e2_sq += da * da * element_moment(a, h, n_dim, 2, 0)
            + 2.0 * da * db * element_moment(a, h, n_dim, 1, 1)
            + db * db * element_moment(a, h, n_dim, 0, 2);
        e1 += if da * db >= 0.0 {
            0.5 * h * (da.abs() + db.abs())
        } else {
            // sign change at s* = da / (da − db)
            0.5 * h * (da * da + db * db) / (da.abs() + db.abs())
        };
    }
    ErrorMetrics {
        e1,
        e2: e2_sq.max(0.0).sqrt(),
        einf,
    }
}

/// `E₁`, `E₂`, `E∞` between a coarse solution and a fine reference, which
/// may live on unrelated meshes.
pub fn error_metrics(coarse: &NodalFunction, fine: &NodalFunction, n_dim: usize) -> ErrorMetrics {
    error_metrics_full(
        coarse.mesh().nodes(),
        &coarse.full_values(),
        fine.mesh().nodes(),
        &fine.full_values(),
        n_dim,
    )
}

/// Least-squares slope of `ln e` against `ln h`. `None` with fewer than
/// two points or any nonpositive entry.
pub fn loglog_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() != e.len() || h.len() < 2 || h.iter().chain(e).any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
