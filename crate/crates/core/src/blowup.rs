//! Nakagawa time-increment controls, truncated blow-up times and analytic
//! blow-up bounds.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::forms::{NodalFunction, WeightedForms};
use crate::functionals::{lumped_norm_raw, EnergyReport};
use crate::mesh::Mesh;
use crate::quadrature::GaussLegendre;
use crate::schemes::{run_with, stability_tau, Guards, ProblemConfig, Scheme, State, StopReason};
use crate::spectral::{smallest_eigenpair, EigenPair, MassKind, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Control {
    /// `τ_n = τ min{1, ⦀u⦀^{-α}}`.
    K,
    /// `τ_n = τ min{1, I_h(u)^{-α}}`.
    I,
    Fixed,
}

impl fmt::Display for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::K => "K",
            Self::I => "I",
            Self::Fixed => "fixed",
        })
    }
}

impl FromStr for Control {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(Self::K),
            "I" | "i" => Ok(Self::I),
            "fixed" => Ok(Self::Fixed),
            _ => invalid(format!("unknown time control `{s}`")),
        }
    }
}

/// Base increment before the control is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TauForm {
    /// `τ = δ β² h² / (N+1)`, never larger than `min m_i / a_ii`.
    Theory,
    /// `τ = δ / (N+1)`, no mesh factor.
    Experiment,
}

impl fmt::Display for TauForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Theory => "theory",
            Self::Experiment => "experiment",
        })
    }
}

impl FromStr for TauForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theory" => Ok(Self::Theory),
            "experiment" => Ok(Self::Experiment),
            _ => invalid(format!("unknown tau form `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupConfig {
    pub control: Control,
    pub tau_form: TauForm,
    pub delta: f64,
    /// Truncation level `M`.
    pub threshold: f64,
    pub n_max: usize,
    pub tau_min: f64,
    pub record_stride: usize,
    /// Optional horizon; the run also stops once `t_n` reaches it.
    pub t_end: Option<f64>,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            control: Control::K,
            tau_form: TauForm::Theory,
            delta: 1.0,
            threshold: 1e8,
            n_max: 10_000_000,
            tau_min: 1e-16,
            record_stride: 1,
            t_end: None,
        }
    }
}

impl BlowupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return invalid(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.threshold > 0.0) {
            return invalid(format!("threshold must be positive, got {}", self.threshold));
        }
        if !(self.tau_min >= 0.0) {
            return invalid(format!("tau_min must be nonnegative, got {}", self.tau_min));
        }
        if self.n_max == 0 {
            return invalid("n_max must be positive");
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                return invalid(format!("t_end must be nonnegative, got {t}"));
            }
        }
        Ok(())
    }

    /// The base increment `τ` on `forms`.
    pub fn tau_base(&self, forms: &WeightedForms) -> f64 {
        let n1 = forms.n_dim() as f64 + 1.0;
        match self.tau_form {
            TauForm::Theory => {
                let (exact, bound) = stability_tau(forms);
                self.delta * bound.min(exact)
            }
            TauForm::Experiment => self.delta / n1,
        }
    }
}

#[inline]
fn controlled(tau: f64, size: f64, alpha: f64) -> f64 {
    if size > 1.0 {
        tau * size.powf(-alpha)
    } else {
        tau
    }
}

/// `τ min{1, ⦀u⦀^{-α}}`.
pub fn tau_control_k(u: &NodalFunction, forms: &WeightedForms, alpha: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return invalid(format!("base increment must be positive, got {tau}"));
    }
    let norm = forms.lumped_inner(u, u)?.sqrt();
    Ok(controlled(tau, norm, alpha))
}

/// `τ min{1, I_h(u)^{-α}}`; nonpositive `I_h` leaves `τ` unchanged.
pub fn tau_control_i(
    u: &NodalFunction,
    eig: &EigenPair,
    forms: &WeightedForms,
    alpha: f64,
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0) {
        return invalid(format!("base increment must be positive, got {tau}"));
    }
    let i = crate::functionals::energy_i(u, eig, forms)?;
    Ok(controlled(tau, i, alpha))
}

/// `t₀ + {(α+2)/α² N^{-α/2} + τ(1+2/α)} ⦀u⦀^{-α}`, valid once `⦀u⦀ ≥ 1`.
pub fn bound_k(t_n0: f64, lumped_norm_n0: f64, alpha: f64, n_dim: usize, tau: f64) -> Result<f64> {
    if !(lumped_norm_n0 >= 1.0) {
        return Err(Error::NotApplicable(format!(
            "lumped norm {lumped_norm_n0} is below 1"
        )));
    }
    let n = n_dim as f64;
    let c = (alpha + 2.0) / (alpha * alpha) * n.powf(-alpha / 2.0) + tau * (1.0 + 2.0 / alpha);
    Ok(t_n0 + c * lumped_norm_n0.powf(-alpha))
}

/// `t₀ + (α+2)/α² N^{-α/2} ‖u(t₀)‖^{-α}`.
pub fn continuous_bound_k(t0: f64, norm: f64, alpha: f64, n_dim: usize) -> f64 {
    let n = n_dim as f64;
    t0 + (alpha + 2.0) / (alpha * alpha) * n.powf(-alpha / 2.0) * norm.powf(-alpha)
}

/// `t₀ + ∫_{I₀}^∞ ds / (−μ s + s^{1+α})`, requiring `I₀ > μ^{1/α}`.
pub fn continuous_bound_i(t0: f64, i0: f64, alpha: f64, mu: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if !(i0 > mu.powf(1.0 / alpha)) {
        return Err(Error::NotApplicable(format!(
            "I(u(t0)) = {i0} does not exceed mu^(1/alpha) = {}",
            mu.powf(1.0 / alpha)
        )));
    }
    // s = I₀ e^r turns the integrand into 1 / (I₀^α e^{αr} − μ)
    let c = i0.powf(alpha);
    let g = |r: f64| 1.0 / (c * (alpha * r).exp() - mu);
    let rule = GaussLegendre::new(10);
    let width = 1.0 / alpha;
    let mut total = 0.0;
    let mut a = 0.0;
    for _ in 0..100_000 {
        let piece = adaptive(&g, a, a + width, &rule, 1e-14, 40);
        total += piece;
        a += width;
        // integrand is below g(a) e^{-α(r-a)} beyond a, so the tail is at most g(a)/α
        let tail = g(a) / alpha;
        if tail <= 1e-12 * total {
            return Ok(t0 + total + tail);
        }
    }
    Err(Error::NonConvergence {
        iterations: 100_000,
        rayleigh: total,
    })
}

fn gauss(g: &impl Fn(f64) -> f64, a: f64, b: f64, rule: &GaussLegendre) -> f64 {
    let h = b - a;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| w * g(a + h * p))
        .sum::<f64>()
        * h
}

fn adaptive(g: &impl Fn(f64) -> f64, a: f64, b: f64, rule: &GaussLegendre, rel: f64, depth: u32) -> f64 {
    let whole = gauss(g, a, b, rule);
    let mid = 0.5 * (a + b);
    let halves = gauss(g, a, mid, rule) + gauss(g, mid, b, rule);
    if depth == 0 || (whole - halves).abs() <= rel * halves.abs() {
        halves
    } else {
        adaptive(g, a, mid, rule, rel, depth - 1) + adaptive(g, mid, b, rule, rel, depth - 1)
    }
}

#[derive(Debug, Clone)]
pub struct BlowupResult {
    pub detected: bool,
    /// First `t_n` with `‖u^n‖_∞ > M`.
    pub t_m: Option<f64>,
    pub steps: usize,
    pub tau_base: f64,
    /// Upper bound on the blow-up time from the first step `n₀` with
    /// `K_h(u^{n₀}) ≤ 0` and `⦀u^{n₀}⦀ ≥ 1`.
    pub bound_k: Option<f64>,
    pub n0: Option<usize>,
    /// First step with `K_h ≤ 0`.
    pub first_nonpositive_k: Option<usize>,
    pub stop: StopReason,
    /// Step index of a non-finite state reached before the threshold.
    pub overflow_step: Option<usize>,
    /// Set when the scheme is not the explicit lumped one the controls
    /// are designed for.
    pub warning: Option<String>,
    pub history: Vec<EnergyReport>,
    pub final_state: State,
}

/// Runs the configured scheme from `Π_h u⁰` under the selected time control
/// until `‖u‖_∞ > M` or a guard fires.
pub fn run_blowup(cfg: &ProblemConfig, bcfg: &BlowupConfig, mesh: Arc<Mesh>) -> Result<BlowupResult> {
    let forms = WeightedForms::assemble(mesh.clone(), cfg.n_dim)?;
    let eig = smallest_eigenpair(&forms, MassKind::Lumped, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let u0 = cfg.initial.interpolate(&mesh)?;
    run_blowup_from(cfg, bcfg, &forms, &eig, State::initial(u0))
}

/// As [`run_blowup`] with precomputed forms, eigenpair and initial state.
pub fn run_blowup_from(
    cfg: &ProblemConfig,
    bcfg: &BlowupConfig,
    forms: &WeightedForms,
    eig: &EigenPair,
    state: State,
) -> Result<BlowupResult> {
    bcfg.validate()?;
    let alpha = match cfg.nonlinearity.alpha() {
        Some(a) => a,
        None => return invalid("blow-up runs need a power nonlinearity"),
    };
    if eig.mass_kind != MassKind::Lumped || !Arc::ptr_eq(eig.psi.mesh(), forms.mesh()) && **eig.psi.mesh() != **forms.mesh() {
        return invalid("blow-up runs need the lumped eigenpair of the same mesh");
    }
    let tau = bcfg.tau_base(forms);
    let psi = eig.psi.values().to_vec();
    let control = bcfg.control;
    let tau_of = |u: &[f64], _t: f64| match control {
        Control::Fixed => tau,
        Control::K => controlled(tau, lumped_norm_raw(forms, u), alpha),
        Control::I => controlled(tau, forms.lumped_inner_raw(u, &psi), alpha),
    };

    let mut first_nonpositive_k = None;
    let mut n0 = None;
    let mut bound = None;
    let n_dim = cfg.n_dim;
    let on_step = |r: &EnergyReport| {
        let k = r.k_h.unwrap_or(f64::INFINITY);
        if k <= 0.0 {
            first_nonpositive_k.get_or_insert(r.n);
            if n0.is_none() && r.lumped_norm >= 1.0 {
                n0 = Some(r.n);
                bound = bound_k(r.t, r.lumped_norm, alpha, n_dim, tau).ok();
            }
        }
    };
    let guards = Guards {
        t_end: bcfg.t_end,
        n_max: bcfg.n_max,
        tau_min: bcfg.tau_min,
        max_norm_threshold: Some(bcfg.threshold),
        record_stride: bcfg.record_stride,
    };
    let traj = run_with(cfg, forms, state, tau_of, guards, Some(eig), on_step)?;
    let detected = traj.stop == StopReason::Threshold;
    let overflow_step = match traj.stop {
        StopReason::Overflow { step } => Some(step),
        _ => None,
    };
    let warning = (cfg.scheme != Scheme::Ml2).then(|| {
        format!(
            "time controls are designed for the explicit lumped scheme, not {}",
            cfg.scheme
        )
    });
    Ok(BlowupResult {
        detected,
        t_m: detected.then_some(traj.final_state.t),
        steps: traj.final_state.n,
        tau_base: tau,
        bound_k: bound,
        n0,
        first_nonpositive_k,
        stop: traj.stop,
        overflow_step,
        warning,
        history: traj.records,
        final_state: traj.final_state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    /// First recorded step with `K_h ≤ 0`.
    pub first_nonpositive_k: Option<usize>,
    /// Consecutive pairs checked against the norm-growth inequality.
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// First step from which `∂I_h ≥ ½ I_h^{1+α}` holds for every later
    /// consecutive pair.
    pub i_growth_onset: Option<usize>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `½ ∂⦀u^{n+1}⦀² ≥ α/(α+2) N^{α/2} ⦀u^n⦀^{α+2}` on every pair of
/// consecutive records at or after the first nonpositive `K_h`, with
/// relative slack `1e-10`. Non-consecutive records (strided histories) are
/// skipped.
pub fn validate_difference_inequality(
    history: &[EnergyReport],
    alpha: f64,
    n_dim: usize,
) -> InequalityReport {
    let c = alpha / (alpha + 2.0) * (n_dim as f64).powf(alpha / 2.0);
    let first_nonpositive_k = history
        .iter()
        .find(|r| r.k_h.is_some_and(|k| k <= 0.0))
        .map(|r| r.n);
    let mut checked = 0;
    let mut violations = 0;
    let mut first_violation = None;
    let mut i_growth_onset = None;

    for w in history.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        if next.n != cur.n + 1 || !(next.tau > 0.0) {
            continue;
        }
        if first_nonpositive_k.is_some_and(|n1| cur.n >= n1) {
            let lhs = 0.5 * (next.lumped_norm.powi(2) - cur.lumped_norm.powi(2)) / next.tau;
            let rhs = c * cur.lumped_norm.powf(alpha + 2.0);
            checked += 1;
            if lhs < rhs - 1e-10 * rhs.abs() {
                violations += 1;
                first_violation.get_or_insert(cur.n);
            }
        }
        if let (Some(i0), Some(i1)) = (cur.i_h, next.i_h) {
            let holds = (i1 - i0) / next.tau >= 0.5 * i0 * i0.abs().powf(alpha);
            if holds {
                i_growth_onset.get_or_insert(cur.n);
            } else {
                i_growth_onset = None;
            }
        }
    }
    InequalityReport {
        first_nonpositive_k,
        checked,
        violations,
        first_violation,
        i_growth_onset,
    }
}
