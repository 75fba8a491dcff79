//! Time stepping for the mass-lumped schemes and the standard FEM comparator.
//!
//! With `M_L = diag(m_i)`, consistent mass `M_C`, stiffness `A`, consistent
//! load `F(u)_i = (f(u_h), φ_i)` and lumped load `L(u)_i = f(u_i) m_i`:
//!
//! | scheme | update                                                   |
//! |--------|----------------------------------------------------------|
//! | ML1    | `(M_L/τ + A) u⁺ = M_L/τ u + F(u)`                         |
//! | ML2    | `M_L/τ u⁺ = M_L/τ u − A u + L(u)`                         |
//! | ML1b   | `(M_L/τ + A) u⁺ = M_L/τ u + L(u)`                         |
//! | ML2b   | `M_L/τ u⁺ = M_L/τ u − A u + F(u)`                         |
//! | STD    | `(M_C/τ + A) u⁺ = M_C/τ u + F(u)`                         |
//!
//! An optional source `g(x, t)` adds its consistent load, evaluated at
//! `t_{n+1}` for the implicit schemes and at `t_n` for the explicit ones.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::forms::{NodalFunction, WeightedForms, DEFAULT_QUAD_POINTS};
use crate::functionals::{report_raw, EnergyReport};
use crate::initial::InitialData;
use crate::mesh::Mesh;
use crate::quadrature::GaussLegendre;
use crate::spectral::EigenPair;
use crate::tridiag::TridiagLu;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// The reaction term `f`.
#[derive(Clone)]
pub enum Nonlinearity {
    /// `f(s) = s |s|^α`.
    Power { alpha: f64 },
    /// An arbitrary scalar function. The flags only gate the nonnegativity
    /// guarantees, never execution.
    General {
        f: ScalarFn,
        nondecreasing: bool,
        nonnegative_at_zero: bool,
    },
}

impl Nonlinearity {
    pub fn power(alpha: f64) -> Self {
        Self::Power { alpha }
    }

    pub fn zero() -> Self {
        Self::General {
            f: Arc::new(|_| 0.0),
            nondecreasing: true,
            nonnegative_at_zero: true,
        }
    }

    pub fn linear(c: f64) -> Self {
        Self::General {
            f: Arc::new(move |s| c * s),
            nondecreasing: c >= 0.0,
            nonnegative_at_zero: true,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Power { alpha } => s * s.abs().powf(*alpha),
            Self::General { f, .. } => f(s),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::Power { alpha } => Some(*alpha),
            Self::General { .. } => None,
        }
    }

    /// `f` nondecreasing with `f(0) ≥ 0`.
    pub fn preserves_nonnegativity(&self) -> bool {
        match self {
            Self::Power { .. } => true,
            Self::General {
                nondecreasing,
                nonnegative_at_zero,
                ..
            } => *nondecreasing && *nonnegative_at_zero,
        }
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power { alpha } => write!(f, "Power {{ alpha: {alpha} }}"),
            Self::General {
                nondecreasing,
                nonnegative_at_zero,
                ..
            } => write!(
                f,
                "General {{ nondecreasing: {nondecreasing}, nonnegative_at_zero: {nonnegative_at_zero} }}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ml1,
    Ml2,
    Ml1b,
    Ml2b,
    Standard,
}

impl Scheme {
    pub fn is_explicit(self) -> bool {
        matches!(self, Self::Ml2 | Self::Ml2b)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ml1 => "ML1",
            Self::Ml2 => "ML2",
            Self::Ml1b => "ML1b",
            Self::Ml2b => "ML2b",
            Self::Standard => "STD",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ML1" | "ML-1" => Ok(Self::Ml1),
            "ML2" | "ML-2" => Ok(Self::Ml2),
            "ML1B" => Ok(Self::Ml1b),
            "ML2B" => Ok(Self::Ml2b),
            "STD" | "STANDARD" => Ok(Self::Standard),
            _ => invalid(format!("unknown scheme `{s}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemConfig {
    pub n_dim: usize,
    pub nonlinearity: Nonlinearity,
    pub source: Option<SourceWrapper>,
    pub initial: InitialData,
    pub scheme: Scheme,
    pub quad_points: usize,
}

/// Source term `g(x, t)`.
#[derive(Clone)]
pub struct SourceWrapper(pub SourceFn);

impl fmt::Debug for SourceWrapper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SourceFn")
    }
}

impl ProblemConfig {
    pub fn new(
        n_dim: usize,
        nonlinearity: Nonlinearity,
        initial: InitialData,
        scheme: Scheme,
    ) -> Result<Self> {
        let cfg = Self {
            n_dim,
            nonlinearity,
            source: None,
            initial,
            scheme,
            quad_points: DEFAULT_QUAD_POINTS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_source(mut self, g: SourceFn) -> Self {
        self.source = Some(SourceWrapper(g));
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_quad_points(mut self, q: usize) -> Self {
        self.quad_points = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dim < 2 {
            return invalid(format!("n_dim must be >= 2, got {}", self.n_dim));
        }
        if let Nonlinearity::Power { alpha } = self.nonlinearity {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return invalid(format!("power exponent must be positive, got {alpha}"));
            }
        }
        if self.quad_points < 1 {
            return invalid("quad_points must be >= 1");
        }
        Ok(())
    }
}

/// `u_h^n` together with `t_n` and `n`.
#[derive(Debug, Clone)]
pub struct State {
    pub u: NodalFunction,
    pub t: f64,
    pub n: usize,
}

impl State {
    pub fn initial(u: NodalFunction) -> Self {
        Self { u, t: 0.0, n: 0 }
    }
}

/// `(min_i m_i / a_ii, β² h² / (N+1))`.
///
/// The second value is returned exactly as the closed-form sufficient
/// condition states it; it only lower-bounds the first for uniform meshes.
pub fn stability_tau(forms: &WeightedForms) -> (f64, f64) {
    let exact = forms
        .stability_quotients()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mesh = forms.mesh();
    let bound = mesh.beta().powi(2) * mesh.h().powi(2) / (forms.n_dim() as f64 + 1.0);
    (exact, bound)
}

/// Reusable single-step engine. Caches the quadrature rule and the last
/// factorization of the implicit operator.
pub struct Stepper<'a> {
    forms: &'a WeightedForms,
    cfg: &'a ProblemConfig,
    rule: GaussLegendre,
    cached: Option<(f64, TridiagLu)>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(forms: &'a WeightedForms, cfg: &'a ProblemConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.n_dim != forms.n_dim() {
            return invalid(format!(
                "problem dimension {} does not match assembled forms ({})",
                cfg.n_dim,
                forms.n_dim()
            ));
        }
        Ok(Self {
            forms,
            cfg,
            rule: GaussLegendre::new(cfg.quad_points),
            cached: None,
            scratch: vec![0.0; forms.dim()],
        })
    }

    fn consistent_load(&self, u: &[f64]) -> Vec<f64> {
        let f = &self.cfg.nonlinearity;
        self.forms.load_with(u, &self.rule, |_, uh| f.eval(uh))
    }

    fn source_load(&self, t: f64) -> Option<Vec<f64>> {
        self.cfg.source.as_ref().map(|g| {
            let g = &g.0;
            self.forms
                .load_with(&vec![0.0; self.forms.dim()], &self.rule, |x, _| g(x, t))
        })
    }

    fn implicit_lu(&mut self, tau: f64, lumped: bool) -> Result<&TridiagLu> {
        let hit = matches!(&self.cached, Some((t, _)) if *t == tau);
        if !hit {
            let mat = if lumped {
                let shift: Vec<f64> = self.forms.lumped_mass().iter().map(|m| m / tau).collect();
                self.forms.stiffness().scaled_plus_diag(1.0, &shift)
            } else {
                self.forms
                    .stiffness()
                    .combine(1.0, self.forms.consistent_mass(), 1.0 / tau)
            };
            self.cached = Some((tau, mat.factor()?));
        }
        Ok(&self.cached.as_ref().unwrap().1)
    }

    /// Advances `u` (nodal values at time `t`) by one step of length `tau`
    /// in place.
    pub fn advance(&mut self, u: &mut [f64], t: f64, tau: f64) -> Result<()> {
        if !(tau > 0.0) {
            return invalid(format!("time increment must be positive, got {tau}"));
        }
        let scheme = self.cfg.scheme;
        let masses = self.forms.lumped_mass();
        match scheme {
            Scheme::Ml2 | Scheme::Ml2b => {
                let mut rhs = match scheme {
                    Scheme::Ml2 => u
                        .iter()
                        .zip(masses)
                        .map(|(&v, m)| self.cfg.nonlinearity.eval(v) * m)
                        .collect(),
                    _ => self.consistent_load(u),
                };
                if let Some(s) = self.source_load(t) {
                    rhs.iter_mut().zip(&s).for_each(|(r, v)| *r += v);
                }
                self.forms.stiffness().mul_into(u, &mut self.scratch);
                for i in 0..u.len() {
                    u[i] += tau / masses[i] * (rhs[i] - self.scratch[i]);
                }
            }
            Scheme::Ml1 | Scheme::Ml1b | Scheme::Standard => {
                let mut rhs = match scheme {
                    Scheme::Ml1b => u
                        .iter()
                        .zip(masses)
                        .map(|(&v, m)| self.cfg.nonlinearity.eval(v) * m)
                        .collect(),
                    _ => self.consistent_load(u),
                };
                if let Some(s) = self.source_load(t + tau) {
                    rhs.iter_mut().zip(&s).for_each(|(r, v)| *r += v);
                }
                if scheme == Scheme::Standard {
                    self.forms.consistent_mass().mul_into(u, &mut self.scratch);
                    rhs.iter_mut()
                        .zip(&self.scratch)
                        .for_each(|(r, mu)| *r += mu / tau);
                } else {
                    rhs.iter_mut()
                        .zip(u.iter().zip(masses))
                        .for_each(|(r, (v, m))| *r += v * m / tau);
                }
                let lu = self.implicit_lu(tau, scheme != Scheme::Standard)?;
                lu.solve_in_place(&mut rhs);
                u.copy_from_slice(&rhs);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, state: &State, tau: f64) -> Result<State> {
        self.check_state(state)?;
        let mut u = state.u.clone();
        self.advance(u.values_mut(), state.t, tau)?;
        Ok(State {
            u,
            t: state.t + tau,
            n: state.n + 1,
        })
    }

    fn check_state(&self, state: &State) -> Result<()> {
        self.forms.lumped_inner(&state.u, &state.u).map(|_| ())
    }
}

fn step_with(
    state: &State,
    tau: f64,
    cfg: &ProblemConfig,
    forms: &WeightedForms,
    scheme: Scheme,
) -> Result<State> {
    let cfg = cfg.clone().with_scheme(scheme);
    Stepper::new(forms, &cfg)?.step(state, tau)
}

/// One step of the implicit mass-lumped scheme with consistent load.
pub fn step_ml1(state: &State, tau: f64, cfg: &ProblemConfig, forms: &WeightedForms) -> Result<State> {
    step_with(state, tau, cfg, forms, Scheme::Ml1)
}

/// One step of the explicit mass-lumped scheme with lumped load.
pub fn step_ml2(state: &State, tau: f64, cfg: &ProblemConfig, forms: &WeightedForms) -> Result<State> {
    step_with(state, tau, cfg, forms, Scheme::Ml2)
}

/// One step of a load-swapped variant (`Ml1b` or `Ml2b`).
pub fn step_variant(
    state: &State,
    tau: f64,
    cfg: &ProblemConfig,
    forms: &WeightedForms,
    which: Scheme,
) -> Result<State> {
    if !matches!(which, Scheme::Ml1b | Scheme::Ml2b) {
        return invalid(format!("{which} is not a load-swapped variant"));
    }
    step_with(state, tau, cfg, forms, which)
}

/// One step of the standard symmetric FEM with consistent mass.
pub fn step_standard(
    state: &State,
    tau: f64,
    cfg: &ProblemConfig,
    forms: &WeightedForms,
) -> Result<State> {
    step_with(state, tau, cfg, forms, Scheme::Standard)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxiliaryKind {
    Implicit,
    Explicit,
}

/// One step of the linear problem `⟨∂u, χ⟩ + A(u*, χ) = ⟨g, χ⟩` with a
/// lumped source `g ∈ S_h`, where `u*` is `u^{n+1}` (implicit) or `u^n`
/// (explicit).
pub fn auxiliary_step(
    kind: AuxiliaryKind,
    u: &NodalFunction,
    g: &NodalFunction,
    tau: f64,
    forms: &WeightedForms,
) -> Result<NodalFunction> {
    forms.lumped_inner(u, g)?;
    if !(tau > 0.0) {
        return invalid(format!("time increment must be positive, got {tau}"));
    }
    let m = forms.lumped_mass();
    let mut out = u.clone();
    let v = out.values_mut();
    match kind {
        AuxiliaryKind::Implicit => {
            for i in 0..v.len() {
                v[i] = m[i] * (v[i] / tau + g.values()[i]);
            }
            let shift: Vec<f64> = m.iter().map(|mi| mi / tau).collect();
            forms
                .stiffness()
                .scaled_plus_diag(1.0, &shift)
                .factor()?
                .solve_in_place(v);
        }
        AuxiliaryKind::Explicit => {
            let au = forms.stiffness().mul(u.values());
            for i in 0..v.len() {
                v[i] += tau * (g.values()[i] - au[i] / m[i]);
            }
        }
    }
    Ok(out)
}

/// How `τ_n` is chosen in [`run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Fixed(f64),
    /// `τ = λ h²`.
    Lambda(f64),
}

impl TauPolicy {
    pub fn tau(self, mesh: &Mesh) -> f64 {
        match self {
            Self::Fixed(t) => t,
            Self::Lambda(l) => l * mesh.h() * mesh.h(),
        }
    }
}

/// Stopping guards for [`run_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guards {
    /// Fixed horizon; the last step is shortened to land on it exactly.
    pub t_end: Option<f64>,
    pub n_max: usize,
    pub tau_min: f64,
    /// Stop at the first state with `‖u‖_∞ > threshold`.
    pub max_norm_threshold: Option<f64>,
    /// Keep every `record_stride`-th report (the final one is always kept).
    pub record_stride: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            t_end: None,
            n_max: 10_000_000,
            tau_min: 1e-16,
            max_norm_threshold: None,
            record_stride: 1,
        }
    }
}

impl Guards {
    pub fn horizon(t_end: f64) -> Self {
        Self {
            t_end: Some(t_end),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Horizon,
    Threshold,
    StepLimit,
    TauUnderflow,
    /// A step produced a non-finite nodal value; `step` is the index of the
    /// rejected state.
    Overflow { step: usize },
}

pub type TrajectoryRecord = EnergyReport;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Last finite state.
    pub final_state: State,
    pub stop: StopReason,
}

/// Iterates the configured scheme from `state`, choosing each increment with
/// `tau_of(u, t)`. `on_step` sees the diagnostics of every accepted state,
/// including the initial one.
pub fn run_with<T, O>(
    cfg: &ProblemConfig,
    forms: &WeightedForms,
    state: State,
    mut tau_of: T,
    guards: Guards,
    eig: Option<&EigenPair>,
    mut on_step: O,
) -> Result<Trajectory>
where
    T: FnMut(&[f64], f64) -> f64,
    O: FnMut(&EnergyReport),
{
    let mut stepper = Stepper::new(forms, cfg)?;
    stepper.check_state(&state)?;
    if let Some(t_end) = guards.t_end {
        if !(t_end >= 0.0) {
            return invalid(format!("t_end must be nonnegative, got {t_end}"));
        }
    }
    let stride = guards.record_stride.max(1);
    let alpha = cfg.nonlinearity.alpha();
    let State { u, mut t, mut n } = state;
    let mut u = u.into_values();
    let mut next = u.clone();
    let mut records = Vec::new();

    let mut last = report_raw(forms, &u, n, t, 0.0, alpha, eig);
    on_step(&last);
    records.push(last);
    let mut last_recorded = true;

    let stop = loop {
        if let Some(m) = guards.max_norm_threshold {
            if last.max_norm > m {
                break StopReason::Threshold;
            }
        }
        if let Some(t_end) = guards.t_end {
            if t >= t_end {
                break StopReason::Horizon;
            }
        }
        if n >= guards.n_max {
            break StopReason::StepLimit;
        }
        let mut tau = tau_of(&u, t);
        if !(tau >= guards.tau_min) || !tau.is_finite() {
            break StopReason::TauUnderflow;
        }
        let mut t_next = t + tau;
        if let Some(t_end) = guards.t_end {
            if t_next >= t_end * (1.0 - 1e-14) {
                tau = t_end - t;
                t_next = t_end;
            }
        }
        next.copy_from_slice(&u);
        stepper.advance(&mut next, t, tau)?;
        if next.iter().any(|v| !v.is_finite()) {
            break StopReason::Overflow { step: n + 1 };
        }
        std::mem::swap(&mut u, &mut next);
        t = t_next;
        n += 1;
        last = report_raw(forms, &u, n, t, tau, alpha, eig);
        on_step(&last);
        last_recorded = n % stride == 0;
        if last_recorded {
            records.push(last);
        }
    };
    if !last_recorded {
        records.push(last);
    }
    Ok(Trajectory {
        records,
        final_state: State {
            u: NodalFunction::new(forms.mesh().clone(), u)?,
            t,
            n,
        },
        stop,
    })
}

/// Runs `cfg` on `mesh` from `Π_h u⁰` with a fixed increment up to `t_end`.
pub fn run(
    cfg: &ProblemConfig,
    mesh: Arc<Mesh>,
    policy: TauPolicy,
    t_end: f64,
    guards: Guards,
) -> Result<Trajectory> {
    let forms = WeightedForms::assemble(mesh.clone(), cfg.n_dim)?;
    let u0 = cfg.initial.interpolate(&mesh)?;
    let tau = policy.tau(&mesh);
    if !(tau > 0.0) {
        return invalid(format!("time increment must be positive, got {tau}"));
    }
    let guards = Guards {
        t_end: Some(t_end),
        ..guards
    };
    run_with(cfg, &forms, State::initial(u0), |_, _| tau, guards, None, |_| {})
}

/// Exact solution `e^{-t} cos(πx/2)` of the linear problem driven by
/// [`manufactured_source`].
pub fn manufactured_solution(x: f64, t: f64) -> f64 {
    (-t).exp() * (std::f64::consts::FRAC_PI_2 * x).cos()
}

/// `g = u_t − u_xx − ((N−1)/x) u_x` for `u = e^{-t} cos(πx/2)`, with the
/// removable singularity at `x = 0` filled in by its limit.
pub fn manufactured_source(n_dim: usize) -> SourceFn {
    use std::f64::consts::FRAC_PI_2;
    let n1 = (n_dim - 1) as f64;
    Arc::new(move |x: f64, t: f64| {
        let k = FRAC_PI_2;
        let c = (k * x).cos();
        // sin(kx)/x → k as x → 0
        let sinc = if x.abs() < 1e-8 {
            k * (1.0 - (k * x).powi(2) / 6.0)
        } else {
            (k * x).sin() / x
        };
        (-t).exp() * (-c + k * k * c + n1 * k * sinc)
    })
}
