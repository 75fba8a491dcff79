//! Experiment files (TOML) and their validation into run plans.
//!
//! All sections are optional at parse time; each subcommand checks for the
//! ones it needs. Validation runs completely before any computation, and
//! every error names the field it came from.

use std::path::Path;

use mlheat::blowup::{BlowupConfig, Control, TauForm};
use mlheat::schemes::{Nonlinearity, ProblemConfig, Scheme, TauPolicy};
use mlheat::{InitialData, MeshFamily};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this file is written for, if pinned.
    pub command: Option<String>,
    /// Output file stem.
    pub name: Option<String>,
    pub problem: Option<ProblemSection>,
    /// Blow-up cases; `[[case]]` tables.
    #[serde(default, rename = "case")]
    pub cases: Vec<ProblemSection>,
    pub mesh: Option<MeshSection>,
    pub time: Option<TimeSection>,
    pub run: Option<RunSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub n_dim: Option<i64>,
    /// Exponent of `f(s) = s|s|^α`; omitted means `f ≡ 0`.
    pub alpha: Option<f64>,
    pub initial: Option<InitialSpec>,
    pub scheme: Option<String>,
    pub schemes: Option<Vec<String>>,
    pub quad_points: Option<i64>,
}

/// `"cosine(13)"`, a list of such strings, or `{ x = [...], u = [...] }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Preset(String),
    Many(Vec<String>),
    Table { x: Vec<f64>, u: Vec<f64> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// `"uniform"` or `"sine"`.
    pub family: Option<String>,
    pub m: Option<i64>,
    pub sizes: Option<Vec<i64>>,
    pub reference: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// `τ = λh²`.
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub control: Option<String>,
    pub controls: Option<Vec<String>>,
    pub tau_form: Option<String>,
    pub delta: Option<f64>,
    pub threshold: Option<f64>,
    pub n_max: Option<i64>,
    pub tau_min: Option<f64>,
    pub record_stride: Option<i64>,
    pub t_end: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(origin, e.message().trim_end().to_string() + &span_note(text, e.span())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path.display().to_string(), e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Rejects a file pinned to a different subcommand.
    pub fn check_command(&self, expected: &str) -> Result<()> {
        match &self.command {
            Some(c) if c != expected => Err(CliError::config(
                "command",
                format!("file is for `{c}`, not `{expected}`"),
            )),
            _ => Ok(()),
        }
    }

    fn output_name(&self, default: &str) -> Result<String> {
        match &self.name {
            None => Ok(default.to_string()),
            Some(n) if n.is_empty() || n.contains(['/', '\\']) || n.starts_with('.') => {
                Err(CliError::config("name", format!("`{n}` is not a plain file stem")))
            }
            Some(n) => Ok(n.clone()),
        }
    }

    fn problem(&self) -> Result<&ProblemSection> {
        self.problem.as_ref().ok_or_else(|| CliError::config("problem", "section is required"))
    }

    fn mesh(&self) -> Result<&MeshSection> {
        self.mesh.as_ref().ok_or_else(|| CliError::config("mesh", "section is required"))
    }

    pub fn converge_plan(&self) -> Result<ConvergePlan> {
        self.check_command("converge")?;
        let name = self.output_name("converge")?;
        let p = self.problem()?;
        reject_list(p, "problem")?;
        let base = problem_config(p, "problem", Scheme::Ml1)?;
        let schemes = match (&p.schemes, &p.scheme) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("problem.schemes", "give either `scheme` or `schemes`"))
            }
            (Some(list), None) => {
                if list.is_empty() {
                    return Err(CliError::config("problem.schemes", "must not be empty"));
                }
                let mut out = Vec::with_capacity(list.len());
                for (i, s) in list.iter().enumerate() {
                    let sc = parse_scheme(s, &format!("problem.schemes[{i}]"))?;
                    if out.contains(&sc) {
                        return Err(CliError::config(format!("problem.schemes[{i}]"), format!("duplicate scheme `{s}`")));
                    }
                    out.push(sc);
                }
                out
            }
            (None, _) => vec![base.scheme],
        };
        let mesh = self.mesh()?;
        let family = mesh_family(mesh)?;
        let sizes = sizes(mesh, "mesh.sizes")?;
        let reference = match mesh.reference {
            None => return Err(CliError::config("mesh.reference", "required")),
            Some(r) => positive(r, "mesh.reference")?,
        };
        if sizes.iter().any(|&m| m >= reference) {
            return Err(CliError::config("mesh.reference", format!("must exceed every sweep size, got {reference}")));
        }
        let time = self.time.as_ref().ok_or_else(|| CliError::config("time", "section is required"))?;
        let policy = match (time.lambda, time.tau) {
            (Some(l), None) => TauPolicy::Lambda(positive_f64(l, "time.lambda")?),
            (None, Some(t)) => TauPolicy::Fixed(positive_f64(t, "time.tau")?),
            _ => return Err(CliError::config("time", "give exactly one of `lambda` or `tau`")),
        };
        let t_end = match time.t_end {
            None => return Err(CliError::config("time.t_end", "required")),
            Some(t) => positive_f64(t, "time.t_end")?,
        };
        Ok(ConvergePlan {
            name,
            base,
            schemes,
            family,
            sizes,
            reference,
            policy,
            t_end,
        })
    }

    pub fn energy_plan(&self) -> Result<EnergyPlan> {
        self.check_command("energy")?;
        let name = self.output_name("energy")?;
        let p = self.problem()?;
        if p.schemes.is_some() {
            return Err(CliError::config("problem.schemes", "energy runs take a single `scheme`"));
        }
        require_alpha(p, "problem")?;
        let base = problem_config(p, "problem", Scheme::Ml2)?;
        let runs = match &p.initial {
            Some(InitialSpec::Many(list)) => {
                if list.is_empty() {
                    return Err(CliError::config("problem.initial", "must not be empty"));
                }
                list.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let init = parse_initial(s, &format!("problem.initial[{i}]"))?;
                        Ok(ProblemConfig { initial: init, ..base.clone() })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            _ => vec![base],
        };
        let mesh = self.mesh()?;
        let family = mesh_family(mesh)?;
        if mesh.sizes.is_some() {
            return Err(CliError::config("mesh.sizes", "energy runs take a single `m`"));
        }
        let m = match mesh.m {
            None => return Err(CliError::config("mesh.m", "required")),
            Some(m) => positive(m, "mesh.m")?,
        };
        let run = self.run.clone().unwrap_or_default();
        if run.controls.is_some() {
            return Err(CliError::config("run.controls", "energy runs take a single `control`"));
        }
        let mut bcfg = blowup_config(&run)?;
        bcfg.control = match &run.control {
            None => Control::K,
            Some(c) => parse_control(c, "run.control")?,
        };
        if bcfg.t_end.is_none() {
            return Err(CliError::config("run.t_end", "required for energy runs"));
        }
        Ok(EnergyPlan { name, runs, family, m, bcfg })
    }

    pub fn blowup_plan(&self) -> Result<BlowupPlan> {
        self.check_command("blowup")?;
        let name = self.output_name("blowup")?;
        let mut cases = Vec::new();
        let sections: Vec<(String, &ProblemSection)> = match (&self.problem, self.cases.is_empty()) {
            (Some(_), false) => {
                return Err(CliError::config("problem", "give either `[problem]` or `[[case]]` tables"))
            }
            (Some(p), true) => vec![("problem".into(), p)],
            (None, false) => self.cases.iter().enumerate().map(|(i, c)| (format!("case[{i}]"), c)).collect(),
            (None, true) => return Err(CliError::config("case", "at least one `[[case]]` is required")),
        };
        for (i, (path, p)) in sections.iter().enumerate() {
            if p.schemes.is_some() {
                return Err(CliError::config(format!("{path}.schemes"), "blow-up cases take a single `scheme`"));
            }
            require_alpha(p, path)?;
            reject_list(p, path)?;
            let cfg = problem_config(p, path, Scheme::Ml2)?;
            let label = match &p.name {
                Some(n) if n.is_empty() || n.contains([',', '"', '\n']) => {
                    return Err(CliError::config(format!("{path}.name"), "must be non-empty without commas or quotes"))
                }
                Some(n) => n.clone(),
                None => format!("case{}", i + 1),
            };
            if cases.iter().any(|(l, _): &(String, ProblemConfig)| *l == label) {
                return Err(CliError::config(format!("{path}.name"), format!("duplicate case name `{label}`")));
            }
            cases.push((label, cfg));
        }
        let mesh = self.mesh()?;
        let family = mesh_family(mesh)?;
        let sizes = sizes(mesh, "mesh.sizes")?;
        let run = self.run.clone().unwrap_or_default();
        if run.control.is_some() {
            return Err(CliError::config("run.control", "blow-up runs take a `controls` list"));
        }
        let bcfg = blowup_config(&run)?;
        let controls = match &run.controls {
            None => vec![Control::K, Control::I],
            Some(list) if list.is_empty() => return Err(CliError::config("run.controls", "must not be empty")),
            Some(list) => {
                let mut out = Vec::new();
                for (i, c) in list.iter().enumerate() {
                    let ctl = parse_control(c, &format!("run.controls[{i}]"))?;
                    if out.contains(&ctl) {
                        return Err(CliError::config(format!("run.controls[{i}]"), format!("duplicate control `{c}`")));
                    }
                    out.push(ctl);
                }
                out
            }
        };
        Ok(BlowupPlan { name, cases, family, sizes, controls, bcfg })
    }

    pub fn eigen_plan(&self) -> Result<EigenPlan> {
        self.check_command("eigen")?;
        let name = self.output_name("eigen")?;
        let p = self.problem()?;
        let n_dim = match p.n_dim {
            None => return Err(CliError::config("problem.n_dim", "required")),
            Some(n) if n < 2 => return Err(CliError::config("problem.n_dim", format!("must be >= 2, got {n}"))),
            Some(n) => n as usize,
        };
        let mesh = self.mesh()?;
        let family = mesh_family(mesh)?;
        let sizes = sizes(mesh, "mesh.sizes")?;
        Ok(EigenPlan { name, n_dim, family, sizes })
    }
}

fn span_note(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

#[derive(Debug, Clone)]
pub struct ConvergePlan {
    pub name: String,
    pub base: ProblemConfig,
    pub schemes: Vec<Scheme>,
    pub family: MeshFamily,
    pub sizes: Vec<usize>,
    pub reference: usize,
    pub policy: TauPolicy,
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyPlan {
    pub name: String,
    pub runs: Vec<ProblemConfig>,
    pub family: MeshFamily,
    pub m: usize,
    pub bcfg: BlowupConfig,
}

#[derive(Debug, Clone)]
pub struct BlowupPlan {
    pub name: String,
    pub cases: Vec<(String, ProblemConfig)>,
    pub family: MeshFamily,
    pub sizes: Vec<usize>,
    pub controls: Vec<Control>,
    pub bcfg: BlowupConfig,
}

#[derive(Debug, Clone)]
pub struct EigenPlan {
    pub name: String,
    pub n_dim: usize,
    pub family: MeshFamily,
    pub sizes: Vec<usize>,
}

fn positive(v: i64, path: &str) -> Result<usize> {
    if v < 1 {
        return Err(CliError::config(path, format!("must be >= 1, got {v}")));
    }
    Ok(v as usize)
}

fn positive_f64(v: f64, path: &str) -> Result<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::config(path, format!("must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn require_alpha(p: &ProblemSection, path: &str) -> Result<()> {
    if p.alpha.is_none() {
        return Err(CliError::config(format!("{path}.alpha"), "required"));
    }
    Ok(())
}

fn reject_list(p: &ProblemSection, path: &str) -> Result<()> {
    if let Some(InitialSpec::Many(_)) = p.initial {
        return Err(CliError::config(format!("{path}.initial"), "a list of initial data is only accepted by energy runs"));
    }
    Ok(())
}

fn parse_scheme(s: &str, path: &str) -> Result<Scheme> {
    s.parse().map_err(|e: mlheat::Error| CliError::config(path, e))
}

fn parse_control(s: &str, path: &str) -> Result<Control> {
    s.parse().map_err(|e: mlheat::Error| CliError::config(path, e))
}

fn parse_initial(s: &str, path: &str) -> Result<InitialData> {
    s.parse().map_err(|e: mlheat::Error| CliError::config(path, e))
}

fn problem_config(p: &ProblemSection, path: &str, default_scheme: Scheme) -> Result<ProblemConfig> {
    let n_dim = match p.n_dim {
        None => return Err(CliError::config(format!("{path}.n_dim"), "required")),
        Some(n) if n < 2 => return Err(CliError::config(format!("{path}.n_dim"), format!("must be >= 2, got {n}"))),
        Some(n) => n as usize,
    };
    let nonlinearity = match p.alpha {
        None => Nonlinearity::zero(),
        Some(a) => Nonlinearity::power(positive_f64(a, &format!("{path}.alpha"))?),
    };
    let initial = match &p.initial {
        None => return Err(CliError::config(format!("{path}.initial"), "required")),
        Some(InitialSpec::Preset(s)) => parse_initial(s, &format!("{path}.initial"))?,
        Some(InitialSpec::Many(list)) => match list.first() {
            Some(s) => parse_initial(s, &format!("{path}.initial[0]"))?,
            None => return Err(CliError::config(format!("{path}.initial"), "must not be empty")),
        },
        Some(InitialSpec::Table { x, u }) => {
            if x.iter().chain(u).any(|v| !v.is_finite()) {
                return Err(CliError::config(format!("{path}.initial"), "table values must be finite"));
            }
            InitialData::table(x.clone(), u.clone()).map_err(|e| CliError::config(format!("{path}.initial"), e))?
        }
    };
    let scheme = match &p.scheme {
        None => default_scheme,
        Some(s) => parse_scheme(s, &format!("{path}.scheme"))?,
    };
    let mut cfg = ProblemConfig::new(n_dim, nonlinearity, initial, scheme)
        .map_err(|e| CliError::config(path, e))?;
    if let Some(q) = p.quad_points {
        let q = positive(q, &format!("{path}.quad_points"))?;
        cfg = cfg.with_quad_points(q);
    }
    Ok(cfg)
}

fn mesh_family(mesh: &MeshSection) -> Result<MeshFamily> {
    match &mesh.family {
        None => Ok(MeshFamily::Uniform),
        Some(f) => f.parse().map_err(|e: mlheat::Error| CliError::config("mesh.family", e)),
    }
}

fn sizes(mesh: &MeshSection, path: &str) -> Result<Vec<usize>> {
    if mesh.m.is_some() {
        return Err(CliError::config("mesh.m", "this subcommand takes a `sizes` list"));
    }
    let list = mesh.sizes.as_ref().ok_or_else(|| CliError::config(path, "required"))?;
    if list.is_empty() {
        return Err(CliError::config(path, "must not be empty"));
    }
    let mut out = Vec::with_capacity(list.len());
    for (i, &m) in list.iter().enumerate() {
        let m = positive(m, &format!("{path}[{i}]"))?;
        if out.last().is_some_and(|&prev| m <= prev) {
            return Err(CliError::config(format!("{path}[{i}]"), "sizes must be strictly increasing"));
        }
        out.push(m);
    }
    Ok(out)
}

fn blowup_config(run: &RunSection) -> Result<BlowupConfig> {
    let d = BlowupConfig::default();
    let tau_form = match &run.tau_form {
        None => d.tau_form,
        Some(s) => s
            .parse::<TauForm>()
            .map_err(|e| CliError::config("run.tau_form", e))?,
    };
    let delta = match run.delta {
        None => d.delta,
        Some(v) => {
            if !(v > 0.0 && v <= 1.0) {
                return Err(CliError::config("run.delta", format!("must lie in (0, 1], got {v}")));
            }
            v
        }
    };
    let threshold = match run.threshold {
        None => d.threshold,
        Some(v) => positive_f64(v, "run.threshold")?,
    };
    let n_max = match run.n_max {
        None => d.n_max,
        Some(v) => positive(v, "run.n_max")?,
    };
    let tau_min = match run.tau_min {
        None => d.tau_min,
        Some(v) => positive_f64(v, "run.tau_min")?,
    };
    let record_stride = match run.record_stride {
        None => d.record_stride,
        Some(v) => positive(v, "run.record_stride")?,
    };
    let t_end = match run.t_end {
        None => None,
        Some(v) => Some(positive_f64(v, "run.t_end")?),
    };
    let cfg = BlowupConfig {
        control: d.control,
        tau_form,
        delta,
        threshold,
        n_max,
        tau_min,
        record_stride,
        t_end,
    };
    cfg.validate().map_err(|e| CliError::config("run", e))?;
    Ok(cfg)
}
