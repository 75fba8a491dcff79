//! Subcommand drivers. Each returns the CSV text; sweep entries run on the
//! current rayon pool and rows are assembled in configuration order.

use std::sync::Arc;

use mlheat::blowup::{run_blowup, validate_difference_inequality, BlowupResult, Control};
use mlheat::functionals::{error_metrics, loglog_slope, EnergyReport, ErrorMetrics};
use mlheat::schemes::{run, Guards, Scheme, StopReason};
use mlheat::spectral::eigen_convergence_table;
use mlheat::{Mesh, NodalFunction};
use rayon::prelude::*;

use crate::config::{BlowupPlan, ConvergePlan, EigenPlan, EnergyPlan};
use crate::error::{CliError, Result};

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Self { w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<String> {
        let bytes = self.w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn build_mesh(family: mlheat::MeshFamily, m: usize) -> Result<Arc<Mesh>> {
    Ok(Arc::new(family.build(m)?))
}

#[derive(Debug, Clone)]
pub struct ConvergeRow {
    pub scheme: Scheme,
    pub m: usize,
    pub h: f64,
    pub errors: ErrorMetrics,
}

/// Errors of each sweep size against that scheme's own run on the reference mesh.
pub fn converge_rows(plan: &ConvergePlan) -> Result<Vec<ConvergeRow>> {
    let mut jobs = Vec::new();
    for &scheme in &plan.schemes {
        for &m in plan.sizes.iter().chain(std::iter::once(&plan.reference)) {
            jobs.push((scheme, m));
        }
    }
    let finals: Vec<NodalFunction> = jobs
        .par_iter()
        .map(|&(scheme, m)| {
            let cfg = plan.base.clone().with_scheme(scheme);
            let traj = run(&cfg, build_mesh(plan.family, m)?, plan.policy, plan.t_end, Guards::default())?;
            if traj.stop != StopReason::Horizon {
                return Err(CliError::Numerical(format!(
                    "{} on m={m} stopped early ({:?}) at t={}",
                    scheme.name(),
                    traj.stop,
                    traj.final_state.t
                )));
            }
            Ok(traj.final_state.u)
        })
        .collect::<Result<_>>()?;
    let per_scheme = plan.sizes.len() + 1;
    let mut rows = Vec::new();
    for (k, &scheme) in plan.schemes.iter().enumerate() {
        let block = &finals[k * per_scheme..(k + 1) * per_scheme];
        let reference = &block[plan.sizes.len()];
        for (u, &m) in block.iter().zip(&plan.sizes) {
            rows.push(ConvergeRow {
                scheme,
                m,
                h: u.mesh().h(),
                errors: error_metrics(u, reference, plan.base.n_dim),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_converge(plan: &ConvergePlan) -> Result<String> {
    let rows = converge_rows(plan)?;
    let mut t = Table::new(&["scheme", "m", "h", "E1", "E2", "Einf"])?;
    for r in &rows {
        t.row([
            r.scheme.name().to_string(),
            r.m.to_string(),
            fmt_f64(r.h),
            fmt_f64(r.errors.e1),
            fmt_f64(r.errors.e2),
            fmt_f64(r.errors.einf),
        ])?;
    }
    for &scheme in &plan.schemes {
        let sel: Vec<&ConvergeRow> = rows.iter().filter(|r| r.scheme == scheme).collect();
        let h: Vec<f64> = sel.iter().map(|r| r.h).collect();
        let slope = |f: fn(&ErrorMetrics) -> f64| {
            let e: Vec<f64> = sel.iter().map(|r| f(&r.errors)).collect();
            loglog_slope(&h, &e)
        };
        let (s1, s2, sinf) = (slope(|e| e.e1), slope(|e| e.e2), slope(|e| e.einf));
        if s1.is_none() && s2.is_none() && sinf.is_none() {
            continue;
        }
        t.row([
            "# slope".to_string(),
            scheme.name().to_string(),
            fmt_opt(s1),
            fmt_opt(s2),
            fmt_opt(sinf),
        ])?;
    }
    t.finish()
}

/// One trajectory per initial datum, in configuration order.
pub fn energy_runs(plan: &EnergyPlan) -> Result<Vec<BlowupResult>> {
    let mesh = build_mesh(plan.family, plan.m)?;
    plan.runs
        .par_iter()
        .map(|cfg| Ok(run_blowup(cfg, &plan.bcfg, mesh.clone())?))
        .collect()
}

pub fn cmd_energy(plan: &EnergyPlan) -> Result<String> {
    let results = energy_runs(plan)?;
    let mut t = Table::new(&[
        "initial", "n", "t", "tau_n", "K_h", "I_h", "lumped_norm", "max_norm", "min_nodal",
    ])?;
    for (cfg, res) in plan.runs.iter().zip(&results) {
        let label = cfg.initial.to_string();
        for r in &res.history {
            t.row(energy_fields(&label, r))?;
        }
    }
    for (cfg, res) in plan.runs.iter().zip(&results) {
        t.row([
            "# stop".to_string(),
            cfg.initial.to_string(),
            format!("{:?}", res.stop),
            res.steps.to_string(),
            fmt_opt(res.t_m),
        ])?;
    }
    t.finish()
}

fn energy_fields(label: &str, r: &EnergyReport) -> [String; 9] {
    [
        label.to_string(),
        r.n.to_string(),
        fmt_f64(r.t),
        fmt_f64(r.tau),
        fmt_opt(r.k_h),
        fmt_opt(r.i_h),
        fmt_f64(r.lumped_norm),
        fmt_f64(r.max_norm),
        fmt_f64(r.min_nodal),
    ]
}

#[derive(Debug, Clone)]
pub struct BlowupRow {
    pub case: String,
    pub control: Control,
    pub m: usize,
    pub h: f64,
    pub alpha: f64,
    pub n_dim: usize,
    pub result: BlowupResult,
}

/// Rows ordered by case, then mesh size, then control.
pub fn blowup_rows(plan: &BlowupPlan) -> Result<Vec<BlowupRow>> {
    let mut jobs = Vec::new();
    for (case, cfg) in &plan.cases {
        for &m in &plan.sizes {
            for &control in &plan.controls {
                jobs.push((case, cfg, m, control));
            }
        }
    }
    jobs.par_iter()
        .map(|&(case, cfg, m, control)| {
            let mesh = build_mesh(plan.family, m)?;
            let h = mesh.h();
            let bcfg = mlheat::BlowupConfig { control, ..plan.bcfg };
            let result = run_blowup(cfg, &bcfg, mesh)?;
            Ok(BlowupRow {
                case: case.clone(),
                control,
                m,
                h,
                alpha: cfg.nonlinearity.alpha().expect("validated power nonlinearity"),
                n_dim: cfg.n_dim,
                result,
            })
        })
        .collect()
}

pub fn cmd_blowup(plan: &BlowupPlan) -> Result<String> {
    let rows = blowup_rows(plan)?;
    let mut t = Table::new(&["case", "control", "m", "h", "T_M", "steps", "bound_K", "detected"])?;
    for r in &rows {
        t.row([
            r.case.clone(),
            r.control.to_string(),
            r.m.to_string(),
            fmt_f64(r.h),
            fmt_opt(r.result.t_m),
            r.result.steps.to_string(),
            fmt_opt(r.result.bound_k),
            r.result.detected.to_string(),
        ])?;
    }
    for r in &rows {
        let rep = validate_difference_inequality(&r.result.history, r.alpha, r.n_dim);
        t.row([
            "# inequality".to_string(),
            r.case.clone(),
            r.control.to_string(),
            r.m.to_string(),
            rep.checked.to_string(),
            rep.violations.to_string(),
            rep.first_nonpositive_k.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
        if let Some(w) = &r.result.warning {
            t.row(["# warning".to_string(), r.case.clone(), r.control.to_string(), r.m.to_string(), w.clone()])?;
        }
        if let Some(step) = r.result.overflow_step {
            t.row(["# overflow".to_string(), r.case.clone(), r.control.to_string(), r.m.to_string(), step.to_string()])?;
        }
    }
    t.finish()
}

pub fn cmd_eigen(plan: &EigenPlan) -> Result<String> {
    let rows: Vec<_> = plan
        .sizes
        .par_iter()
        .map(|&m| eigen_convergence_table(plan.n_dim, plan.family, &[m]))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["m", "h", "mu_lumped", "mu_consistent", "iterations"])?;
    for r in rows.into_iter().flatten() {
        t.row([
            r.m.to_string(),
            fmt_f64(r.h),
            fmt_f64(r.mu_lumped),
            fmt_f64(r.mu_consistent),
            r.iterations.to_string(),
        ])?;
    }
    t.finish()
}
