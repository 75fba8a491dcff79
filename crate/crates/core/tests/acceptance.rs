//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.
//!
//! `cargo test -p mlheat --test acceptance -- 3 8` runs criteria 3 and 8 only.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use mlheat::blowup::{run_blowup, validate_difference_inequality, BlowupConfig, Control, TauForm};
use mlheat::functionals::{error_metrics, loglog_slope, min_nodal};
use mlheat::mesh::MeshFamily;
use mlheat::schemes::{
    manufactured_solution, manufactured_source, run, stability_tau, Guards, Nonlinearity, ProblemConfig,
    Scheme, State, Stepper, TauPolicy,
};
use mlheat::spectral::{eigen_convergence_table, smallest_eigenpair, DEFAULT_MAX_ITER, DEFAULT_TOL};
use mlheat::{InitialData, MassKind, Mesh, NodalFunction, WeightedForms};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "exact forms", c1_exact_forms),
    (2, "lumped integral identity", c2_lumped_identity),
    (3, "uniform-mesh convergence", c3_uniform_convergence),
    (4, "graded-mesh convergence vs standard FEM", c4_graded_convergence),
    (5, "discrete maximum principle", c5_dmp),
    (6, "K_h monotonicity", c6_k_monotone),
    (7, "eigenvalue oracles", c7_eigen),
    (8, "blow-up suite", c8_blowup),
    (9, "small-data decay", c9_decay),
    (10, "manufactured solution", c10_manufactured),
];

fn main() {
    let filters: Vec<usize> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(id, _, _)| filters.is_empty() || filters.contains(id))
        .collect();

    let results: Vec<(usize, &str, Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = selected
            .iter()
            .map(|&&(id, name, f)| {
                s.spawn(move || {
                    let t0 = Instant::now();
                    let out = f();
                    (id, name, out, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut failed = 0;
    for (id, name, out, secs) in &results {
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{name}]: {tag} ({secs:.1}s) {}", out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn uniform(m: usize) -> Arc<Mesh> {
    Arc::new(Mesh::uniform(m).unwrap())
}

fn forms(mesh: &Arc<Mesh>, n: usize) -> WeightedForms {
    WeightedForms::assemble(mesh.clone(), n).unwrap()
}

fn random_mesh(rng: &mut impl Rng, max_m: usize) -> Mesh {
    let m = rng.gen_range(2..=max_m);
    if rng.gen_bool(0.25) {
        return Mesh::sine_graded(m).unwrap();
    }
    let widths: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = widths.iter().sum();
    let mut nodes = vec![0.0];
    let mut acc = 0.0;
    for w in &widths {
        acc += w;
        nodes.push(acc / total);
    }
    *nodes.last_mut().unwrap() = 1.0;
    Mesh::from_nodes(nodes).unwrap()
}

fn c1_exact_forms() -> Outcome {
    let f = forms(&uniform(2), 2);
    let checks = [
        ("m_0", f.lumped_mass()[0], 1.0 / 24.0),
        ("m_1", f.lumped_mass()[1], 0.25),
        ("a_00", f.stiffness().get(0, 0), 0.5),
        ("a_01", f.stiffness().get(0, 1), -0.5),
        ("a_11", f.stiffness().get(1, 1), 2.0),
        ("(phi_1, phi_1)", f.consistent_mass().get(1, 1), 1.0 / 6.0),
    ];
    let worst = checks
        .iter()
        .map(|(_, got, want)| (got - want).abs())
        .fold(0.0, f64::max);
    let bad: Vec<&str> = checks
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-14)
        .map(|(name, _, _)| *name)
        .collect();
    Outcome::new(bad.is_empty(), format!("max deviation {worst:e}; mismatched {bad:?}"))
}

/// Four-point Gauss rule per element, exact for the degree ≤ 6 integrands here.
fn weighted_integral_oracle(nodes: &[f64], full: &[f64], n: usize) -> f64 {
    const GL4: [(f64, f64); 4] = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    ];
    let mut sum = 0.0;
    for j in 0..nodes.len() - 1 {
        let (a, b) = (nodes[j], nodes[j + 1]);
        for (t, w) in GL4 {
            let s = 0.5 * (t + 1.0);
            let x = a + (b - a) * s;
            let v = full[j] * (1.0 - s) + full[j + 1] * s;
            sum += 0.5 * (b - a) * w * x.powi(n as i32 - 1) * v;
        }
    }
    sum
}

fn c2_lumped_identity() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mesh = Arc::new(random_mesh(&mut rng, 100));
        let n = rng.gen_range(2..=7);
        let f = forms(&mesh, n);
        let m = mesh.num_elements();
        let w = NodalFunction::new(mesh.clone(), (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let ones = NodalFunction::new(mesh.clone(), vec![1.0; m]).unwrap();
        let lumped = f.lumped_inner(&ones, &w).unwrap();
        let exact = weighted_integral_oracle(mesh.nodes(), &w.full_values(), n);
        let scale: f64 = w.values().iter().zip(f.lumped_mass()).map(|(v, m)| (v * m).abs()).sum();
        worst = worst.max((lumped - exact).abs() / scale);
    }
    Outcome::new(worst <= 1e-13, format!("max relative deviation {worst:e} over 100 pairs"))
}

struct Sweep {
    hs: Vec<f64>,
    e2: Vec<f64>,
    einf: Vec<f64>,
}

fn sweep(cfg: &ProblemConfig, family: MeshFamily, ms: &[usize], m_ref: usize, lambda: f64, t_end: f64) -> Sweep {
    let guards = Guards {
        record_stride: usize::MAX,
        ..Guards::default()
    };
    let solve = |m: usize| {
        let mesh = Arc::new(family.build(m).unwrap());
        run(cfg, mesh, TauPolicy::Lambda(lambda), t_end, guards).unwrap().final_state.u
    };
    let reference = solve(m_ref);
    let mut out = Sweep {
        hs: vec![],
        e2: vec![],
        einf: vec![],
    };
    for &m in ms {
        let u = solve(m);
        let e = error_metrics(&u, &reference, cfg.n_dim);
        out.hs.push(u.mesh().h());
        out.e2.push(e.e2);
        out.einf.push(e.einf);
    }
    out
}

fn c3_uniform_convergence() -> Outcome {
    let cfg = ProblemConfig::new(3, Nonlinearity::power(4.0), InitialData::Cosine(1.0), Scheme::Ml1).unwrap();
    let s = sweep(&cfg, MeshFamily::Uniform, &[20, 40, 80, 160], 480, 0.5, 0.005);
    let e2 = loglog_slope(&s.hs, &s.e2).unwrap();
    let einf = loglog_slope(&s.hs, &s.einf).unwrap();
    Outcome::new(
        (1.8..=2.2).contains(&e2) && einf >= 1.0,
        format!("ML1 E2 slope {e2:.3} (want [1.8, 2.2]), Einf slope {einf:.3} (want >= 1.0)"),
    )
}

fn c4_graded_convergence() -> Outcome {
    let base = ProblemConfig::new(4, Nonlinearity::power(3.0), InitialData::Cosine(3.0), Scheme::Ml1).unwrap();
    let ms = [20, 40, 80, 160];
    let ml1 = sweep(&base, MeshFamily::Sine, &ms, 480, 0.11, 0.0033);
    let std = sweep(&base.clone().with_scheme(Scheme::Standard), MeshFamily::Sine, &ms, 480, 0.11, 0.0033);
    let ml1_e2 = loglog_slope(&ml1.hs, &ml1.e2).unwrap();
    let ml1_inf = loglog_slope(&ml1.hs, &ml1.einf).unwrap();
    let std_inf = loglog_slope(&std.hs, &std.einf).unwrap();
    let pass = (1.8..=2.2).contains(&ml1_e2) && (0.8..=1.3).contains(&std_inf) && std_inf < ml1_inf - 0.3;
    Outcome::new(
        pass,
        format!(
            "ML1 E2 slope {ml1_e2:.3} (want [1.8, 2.2]); STD Einf slope {std_inf:.3} (want [0.8, 1.3] and < ML1 Einf slope {ml1_inf:.3} - 0.3); STD Einf by m {:?}",
            ms.iter().zip(&std.einf).map(|(m, e)| format!("{m}:{e:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn c5_dmp() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(55);
    let mut worst_implicit = f64::INFINITY;
    let mut worst_explicit = f64::INFINITY;
    for _ in 0..1000 {
        let mesh = Arc::new(random_mesh(&mut rng, 60));
        let m = mesh.num_elements();
        let n = rng.gen_range(2..=6);
        let alpha = rng.gen_range(0.1..4.0);
        let f = forms(&mesh, n);
        let exact = stability_tau(&f).0;
        let scale = rng.gen_range(0.0..2.0);
        let vals: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { scale * rng.gen_range(0.0..1.0) })
            .collect();
        let u0 = NodalFunction::new(mesh.clone(), vals).unwrap();
        for factor in [0.1, 1.0, 10.0] {
            let cfg = ProblemConfig::new(n, Nonlinearity::power(alpha), InitialData::Cosine(1.0), Scheme::Ml1).unwrap();
            let mut stepper = Stepper::new(&f, &cfg).unwrap();
            let mut s = State::initial(u0.clone());
            for _ in 0..5 {
                s = stepper.step(&s, factor * exact).unwrap();
                worst_implicit = worst_implicit.min(min_nodal(&s.u));
            }
        }
        let cfg = ProblemConfig::new(n, Nonlinearity::power(alpha), InitialData::Cosine(1.0), Scheme::Ml2).unwrap();
        let mut stepper = Stepper::new(&f, &cfg).unwrap();
        let mut s = State::initial(u0);
        for _ in 0..5 {
            let tau = rng.gen_range(0.01..=1.0) * exact;
            s = stepper.step(&s, tau).unwrap();
            worst_explicit = worst_explicit.min(min_nodal(&s.u));
        }
    }
    Outcome::new(
        worst_implicit >= -1e-14 && worst_explicit >= -1e-14,
        format!("min nodal value ML1 {worst_implicit:e}, ML2 {worst_explicit:e} (want >= -1e-14)"),
    )
}

fn c6_k_monotone() -> Outcome {
    let mesh = uniform(50);
    let mut details = vec![];
    let mut pass = true;
    for c in [1.0, 13.0] {
        let cfg = ProblemConfig::new(5, Nonlinearity::power(4.0 / 3.0), InitialData::Cosine(c), Scheme::Ml2).unwrap();
        let b = BlowupConfig {
            control: Control::K,
            tau_form: TauForm::Theory,
            n_max: 200_000,
            ..BlowupConfig::default()
        };
        let res = run_blowup(&cfg, &b, mesh.clone()).unwrap();
        let mut increases = 0;
        for w in res.history.windows(2) {
            let (k0, k1) = (w[0].k_h.unwrap(), w[1].k_h.unwrap());
            if k1 > k0 + 1e-12 * k0.abs() {
                increases += 1;
            }
        }
        pass &= increases == 0;
        details.push(format!(
            "u0={c}cos: {} steps, detected={}, increases={increases}",
            res.steps, res.detected
        ));
    }
    Outcome::new(pass, details.join("; "))
}

fn bessel_j0_zero() -> f64 {
    let j0 = |x: f64| {
        let q = -(x * x) / 4.0;
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..60 {
            term *= q / (k * k) as f64;
            sum += term;
        }
        sum
    };
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if j0(a) * j0(c) <= 0.0 {
            b = c;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn c7_eigen() -> Outcome {
    let mut pass = true;
    let mut details = vec![];
    for (n, exact) in [(3, PI * PI), (2, bessel_j0_zero().powi(2))] {
        let f = forms(&uniform(200), n);
        let e = smallest_eigenpair(&f, MassKind::Lumped, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let rel = (e.mu - exact).abs() / exact;
        let nonneg = e.psi.values().iter().all(|&v| v >= 0.0);
        let integral = f.weighted_integral(&e.psi).unwrap();
        let rows = eigen_convergence_table(n, MeshFamily::Uniform, &[25, 50, 100, 200]).unwrap();
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let errs: Vec<f64> = rows.iter().map(|r| (r.mu_lumped - exact).abs()).collect();
        let slope = loglog_slope(&hs, &errs).unwrap();
        pass &= rel <= 1e-3 && nonneg && (integral - 1.0).abs() <= 1e-12 && (1.7..=2.3).contains(&slope);
        details.push(format!(
            "N={n}: mu={:.6} rel err {rel:.2e}, nonneg={nonneg}, integral-1={:.1e}, slope {slope:.3}",
            e.mu,
            integral - 1.0
        ));
    }
    Outcome::new(pass, details.join("; "))
}

pub fn blowup_cases() -> [(usize, f64, InitialData); 3] {
    [
        (5, 0.39, InitialData::Cosine(800.0)),
        (4, 0.49, InitialData::Parabola(800.0)),
        (3, 0.66, InitialData::Gauss(1000.0)),
    ]
}

fn c8_blowup() -> Outcome {
    let mut undetected = vec![];
    let mut order_fail = vec![];
    let mut bound_fail = vec![];
    let mut j10_fail = vec![];
    for (case, (n, alpha, u0)) in blowup_cases().into_iter().enumerate() {
        let cfg = ProblemConfig::new(n, Nonlinearity::power(alpha), u0, Scheme::Ml2).unwrap();
        for m in [16, 32, 64] {
            let mut t = [f64::NAN; 2];
            for (k, control) in [Control::K, Control::I].into_iter().enumerate() {
                let b = BlowupConfig {
                    control,
                    tau_form: TauForm::Experiment,
                    ..BlowupConfig::default()
                };
                let res = run_blowup(&cfg, &b, uniform(m)).unwrap();
                let tag = format!("case{} m={m} {control}", case + 1);
                match res.t_m {
                    Some(tm) if res.detected && tm.is_finite() => t[k] = tm,
                    _ => undetected.push(tag.clone()),
                }
                if let (Some(bound), Some(tm)) = (res.bound_k, res.t_m) {
                    if bound < tm {
                        bound_fail.push(tag.clone());
                    }
                }
                let rep = validate_difference_inequality(&res.history, alpha, n);
                if !rep.passed() {
                    j10_fail.push(format!("{tag} ({} of {})", rep.violations, rep.checked));
                }
            }
            if !(t[1] <= t[0]) {
                order_fail.push(format!("case{} m={m} (I {:.4} > K {:.4})", case + 1, t[1], t[0]));
            }
        }
    }
    let pass = undetected.is_empty() && order_fail.is_empty() && bound_fail.is_empty() && j10_fail.is_empty();
    Outcome::new(
        pass,
        format!(
            "undetected {undetected:?}; I>K ordering violations {order_fail:?}; bound_K < T_M {bound_fail:?}; difference-inequality violations {j10_fail:?}"
        ),
    )
}

fn c9_decay() -> Outcome {
    let cfg = ProblemConfig::new(5, Nonlinearity::power(4.0 / 3.0), InitialData::Cosine(1.0), Scheme::Ml2).unwrap();
    let b = BlowupConfig {
        control: Control::K,
        tau_form: TauForm::Theory,
        n_max: 200_000,
        ..BlowupConfig::default()
    };
    let res = run_blowup(&cfg, &b, uniform(50)).unwrap();
    let h = &res.history;
    let last_increase = h
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].lumped_norm > w[0].lumped_norm || w[1].i_h.unwrap() > w[0].i_h.unwrap())
        .map(|(i, _)| i + 1)
        .last()
        .unwrap_or(0);
    let (first, last) = (&h[0], h.last().unwrap());
    let decayed = last.lumped_norm < 1e-6 * first.lumped_norm && last.i_h.unwrap() < 1e-6 * first.i_h.unwrap();
    let transient_ok = last_increase * 10 <= h.len();
    Outcome::new(
        !res.detected && decayed && transient_ok,
        format!(
            "detected={}, {} steps to t={:.3}, monotone after step {last_increase} (t={:.4}), final norm {:.2e}, final I_h {:.2e}",
            res.detected,
            res.steps,
            last.t,
            h[last_increase].t,
            last.lumped_norm,
            last.i_h.unwrap()
        ),
    )
}

/// `‖x^{(N-1)/2}(u_h − u(·, T))‖` by a five-point Gauss rule per element.
fn weighted_l2_error(u: &NodalFunction, n: usize, t: f64) -> f64 {
    const GL5: [(f64, f64); 5] = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let nodes = u.mesh().nodes();
    let full = u.full_values();
    let mut sum = 0.0;
    for j in 0..nodes.len() - 1 {
        let (a, b) = (nodes[j], nodes[j + 1]);
        for (r, w) in GL5 {
            let s = 0.5 * (r + 1.0);
            let x = a + (b - a) * s;
            let d = full[j] * (1.0 - s) + full[j + 1] * s - (-t).exp() * (FRAC_PI_2 * x).cos();
            sum += 0.5 * (b - a) * w * x.powi(n as i32 - 1) * d * d;
        }
    }
    sum.sqrt()
}

fn c10_manufactured() -> Outcome {
    let t_end = 0.1;
    let ms = [16, 32, 64, 128];
    let mut pass = true;
    let mut details = vec![];
    for n in 2..=5 {
        let cfg = ProblemConfig::new(n, Nonlinearity::zero(), InitialData::Cosine(1.0), Scheme::Ml1)
            .unwrap()
            .with_source(manufactured_source(n));
        let (mut hs, mut errs) = (vec![], vec![]);
        for &m in &ms {
            let mesh = uniform(m);
            let traj = run(&cfg, mesh.clone(), TauPolicy::Lambda(1.0), t_end, Guards::default()).unwrap();
            let u = traj.final_state.u;
            debug_assert!((manufactured_solution(0.0, t_end) - (-t_end).exp()).abs() < 1e-15);
            hs.push(mesh.h());
            errs.push(weighted_l2_error(&u, n, t_end));
        }
        let slope = loglog_slope(&hs, &errs).unwrap();
        pass &= (1.8..=2.2).contains(&slope);
        details.push(format!("N={n}: E2 slope {slope:.3}"));
    }
    Outcome::new(pass, format!("{} (want 2.0 +/- 0.2)", details.join(", ")))
}
