use std::sync::Arc;

use mlheat::functionals::{lumped_norm, max_norm, min_nodal};
use mlheat::schemes::{
    auxiliary_step, run, stability_tau, step_ml1, step_ml2, step_standard, step_variant, AuxiliaryKind,
    Guards, Nonlinearity, ProblemConfig, Scheme, State, Stepper, TauPolicy,
};
use mlheat::{InitialData, Mesh, NodalFunction, WeightedForms};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn random_mesh(rng: &mut impl Rng, max_m: usize) -> Mesh {
    let m = rng.gen_range(2..=max_m);
    if rng.gen_bool(0.3) {
        return Mesh::sine_graded(m).unwrap();
    }
    let widths: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
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

fn power_cfg(n: usize, alpha: f64, scheme: Scheme) -> ProblemConfig {
    ProblemConfig::new(n, Nonlinearity::power(alpha), InitialData::Cosine(1.0), scheme).unwrap()
}

#[test]
fn implicit_steps_match_dense_oracle() {
    let mesh = Arc::new(Mesh::uniform(4).unwrap());
    for n in [2, 3, 5] {
        let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
        let u0 = NodalFunction::new(mesh.clone(), vec![1.0, 0.8, 0.5, 0.2]).unwrap();
        let state = State::initial(u0.clone());
        let tau = 0.01;
        let cfg = power_cfg(n, 2.0, Scheme::Ml1);
        let load = forms.nonlinear_load(&u0, |s| s * s.abs().powi(2), 5).unwrap();
        let dim = 4;
        let a = forms.stiffness();
        let mc = forms.consistent_mass();
        let ml = forms.lumped_mass();

        let lhs: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| a.get(i, j) + if i == j { ml[i] / tau } else { 0.0 }).collect())
            .collect();
        let rhs: Vec<f64> = (0..dim).map(|i| ml[i] / tau * u0.values()[i] + load[i]).collect();
        let expected = dense_solve(lhs, rhs);
        let got = step_ml1(&state, tau, &cfg, &forms).unwrap();
        for (g, e) in got.u.values().iter().zip(&expected) {
            assert!((g - e).abs() < 1e-13 * e.abs().max(1.0));
        }

        let lhs: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| a.get(i, j) + mc.get(i, j) / tau).collect())
            .collect();
        let rhs: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| mc.get(i, j) * u0.values()[j]).sum::<f64>() / tau + load[i])
            .collect();
        let expected = dense_solve(lhs, rhs);
        let got = step_standard(&state, tau, &cfg, &forms).unwrap();
        for (g, e) in got.u.values().iter().zip(&expected) {
            assert!((g - e).abs() < 1e-13 * e.abs().max(1.0));
        }
    }
}

#[test]
fn two_element_implicit_step_without_reaction() {
    let mesh = Arc::new(Mesh::uniform(2).unwrap());
    let forms = WeightedForms::assemble(mesh.clone(), 2).unwrap();
    let cfg = ProblemConfig::new(2, Nonlinearity::zero(), InitialData::Cosine(1.0), Scheme::Ml1).unwrap();
    let u0 = NodalFunction::new(mesh, vec![1.0, 1.0]).unwrap();
    let tau = 1.0 / 12.0;
    let got = step_ml1(&State::initial(u0), tau, &cfg, &forms).unwrap();
    // (diag(1/24, 1/4)·12 + A) u = diag(1/24, 1/4)·12·(1, 1)
    let lhs = vec![vec![0.5 + 0.5, -0.5], vec![-0.5, 3.0 + 2.0]];
    let expected = dense_solve(lhs, vec![0.5, 3.0]);
    for (g, e) in got.u.values().iter().zip(&expected) {
        assert!((g - e).abs() < 1e-15);
    }
}

#[test]
fn explicit_scheme_loses_positivity_beyond_its_limit() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let mut found = false;
    for _ in 0..20 {
        let mesh = Arc::new(Mesh::uniform(rng.gen_range(4..30)).unwrap());
        let n = rng.gen_range(2..6);
        let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
        let cfg = power_cfg(n, 1.0, Scheme::Ml2);
        let tau = 4.0 * stability_tau(&forms).0;
        let vals: Vec<f64> = (0..mesh.num_elements()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut s = State::initial(NodalFunction::new(mesh, vals).unwrap());
        let mut stepper = Stepper::new(&forms, &cfg).unwrap();
        for _ in 0..100 {
            s = stepper.step(&s, tau).unwrap();
            if min_nodal(&s.u) < 0.0 {
                found = true;
                break;
            }
        }
        if found {
            break;
        }
    }
    assert!(found);
}

#[test]
fn linear_decay_of_lumped_norm() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    for _ in 0..30 {
        let mesh = Arc::new(random_mesh(&mut rng, 40));
        let n = rng.gen_range(2..6);
        let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
        let exact = stability_tau(&forms).0;
        let vals: Vec<f64> = (0..mesh.num_elements()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (scheme, tau) in [(Scheme::Ml1, 50.0 * exact), (Scheme::Ml1, 0.3 * exact), (Scheme::Ml2, exact)] {
            let cfg = ProblemConfig::new(n, Nonlinearity::zero(), InitialData::Cosine(1.0), scheme).unwrap();
            let mut stepper = Stepper::new(&forms, &cfg).unwrap();
            let mut s = State::initial(NodalFunction::new(mesh.clone(), vals.clone()).unwrap());
            let mut prev = lumped_norm(&s.u, &forms).unwrap();
            for _ in 0..50 {
                s = stepper.step(&s, tau).unwrap();
                let cur = lumped_norm(&s.u, &forms).unwrap();
                assert!(cur <= prev * (1.0 + 1e-13), "{scheme}: {cur} > {prev}");
                prev = cur;
            }
        }
    }
}

#[test]
fn auxiliary_problems_are_max_norm_stable() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(21);
    for _ in 0..200 {
        let mesh = Arc::new(random_mesh(&mut rng, 30));
        let m = mesh.num_elements();
        let n = rng.gen_range(2..6);
        let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
        let exact = stability_tau(&forms).0;
        let u = NodalFunction::new(mesh.clone(), (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let g = NodalFunction::new(mesh.clone(), (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
        for (kind, tau) in [
            (AuxiliaryKind::Implicit, rng.gen_range(0.01..100.0) * exact),
            (AuxiliaryKind::Explicit, rng.gen_range(0.01..1.0) * exact),
        ] {
            let next = auxiliary_step(kind, &u, &g, tau, &forms).unwrap();
            let bound = max_norm(&u) + tau * max_norm(&g);
            assert!(max_norm(&next) <= bound * (1.0 + 1e-13), "{kind:?}");
        }
    }
}

#[test]
fn explicit_step_without_reaction_is_a_convex_combination() {
    let mesh = Arc::new(Mesh::uniform(6).unwrap());
    let forms = WeightedForms::assemble(mesh.clone(), 3).unwrap();
    let cfg = ProblemConfig::new(3, Nonlinearity::zero(), InitialData::Cosine(1.0), Scheme::Ml2).unwrap();
    let u = NodalFunction::new(mesh, vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25]).unwrap();
    let tau = stability_tau(&forms).0;
    let next = step_ml2(&State::initial(u.clone()), tau, &cfg, &forms).unwrap();
    assert!(max_norm(&next.u) <= max_norm(&u));
}

#[test]
fn time_is_the_sum_of_increments() {
    let mesh = Arc::new(Mesh::sine_graded(24).unwrap());
    let cfg = power_cfg(4, 3.0, Scheme::Ml1).with_scheme(Scheme::Ml1);
    let traj = run(&cfg, mesh, TauPolicy::Lambda(0.11), 0.0033, Guards::default()).unwrap();
    let sum: f64 = traj.records.iter().map(|r| r.tau).sum();
    assert!((sum - traj.final_state.t).abs() <= 1e-12 * traj.final_state.t);
    assert_eq!(traj.final_state.t, 0.0033);
}

fn dmp_case(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mesh = Arc::new(random_mesh(&mut rng, 40));
    let m = mesh.num_elements();
    let n = rng.gen_range(2..7);
    let alpha = rng.gen_range(0.1..4.0);
    let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
    let exact = stability_tau(&forms).0;
    let scale = rng.gen_range(0.0..3.0);
    let vals: Vec<f64> = (0..m)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { scale * rng.gen_range(0.0..1.0) })
        .collect();
    let state = State::initial(NodalFunction::new(mesh, vals).unwrap());
    for factor in [0.1, 1.0, 10.0] {
        for scheme in [Scheme::Ml1, Scheme::Ml1b] {
            let cfg = power_cfg(n, alpha, scheme);
            let next = Stepper::new(&forms, &cfg).unwrap().step(&state, factor * exact).unwrap();
            prop_assert!(min_nodal(&next.u) >= -1e-14, "{scheme} factor {factor}");
        }
    }
    let tau = rng.gen_range(0.01..=1.0) * exact;
    for scheme in [Scheme::Ml2, Scheme::Ml2b] {
        let cfg = power_cfg(n, alpha, scheme);
        let next = Stepper::new(&forms, &cfg).unwrap().step(&state, tau).unwrap();
        prop_assert!(min_nodal(&next.u) >= -1e-14, "{scheme}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nonnegativity_is_preserved(seed in any::<u64>()) {
        dmp_case(seed)?;
    }

    #[test]
    fn variants_match_base_schemes_without_reaction(seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mesh = Arc::new(random_mesh(&mut rng, 20));
        let n = rng.gen_range(2..6);
        let forms = WeightedForms::assemble(mesh.clone(), n).unwrap();
        let vals: Vec<f64> = (0..mesh.num_elements()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = State::initial(NodalFunction::new(mesh, vals).unwrap());
        let cfg = ProblemConfig::new(n, Nonlinearity::zero(), InitialData::Cosine(1.0), Scheme::Ml1).unwrap();
        let tau = stability_tau(&forms).0;
        let a = step_ml1(&s, tau, &cfg, &forms).unwrap();
        let b = step_variant(&s, tau, &cfg, &forms, Scheme::Ml1b).unwrap();
        prop_assert_eq!(a.u.values(), b.u.values());
        let a = step_ml2(&s, tau, &cfg, &forms).unwrap();
        let b = step_variant(&s, tau, &cfg, &forms, Scheme::Ml2b).unwrap();
        prop_assert_eq!(a.u.values(), b.u.values());
    }
}
