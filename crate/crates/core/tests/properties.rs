use nalgebra::DMatrix;
use proptest::prelude::*;

use prsa::mdp::{make_td_sampler, stationary_residual, td_operator_report, Policy, TabularMdp};
use prsa::montecarlo::{clopper_pearson_upper, coverage_test, run_ensemble, EnsembleSetup};
use prsa::norms::{equivalence_constants, random_vector};
use prsa::operators::{make_random_contractive, make_two_point_multiplicative, StochasticOperator};
use prsa::rng::seeded;
use prsa::sa::{update_average, SaState};
use prsa::{NormSpec, StepSchedule};

fn weighted(p: f64, w: Vec<f64>) -> NormSpec {
    NormSpec::weighted_p(p, w).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_sizes_positive_and_non_increasing(alpha in 0.01f64..10.0, h in 1.001f64..100.0, xi in 0.0f64..0.999, k in 0u64..1_000_000) {
        let s = StepSchedule::new(alpha, h, xi).unwrap();
        prop_assert!(s.step(k) > 0.0);
        prop_assert!(s.step(k + 1) <= s.step(k));
        prop_assert_eq!(s.step(k), alpha / (k as f64 + h).powf(xi));
    }

    #[test]
    fn incremental_average_matches_two_pass(seed in 0u64..10_000, steps in 1usize..400) {
        let op = make_random_contractive(3, 0.7, 2.0, seed).unwrap();
        let s = StepSchedule::new(1.0, 2.0, 0.5).unwrap();
        let mut st = SaState::new(&[1.0, -2.0, 0.5], seeded(seed));
        let mut sum = st.x.clone();
        for _ in 0..steps {
            st.advance(&op, &s).unwrap();
            for (a, b) in sum.iter_mut().zip(&st.x) {
                *a += b;
            }
        }
        let n = (steps + 1) as f64;
        for (y, t) in st.y.iter().zip(&sum) {
            prop_assert!((y - t / n).abs() <= 1e-10 * (t / n).abs().max(1.0));
        }
    }

    #[test]
    fn update_average_is_mean_of_two(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let y = update_average(&[a], &[b], 1);
        prop_assert!((y[0] - (a + b) / 2.0).abs() <= 1e-12 * (a.abs() + b.abs()).max(1.0));
    }

    #[test]
    fn holder_inequality(seed in 0u64..10_000, p in 2.0f64..10.0) {
        let mut rng = seeded(seed);
        let w: Vec<f64> = (0..5).map(|_| 0.1 + random_vector(&mut rng, 1, 1.0)[0].abs()).collect();
        let norms = [NormSpec::Euclidean, NormSpec::Max, weighted(p, w)];
        for norm in &norms {
            let (x, u) = (random_vector(&mut rng, 5, 3.0), random_vector(&mut rng, 5, 3.0));
            prop_assert!(dot(&x, &u) <= norm.norm(&x) * norm.dual_norm(&u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn equivalence_constants_sandwich(seed in 0u64..10_000, p in 2.0f64..8.0) {
        let mut rng = seeded(seed);
        let w: Vec<f64> = (0..4).map(|_| 0.2 + random_vector(&mut rng, 1, 1.0)[0].abs()).collect();
        let a = weighted(p, w);
        let c = equivalence_constants(&a, &NormSpec::Euclidean, 4).unwrap();
        for _ in 0..50 {
            let x = random_vector(&mut rng, 4, 5.0);
            let (na, nb) = (a.norm(&x), NormSpec::Euclidean.norm(&x));
            prop_assert!(c.lower * nb <= na * (1.0 + 1e-10));
            prop_assert!(na <= c.upper * nb * (1.0 + 1e-10));
        }
    }

    #[test]
    fn linear_jacobian_is_the_matrix(seed in 0u64..10_000) {
        let op = make_random_contractive(3, 0.6, 1.0, seed).unwrap();
        let j = op.jacobian_at_fixed_point(&mut seeded(seed)).unwrap();
        prop_assert_eq!(&j, op.matrix());
        prop_assert_eq!(op.report().sigma_hat_sq, Some(0.0));
        let mut m = vec![0.0; 3];
        op.mean(op.fixed_point(), &mut m);
        for (a, b) in m.iter().zip(op.fixed_point()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn two_point_iterates_stay_positive(seed in 0u64..10_000, x0 in 0.01f64..10.0) {
        let op = make_two_point_multiplicative(0.5, 3).unwrap();
        // α_k ≤ 0.4 < 1/2
        let s = StepSchedule::new(0.4, 2.0, 0.5).unwrap();
        let mut st = SaState::new(&[x0], seeded(seed));
        for _ in 0..2000 {
            st.advance(&op, &s).unwrap();
            prop_assert!(st.x[0] > 0.0);
        }
    }

    #[test]
    fn random_mdps_are_stochastic(seed in 0u64..10_000, ns in 2usize..6, na in 2usize..4) {
        let m = TabularMdp::random(ns, na, 0.9, 2.0, seed).unwrap();
        for s in 0..ns {
            for a in 0..na {
                let row = m.transition_row(s, a);
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!((0.0..=2.0).contains(&m.reward(s, a)));
            }
        }
        let pi = Policy::random(ns, na, seed + 1);
        for s in 0..ns {
            prop_assert!((pi.row(s).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn td_operator_structure(seed in 0u64..10_000, n in prop::sample::select(vec![1u32, 2, 5])) {
        let m = TabularMdp::random(4, 2, 0.9, 1.0, seed).unwrap();
        let pi = Policy::random(4, 2, seed + 7);
        let r = td_operator_report(&m, &pi, n, 4.0).unwrap();
        let gn = 0.9f64.powi(n as i32);
        for s in 0..4 {
            prop_assert!((r.a_pi.row(s).sum() - (1.0 - (1.0 - gn) * r.mu_pi[s])).abs() <= 1e-12);
            prop_assert!((r.c_pi.row(s).sum() - 1.0).abs() <= 1e-12);
            prop_assert!(r.c_pi.row(s).iter().all(|&c| c >= -1e-15));
        }
        prop_assert!(r.nu_min() >= (1.0 - gn) * r.mu_min() / 4.0 - 1e-12);
        prop_assert!(stationary_residual(&m.policy_matrix(&pi), &r.mu_pi) <= 1e-12);
        prop_assert!(stationary_residual(&r.c_pi, &r.nu_pi) <= 1e-12);
    }

    #[test]
    fn td_iterates_stay_in_value_box(seed in 0u64..10_000, n in 1u32..4) {
        let m = TabularMdp::random(4, 2, 0.8, 1.0, seed).unwrap();
        let op = make_td_sampler(&m, &Policy::random(4, 2, seed + 3), n).unwrap();
        let b = 1.0 / (1.0 - 0.8);
        // α/√h = 1
        let s = StepSchedule::new(2.0, 4.0, 0.5).unwrap();
        let mut st = SaState::new(&[0.0; 4], seeded(seed));
        for _ in 0..1000 {
            st.advance(&op, &s).unwrap();
            prop_assert!(st.x.iter().all(|&v| (-1e-12..=b + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn clopper_pearson_brackets_the_rate(n in 10usize..5000, frac in 0.0f64..1.0) {
        let k = ((n as f64) * frac).floor() as usize;
        let u = clopper_pearson_upper(k, n, 0.99);
        prop_assert!(u >= k as f64 / n as f64);
        prop_assert!(u <= 1.0);
        if k < n {
            prop_assert!(clopper_pearson_upper(k + 1, n, 0.99) >= u);
        }
    }
}

#[test]
fn ensemble_samples_are_finite_and_complete() {
    let op = make_two_point_multiplicative(0.5, 3).unwrap();
    let setup = EnsembleSetup {
        schedule: StepSchedule::new(0.4, 2.0, 0.5).unwrap(),
        x0: vec![1.0],
        checkpoints: vec![10, 100, 1000],
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 500, 4, Some(2)).unwrap();
    for (ex, ey) in ens.err_x.iter().zip(&ens.err_y) {
        assert_eq!(ey.len(), ens.n_reps - ens.divergence_count);
        assert_eq!(ex.len(), ey.len());
        assert!(ex.iter().chain(ey).all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn verdict_matches_slack_rule() {
    let op = make_random_contractive(2, 0.5, 1.0, 3).unwrap();
    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5).unwrap(),
        x0: vec![0.0; 2],
        checkpoints: vec![50],
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 2000, 9, None).unwrap();
    for level in [1e-3, 1e-2, 5e-2, 1e-1] {
        for slack in [0.5, 1.0, 1.5] {
            for v in coverage_test(&ens, &|_, _| level, 0.05, slack) {
                assert_eq!(v.pass, v.binomial_upper_ci <= v.delta * slack);
            }
        }
    }
}

#[test]
fn identity_jacobian_has_unit_gain() {
    let a = DMatrix::<f64>::identity(3, 3) * 0.25;
    let op = prsa::operators::make_linear_additive(a.clone(), vec![1.0, 0.0, -1.0], DMatrix::identity(3, 3)).unwrap();
    assert_eq!(op.jacobian_at_fixed_point(&mut seeded(0)).unwrap(), a);
}

#[test]
fn coverage_verdicts_are_calibrated_on_the_exact_quantile() {
    let op = prsa::operators::make_pair_gaussian_example(2, 1.0).unwrap();
    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.0).unwrap(),
        x0: vec![0.0; 2],
        checkpoints: vec![99],
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 100_000, 21, None).unwrap();
    let exact = |k: u64, d: f64| k as f64 * (1.0 / d).ln() / ((k + 1) as f64).powi(2);
    for delta in [0.1, 0.01] {
        assert!(coverage_test(&ens, &exact, delta, 1.5)[0].pass);
        assert!(!coverage_test(&ens, &exact, delta, 0.5)[0].pass);
    }
}
