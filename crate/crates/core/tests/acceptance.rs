//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use prsa::bounds::*;
use prsa::mdp::{
    hurwitz_check, lyapunov_contraction_norm, make_offpolicy_td_sampler, make_q_sampler, make_td_sampler, offpolicy_system,
    optimality_residual, projected_bellman_residual, q_bound_setup, td_bound_setup, LfaConfig, Policy, TabularMdp,
};
use prsa::montecarlo::*;
use prsa::norms::{gradient_lipschitz_ratio, random_vector, smoothness_constant, smoothness_slack};
use prsa::operators::{make_pair_gaussian_example, make_random_contractive, make_two_point_multiplicative, StochasticOperator};
use prsa::rng::seeded;
use prsa::sa::log_spaced_checkpoints;
use prsa::{NormSpec, StepSchedule};

type Outcome = prsa::Result<(bool, String)>;

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn pair_params(schedule: StepSchedule) -> BoundParams {
    BoundParams {
        nu: 1.0,
        m: 1.0,
        n: 0.0,
        r: f64::INFINITY,
        sigma_bar_sq: 1.0,
        sigma_hat_sq: 0.0,
        u_c2: 1.0,
        d: 2,
        schedule,
        u_exponent: UExponent::Four,
    }
}

/// Pair-Gaussian run shared by the first two criteria.
fn pair_gaussian_reports() -> prsa::Result<Vec<TightnessReport>> {
    let op = make_pair_gaussian_example(2, 1.0)?;
    let schedule = StepSchedule::new(1.0, 2.0, 0.0)?;
    let setup = EnsembleSetup { schedule, x0: vec![0.0; 2], checkpoints: vec![99], norm: NormSpec::Euclidean };
    let ens = run_ensemble(&op, &setup, 100_000, 11, None)?;
    let p = pair_params(schedule);
    [0.1, 0.01].iter().map(|&d| tightness_check(&ens, &p, 1.0, d, 99)).collect()
}

fn exactness(reports: &[TightnessReport]) -> Outcome {
    let ok = reports.iter().all(|r| (r.empirical_over_exact - 1.0).abs() <= 0.03);
    let detail = reports.iter().map(|r| format!("δ={} ratio {:.4}", r.delta, r.empirical_over_exact)).collect::<Vec<_>>();
    Ok((ok, detail.join(", ")))
}

fn tightness_factor(reports: &[TightnessReport]) -> Outcome {
    let r = reports.iter().find(|r| r.delta == 0.01).expect("δ = 0.01 present");
    let limit = 2.0 * 6f64.sqrt() + 0.1;
    Ok((r.leading_over_exact <= limit, format!("leading/exact {:.4} <= {limit:.4}", r.leading_over_exact)))
}

fn combined_bound_coverage() -> Outcome {
    let op = make_random_contractive(4, 0.5, 1.0, 7)?;
    let x0 = vec![0.0; 4];
    let probe = StepSchedule::new(4.0, 2.0, 0.5)?;
    let (_, env) = linear_additive_bound_setup(&op, &probe, &x0, 1.0)?;
    let h = additive_h_threshold(env.constants.gamma_tilde, 4.0, 0.5).max(2.0);
    let schedule = StepSchedule::new(4.0, h, 0.5)?;
    let (params, env) = linear_additive_bound_setup(&op, &schedule, &x0, 1.0)?;
    if !env.h_condition_met() {
        return Ok((false, format!("h = {h} misses the offset threshold")));
    }
    let env = TailEnvelope::Additive(env);
    let setup = EnsembleSetup { schedule, x0, checkpoints: vec![1_000, 10_000], norm: NormSpec::Euclidean };
    let ens = run_ensemble(&op, &setup, 20_000, 1, None)?;
    let bound = |k: u64, d: f64| combined_bound(&params, &env, d, k);
    let mut verdicts = coverage_test(&ens, &bound, 0.05, 1.0);
    verdicts.extend(coverage_test(&ens, &bound, 0.01, 1.0));
    let ok = verdicts.iter().all(|v| v.binomial_upper_ci <= v.delta);
    let worst = verdicts.iter().map(|v| v.binomial_upper_ci / v.delta).fold(0.0, f64::max);
    Ok((ok, format!("{} checkpoints, max upper CI / δ = {worst:.3}", verdicts.len())))
}

fn rate_separation() -> Outcome {
    let op = make_random_contractive(4, 0.5, 1.0, 7)?;
    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
        x0: vec![1.0; 4],
        checkpoints: log_spaced_checkpoints(1_000, 100_000, 9),
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 400, 3, None)?;
    let ks: Vec<f64> = ens.checkpoints.iter().map(|&k| k as f64).collect();
    let sy = loglog_slope(&ks, &ens.err_y.iter().map(|s| median(s)).collect::<Vec<_>>());
    let sx = loglog_slope(&ks, &ens.err_x.iter().map(|s| median(s)).collect::<Vec<_>>());
    let ok = (-1.1..=-0.9).contains(&sy) && (-0.6..=-0.4).contains(&sx);
    Ok((ok, format!("slope err_y {sy:.3}, err_x {sx:.3}")))
}

fn td_suite() -> Outcome {
    let mut rng = seeded(500);
    let (mut row_dev, mut floor_margin, mut excess, mut max_z, mut max_ci): (f64, f64, f64, f64, f64) =
        (0.0, f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0);
    let k = 10_000;
    for i in 0..20u64 {
        let mdp = TabularMdp::random(4, 2, 0.9, 1.0, 1_000 + i)?;
        let pi = Policy::random(4, 2, 2_000 + i);
        for n in [1u32, 3] {
            let op = make_td_sampler(&mdp, &pi, n)?;
            let r = op.report().clone();
            let gn = mdp.gamma().powi(n as i32);
            for s in 0..4 {
                row_dev = row_dev.max((r.a_pi.row(s).sum() - (1.0 - (1.0 - gn) * r.mu_pi[s])).abs());
            }
            floor_margin = floor_margin.min(r.nu_min() - (1.0 - gn) * r.mu_min() / 4.0);

            let p = r.p_star(k);
            let norm = r.norm(p)?;
            let gc = r.gamma_c(p);
            for _ in 0..1000 {
                let (v1, v2) = (random_vector(&mut rng, 4, 5.0), random_vector(&mut rng, 4, 5.0));
                let ratio = norm.norm(&diff(&r.mean_map(&v1), &r.mean_map(&v2))) / norm.norm(&diff(&v1, &v2));
                excess = excess.max(ratio - gc);
            }

            let x = random_vector(&mut rng, 4, 5.0);
            let draws = 20_000;
            let (mut sum, mut sum_sq, mut out) = (vec![0.0; 4], vec![0.0; 4], vec![0.0; 4]);
            for _ in 0..draws {
                op.sample(&x, &mut rng, &mut out);
                for j in 0..4 {
                    sum[j] += out[j];
                    sum_sq[j] += out[j] * out[j];
                }
            }
            let target = r.mean_map(&x);
            for j in 0..4 {
                let m = sum[j] / draws as f64;
                let se = ((sum_sq[j] / draws as f64 - m * m).max(0.0) / draws as f64).sqrt();
                max_z = max_z.max((m - target[j]).abs() / se.max(1e-300));
            }

            let h = additive_h_threshold(gc, 1.0, 0.5).max(2.0);
            let schedule = StepSchedule::new(1.0, h, 0.5)?;
            let bs = td_bound_setup(&r, &schedule, k, &[0.0; 4], 1.0)?;
            let setup = EnsembleSetup { schedule, x0: vec![0.0; 4], checkpoints: vec![k], norm: NormSpec::Max };
            let ens = run_ensemble(&op, &setup, 1_000, 3_000 + i, None)?;
            let v = &coverage_test(&ens, &|k, d| bs.sup_bound(d, k), 0.05, 1.0)[0];
            if !v.pass || v.binomial_upper_ci > 0.05 {
                return Ok((false, format!("coverage failed on MDP {i}, n = {n}: {v:?}")));
            }
            max_ci = max_ci.max(v.binomial_upper_ci);
        }
    }
    let ok = row_dev <= 1e-12 && floor_margin >= 0.0 && excess <= 1e-12 && max_z <= 4.0 && max_ci <= 0.05;
    Ok((
        ok,
        format!(
            "row-sum dev {row_dev:.1e}, floor margin {floor_margin:.2e}, contraction excess {excess:.1e}, max z {max_z:.2}, max upper CI {max_ci:.4}"
        ),
    ))
}

fn q_suite() -> Outcome {
    let mut rng = seeded(600);
    let mut used = Vec::new();
    for seed in 0..200u64 {
        let mdp = TabularMdp::random(3, 2, 0.7, 1.0, seed)?;
        if let Ok(op) = make_q_sampler(&mdp, &Policy::uniform(3, 2)) {
            if op.qstar().gap > 0.05 {
                used.push((mdp, op));
            }
        }
        if used.len() == 5 {
            break;
        }
    }
    if used.len() < 5 {
        return Ok((false, format!("only {} MDPs with gap > 0.05", used.len())));
    }
    let k = 10_000;
    let (mut resid, mut excess, mut max_ci): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, 0.0);
    for (i, (mdp, op)) in used.iter().enumerate() {
        resid = resid.max(optimality_residual(mdp, &op.qstar().q));
        let factor = 1.0 - (1.0 - mdp.gamma()) * op.rho_b();
        let d = op.dim();
        let (mut f1, mut f2) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..1000 {
            let (q1, q2) = (random_vector(&mut rng, d, 5.0), random_vector(&mut rng, d, 5.0));
            op.mean(&q1, &mut f1);
            op.mean(&q2, &mut f2);
            excess = excess.max(sup(&diff(&f1, &f2)) / sup(&diff(&q1, &q2)) - factor);
        }

        let probe = StepSchedule::new(1.0, 2.0, 0.5)?;
        let gc = q_bound_setup(op, &probe, k, &vec![0.0; d], 1.0)?.gamma_c;
        let schedule = StepSchedule::new(1.0, additive_h_threshold(gc, 1.0, 0.5).max(2.0), 0.5)?;
        let bs = q_bound_setup(op, &schedule, k, &vec![0.0; d], 1.0)?;
        let setup = EnsembleSetup { schedule, x0: vec![0.0; d], checkpoints: vec![k], norm: NormSpec::Max };
        let ens = run_ensemble(op, &setup, 1_000, 4_000 + i as u64, None)?;
        let v = &coverage_test(&ens, &|k, d| bs.sup_bound(d, k), 0.05, 1.0)[0];
        max_ci = max_ci.max(v.binomial_upper_ci);
    }
    let ok = resid <= 1e-9 && excess <= 1e-12 && max_ci <= 0.05;
    Ok((ok, format!("5 MDPs, residual {resid:.1e}, contraction excess {excess:.1e}, max upper CI {max_ci:.4}")))
}

fn offpolicy_suite() -> Outcome {
    let mdp = TabularMdp::random(5, 2, 0.9, 1.0, 21)?;
    let phi = DMatrix::from_row_slice(5, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 0., 0., 1., 1.]);
    let mut cfg = LfaConfig { phi, pi: Policy::random(5, 2, 22).mixed_with_uniform(0.8), pi_b: Policy::uniform(5, 2), n: 10, zeta: 1.0 };
    let sys = offpolicy_system(&mdp, &cfg)?;
    let hr = hurwitz_check(&sys.a_bar);
    if !hr.hurwitz {
        return Ok((false, format!("not Hurwitz, abscissa {}", hr.abscissa)));
    }
    let ly = lyapunov_contraction_norm(&sys.a_bar, 1)?;
    cfg.zeta = ly.zeta_star;
    let op = make_offpolicy_td_sampler(&cfg, &mdp)?;

    let mut rng = seeded(700);
    let (mut worst, mut f1, mut f2) = (0.0f64, vec![0.0; 3], vec![0.0; 3]);
    for _ in 0..1000 {
        let (v1, v2) = (random_vector(&mut rng, 3, 5.0), random_vector(&mut rng, 3, 5.0));
        op.mean(&v1, &mut f1);
        op.mean(&v2, &mut f2);
        worst = worst.max(ly.norm(&diff(&f1, &f2)) / ly.norm(&diff(&v1, &v2)));
    }
    let resid = projected_bellman_residual(&mdp, &cfg, &sys.mu_b, op.fixed_point())?;

    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
        x0: vec![0.0; 3],
        checkpoints: log_spaced_checkpoints(1_000, 100_000, 7),
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 400, 2, None)?;
    let ks: Vec<f64> = ens.checkpoints.iter().map(|&k| k as f64).collect();
    let qs = ens.err_y.iter().map(|s| empirical_quantile(s, 0.9).map(|q| q.value)).collect::<prsa::Result<Vec<_>>>()?;
    let slope = loglog_slope(&ks, &qs);
    let ok = worst < 1.0 && resid <= 1e-8 && (-1.2..=-0.8).contains(&slope);
    Ok((ok, format!("zeta* {}, max sampled ratio {worst:.4}, residual {resid:.1e}, slope {slope:.3}", ly.zeta_star)))
}

fn heavy_tails() -> Outcome {
    let setup = MgfSetup { k: 2, x0: 1.0, alpha0: 0.25, alpha1: 0.25 };
    let radii = [2.0, 3.0, 4.0, 5.0, 6.0];
    let below = truncated_mgf_divergence(&setup, 0.5 * setup.t_star(), &radii)?;
    let above = truncated_mgf_divergence(&setup, 2.0 * setup.t_star(), &radii)?;
    let mgf_ok = below.convergent && above.growth >= 10.0;

    let run = |op: &dyn StochasticOperator, schedule: StepSchedule, x0: Vec<f64>| -> prsa::Result<TailVerdict> {
        let setup = EnsembleSetup { schedule, x0, checkpoints: vec![1_000], norm: NormSpec::Euclidean };
        let ens = run_ensemble(op, &setup, 100_000, 8, None)?;
        Ok(tail_diagnostics(&ens.err_y[0])?.verdict)
    };
    let two_point = run(&make_two_point_multiplicative(0.5, 3)?, StepSchedule::new(0.4, 2.0, 0.5)?, vec![1.0])?;
    let linear = run(&make_random_contractive(4, 0.5, 1.0, 7)?, StepSchedule::new(1.0, 2.0, 0.5)?, vec![0.0; 4])?;
    let ok = mgf_ok
        && two_point == TailVerdict::PolynomialTailConsistent
        && linear == TailVerdict::ExponentialTailConsistent;
    Ok((
        ok,
        format!(
            "mgf convergent below t* {}, growth above {:.1e}; two-point {}, linear {}",
            below.convergent,
            above.growth,
            two_point.label(),
            linear.label()
        ),
    ))
}

fn norm_margin_suite() -> Outcome {
    let mut margin = f64::INFINITY;
    for i in 0..100u64 {
        let op = make_random_contractive(4, 0.05 + 0.9 * (i as f64 / 100.0), 1.0, 800 + i)?;
        let a = op.matrix();
        let smin = (a - DMatrix::<f64>::identity(4, 4)).singular_values().min();
        margin = margin.min(smin - (1.0 - a.clone().singular_values().max()));
    }

    let mut rng = seeded(900);
    let mut ratio_excess = f64::NEG_INFINITY;
    for p in [2.0, 4.0, 8.0] {
        let norm = NormSpec::unweighted_p(p, 5)?;
        for _ in 0..10_000 {
            let (x, y) = (random_vector(&mut rng, 5, 2.0), random_vector(&mut rng, 5, 2.0));
            ratio_excess = ratio_excess.max(gradient_lipschitz_ratio(&norm, &x, &y)? - (p - 1.0));
        }
    }

    let mut slack = f64::INFINITY;
    let norms = [NormSpec::Euclidean, NormSpec::unweighted_p(4.0, 4)?, NormSpec::weighted_p(6.0, vec![0.1, 0.2, 0.3, 0.4])?];
    for norm in &norms {
        let m = smoothness_constant(norm)?;
        for _ in 0..10_000 {
            let (a, b) = (random_vector(&mut rng, 4, 3.0), random_vector(&mut rng, 4, 3.0));
            slack = slack.min(smoothness_slack(norm, &a, &b, m)?);
        }
    }
    let ok = margin >= -1e-12 && ratio_excess <= 1e-8 && slack >= -1e-10;
    Ok((ok, format!("nu margin {margin:.2e}, ratio excess {ratio_excess:.2e}, smoothness slack {slack:.2e}")))
}

fn golden_params(case: &str) -> prsa::Result<(BoundParams, TailEnvelope)> {
    Ok(match case {
        "const" => {
            let p = BoundParams {
                nu: 1.0,
                m: 1.0,
                n: 1.0,
                r: 1.0,
                sigma_bar_sq: 1.0,
                sigma_hat_sq: 1.0,
                u_c2: 1.0,
                d: 2,
                schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
                u_exponent: UExponent::Four,
            };
            (p, TailEnvelope::Constant(10.0))
        }
        _ => {
            let schedule = StepSchedule::new(0.7, 5.0, 0.3)?;
            let p = BoundParams {
                nu: 0.6,
                m: 2.0,
                n: 0.5,
                r: 6.0,
                sigma_bar_sq: 1.5,
                sigma_hat_sq: 0.8,
                u_c2: 1.2,
                d: 3,
                schedule,
                u_exponent: UExponent::Four,
            };
            let cfg = MultiplicativeConfig::new([1.0, 1.0, 1.0, 1.0], 2.0)?;
            (p, TailEnvelope::Multiplicative(MultiplicativeEnvelope { cfg, schedule }))
        }
    })
}

fn golden_additive() -> prsa::Result<(AdditiveNoiseConfig, StepSchedule)> {
    let cfg = AdditiveNoiseConfig {
        sigma_sq: 1.0,
        gamma_c: 0.5,
        mu: 0.1,
        c_d: 4.0,
        x0_err_sq: 1.0,
        l_smooth: 1.0,
        u_cm: 1.0,
        l_cm: 1.0,
        u_m_cstar: 1.0,
        l_cs: 1.0,
        u_cs: 1.0,
        a_scale: 1.5,
    };
    Ok((cfg, StepSchedule::new(6.0, 16.0, 0.5)?))
}

fn bound_golden() -> Outcome {
    let (mut worst, mut rows) = (0.0f64, 0);
    let (add_cfg, add_sched) = golden_additive()?;
    for line in include_str!("data/bounds_golden.csv").lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (case, q) = (f[0], f[1]);
        let delta: f64 = f[2].parse().unwrap();
        let k: u64 = f[3].parse().unwrap();
        let want: f64 = f[4].parse().unwrap();
        let got = if case == "additive" {
            f_additive(&add_cfg, &add_sched, delta, k)?
        } else {
            let (p, env) = golden_params(case)?;
            match q {
                "g" => g_factor(&p, &env, delta, k),
                "eps_tilde" => epsilon_tilde(&p, &env, delta, k),
                "k0" => k0(&p, &env, delta, k) as f64,
                "eps_bar" => epsilon_bar(&p, &env, delta, k),
                "main" => main_bound(&p, &env, delta, k),
                "crude" => crude_bound(&p, &env, delta, k),
                "combined" => combined_bound(&p, &env, delta, k),
                "f_multiplicative" => env.eval(delta, k),
                other => return Ok((false, format!("unknown golden quantity {other}"))),
            }
        };
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(rel);
        rows += 1;
    }

    // leading term ∝ 1/k, crude bound ∝ k^{-ξ}, remainder at its slowest rate
    let (p, env) = golden_params("const")?;
    let ks: Vec<f64> = (0..8).map(|j| 1e6 * 4f64.powi(j)).collect();
    let lead: Vec<f64> = ks.iter().map(|&k| leading_term(&p, 0.1, k as u64)).collect();
    let crude: Vec<f64> = ks.iter().map(|&k| crude_bound(&p, &env, 0.1, k as u64)).collect();
    let rem: Vec<f64> = ks
        .iter()
        .map(|&k| {
            let t = epsilon_terms(&p, &env, 0.1, k as u64);
            t.t3 + t.t4 + t.t5
        })
        .collect();
    let (sl, sc, sr) = (loglog_slope(&ks, &lead), loglog_slope(&ks, &crude), loglog_slope(&ks, &rem));
    let slopes_ok = (sl + 1.0).abs() < 0.01 && (sc + 0.5).abs() < 0.01 && (sr + 1.0).abs() < 0.05;
    Ok((
        worst <= 1e-12 && slopes_ok,
        format!("{rows} golden values, max rel err {worst:.1e}; slopes leading {sl:.3}, crude {sc:.3}, remainder {sr:.3}"),
    ))
}

fn main() {
    println!("running acceptance criteria");
    let start = Instant::now();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, out: Outcome, t: Instant| {
        let (pass, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} criterion {n:>2} {name:<28} {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    };

    let t = Instant::now();
    let (one, two) = match pair_gaussian_reports() {
        Ok(reports) => (exactness(&reports), tightness_factor(&reports)),
        Err(e) => (Ok((false, format!("error: {e}"))), Ok((false, format!("error: {e}")))),
    };
    report(1, "pair-Gaussian exactness", one, t);
    report(2, "tightness factor", two, t);
    let suite: [(usize, &str, fn() -> Outcome); 8] = [
        (3, "combined-bound coverage", combined_bound_coverage),
        (4, "rate separation", rate_separation),
        (5, "TD(n) suite", td_suite),
        (6, "Q-learning suite", q_suite),
        (7, "off-policy TD with features", offpolicy_suite),
        (8, "heavy-tail witnesses", heavy_tails),
        (9, "norm and margin checks", norm_margin_suite),
        (10, "bound golden values", bound_golden),
    ];
    for (n, name, f) in suite {
        let t = Instant::now();
        report(n, name, f(), t);
    }
    println!("{} criteria, {failed} failed, {:.1}s", 10, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
