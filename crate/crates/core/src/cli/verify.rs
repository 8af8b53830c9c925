//! The invariant suite behind `prsa verify`.

use nalgebra::DMatrix;

use super::{GlobalOpts, SpecFile, Verdict};
use crate::bounds::{combined_bound, crude_bound, epsilon_bar, main_bound, BoundParams, TailEnvelope, UExponent};
use crate::error::Result;
use crate::mdp::{
    bellman_residual, exact_value, make_offpolicy_td_sampler, make_q_sampler, optimality_residual, projected_bellman_residual,
    stationary_residual, td_operator_report, LfaConfig, Policy, TabularMdp,
};
use crate::norms::{gradient_lipschitz_ratio, random_vector, smoothness_constant, smoothness_slack, NormSpec};
use crate::operators::{
    make_pair_gaussian_example, make_random_contractive, make_two_point_multiplicative, unbiasedness_gap, StochasticOperator,
};
use crate::rng::seeded;
use crate::sa::StepSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Equation-style tag of the property checked.
    pub anchor: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(anchor: &'static str, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((pass, detail)) => CheckResult { anchor, name, pass, detail },
        Err(e) => CheckResult { anchor, name, pass: false, detail: format!("error: {e}") },
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Norm, operator, MDP and bound invariants on seeded random instances.
pub fn invariant_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("eq:p_norm_smoothness", "gradient Lipschitz ratio <= p - 1", || {
        let mut rng = seeded(seed);
        let mut worst = f64::NEG_INFINITY;
        for p in [2.0, 4.0, 8.0] {
            let norm = NormSpec::unweighted_p(p, 5)?;
            for _ in 0..1000 {
                let (x, y) = (random_vector(&mut rng, 5, 2.0), random_vector(&mut rng, 5, 2.0));
                worst = worst.max(gradient_lipschitz_ratio(&norm, &x, &y)? - (p - 1.0));
            }
        }
        Ok((worst <= 1e-8, format!("max excess {worst:.3e}")))
    }));

    out.push(check("eq:norm_smoothness_inequality", "smoothness inequality slack >= 0", || {
        let mut rng = seeded(seed + 1);
        let mut worst = f64::INFINITY;
        let norms = [NormSpec::Euclidean, NormSpec::unweighted_p(3.0, 4)?, NormSpec::weighted_p(6.0, vec![0.1, 0.2, 0.3, 0.4])?];
        for norm in &norms {
            let m = smoothness_constant(norm)?;
            for _ in 0..1000 {
                let (a, b) = (random_vector(&mut rng, 4, 3.0), random_vector(&mut rng, 4, 3.0));
                worst = worst.min(smoothness_slack(norm, &a, &b, m)?);
            }
        }
        Ok((worst >= -1e-10, format!("min slack {worst:.3e}")))
    }));

    out.push(check("eq:nu_lower_bound", "sigma_min(A - I) >= 1 - ||A||_2", || {
        let mut worst = f64::INFINITY;
        for i in 0..50 {
            let op = make_random_contractive(4, 0.1 + 0.8 * (i as f64 / 50.0), 1.0, seed + 100 + i)?;
            let a = op.matrix();
            let smin = (a - DMatrix::<f64>::identity(4, 4)).singular_values().min();
            worst = worst.min(smin - (1.0 - a.clone().singular_values().max()));
        }
        Ok((worst >= -1e-12, format!("min margin {worst:.3e}")))
    }));

    out.push(check("eq:unbiased_operator", "zoo samplers average to their mean maps", || {
        let ops: Vec<Box<dyn StochasticOperator>> = vec![
            Box::new(make_random_contractive(3, 0.5, 1.0, seed)?),
            Box::new(make_pair_gaussian_example(4, 1.0)?),
            Box::new(make_two_point_multiplicative(0.5, 3)?),
        ];
        let mut worst: f64 = 0.0;
        for op in &ops {
            let x = vec![0.7; op.dim()];
            worst = worst.max(unbiasedness_gap(op.as_ref(), &x, 20_000, seed + 7));
        }
        Ok((worst < 5.0, format!("max standardized gap {worst:.3}")))
    }));

    let mdps: Vec<(TabularMdp, Policy)> = (0..10)
        .filter_map(|i| {
            let m = TabularMdp::random(4, 2, 0.9, 1.0, seed + 200 + i).ok()?;
            Some((m, Policy::random(4, 2, seed + 300 + i)))
        })
        .collect();

    out.push(check("eq:stationary_balance", "stationary law solves mu P = mu", || {
        let mut worst: f64 = 0.0;
        for (m, pi) in &mdps {
            let r = td_operator_report(m, pi, 1, 2.0)?;
            worst = worst.max(stationary_residual(&m.policy_matrix(pi), &r.mu_pi));
        }
        Ok((worst <= 1e-12, format!("max residual {worst:.3e}")))
    }));

    out.push(check("eq:A_pi_sum", "rows of A^pi sum to 1 - (1 - gamma^n) mu(s)", || {
        let mut worst: f64 = 0.0;
        for (m, pi) in &mdps {
            for n in [1u32, 3] {
                let r = td_operator_report(m, pi, n, 2.0)?;
                let gn = m.gamma().powi(n as i32);
                for s in 0..m.n_states() {
                    worst = worst.max((r.a_pi.row(s).sum() - (1.0 - (1.0 - gn) * r.mu_pi[s])).abs());
                }
            }
        }
        Ok((worst <= 1e-12, format!("max deviation {worst:.3e}")))
    }));

    out.push(check("eq:nu_pi_floor", "nu^pi(s) >= (1 - gamma^n) mu_min / |S|", || {
        let mut worst = f64::INFINITY;
        for (m, pi) in &mdps {
            for n in [1u32, 3] {
                let r = td_operator_report(m, pi, n, 2.0)?;
                let floor = (1.0 - m.gamma().powi(n as i32)) * r.mu_min() / m.n_states() as f64;
                worst = worst.min(r.nu_min() - floor);
            }
        }
        Ok((worst >= -1e-12, format!("min margin {worst:.3e}")))
    }));

    out.push(check("eq:td_contraction", "TD(n) mean map contracts in the weighted p-norm", || {
        let mut rng = seeded(seed + 3);
        let mut worst = f64::NEG_INFINITY;
        for (m, pi) in mdps.iter().take(4) {
            for p in [2.0, 8.0] {
                let r = td_operator_report(m, pi, 3, p)?;
                let norm = r.norm(p)?;
                let gc = r.gamma_c(p);
                for _ in 0..250 {
                    let (v1, v2) = (random_vector(&mut rng, 4, 3.0), random_vector(&mut rng, 4, 3.0));
                    let lhs = norm.norm(&diff(&r.mean_map(&v1), &r.mean_map(&v2)));
                    worst = worst.max(lhs / norm.norm(&diff(&v1, &v2)) - gc);
                }
            }
        }
        Ok((worst <= 1e-12, format!("max excess {worst:.3e}")))
    }));

    out.push(check("eq:bellman_value", "exact V^pi solves the Bellman equation", || {
        let mut worst: f64 = 0.0;
        for (m, pi) in &mdps {
            worst = worst.max(bellman_residual(m, pi, &exact_value(m, pi)?));
        }
        Ok((worst <= 1e-10, format!("max residual {worst:.3e}")))
    }));

    out.push(check("eq:bellman_optimality", "Q* residual and sup-norm contraction of Q-learning", || {
        let mut rng = seeded(seed + 4);
        let (mut resid, mut excess, mut used) = (0.0f64, f64::NEG_INFINITY, 0);
        for (m, _) in &mdps {
            let Ok(op) = make_q_sampler(m, &Policy::uniform(4, 2)) else { continue };
            used += 1;
            resid = resid.max(optimality_residual(m, &op.qstar().q));
            let c = op.sup_contraction_factor();
            let (mut f1, mut f2) = (vec![0.0; 8], vec![0.0; 8]);
            for _ in 0..200 {
                let (q1, q2) = (random_vector(&mut rng, 8, 5.0), random_vector(&mut rng, 8, 5.0));
                op.mean(&q1, &mut f1);
                op.mean(&q2, &mut f2);
                let r = diff(&f1, &f2).iter().fold(0.0f64, |a, v| a.max(v.abs()))
                    / diff(&q1, &q2).iter().fold(0.0f64, |a, v| a.max(v.abs()));
                excess = excess.max(r - c);
            }
        }
        Ok((used > 0 && resid <= 1e-9 && excess <= 1e-12, format!("{used} MDPs, residual {resid:.3e}, excess {excess:.3e}")))
    }));

    out.push(check("eq:projected_fixed_point", "off-policy fixed point solves the projected equation", || {
        let (m, _) = &mdps[0];
        let phi = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5, -0.5]);
        let cfg = LfaConfig { phi, pi: Policy::random(4, 2, seed + 5).mixed_with_uniform(0.5), pi_b: Policy::uniform(4, 2), n: 3, zeta: 1.0 };
        let op = make_offpolicy_td_sampler(&cfg, m)?;
        let r = projected_bellman_residual(m, &cfg, &op.system().mu_b, op.fixed_point())?;
        Ok((r <= 1e-8, format!("residual {r:.3e}")))
    }));

    out.push(check("eq:combined_min", "combined bound is min(main, crude); eps_bar = 0 when R = inf", || {
        let p = BoundParams {
            nu: 0.5,
            m: 1.0,
            n: 0.5,
            r: f64::INFINITY,
            sigma_bar_sq: 1.0,
            sigma_hat_sq: 0.5,
            u_c2: 1.0,
            d: 3,
            schedule: StepSchedule::new(1.0, 4.0, 0.5)?,
            u_exponent: UExponent::Four,
        };
        let f = TailEnvelope::Constant(5.0);
        let mut ok = true;
        for k in [1u64, 10, 100, 10_000] {
            for d in [0.5, 0.05, 1e-6] {
                ok &= combined_bound(&p, &f, d, k) == main_bound(&p, &f, d, k).min(crude_bound(&p, &f, d, k));
                ok &= epsilon_bar(&p, &f, d, k) == 0.0;
            }
        }
        Ok((ok, "12 grid points".into()))
    }));

    out
}

/// Validates an MDP file; the returned check names the failing property.
pub fn verify_mdp_file(path: &std::path::Path) -> CheckResult {
    check("eq:transition_rows_stochastic", "MDP file parses with stochastic rows", || {
        let text = std::fs::read_to_string(path)?;
        match TabularMdp::from_text(&text) {
            Ok(m) => Ok((true, format!("{} states, {} actions", m.n_states(), m.n_actions()))),
            Err(e) => Ok((false, format!("{}: {e}", path.display()))),
        }
    })
}

pub(super) fn cmd_verify(opts: &GlobalOpts) -> Result<Verdict> {
    let mut results = invariant_suite(opts.seed.unwrap_or(0));
    if let Some(path) = &opts.spec {
        let spec = SpecFile::load(path)?;
        if let Some(f) = spec.str_opt("mdp", "file") {
            results.push(verify_mdp_file(&spec.resolve(f)));
        }
    }
    for r in &results {
        println!("{} {:<32} {} ({})", if r.pass { "PASS" } else { "FAIL" }, r.anchor, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} checks, {} failed", results.len(), failed);
    Ok(Verdict::from_bool(failed == 0))
}
