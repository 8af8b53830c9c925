//! Off-policy TD(n) with linear features: stability of the mean dynamics, a
//! Lyapunov norm in which they contract, and the 1/k decay of averaged weights.

use nalgebra::DMatrix;
use prsa::bounds::loglog_slope;
use prsa::mdp::{
    hurwitz_check, lyapunov_contraction_norm, make_offpolicy_td_sampler, offpolicy_system, projected_bellman_residual,
    LfaConfig, Policy, TabularMdp,
};
use prsa::montecarlo::{empirical_quantile, run_ensemble, EnsembleSetup};
use prsa::sa::log_spaced_checkpoints;
use prsa::{NormSpec, StepSchedule, StochasticOperator};

fn main() -> prsa::Result<()> {
    let mdp = TabularMdp::random(5, 2, 0.9, 1.0, 21)?;
    let phi = DMatrix::from_row_slice(5, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 0., 0., 1., 1.]);
    let mut cfg = LfaConfig {
        phi,
        pi: Policy::random(5, 2, 22).mixed_with_uniform(0.8),
        pi_b: Policy::uniform(5, 2),
        n: 10,
        zeta: 1.0,
    };
    let sys = offpolicy_system(&mdp, &cfg)?;
    println!("{:?}", hurwitz_check(&sys.a_bar));
    let ly = lyapunov_contraction_norm(&sys.a_bar, 0)?;
    println!("zeta* = {}, induced norm {:.4}", ly.zeta_star, ly.induced_norm);
    cfg.zeta = ly.zeta_star;

    let op = make_offpolicy_td_sampler(&cfg, &mdp)?;
    println!("v* = {:?}", op.fixed_point());
    println!("projected residual = {:.2e}", projected_bellman_residual(&mdp, &cfg, &sys.mu_b, op.fixed_point())?);

    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
        x0: vec![0.0; 3],
        checkpoints: log_spaced_checkpoints(1_000, 30_000, 5),
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 200, 3, None)?;
    let ks: Vec<f64> = ens.checkpoints.iter().map(|&k| k as f64).collect();
    let qs: Vec<f64> = ens.err_y.iter().map(|s| empirical_quantile(s, 0.9).map(|q| q.value)).collect::<prsa::Result<_>>()?;
    println!("90% quantiles {qs:?}, log-log slope {:.3}", loglog_slope(&ks, &qs));
    Ok(())
}
