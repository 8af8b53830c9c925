//! Q-learning: exact Q* with its greedy gap, the sup-norm contraction of the
//! expected update, and averaged iterates.

use prsa::mdp::{make_q_sampler, optimality_residual, Policy, TabularMdp};
use prsa::montecarlo::{empirical_quantile, run_ensemble, EnsembleSetup};
use prsa::{NormSpec, StepSchedule, StochasticOperator};

fn main() -> prsa::Result<()> {
    let mdp = TabularMdp::random(3, 2, 0.7, 1.0, 1)?;
    let op = make_q_sampler(&mdp, &Policy::uniform(3, 2))?;
    let qs = op.qstar();
    println!("Q* = {:?}", qs.q);
    println!("greedy = {:?}, gap = {:.4}, residual = {:.2e}", qs.greedy, qs.gap, optimality_residual(&mdp, &qs.q));
    println!("rho_b = {:.4}, sup-norm factor = {:.4}", op.rho_b(), op.sup_contraction_factor());

    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
        x0: vec![0.0; op.dim()],
        checkpoints: vec![1_000, 10_000],
        norm: NormSpec::Max,
    };
    let ens = run_ensemble(&op, &setup, 500, 2, None)?;
    for (k, s) in ens.checkpoints.iter().zip(&ens.err_y) {
        println!("k={k}: 95% quantile of |Q̄_k - Q*|^2_inf = {:.4e}", empirical_quantile(s, 0.95)?.value);
    }
    Ok(())
}
