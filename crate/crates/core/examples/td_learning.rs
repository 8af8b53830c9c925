//! TD(n) on a random MDP: the operator decomposition, the weighted p-norm
//! contraction factor, and an ensemble measured in the max norm.

use prsa::mdp::{make_td_sampler, td_bound_setup, Policy, TabularMdp};
use prsa::montecarlo::{coverage_test, empirical_quantile, run_ensemble, EnsembleSetup};
use prsa::{NormSpec, StepSchedule};

fn main() -> prsa::Result<()> {
    let mdp = TabularMdp::random(4, 2, 0.9, 1.0, 5)?;
    let pi = Policy::random(4, 2, 6);
    let op = make_td_sampler(&mdp, &pi, 3)?;
    let r = op.report();
    println!("mu^pi = {:?}", r.mu_pi);
    println!("nu^pi = {:?}", r.nu_pi);
    println!("V^pi  = {:?}", r.v_pi);

    let k = 10_000;
    let p = r.p_star(k);
    let gc = r.gamma_c(p);
    let h = prsa::bounds::additive_h_threshold(gc, 1.0, 0.5).max(2.0);
    let schedule = StepSchedule::new(1.0, h, 0.5)?;
    let setup = td_bound_setup(r, &schedule, k, &[0.0; 4], 1.0)?;
    println!("p = {p:.2}, gamma_c = {gc:.5}, h = {h:.1}");

    let es = EnsembleSetup { schedule, x0: vec![0.0; 4], checkpoints: vec![k], norm: NormSpec::Max };
    let ens = run_ensemble(&op, &es, 500, 1, None)?;
    let q = empirical_quantile(&ens.err_y[0], 0.95)?;
    let v = &coverage_test(&ens, &|k, d| setup.sup_bound(d, k), 0.05, 1.0)[0];
    println!("95% quantile of |V̄_k - V^pi|^2_inf = {:.4e}; bound {:.4e}; pass {}", q.value, v.bound, v.pass);
    Ok(())
}
