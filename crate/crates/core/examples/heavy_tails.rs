//! Two views of heavy tails: a truncated moment generating function that blows
//! up past t*, and tail diagnostics on the two-point multiplicative example.

use prsa::montecarlo::{run_ensemble, tail_diagnostics, truncated_mgf_divergence, EnsembleSetup, MgfSetup};
use prsa::operators::{make_random_contractive, make_two_point_multiplicative, StochasticOperator};
use prsa::{NormSpec, StepSchedule};

fn diagnose(label: &str, op: &dyn StochasticOperator, schedule: StepSchedule, x0: Vec<f64>) -> prsa::Result<()> {
    let setup = EnsembleSetup { schedule, x0, checkpoints: vec![1_000], norm: NormSpec::Euclidean };
    let ens = run_ensemble(op, &setup, 20_000, 3, None)?;
    let t = tail_diagnostics(&ens.err_y[0])?;
    println!(
        "{label}: {} (Hill {:?}, residuals exp {:.3} / poly {:.3})",
        t.verdict.label(),
        t.hill.iter().map(|h| format!("{:.2}", h.1)).collect::<Vec<_>>(),
        t.exp_residual,
        t.poly_residual
    );
    Ok(())
}

fn main() -> prsa::Result<()> {
    let setup = MgfSetup { k: 2, x0: 1.0, alpha0: 0.25, alpha1: 0.25 };
    let radii = [2.0, 3.0, 4.0, 5.0, 6.0];
    for factor in [0.5, 2.0] {
        let r = truncated_mgf_divergence(&setup, factor * setup.t_star(), &radii)?;
        println!("t = {factor}·t*: {:?} convergent={}", r.values, r.convergent);
    }

    let two_point = make_two_point_multiplicative(0.5, 3)?;
    diagnose("two-point", &two_point, StepSchedule::new(0.4, 2.0, 0.5)?, vec![1.0])?;
    let linear = make_random_contractive(4, 0.5, 1.0, 7)?;
    diagnose("linear   ", &linear, StepSchedule::new(1.0, 2.0, 0.5)?, vec![0.0; 4])?;
    Ok(())
}
