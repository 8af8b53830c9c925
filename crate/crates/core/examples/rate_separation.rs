//! Median errors over an ensemble: the average decays like 1/k while the
//! last iterate decays like α_k ∝ k^{-1/2}.

use prsa::bounds::loglog_slope;
use prsa::montecarlo::{median, run_ensemble, EnsembleSetup};
use prsa::operators::make_random_contractive;
use prsa::sa::{log_spaced_checkpoints, StepSchedule};
use prsa::NormSpec;

fn main() -> prsa::Result<()> {
    let op = make_random_contractive(4, 0.5, 1.0, 7)?;
    let setup = EnsembleSetup {
        schedule: StepSchedule::new(1.0, 2.0, 0.5)?,
        x0: vec![1.0; 4],
        checkpoints: log_spaced_checkpoints(1_000, 100_000, 6),
        norm: NormSpec::Euclidean,
    };
    let ens = run_ensemble(&op, &setup, 200, 1, None)?;
    let ks: Vec<f64> = ens.checkpoints.iter().map(|&k| k as f64).collect();
    let my: Vec<f64> = ens.err_y.iter().map(|s| median(s)).collect();
    let mx: Vec<f64> = ens.err_x.iter().map(|s| median(s)).collect();
    for i in 0..ks.len() {
        println!("k={:>7}  median err_x={:.4e}  median err_y={:.4e}", ks[i], mx[i], my[i]);
    }
    println!("slope err_y {:.3}, slope err_x {:.3}", loglog_slope(&ks, &my), loglog_slope(&ks, &mx));
    Ok(())
}
