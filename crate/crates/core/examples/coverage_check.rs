//! Empirical coverage of the combined bound for a linear operator with
//! Gaussian noise.

use prsa::bounds::{combined_bound, linear_additive_bound_setup, TailEnvelope};
use prsa::montecarlo::{coverage_test, run_ensemble, write_summary_csv, EnsembleSetup};
use prsa::operators::make_random_contractive;
use prsa::{NormSpec, StepSchedule};

fn main() -> prsa::Result<()> {
    let op = make_random_contractive(4, 0.5, 1.0, 7)?;
    let schedule = StepSchedule::new(4.0, 16.0, 0.5)?;
    let x0 = vec![0.0; 4];
    let (params, env) = linear_additive_bound_setup(&op, &schedule, &x0, 1.0)?;
    assert!(env.h_condition_met());
    let env = TailEnvelope::Additive(env);

    let setup = EnsembleSetup { schedule, x0, checkpoints: vec![100, 1_000], norm: NormSpec::Euclidean };
    let ens = run_ensemble(&op, &setup, 2_000, 5, None)?;
    let bound = |k: u64, d: f64| combined_bound(&params, &env, d, k);
    let verdicts = coverage_test(&ens, &bound, 0.05, 1.0);
    write_summary_csv(&ens, &verdicts, std::io::stdout().lock())?;
    Ok(())
}
