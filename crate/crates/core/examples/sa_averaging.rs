//! Runs the averaged recursion on a random linear contraction and prints the
//! squared error of the last iterate and of the running average.

use prsa::operators::make_random_contractive;
use prsa::sa::{geometric_checkpoints, run_sa, StepSchedule};
use prsa::NormSpec;

fn main() -> prsa::Result<()> {
    let op = make_random_contractive(4, 0.5, 1.0, 7)?;
    let schedule = StepSchedule::new(1.0, 2.0, 0.5)?;
    let cps = geometric_checkpoints(10.0, 100_000);
    let traj = run_sa(&op, &schedule, &[1.0; 4], 100_000, &cps, &NormSpec::Euclidean, 42)?;

    println!("{:>8} {:>14} {:>14}", "k", "|x_k - x*|^2", "|y_k - x*|^2");
    for ((k, ex), ey) in traj.checkpoints.iter().zip(&traj.err_x).zip(&traj.err_y) {
        println!("{k:>8} {ex:>14.6e} {ey:>14.6e}");
    }
    Ok(())
}
