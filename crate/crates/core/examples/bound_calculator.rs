//! Evaluates the averaged-iterate bound, the crude bound and their minimum on a
//! (k, δ) grid, then the two iterate envelopes.

use prsa::bounds::*;
use prsa::StepSchedule;

fn main() -> prsa::Result<()> {
    let schedule = StepSchedule::new(1.0, 2.0, 0.5)?;
    let params = BoundParams {
        nu: 1.0,
        m: 1.0,
        n: 1.0,
        r: 1.0,
        sigma_bar_sq: 1.0,
        sigma_hat_sq: 1.0,
        u_c2: 1.0,
        d: 2,
        schedule,
        u_exponent: UExponent::Four,
    };
    let f = TailEnvelope::Constant(100.0);
    let rows = bound_table(&params, &f, &[0.1, 0.01], &[10, 100, 1_000, 10_000]);
    write_bound_csv(&rows, std::io::stdout().lock())?;

    let add_sched = StepSchedule::new(6.0, 16.0, 0.5)?;
    let cfg = AdditiveNoiseConfig::with_self_smoothing(1.0, 0.5, 0.1, 4.0, 1.0, 1.0, 1.0, 1.5);
    let env = AdditiveEnvelope::new(cfg, add_sched)?;
    println!("\nadditive envelope at (δ=0.1, k=1000): {:.6}", env.eval(0.1, 1000));
    println!("  constants {:?}", env.constants);
    println!("  offset condition met: {}", env.h_condition_met());

    let mcfg = MultiplicativeConfig::new([1.0, 1.0, 1.0, 1.0], 1.0)?;
    println!("multiplicative envelope at (δ=0.1, k=100): {:.6}", f_multiplicative(&mcfg, &schedule, 0.1, 100));
    Ok(())
}
