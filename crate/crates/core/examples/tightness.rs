//! The pair-Gaussian construction: the empirical quantile of ‖y_k‖₂ against its
//! exact value and against the leading term of the bound.

use prsa::bounds::{BoundParams, UExponent};
use prsa::montecarlo::{run_ensemble, tightness_check, EnsembleSetup};
use prsa::operators::make_pair_gaussian_example;
use prsa::{NormSpec, StepSchedule};

fn main() -> prsa::Result<()> {
    let op = make_pair_gaussian_example(2, 1.0)?;
    let schedule = StepSchedule::new(1.0, 2.0, 0.0)?;
    let setup = EnsembleSetup { schedule, x0: vec![0.0; 2], checkpoints: vec![99], norm: NormSpec::Euclidean };
    let ens = run_ensemble(&op, &setup, 20_000, 1, None)?;
    let params = BoundParams {
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
    };
    for delta in [0.1, 0.01] {
        let t = tightness_check(&ens, &params, 1.0, delta, 99)?;
        println!(
            "delta={delta}: empirical {:.5} [{:.5}, {:.5}], exact {:.5}, ratio {:.4}; leading/exact {:.4} (2√6 = {:.4})",
            t.empirical.value,
            t.empirical.ci_lo,
            t.empirical.ci_hi,
            t.exact,
            t.empirical_over_exact,
            t.leading_over_exact,
            2.0 * 6f64.sqrt()
        );
    }
    Ok(())
}
