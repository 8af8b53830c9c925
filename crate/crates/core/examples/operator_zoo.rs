//! The catalogue of example operators, their assumption constants, and a
//! sampled unbiasedness check for each.

use prsa::operators::{unbiasedness_gap, ExampleConfig};

fn main() -> prsa::Result<()> {
    let zoo = [
        ExampleConfig::PairGaussian { d: 4, sigma_bar: 1.0 },
        ExampleConfig::MultiplicativeGaussian,
        ExampleConfig::TwoPointMultiplicative { a: 0.5, n: 3 },
        ExampleConfig::RandomContractive { d: 3, gamma_c: 0.5, noise_scale: 1.0, seed: 1 },
    ];
    for cfg in &zoo {
        let op = cfg.build()?;
        let x = vec![0.5; op.dim()];
        let gap = unbiasedness_gap(op.as_ref(), &x, 50_000, 9);
        println!("{:<26} d={} gap={gap:.2}SE  {:?}", op.name(), op.dim(), op.report());
    }
    Ok(())
}
