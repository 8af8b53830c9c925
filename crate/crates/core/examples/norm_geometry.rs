//! Smoothness of ½‖·‖²_p, the dual pairing, and the contraction margin ν of a
//! linear map.

use prsa::norms::{estimate_nu, gradient_lipschitz_ratio, random_vector, smoothness_constant, smoothness_slack};
use prsa::operators::make_random_contractive;
use prsa::rng::seeded;
use prsa::NormSpec;

fn main() -> prsa::Result<()> {
    let mut rng = seeded(3);
    for p in [2.0, 4.0, 8.0] {
        let norm = NormSpec::unweighted_p(p, 5)?;
        let m = smoothness_constant(&norm)?;
        let (mut worst_ratio, mut worst_slack) = (0.0f64, f64::INFINITY);
        for _ in 0..10_000 {
            let x = random_vector(&mut rng, 5, 2.0);
            let y = random_vector(&mut rng, 5, 2.0);
            worst_ratio = worst_ratio.max(gradient_lipschitz_ratio(&norm, &x, &y)?);
            worst_slack = worst_slack.min(smoothness_slack(&norm, &x, &y, m)?);
        }
        println!("p={p}: M={m}, max gradient ratio {worst_ratio:.4}, min slack {worst_slack:.2e}");
    }

    let op = make_random_contractive(4, 0.6, 1.0, 11)?;
    let nu = estimate_nu(op.matrix(), &NormSpec::Euclidean)?;
    println!("nu = {:.6} (>= 1 - 0.6), certified: {}", nu.value, nu.certified);
    Ok(())
}
