//! Exact oracles for a tabular MDP and its plain-text round trip.

use prsa::mdp::{exact_value, stationary_distribution, Policy, TabularMdp};

fn main() -> prsa::Result<()> {
    let mdp = TabularMdp::random(3, 2, 0.8, 1.0, 4)?;
    let pi = Policy::random(3, 2, 5);
    let mu = stationary_distribution(&mdp.policy_matrix(&pi))?;
    println!("mu^pi = {mu:?}");
    println!("V^pi  = {:?}", exact_value(&mdp, &pi)?);

    let text = mdp.to_text();
    print!("{text}");
    assert_eq!(TabularMdp::from_text(&text)?, mdp);
    Ok(())
}
