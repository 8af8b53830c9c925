//! Asynchronous Q-learning with i.i.d. `(S, A, S')` samples.

use super::{bellman_optimality, cdf_of, draw_cdf, exact_qstar, stationary_distribution, Policy, QStar, Sampler, TabularMdp};
use super::td::RlBoundSetup;
use crate::bounds::{AdditiveEnvelope, AdditiveNoiseConfig, BoundParams, TailEnvelope, UExponent};
use crate::error::{Error, Result};
use crate::norms::NormSpec;
use crate::operators::{ParamReport, StochasticOperator};
use crate::rng::SimRng;
use crate::sa::StepSchedule;

/// `ln(|S||A|) / ln(1/(1-(1-γ)ρ_b))`.
pub fn q_p_min(gamma: f64, rho_b: f64, n_states: usize, n_actions: usize) -> f64 {
    ((n_states * n_actions) as f64).ln() / (1.0 / (1.0 - (1.0 - gamma) * rho_b)).ln()
}

/// `(|S||A|)^{1/p} (1 - (1-γ)ρ_b)`, defined only above `p_min`.
pub fn q_contraction_factor(gamma: f64, rho_b: f64, n_states: usize, n_actions: usize, p: f64) -> Result<f64> {
    let p_min = q_p_min(gamma, rho_b, n_states, n_actions);
    if !(p > p_min) {
        return Err(Error::NotContractive { p, p_min });
    }
    Ok(((n_states * n_actions) as f64).powf(1.0 / p) * (1.0 - (1.0 - gamma) * rho_b))
}

#[derive(Debug, Clone)]
pub struct QSampler {
    mdp: TabularMdp,
    visit: Vec<f64>,
    visit_cdf: Vec<f64>,
    rho_b: f64,
    qstar: QStar,
    sampler: Sampler,
}

/// Q-learning operator driven by the behavior policy `π_b`.
pub fn make_q_sampler(mdp: &TabularMdp, pi_b: &Policy) -> Result<QSampler> {
    mdp.check_policy(pi_b)?;
    let mu = stationary_distribution(&mdp.policy_matrix(pi_b))?;
    let na = mdp.n_actions();
    let visit: Vec<f64> = (0..mdp.n_states() * na).map(|i| mu[i / na] * pi_b.prob(i / na, i % na)).collect();
    let rho_b = visit.iter().cloned().fold(f64::INFINITY, f64::min);
    let qstar = exact_qstar(mdp, 1e-12)?;
    Ok(QSampler { visit_cdf: cdf_of(&visit), visit, rho_b, qstar, sampler: Sampler::new(mdp), mdp: mdp.clone() })
}

impl QSampler {
    /// `min_{s,a} μ^{π_b}(s) π_b(a|s)`.
    pub fn rho_b(&self) -> f64 {
        self.rho_b
    }

    /// `μ^{π_b}(s) π_b(a|s)` indexed by `s·|A| + a`.
    pub fn visit_law(&self) -> &[f64] {
        &self.visit
    }

    pub fn qstar(&self) -> &QStar {
        &self.qstar
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    /// One draw of `(S, A, S')`, returned as `(S·|A| + A, S')`.
    #[inline]
    pub fn draw(&self, rng: &mut SimRng) -> (usize, usize) {
        let sa = draw_cdf(&self.visit_cdf, rng);
        let na = self.mdp.n_actions();
        (sa, self.sampler.next_state(sa / na, sa % na, rng))
    }

    pub fn p_min(&self) -> f64 {
        q_p_min(self.mdp.gamma(), self.rho_b, self.mdp.n_states(), self.mdp.n_actions())
    }

    /// Sup-norm contraction factor `1 - (1-γ)ρ_b` of the mean map.
    pub fn sup_contraction_factor(&self) -> f64 {
        1.0 - (1.0 - self.mdp.gamma()) * self.rho_b
    }
}

impl StochasticOperator for QSampler {
    fn dim(&self) -> usize {
        self.visit.len()
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let (sa, s1) = self.draw(rng);
        let na = self.mdp.n_actions();
        let best = x[s1 * na..(s1 + 1) * na].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.copy_from_slice(x);
        out[sa] += self.mdp.reward(sa / na, sa % na) + self.mdp.gamma() * best - x[sa];
    }

    /// `M H(Q) + (I - M) Q` with `M = diag(μ^{π_b}(s)π_b(a|s))`.
    fn mean(&self, x: &[f64], out: &mut [f64]) {
        bellman_optimality(&self.mdp, x, out);
        for i in 0..x.len() {
            out[i] = self.visit[i] * out[i] + (1.0 - self.visit[i]) * x[i];
        }
    }

    fn fixed_point(&self) -> &[f64] {
        &self.qstar.q
    }

    fn report(&self) -> ParamReport {
        ParamReport {
            n_curvature: Some(0.0),
            radius: Some(self.qstar.gap / (2.0 * (1.0 + self.mdp.gamma()))),
            ..ParamReport::default()
        }
    }

    fn name(&self) -> &'static str {
        "q_learning"
    }
}

/// Q-learning constants under the unweighted p-norm with `p = p_min (k+1)^{1/4}`.
///
/// The operator is linear within sup-distance `gap/2` of `Q*`, so the radius
/// `gap/(2(1+γ))` is certified. Noise constants are Hoeffding proxies for
/// tables in the box `[0, R_max/(1-γ)]`.
pub fn q_bound_setup(op: &QSampler, schedule: &StepSchedule, k: u64, x0: &[f64], moreau_mu: f64) -> Result<RlBoundSetup> {
    let mdp = &op.mdp;
    let (ns, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let p = (op.p_min() * ((k + 1) as f64).powf(0.25)).max(2.0);
    let gamma_c = q_contraction_factor(gamma, op.rho_b, ns, na, p)?;
    let norm = NormSpec::unweighted_p(p, ns * na)?;
    let b_q = mdp.r_max() / (1.0 - gamma);
    let params = BoundParams {
        nu: 1.0 - gamma_c,
        m: p - 1.0,
        n: 0.0,
        r: op.qstar.gap / (2.0 * (1.0 + gamma)),
        sigma_bar_sq: 4.0 * b_q * b_q,
        sigma_hat_sq: 4.0 * (1.0 + gamma).powi(2),
        u_c2: 1.0,
        d: ns * na,
        schedule: *schedule,
        u_exponent: UExponent::Four,
    };
    params.validate()?;
    let cfg = AdditiveNoiseConfig::with_self_smoothing(
        4.0 * b_q * b_q,
        gamma_c,
        moreau_mu,
        1.0,
        norm.dist_sq(x0, &op.qstar.q),
        p - 1.0,
        1.0,
        schedule.alpha() * (1.0 - gamma_c),
    );
    let env = AdditiveEnvelope::new(cfg, *schedule)?;
    Ok(RlBoundSetup {
        h_condition_met: env.h_condition_met(),
        params,
        envelope: TailEnvelope::Additive(env),
        p,
        gamma_c,
        norm,
        sup_factor: 1.0,
    })
}

/// Sup-norm distance between two tables.
pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::random_vector;
    use crate::operators::unbiasedness_gap;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn contraction_factor_examples() {
        let pm = q_p_min(0.5, 0.25, 2, 2);
        assert_relative_eq!(q_contraction_factor(0.5, 0.25, 2, 2, 2.0 * pm).unwrap(), 4f64.powf(1.0 / (2.0 * pm)) * 0.875, max_relative = 1e-14);
        assert!(matches!(q_contraction_factor(0.5, 0.25, 2, 2, pm), Err(Error::NotContractive { .. })));
        assert_relative_eq!(q_contraction_factor(0.5, 0.25, 2, 2, 1e12).unwrap(), 0.875, max_relative = 1e-10);
    }

    #[test]
    fn zero_discount_fixed_point_is_reward() {
        let mdp = TabularMdp::random(3, 2, 0.0, 1.0, 4).unwrap();
        let op = make_q_sampler(&mdp, &Policy::uniform(3, 2)).unwrap();
        let mut out = vec![0.0; 6];
        op.mean(op.fixed_point(), &mut out);
        for i in 0..6 {
            assert_relative_eq!(op.fixed_point()[i], mdp.reward(i / 2, i % 2), epsilon = 1e-14);
            assert_relative_eq!(out[i], op.fixed_point()[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn visit_frequencies() {
        let mdp = TabularMdp::random(3, 2, 0.9, 1.0, 7).unwrap();
        let op = make_q_sampler(&mdp, &Policy::random(3, 2, 8)).unwrap();
        let mut rng = seeded(2);
        let n = 200_000;
        let mut counts = vec![0usize; 6];
        for _ in 0..n {
            counts[op.draw(&mut rng).0] += 1;
        }
        for i in 0..6 {
            let p = op.visit_law()[i];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[i] as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn unbiased_at_fixed_point() {
        let mdp = TabularMdp::random(3, 2, 0.9, 1.0, 9).unwrap();
        let op = make_q_sampler(&mdp, &Policy::uniform(3, 2)).unwrap();
        let q = op.fixed_point().to_vec();
        assert!(unbiasedness_gap(&op, &q, 100_000, 3) < 4.0);
        let mut out = vec![0.0; 6];
        op.mean(&q, &mut out);
        assert!(sup_dist(&out, &q) < 1e-9);
    }

    #[test]
    fn sup_norm_contraction() {
        let mdp = TabularMdp::random(4, 2, 0.9, 1.0, 10).unwrap();
        let op = make_q_sampler(&mdp, &Policy::uniform(4, 2)).unwrap();
        let c = op.sup_contraction_factor();
        let mut rng = seeded(4);
        let (mut f1, mut f2) = (vec![0.0; 8], vec![0.0; 8]);
        for _ in 0..1000 {
            let q1 = random_vector(&mut rng, 8, 5.0);
            let q2 = random_vector(&mut rng, 8, 5.0);
            op.mean(&q1, &mut f1);
            op.mean(&q2, &mut f2);
            assert!(sup_dist(&f1, &f2) <= c * sup_dist(&q1, &q2) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bound_setup_is_finite() {
        let mdp = TabularMdp::random(3, 2, 0.7, 1.0, 12).unwrap();
        let op = make_q_sampler(&mdp, &Policy::uniform(3, 2)).unwrap();
        let s = StepSchedule::new(1.0, 4.0, 0.5).unwrap();
        let setup = q_bound_setup(&op, &s, 10_000, &[0.0; 6], 1.0).unwrap();
        assert!(setup.sup_bound(0.05, 10_000).is_finite());
    }
}
