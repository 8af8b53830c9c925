//! Tabular TD(n) with i.i.d. start states.

use nalgebra::{DMatrix, DVector};

use super::{cdf_of, draw_cdf, stationary_distribution, exact_value, Policy, Sampler, TabularMdp};
use crate::bounds::{combined_bound, AdditiveEnvelope, AdditiveNoiseConfig, BoundParams, TailEnvelope, UExponent};
use crate::error::{Error, Result};
use crate::norms::NormSpec;
use crate::operators::{ParamReport, StochasticOperator};
use crate::rng::SimRng;
use crate::sa::StepSchedule;

/// Matrix form `F̄(V) = A^π V + b^π` of the TD(n) mean map, with the
/// auxiliary chain `C^π = A^π + B^π` and its stationary law `ν^π`.
#[derive(Debug, Clone)]
pub struct TdOperatorReport {
    pub a_pi: DMatrix<f64>,
    pub b_pi: DVector<f64>,
    pub c_pi: DMatrix<f64>,
    pub nu_pi: Vec<f64>,
    pub mu_pi: Vec<f64>,
    pub v_pi: Vec<f64>,
    pub n: u32,
    pub gamma: f64,
    pub p: f64,
    pub r_max: f64,
}

impl TdOperatorReport {
    pub fn n_states(&self) -> usize {
        self.mu_pi.len()
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_pi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_pi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `(1 - γⁿ) μ_min`.
    pub fn mixing_mass(&self) -> f64 {
        (1.0 - self.gamma.powi(self.n as i32)) * self.mu_min()
    }

    /// `[1 - (1-γⁿ) μ_min]^{1 - 1/p}`.
    pub fn gamma_c(&self, p: f64) -> f64 {
        (1.0 - self.mixing_mass()).powf(1.0 - 1.0 / p)
    }

    pub fn p_star(&self, k: u64) -> f64 {
        p_schedule(k, self.gamma, self.n, self.mu_min(), self.n_states())
    }

    /// `‖·‖_{ν^π, p}`.
    pub fn norm(&self, p: f64) -> Result<NormSpec> {
        NormSpec::weighted_p(p, self.nu_pi.clone())
    }

    pub fn mean_map(&self, v: &[f64]) -> Vec<f64> {
        (&self.a_pi * DVector::from_column_slice(v) + &self.b_pi).iter().copied().collect()
    }

    /// `‖A^π V^π + b^π - V^π‖_∞`.
    pub fn fixed_point_residual(&self) -> f64 {
        self.mean_map(&self.v_pi).iter().zip(&self.v_pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn td_operator_report(mdp: &TabularMdp, pi: &Policy, n: u32, p: f64) -> Result<TdOperatorReport> {
    if n == 0 {
        return Err(Error::invalid("TD lookahead n must be at least 1"));
    }
    if !(p >= 2.0) {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    mdp.check_policy(pi)?;
    let ns = mdp.n_states();
    let gamma = mdp.gamma();
    let pm = mdp.policy_matrix(pi);
    let rp = mdp.policy_reward(pi);
    let mu = stationary_distribution(&pm)?;
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(&mu));
    let eye = DMatrix::<f64>::identity(ns, ns);
    let mut pn = eye.clone();
    let mut acc = DVector::zeros(ns);
    let mut g = 1.0;
    for _ in 0..n {
        acc += &pn * &rp * g;
        pn = &pn * &pm;
        g *= gamma;
    }
    let a_pi = &eye - &m * (&eye - &pn * g);
    let b_pi = &m * acc;
    let scale = (1.0 - g) / ns as f64;
    let c_pi = DMatrix::from_fn(ns, ns, |s, t| a_pi[(s, t)] + scale * mu[s]);
    let nu = stationary_distribution(&c_pi)?;
    let v_pi = exact_value(mdp, pi)?;
    Ok(TdOperatorReport { a_pi, b_pi, c_pi, nu_pi: nu, mu_pi: mu, v_pi, n, gamma, p, r_max: mdp.r_max() })
}

/// `p = (-4 log(1-x)/x) · log(|S|/x) · (k+1)^{1/4}` with `x = (1-γⁿ)μ_min`, floored at 2.
pub fn p_schedule(k: u64, gamma: f64, n: u32, mu_min: f64, n_states: usize) -> f64 {
    let x = (1.0 - gamma.powi(n as i32)) * mu_min;
    let p = -4.0 * (1.0 - x).ln() / x * (n_states as f64 / x).ln() * ((k + 1) as f64).powf(0.25);
    p.max(2.0)
}

/// The TD(n) operator `F(V, w)` over full value tables.
#[derive(Debug, Clone)]
pub struct TdSampler {
    report: TdOperatorReport,
    rewards: Vec<f64>,
    na: usize,
    policy_cdf: Vec<Vec<f64>>,
    start_cdf: Vec<f64>,
    sampler: Sampler,
}

pub fn make_td_sampler(mdp: &TabularMdp, pi: &Policy, n: u32) -> Result<TdSampler> {
    let report = td_operator_report(mdp, pi, n, 2.0)?;
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    Ok(TdSampler {
        start_cdf: cdf_of(&report.mu_pi),
        policy_cdf: (0..ns).map(|s| cdf_of(pi.row(s))).collect(),
        rewards: (0..ns * na).map(|i| mdp.reward(i / na, i % na)).collect(),
        na,
        sampler: Sampler::new(mdp),
        report,
    })
}

impl TdSampler {
    pub fn report(&self) -> &TdOperatorReport {
        &self.report
    }

    /// One draw `(S⁰, Sⁿ, Σ_{i<n} γⁱ R_i)`.
    #[inline]
    pub fn draw(&self, rng: &mut SimRng) -> (usize, usize, f64) {
        let s0 = draw_cdf(&self.start_cdf, rng);
        let mut s = s0;
        let mut ret = 0.0;
        let mut g = 1.0;
        for _ in 0..self.report.n {
            let a = draw_cdf(&self.policy_cdf[s], rng);
            ret += g * self.rewards[s * self.na + a];
            s = self.sampler.next_state(s, a, rng);
            g *= self.report.gamma;
        }
        (s0, s, ret)
    }
}

impl StochasticOperator for TdSampler {
    fn dim(&self) -> usize {
        self.report.n_states()
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let (s0, sn, ret) = self.draw(rng);
        out.copy_from_slice(x);
        out[s0] += self.report.gamma.powi(self.report.n as i32) * x[sn] - x[s0] + ret;
    }

    fn mean(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.report.mean_map(x));
    }

    fn fixed_point(&self) -> &[f64] {
        &self.report.v_pi
    }

    fn report(&self) -> ParamReport {
        ParamReport { n_curvature: Some(0.0), radius: Some(f64::INFINITY), ..ParamReport::default() }
    }

    fn name(&self) -> &'static str {
        "td_n"
    }
}

/// Everything needed to evaluate the averaged-TD bound at one horizon.
#[derive(Debug, Clone)]
pub struct RlBoundSetup {
    pub params: BoundParams,
    pub envelope: TailEnvelope,
    pub p: f64,
    pub gamma_c: f64,
    pub norm: NormSpec,
    /// Multiplier converting a squared contraction-norm bound into a squared sup-norm bound.
    pub sup_factor: f64,
    /// Whether the offset `h` meets the additive-envelope threshold.
    pub h_condition_met: bool,
}

impl RlBoundSetup {
    /// Bound on `‖ȳ_k - x*‖²_∞` holding with probability `1 - δ`.
    pub fn sup_bound(&self, delta: f64, k: u64) -> f64 {
        self.sup_factor * combined_bound(&self.params, &self.envelope, delta, k)
    }
}

/// Assumption constants for TD(n) under `‖·‖_{ν^π,p}` with `p` from the
/// p-schedule at horizon `k`, plus the additive-noise envelope.
///
/// Values are bounded by `B = R_max/(1-γ)` while iterates stay in the box
/// `[0, B]`; the noise constants are Hoeffding proxies for that range.
pub fn td_bound_setup(report: &TdOperatorReport, schedule: &StepSchedule, k: u64, x0: &[f64], moreau_mu: f64) -> Result<RlBoundSetup> {
    let p = report.p_star(k);
    let gamma_c = report.gamma_c(p);
    let norm = report.norm(p)?;
    let nu_min = report.nu_min();
    let inv = nu_min.powf(-2.0 / p);
    let b_v = report.r_max / (1.0 - report.gamma);
    let gn = report.gamma.powi(report.n as i32);
    let params = BoundParams {
        nu: 1.0 - gamma_c,
        m: p - 1.0,
        n: 0.0,
        r: f64::INFINITY,
        sigma_bar_sq: inv * b_v * b_v,
        sigma_hat_sq: (2.0 * (1.0 + gn) * inv).powi(2),
        u_c2: 1.0,
        d: report.n_states(),
        schedule: *schedule,
        u_exponent: UExponent::Four,
    };
    params.validate()?;
    let cfg = AdditiveNoiseConfig::with_self_smoothing(
        4.0 * b_v * b_v * inv,
        gamma_c,
        moreau_mu,
        1.0 / inv,
        norm.dist_sq(x0, &report.v_pi),
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
        sup_factor: inv,
    })
}
