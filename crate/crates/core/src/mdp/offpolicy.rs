//! Off-policy TD(n) with linear features and importance ratios.

use nalgebra::{DMatrix, DVector};

use super::{cdf_of, draw_cdf, stationary_distribution, Policy, Sampler, TabularMdp};
use crate::error::{Error, Result};
use crate::operators::{ParamReport, StochasticOperator};
use crate::rng::{fill_standard_normal, seeded, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct LfaConfig {
    /// `|S| × d` feature matrix.
    pub phi: DMatrix<f64>,
    pub pi: Policy,
    pub pi_b: Policy,
    pub n: u32,
    pub zeta: f64,
}

impl LfaConfig {
    pub fn validate(&self, mdp: &TabularMdp) -> Result<()> {
        mdp.check_policy(&self.pi)?;
        mdp.check_policy(&self.pi_b)?;
        if self.phi.nrows() != mdp.n_states() {
            return Err(Error::DimensionMismatch { expected: mdp.n_states(), got: self.phi.nrows() });
        }
        if self.phi.ncols() == 0 || self.phi.ncols() > self.phi.nrows() {
            return Err(Error::invalid("feature matrix must have between 1 and |S| columns"));
        }
        let sv = self.phi.clone().singular_values();
        if sv.min() <= 1e-10 * sv.max().max(1.0) {
            return Err(Error::invalid("feature matrix is not full column rank"));
        }
        if self.n == 0 {
            return Err(Error::invalid("lookahead n must be at least 1"));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::invalid(format!("zeta must be positive, got {}", self.zeta)));
        }
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                if self.pi.prob(s, a) > 0.0 && self.pi_b.prob(s, a) == 0.0 {
                    return Err(Error::UnsupportedBehavior { state: s, action: a });
                }
            }
        }
        Ok(())
    }
}

/// `Ā = Φᵀ K ((γP^π)ⁿ - I) Φ` and `b̄ = Φᵀ K Σ_{l<n} (γP^π)^l r^π`, with
/// `K = diag(μ^{π_b})`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffPolicySystem {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DVector<f64>,
    pub mu_b: Vec<f64>,
}

pub fn offpolicy_system(mdp: &TabularMdp, cfg: &LfaConfig) -> Result<OffPolicySystem> {
    cfg.validate(mdp)?;
    let ns = mdp.n_states();
    let mu_b = stationary_distribution(&mdp.policy_matrix(&cfg.pi_b))?;
    let gp = mdp.policy_matrix(&cfg.pi) * mdp.gamma();
    let rp = mdp.policy_reward(&cfg.pi);
    let mut pow = DMatrix::<f64>::identity(ns, ns);
    let mut acc = DVector::zeros(ns);
    for _ in 0..cfg.n {
        acc += &pow * &rp;
        pow = &pow * &gp;
    }
    let kphi_t = cfg.phi.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(&mu_b));
    let a_bar = &kphi_t * (pow - DMatrix::<f64>::identity(ns, ns)) * &cfg.phi;
    let b_bar = &kphi_t * acc;
    Ok(OffPolicySystem { a_bar, b_bar, mu_b })
}

impl OffPolicySystem {
    /// Solution of `Ā v = -b̄`.
    pub fn fixed_point(&self) -> Result<Vec<f64>> {
        let sol = self.a_bar.clone().lu().solve(&(-&self.b_bar)).ok_or(Error::SingularSystem(0.0))?;
        Ok(sol.iter().copied().collect())
    }
}

/// `‖Φv - Π((T^π)ⁿ Φv)‖_∞` with `Π = Φ(ΦᵀKΦ)⁻¹ΦᵀK`.
pub fn projected_bellman_residual(mdp: &TabularMdp, cfg: &LfaConfig, mu_b: &[f64], v: &[f64]) -> Result<f64> {
    let ns = mdp.n_states();
    let gp = mdp.policy_matrix(&cfg.pi) * mdp.gamma();
    let rp = mdp.policy_reward(&cfg.pi);
    let phiv = &cfg.phi * DVector::from_column_slice(v);
    let mut t = phiv.clone();
    for _ in 0..cfg.n {
        t = &rp + &gp * t;
    }
    let k = DMatrix::from_diagonal(&DVector::from_column_slice(mu_b));
    let gram = cfg.phi.transpose() * &k * &cfg.phi;
    let coef = gram.lu().solve(&(cfg.phi.transpose() * &k * t)).ok_or(Error::SingularSystem(0.0))?;
    let _ = ns;
    Ok((&phiv - &cfg.phi * coef).amax())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzReport {
    pub hurwitz: bool,
    /// Largest real part among the eigenvalues.
    pub abscissa: f64,
}

pub fn hurwitz_check(a_bar: &DMatrix<f64>) -> HurwitzReport {
    let abscissa = a_bar.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    HurwitzReport { hurwitz: abscissa < 0.0, abscissa }
}

/// A weighted 2-norm `‖x‖_W = √(xᵀWx)` in which `v ↦ v + Āv/ζ` contracts for `ζ ≥ ζ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovNorm {
    pub w: DMatrix<f64>,
    pub zeta_star: f64,
    /// Largest sampled ratio `‖(I + Ā/ζ*)z‖_W / ‖z‖_W`.
    pub sampled_ratio: f64,
    /// Exact induced norm of `I + Ā/ζ*` under `‖·‖_W`.
    pub induced_norm: f64,
}

impl LyapunovNorm {
    pub fn norm(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        (v.transpose() * &self.w * &v)[(0, 0)].max(0.0).sqrt()
    }

    /// Induced norm of `I + Ā/ζ` in the `W` geometry.
    pub fn induced(&self, a_bar: &DMatrix<f64>, zeta: f64) -> f64 {
        induced_w_norm(&self.w, a_bar, zeta)
    }
}

fn induced_w_norm(w: &DMatrix<f64>, a_bar: &DMatrix<f64>, zeta: f64) -> f64 {
    let d = w.nrows();
    let l = w.clone().cholesky().expect("W is positive definite").l();
    let m = DMatrix::<f64>::identity(d, d) + a_bar / zeta;
    let lt_inv = l.transpose().try_inverse().expect("triangular factor is invertible");
    (l.transpose() * m * lt_inv).singular_values().max()
}

/// Solves `ĀᵀW + WĀ = -I`, then doubles `ζ` from 1 until `I + Ā/ζ` contracts in
/// `‖·‖_W` on 10³ sampled directions and in exact induced norm.
pub fn lyapunov_contraction_norm(a_bar: &DMatrix<f64>, seed: u64) -> Result<LyapunovNorm> {
    let hr = hurwitz_check(a_bar);
    if !hr.hurwitz {
        return Err(Error::NotHurwitz(hr.abscissa));
    }
    let d = a_bar.nrows();
    let eye = DMatrix::<f64>::identity(d, d);
    let at = a_bar.transpose();
    let sys = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(d * d, (-&eye).iter().copied());
    let sol = sys.lu().solve(&rhs).ok_or(Error::SingularSystem(0.0))?;
    let w = DMatrix::from_column_slice(d, d, sol.as_slice());
    let w = (&w + w.transpose()) * 0.5;
    if w.clone().cholesky().is_none() {
        return Err(Error::NotHurwitz(hr.abscissa));
    }
    let mut rng = seeded(seed);
    let dirs: Vec<DVector<f64>> = (0..1000)
        .map(|_| {
            let mut z = vec![0.0; d];
            fill_standard_normal(&mut rng, &mut z);
            DVector::from_vec(z)
        })
        .collect();
    let wn = |x: &DVector<f64>| (x.transpose() * &w * x)[(0, 0)].max(0.0).sqrt();
    let mut zeta = 1.0f64;
    for _ in 0..64 {
        let m = &eye + a_bar / zeta;
        let sampled = dirs.iter().map(|z| wn(&(&m * z)) / wn(z)).fold(0.0, f64::max);
        let induced = induced_w_norm(&w, a_bar, zeta);
        if sampled < 1.0 && induced < 1.0 {
            return Ok(LyapunovNorm { w, zeta_star: zeta, sampled_ratio: sampled, induced_norm: induced });
        }
        zeta *= 2.0;
    }
    Err(Error::invalid("no contracting zeta found below 2^64"))
}

/// The sampled off-policy TD(n) operator over feature weights.
#[derive(Debug, Clone)]
pub struct OffPolicySampler {
    cfg: LfaConfig,
    system: OffPolicySystem,
    v_star: Vec<f64>,
    gamma: f64,
    na: usize,
    rewards: Vec<f64>,
    ratios: Vec<f64>,
    start_cdf: Vec<f64>,
    behavior_cdf: Vec<Vec<f64>>,
    sampler: Sampler,
}

pub fn make_offpolicy_td_sampler(cfg: &LfaConfig, mdp: &TabularMdp) -> Result<OffPolicySampler> {
    let system = offpolicy_system(mdp, cfg)?;
    let v_star = system.fixed_point()?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let ratios = (0..ns * na)
        .map(|i| {
            let b = cfg.pi_b.prob(i / na, i % na);
            if b > 0.0 { cfg.pi.prob(i / na, i % na) / b } else { 0.0 }
        })
        .collect();
    Ok(OffPolicySampler {
        start_cdf: cdf_of(&system.mu_b),
        behavior_cdf: (0..ns).map(|s| cdf_of(cfg.pi_b.row(s))).collect(),
        rewards: (0..ns * na).map(|i| mdp.reward(i / na, i % na)).collect(),
        ratios,
        na,
        gamma: mdp.gamma(),
        sampler: Sampler::new(mdp),
        system,
        v_star,
        cfg: cfg.clone(),
    })
}

/// A realized behavior trajectory with cumulative ratios `Π_{j≤l} π/π_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub cumulative_ratios: Vec<f64>,
}

impl OffPolicySampler {
    pub fn system(&self) -> &OffPolicySystem {
        &self.system
    }

    pub fn config(&self) -> &LfaConfig {
        &self.cfg
    }

    pub fn draw_episode(&self, rng: &mut SimRng) -> Episode {
        let mut s = draw_cdf(&self.start_cdf, rng);
        let mut ep = Episode { states: vec![s], actions: Vec::new(), cumulative_ratios: Vec::new() };
        let mut rho = 1.0;
        for _ in 0..self.cfg.n {
            let a = draw_cdf(&self.behavior_cdf[s], rng);
            rho *= self.ratios[s * self.na + a];
            ep.actions.push(a);
            ep.cumulative_ratios.push(rho);
            s = self.sampler.next_state(s, a, rng);
            ep.states.push(s);
        }
        ep
    }

    #[inline]
    fn feature_dot(&self, s: usize, v: &[f64]) -> f64 {
        v.iter().enumerate().map(|(j, x)| self.cfg.phi[(s, j)] * x).sum()
    }
}

impl StochasticOperator for OffPolicySampler {
    fn dim(&self) -> usize {
        self.cfg.phi.ncols()
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let s0 = draw_cdf(&self.start_cdf, rng);
        let mut s = s0;
        let mut rho = 1.0;
        let mut g = 1.0;
        let mut total = 0.0;
        let mut cur = self.feature_dot(s, x);
        for _ in 0..self.cfg.n {
            let a = draw_cdf(&self.behavior_cdf[s], rng);
            rho *= self.ratios[s * self.na + a];
            let s1 = self.sampler.next_state(s, a, rng);
            let next = self.feature_dot(s1, x);
            if rho != 0.0 {
                total += g * rho * (self.rewards[s * self.na + a] + self.gamma * next - cur);
            }
            g *= self.gamma;
            s = s1;
            cur = next;
        }
        let scale = total / self.cfg.zeta;
        for (j, o) in out.iter_mut().enumerate() {
            *o = x[j] + scale * self.cfg.phi[(s0, j)];
        }
    }

    /// `v + (Āv + b̄)/ζ`.
    fn mean(&self, x: &[f64], out: &mut [f64]) {
        let dir = &self.system.a_bar * DVector::from_column_slice(x) + &self.system.b_bar;
        for j in 0..x.len() {
            out[j] = x[j] + dir[j] / self.cfg.zeta;
        }
    }

    fn fixed_point(&self) -> &[f64] {
        &self.v_star
    }

    fn report(&self) -> ParamReport {
        ParamReport { n_curvature: Some(0.0), radius: Some(f64::INFINITY), ..ParamReport::default() }
    }

    fn name(&self) -> &'static str {
        "offpolicy_td_lfa"
    }
}
