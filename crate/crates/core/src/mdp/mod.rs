//! Finite MDPs, exact oracles, and the i.i.d. samplers for TD(n), Q-learning
//! and off-policy TD with linear features.

mod offpolicy;
mod qlearn;
mod td;

pub use offpolicy::*;
pub use qlearn::*;
pub use td::*;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{categorical, flat_dirichlet, seeded, uniform01, SimRng};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite MDP `(S, A, P, R, γ)` with rewards in `[0, R_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P(s'|s,a)` at `(s * |A| + a) * |S| + s'`.
    p: Vec<f64>,
    /// `R(s,a)` at `s * |A| + a`.
    r: Vec<f64>,
    gamma: f64,
    r_max: f64,
}

fn check_simplex(row: &[f64], what: impl Fn() -> String) -> Result<()> {
    if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("{} has a negative or non-finite entry", what())));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::invalid(format!("{} sums to {s}, not 1", what())));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize, p: Vec<f64>, r: Vec<f64>, gamma: f64, r_max: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("MDP needs at least one state and one action"));
        }
        if p.len() != n_states * n_actions * n_states {
            return Err(Error::DimensionMismatch { expected: n_states * n_actions * n_states, got: p.len() });
        }
        if r.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch { expected: n_states * n_actions, got: r.len() });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("discount must lie in [0,1), got {gamma}")));
        }
        if !(r_max >= 0.0 && r_max.is_finite()) {
            return Err(Error::invalid(format!("R_max must be finite and non-negative, got {r_max}")));
        }
        for (idx, row) in p.chunks(n_states).enumerate() {
            check_simplex(row, || format!("P(.|s={},a={})", idx / n_actions, idx % n_actions))?;
        }
        if let Some(i) = r.iter().position(|&x| !(0.0..=r_max).contains(&x)) {
            return Err(Error::invalid(format!("reward R({},{}) = {} outside [0, {r_max}]", i / n_actions, i % n_actions, r[i])));
        }
        Ok(TabularMdp { n_states, n_actions, p, r, gamma, r_max })
    }

    /// Dirichlet(1) transition rows and uniform rewards on `[0, R_max]`.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, r_max: f64, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let mut p = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            p.extend(flat_dirichlet(&mut rng, n_states));
        }
        let r = (0..n_states * n_actions).map(|_| r_max * uniform01(&mut rng)).collect();
        Self::new(n_states, n_actions, p, r, gamma, r_max)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n_states, self.n_actions, self.p.clone(), self.r.clone(), gamma, self.r_max)
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.p[start..start + self.n_states]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[s * self.n_actions + a]
    }

    /// `P^π(s, s') = Σ_a π(a|s) P(s'|s,a)`.
    pub fn policy_matrix(&self, pi: &Policy) -> DMatrix<f64> {
        let n = self.n_states;
        DMatrix::from_fn(n, n, |s, t| (0..self.n_actions).map(|a| pi.prob(s, a) * self.transition_row(s, a)[t]).sum())
    }

    /// `r^π(s) = Σ_a π(a|s) R(s,a)`.
    pub fn policy_reward(&self, pi: &Policy) -> DVector<f64> {
        DVector::from_fn(self.n_states, |s, _| (0..self.n_actions).map(|a| pi.prob(s, a) * self.reward(s, a)).sum())
    }

    fn check_policy(&self, pi: &Policy) -> Result<()> {
        if pi.n_states != self.n_states || pi.n_actions != self.n_actions {
            return Err(Error::invalid(format!(
                "policy shape {}x{} does not match MDP {}x{}",
                pi.n_states, pi.n_actions, self.n_states, self.n_actions
            )));
        }
        Ok(())
    }

    /// Plain-text serialization: a header line `|S| |A| γ R_max`, then
    /// `|S|·|A|` transition rows (state-major), then `|S|` reward rows.
    pub fn to_text(&self) -> String {
        let fmt = |x: f64| format!("{x:.16e}");
        let mut out = format!("{} {} {} {}\n", self.n_states, self.n_actions, fmt(self.gamma), fmt(self.r_max));
        for row in self.p.chunks(self.n_states) {
            out.push_str(&row.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        for row in self.r.chunks(self.n_actions) {
            out.push_str(&row.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let spec_err = |line: usize, msg: String| Error::Spec { line, msg };
        let parse_row = |line: usize, l: &str, want: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| spec_err(line, format!("cannot parse number {t:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != want {
                return Err(spec_err(line, format!("expected {want} numbers, found {}", v.len())));
            }
            Ok(v)
        };
        let (hl, header) = lines.next().ok_or_else(|| spec_err(1, "empty MDP file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(spec_err(hl, "header must be: n_states n_actions gamma r_max".into()));
        }
        let ns: usize = h[0].parse().map_err(|_| spec_err(hl, format!("bad state count {:?}", h[0])))?;
        let na: usize = h[1].parse().map_err(|_| spec_err(hl, format!("bad action count {:?}", h[1])))?;
        let gamma: f64 = h[2].parse().map_err(|_| spec_err(hl, format!("bad discount {:?}", h[2])))?;
        let r_max: f64 = h[3].parse().map_err(|_| spec_err(hl, format!("bad R_max {:?}", h[3])))?;
        let mut p = Vec::with_capacity(ns * na * ns);
        for _ in 0..ns * na {
            let (ln, l) = lines.next().ok_or_else(|| spec_err(hl, "missing transition rows".into()))?;
            let row = parse_row(ln, l, ns)?;
            check_simplex(&row, || "transition row".into()).map_err(|e| spec_err(ln, e.to_string()))?;
            p.extend(row);
        }
        let mut r = Vec::with_capacity(ns * na);
        for _ in 0..ns {
            let (ln, l) = lines.next().ok_or_else(|| spec_err(hl, "missing reward rows".into()))?;
            r.extend(parse_row(ln, l, na)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(spec_err(ln, "trailing content after reward table".into()));
        }
        Self::new(ns, na, p, r, gamma, r_max).map_err(|e| match e {
            Error::Spec { .. } => e,
            other => spec_err(hl, other.to_string()),
        })
    }
}

/// A stochastic policy `π(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch { expected: n_states * n_actions, got: probs.len() });
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_simplex(row, || format!("pi(.|s={s})"))?;
        }
        Ok(Policy { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::invalid(format!("action {a} out of range at state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Policy::new(actions.len(), n_actions, probs)
    }

    /// Dirichlet(1) rows.
    pub fn random(n_states: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let probs = (0..n_states).flat_map(|_| flat_dirichlet(&mut rng, n_actions)).collect();
        Policy { n_states, n_actions, probs }
    }

    /// Mixture `(1-w)·self + w·uniform`; keeps full support for any `w > 0`.
    pub fn mixed_with_uniform(&self, w: f64) -> Self {
        let u = 1.0 / self.n_actions as f64;
        Policy { probs: self.probs.iter().map(|&p| (1.0 - w) * p + w * u).collect(), ..self.clone() }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Samples an action at `s`.
    #[inline]
    pub fn draw(&self, s: usize, rng: &mut SimRng) -> usize {
        categorical(rng, self.row(s))
    }
}

/// Invariant law of an irreducible stochastic matrix, by a direct solve of
/// the balance equations with the normalization replacing one equation.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    if p.ncols() != n || n == 0 {
        return Err(Error::invalid("stationary_distribution needs a square non-empty matrix"));
    }
    let m = DMatrix::<f64>::identity(n, n) - p.transpose();
    let sv = m.clone().singular_values();
    let smax = sv.max().max(1.0);
    let nullity = sv.iter().filter(|&&s| s <= 1e-10 * smax).count();
    if nullity != 1 {
        return Err(Error::ReducibleChain(nullity));
    }
    let mut sys = m;
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let mu = sys.lu().solve(&rhs).ok_or(Error::SingularSystem(0.0))?;
    let mut mu: Vec<f64> = mu.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= s);
    Ok(mu)
}

/// `‖μᵀP - μᵀ‖_∞`.
pub fn stationary_residual(p: &DMatrix<f64>, mu: &[f64]) -> f64 {
    let v = DVector::from_column_slice(mu);
    (p.transpose() * &v - &v).amax()
}

/// Power-iteration cross-check for [`stationary_distribution`] (uses the lazy chain
/// `(I + P)/2` so periodic chains converge too).
pub fn stationary_power_iteration(p: &DMatrix<f64>, iters: usize) -> Vec<f64> {
    let n = p.nrows();
    let lazy = (DMatrix::<f64>::identity(n, n) + p) * 0.5;
    let lt = lazy.transpose();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..iters {
        v = &lt * v;
    }
    let s = v.sum();
    v.iter().map(|x| x / s).collect()
}

/// `V^π` from `(I - γP^π)V = r^π`.
pub fn exact_value(mdp: &TabularMdp, pi: &Policy) -> Result<Vec<f64>> {
    mdp.check_policy(pi)?;
    let n = mdp.n_states;
    let sys = DMatrix::<f64>::identity(n, n) - mdp.policy_matrix(pi) * mdp.gamma;
    let v = sys.lu().solve(&mdp.policy_reward(pi)).ok_or(Error::SingularSystem(0.0))?;
    Ok(v.iter().copied().collect())
}

/// `max_s |V(s) - r^π(s) - γ(P^π V)(s)|`.
pub fn bellman_residual(mdp: &TabularMdp, pi: &Policy, v: &[f64]) -> f64 {
    let vv = DVector::from_column_slice(v);
    let t = mdp.policy_reward(pi) + mdp.policy_matrix(pi) * &vv * mdp.gamma;
    (t - vv).amax()
}

/// Optimal action values with the greedy structure.
#[derive(Debug, Clone, PartialEq)]
pub struct QStar {
    /// `Q*(s,a)` at `s * |A| + a`.
    pub q: Vec<f64>,
    pub greedy: Vec<usize>,
    /// `min_s` of best minus second-best action value.
    pub gap: f64,
    pub iterations: usize,
}

/// Bellman optimality operator `(HQ)(s,a) = R(s,a) + γ Σ P(s'|s,a) max Q(s',·)`.
pub fn bellman_optimality(mdp: &TabularMdp, q: &[f64], out: &mut [f64]) {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let vmax: Vec<f64> = q.chunks(na).map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    for s in 0..ns {
        for a in 0..na {
            let ev: f64 = mdp.transition_row(s, a).iter().zip(&vmax).map(|(p, v)| p * v).sum();
            out[s * na + a] = mdp.reward(s, a) + mdp.gamma * ev;
        }
    }
}

pub fn optimality_residual(mdp: &TabularMdp, q: &[f64]) -> f64 {
    let mut hq = vec![0.0; q.len()];
    bellman_optimality(mdp, q, &mut hq);
    hq.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn greedy_of(q: &[f64], na: usize) -> (Vec<usize>, f64) {
    let mut gap = f64::INFINITY;
    let greedy = q
        .chunks(na)
        .map(|row| {
            let mut best = 0;
            for a in 1..na {
                if row[a] > row[best] {
                    best = a;
                }
            }
            let second = (0..na).filter(|&a| a != best).map(|a| row[a]).fold(f64::NEG_INFINITY, f64::max);
            gap = gap.min(row[best] - second);
            best
        })
        .collect();
    (greedy, gap)
}

/// Value iteration to `tol` accuracy, polished by one exact evaluation of the
/// greedy policy. Errors when the greedy action is not unique within `2·tol`.
pub fn exact_qstar(mdp: &TabularMdp, tol: f64) -> Result<QStar> {
    let (ns, na, gamma) = (mdp.n_states, mdp.n_actions, mdp.gamma);
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let stop = if gamma > 0.0 { tol * (1.0 - gamma) / (2.0 * gamma) } else { f64::INFINITY };
    let mut iterations = 0;
    loop {
        bellman_optimality(mdp, &q, &mut next);
        iterations += 1;
        let diff = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut q, &mut next);
        if diff <= stop || iterations > 10_000_000 {
            break;
        }
    }
    let (greedy, _) = greedy_of(&q, na);
    let pi = Policy::deterministic(na, &greedy)?;
    let v = exact_value(mdp, &pi)?;
    let polished: Vec<f64> = (0..ns * na)
        .map(|i| {
            let (s, a) = (i / na, i % na);
            mdp.reward(s, a) + gamma * mdp.transition_row(s, a).iter().zip(&v).map(|(p, v)| p * v).sum::<f64>()
        })
        .collect();
    if optimality_residual(mdp, &polished) <= optimality_residual(mdp, &q) {
        q = polished;
    }
    let (greedy, gap) = greedy_of(&q, na);
    if na > 1 && gap <= 2.0 * tol {
        return Err(Error::GreedyNotUnique { gap, tol });
    }
    Ok(QStar { q, greedy, gap, iterations })
}

/// Cumulative tables for fast categorical draws.
#[derive(Debug, Clone)]
pub(crate) struct Sampler {
    ns: usize,
    na: usize,
    trans_cdf: Vec<f64>,
}

impl Sampler {
    pub(crate) fn new(mdp: &TabularMdp) -> Self {
        let mut trans_cdf = Vec::with_capacity(mdp.p.len());
        for row in mdp.p.chunks(mdp.n_states) {
            let mut acc = 0.0;
            for &x in row {
                acc += x;
                trans_cdf.push(acc);
            }
        }
        Sampler { ns: mdp.n_states, na: mdp.n_actions, trans_cdf }
    }

    #[inline]
    pub(crate) fn next_state(&self, s: usize, a: usize, rng: &mut SimRng) -> usize {
        let start = (s * self.na + a) * self.ns;
        draw_cdf(&self.trans_cdf[start..start + self.ns], rng)
    }
}

#[inline]
pub(crate) fn draw_cdf(cdf: &[f64], rng: &mut SimRng) -> usize {
    let u = uniform01(rng) * cdf[cdf.len() - 1];
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

pub(crate) fn cdf_of(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}
