//! Closed-form high-probability bounds for averaged SA iterates.
//!
//! Every function evaluates a printed formula as written. Bounds take a
//! [`BoundParams`] record (the constants of Assumptions 1 to 3 and the step
//! schedule) and a [`TailEnvelope`] describing the assumed bound on the raw
//! iterates, `‖x_i - x*‖² ≤ α_i f(δ, k)`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::{LinearAdditive, StochasticOperator};
use crate::sa::StepSchedule;

/// Exponent on `u_c2` in the dimension term of `ε̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UExponent {
    /// `3 u⁴ d σ̄²`, the general form.
    #[default]
    Four,
    /// `3 u² d σ̄²`, the form displayed for contractive SA.
    Two,
}

impl UExponent {
    fn pow(self, u: f64) -> f64 {
        match self {
            UExponent::Four => u.powi(4),
            UExponent::Two => u * u,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            UExponent::Four => "u4",
            UExponent::Two => "u2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub nu: f64,
    pub m: f64,
    pub n: f64,
    /// Pseudo-smoothness radius; `f64::INFINITY` for globally smooth operators.
    pub r: f64,
    pub sigma_bar_sq: f64,
    pub sigma_hat_sq: f64,
    pub u_c2: f64,
    pub d: usize,
    pub schedule: StepSchedule,
    pub u_exponent: UExponent,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.nu, "nu")?;
        pos(self.r, "R")?;
        pos(self.sigma_bar_sq, "sigma_bar_sq")?;
        pos(self.u_c2, "u_c2")?;
        if !(self.m >= 0.0 && self.n >= 0.0 && self.sigma_hat_sq >= 0.0) {
            return Err(Error::invalid("M, N and sigma_hat_sq must be non-negative"));
        }
        if self.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(())
    }
}

/// The assumed uniform bound on the unaveraged iterates.
#[derive(Clone)]
pub enum TailEnvelope {
    Constant(f64),
    Additive(AdditiveEnvelope),
    Multiplicative(MultiplicativeEnvelope),
    User(Arc<dyn Fn(f64, u64) -> f64 + Send + Sync>),
}

impl fmt::Debug for TailEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailEnvelope::Constant(v) => write!(f, "Constant({v})"),
            TailEnvelope::Additive(a) => write!(f, "Additive({:?})", a.constants),
            TailEnvelope::Multiplicative(m) => write!(f, "Multiplicative({:?})", m.cfg),
            TailEnvelope::User(_) => write!(f, "User(..)"),
        }
    }
}

impl TailEnvelope {
    pub fn eval(&self, delta: f64, k: u64) -> f64 {
        match self {
            TailEnvelope::Constant(v) => *v,
            TailEnvelope::Additive(a) => a.eval(delta, k),
            TailEnvelope::Multiplicative(m) => m.eval(delta, k),
            TailEnvelope::User(f) => f(delta, k),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TailEnvelope::Constant(_) => "constant",
            TailEnvelope::Additive(_) => "additive_contractive",
            TailEnvelope::Multiplicative(_) => "multiplicative",
            TailEnvelope::User(_) => "user_supplied",
        }
    }
}

/// `k₀(δ/2, k)`: first index after which the iterates stay within radius `R`.
pub fn k0(params: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> u64 {
    let s = &params.schedule;
    let af = s.alpha() * f.eval(delta / 2.0, k);
    let r2 = params.r * params.r;
    if s.xi() == 0.0 {
        return if af <= r2 { 0 } else { k + 1 };
    }
    let raw = ((af / r2).powf(1.0 / s.xi()) - s.h()).ceil();
    if raw.is_nan() || raw <= 0.0 {
        0
    } else if raw >= (k + 1) as f64 {
        k + 1
    } else {
        raw as u64
    }
}

pub fn g_factor(params: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    g_with_f(params, f.eval(delta / 2.0, k), k)
}

fn g_with_f(p: &BoundParams, fh: f64, k: u64) -> f64 {
    let s = &p.schedule;
    let (alpha, h, xi) = (s.alpha(), s.h(), s.xi());
    let second = if p.sigma_hat_sq == 0.0 {
        0.0
    } else {
        alpha * (1.0 + p.m) * p.sigma_hat_sq * h.powf(1.0 - xi) * fh / ((1.0 - xi) * ((k + 1) as f64).powf(xi))
    };
    24.0 * p.u_c2.powi(4) * p.sigma_bar_sq.max(second)
}

/// The five summands of `ε̃`, in display order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonTerms {
    pub g: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
}

impl EpsilonTerms {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4 + self.t5
    }
}

pub fn epsilon_terms(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> EpsilonTerms {
    let s = &p.schedule;
    let (alpha, h, xi) = (s.alpha(), s.h(), s.xi());
    let fh = f.eval(delta / 2.0, k);
    let kp = (k + 1) as f64;
    let nu2 = p.nu * p.nu;
    let u4 = p.u_c2.powi(4);
    let g = g_with_f(p, fh, k);
    let t1 = g * (2.0 / delta).ln() / (nu2 * kp);
    let t2 = 3.0 * p.u_exponent.pow(p.u_c2) * p.d as f64 * p.sigma_bar_sq / (nu2 * kp);
    let t3 = 9.0 * h.powf(xi) * (1.0 + p.m) * fh / (2.0 * alpha * kp.powf(2.0 - xi))
        * (3.0 + xi * xi / (1.0 - xi / 2.0).powi(2));
    let t4 = if p.n == 0.0 {
        0.0
    } else {
        3.0 * h.powf(2.0 - 2.0 * xi) * alpha * alpha * p.n * p.n * fh * fh * (1.0 + p.m)
            / (2.0 * nu2 * kp.powf(2.0 * xi) * (1.0 - xi).powi(2))
    };
    let t5 = if p.sigma_hat_sq == 0.0 {
        0.0
    } else {
        3.0 * h.powf(1.0 - xi) * u4 * alpha * p.d as f64 * (1.0 + p.m) * p.sigma_hat_sq * fh
            / (kp.powf(1.0 + xi) * (1.0 - xi))
    };
    EpsilonTerms { g, t1, t2, t3, t4, t5 }
}

pub fn epsilon_tilde(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    epsilon_terms(p, f, delta, k).total()
}

pub fn epsilon_bar(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    epsilon_bar_at(p, f, delta, k, k0(p, f, delta, k))
}

fn epsilon_bar_at(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64, k0: u64) -> f64 {
    if k0 == 0 {
        return 0.0;
    }
    let s = &p.schedule;
    let (alpha, h, xi) = (s.alpha(), s.h(), s.xi());
    let e = 1.0 - xi / 2.0;
    let bracket = ((k0 - 1) as f64 + h).powf(e) - (h - 1.0).powf(e);
    alpha * f.eval(delta, k0 - 1) * bracket * bracket / (e * e * ((k + 1) as f64).powi(2))
}

pub fn main_bound(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    let et = epsilon_tilde(p, f, delta, k);
    let eb = epsilon_bar(p, f, delta, k);
    combine_eps(et, eb)
}

fn combine_eps(et: f64, eb: f64) -> f64 {
    if eb == 0.0 {
        et
    } else {
        (et.sqrt() + eb.sqrt()).powi(2)
    }
}

pub fn crude_bound(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    let s = &p.schedule;
    let (alpha, h, xi) = (s.alpha(), s.h(), s.xi());
    alpha * h.powf(2.0 - xi) / (1.0 - xi / 2.0).powi(2) * f.eval(delta, k + 1) / ((k + 1) as f64).powf(xi)
}

pub fn combined_bound(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> f64 {
    main_bound(p, f, delta, k).min(crude_bound(p, f, delta, k))
}

/// `24 u⁴ σ̄² log(2/δ) + 3 u^e d σ̄²`, over `ν²(k+1)`.
pub fn leading_term(p: &BoundParams, delta: f64, k: u64) -> f64 {
    let kp = (k + 1) as f64;
    (24.0 * p.u_c2.powi(4) * p.sigma_bar_sq * (2.0 / delta).ln()
        + 3.0 * p.u_exponent.pow(p.u_c2) * p.d as f64 * p.sigma_bar_sq)
        / (p.nu * p.nu * kp)
}

/// Small-δ asymptote of the leading term: `24 u⁴ σ̄² log(1/δ) / (ν²(k+1))`.
pub fn leading_term_small_delta(p: &BoundParams, delta: f64, k: u64) -> f64 {
    24.0 * p.u_c2.powi(4) * p.sigma_bar_sq * (1.0 / delta).ln() / (p.nu * p.nu * (k + 1) as f64)
}

/// One row of a bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub k: u64,
    pub delta: f64,
    pub eps_tilde: f64,
    pub eps_bar: f64,
    pub main: f64,
    pub crude: f64,
    pub combined: f64,
    pub f_value: f64,
    pub k0: u64,
}

pub fn bound_row(p: &BoundParams, f: &TailEnvelope, delta: f64, k: u64) -> BoundRow {
    let k0v = k0(p, f, delta, k);
    let eps_tilde = epsilon_tilde(p, f, delta, k);
    let eps_bar = epsilon_bar_at(p, f, delta, k, k0v);
    let main = combine_eps(eps_tilde, eps_bar);
    let crude = crude_bound(p, f, delta, k);
    BoundRow {
        k,
        delta,
        eps_tilde,
        eps_bar,
        main,
        crude,
        combined: main.min(crude),
        f_value: f.eval(delta / 2.0, k),
        k0: k0v,
    }
}

pub fn bound_table(p: &BoundParams, f: &TailEnvelope, deltas: &[f64], ks: &[u64]) -> Vec<BoundRow> {
    let mut rows = Vec::with_capacity(deltas.len() * ks.len());
    for &delta in deltas {
        for &k in ks {
            rows.push(bound_row(p, f, delta, k));
        }
    }
    rows
}

pub fn write_bound_csv<W: Write>(rows: &[BoundRow], mut w: W) -> Result<()> {
    writeln!(w, "k,delta,eps_tilde,eps_bar,main,crude,combined,f_value,k0")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.k, r.delta, r.eps_tilde, r.eps_bar, r.main, r.crude, r.combined, r.f_value, r.k0
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// additive-noise envelope

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveNoiseConfig {
    pub sigma_sq: f64,
    pub gamma_c: f64,
    pub mu: f64,
    pub c_d: f64,
    pub x0_err_sq: f64,
    pub l_smooth: f64,
    pub u_cm: f64,
    pub l_cm: f64,
    pub u_m_cstar: f64,
    pub l_cs: f64,
    pub u_cs: f64,
    pub a_scale: f64,
}

impl AdditiveNoiseConfig {
    /// Moreau constants for `‖·‖_s = ‖·‖_c`: `u_cM = ℓ_cM = √(1+μ)`, `ℓ_cs = u_cs = 1`.
    pub fn with_self_smoothing(sigma_sq: f64, gamma_c: f64, mu: f64, c_d: f64, x0_err_sq: f64, l_smooth: f64, u_cc_star: f64, a_scale: f64) -> Self {
        let s = (1.0 + mu).sqrt();
        AdditiveNoiseConfig {
            sigma_sq,
            gamma_c,
            mu,
            c_d,
            x0_err_sq,
            l_smooth,
            u_cm: s,
            l_cm: s,
            u_m_cstar: u_cc_star / s,
            l_cs: 1.0,
            u_cs: 1.0,
            a_scale,
        }
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_c * (1.0 + self.mu * self.u_cs * self.u_cs).sqrt() / (1.0 + self.mu * self.l_cs * self.l_cs).sqrt()
    }

    /// `α = a / (1 - γ_c)`.
    pub fn suggested_alpha(&self) -> f64 {
        self.a_scale / (1.0 - self.gamma_c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_sq >= 0.0 && self.mu > 0.0 && self.c_d > 0.0 && self.x0_err_sq >= 0.0) {
            return Err(Error::invalid("additive config requires sigma_sq>=0, mu>0, c_d>0, x0_err_sq>=0"));
        }
        if !(0.0..1.0).contains(&self.gamma_c) {
            return Err(Error::invalid(format!("gamma_c must lie in [0,1), got {}", self.gamma_c)));
        }
        let gt = self.gamma_tilde();
        if gt >= 1.0 {
            return Err(Error::invalid(format!("smoothed contraction factor {gt} is not below 1")));
        }
        Ok(())
    }
}

/// Value and location of the `d₁` supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1Result {
    pub value: f64,
    pub argmax: u64,
    pub scanned: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveConstants {
    pub gamma_tilde: f64,
    pub d_bar: f64,
    pub c1: f64,
    pub c2: f64,
    pub c5: f64,
    pub c6: f64,
    pub d1: D1Result,
}

const D1_SCAN_LIMIT: u64 = 1 << 32;

pub fn additive_constants(cfg: &AdditiveNoiseConfig, schedule: &StepSchedule) -> AdditiveConstants {
    let alpha = schedule.alpha();
    let gt = cfg.gamma_tilde();
    let one_m = 1.0 - gt;
    let c1 = 16.0 * cfg.sigma_sq * cfg.u_m_cstar.powi(2) * cfg.u_cm.powi(2) * alpha / one_m;
    let c2 = cfg.u_cm.powi(2) / cfg.l_cm.powi(2);
    let c5 = 16.0 * std::f64::consts::E * cfg.u_cm.powi(2) * cfg.c_d * cfg.sigma_sq * cfg.l_smooth * alpha
        / (cfg.mu * cfg.l_cs.powi(2) * one_m);
    let c6 = 32.0 * cfg.u_cm.powi(2) * cfg.sigma_sq * cfg.u_m_cstar.powi(2) * alpha / one_m;
    let d_bar = 2.0 * one_m;
    let d1 = d1_sup(c2 * cfg.x0_err_sq, d_bar, schedule);
    AdditiveConstants { gamma_tilde: gt, d_bar, c1, c2, c5, c6, d1 }
}

/// `sup_i scale·(i+h)^ξ/α · exp(-D̄α((i+h)^{1-ξ} - h^{1-ξ})/(2(1-ξ)))`.
fn d1_sup(scale: f64, d_bar: f64, s: &StepSchedule) -> D1Result {
    if scale == 0.0 {
        return D1Result { value: 0.0, argmax: 0, scanned: 1 };
    }
    let (alpha, h, xi) = (s.alpha(), s.h(), s.xi());
    let rate = d_bar * alpha / (2.0 * (1.0 - xi));
    let h_pow = h.powf(1.0 - xi);
    let log_term = |t: f64| xi * t.ln() - rate * (t.powf(1.0 - xi) - h_pow);
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0;
    let mut i = 0u64;
    loop {
        let t = i as f64 + h;
        let lv = log_term(t);
        if lv > best {
            best = lv;
            argmax = i;
        }
        // d/dt of the log summand is ξ/t - (D̄α/2) t^{-ξ}
        let descending = xi / t - d_bar * alpha / 2.0 * t.powf(-xi) < 0.0;
        if (descending && lv < best + (1e-3f64).ln()) || i >= D1_SCAN_LIMIT {
            break;
        }
        i += 1;
    }
    D1Result { value: scale / alpha * best.exp(), argmax, scanned: i + 1 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveEnvelope {
    pub cfg: AdditiveNoiseConfig,
    pub schedule: StepSchedule,
    pub constants: AdditiveConstants,
}

impl AdditiveEnvelope {
    pub fn new(cfg: AdditiveNoiseConfig, schedule: StepSchedule) -> Result<Self> {
        cfg.validate()?;
        let constants = additive_constants(&cfg, &schedule);
        Ok(AdditiveEnvelope { cfg, schedule, constants })
    }

    pub fn eval(&self, delta: f64, k: u64) -> f64 {
        let c = &self.constants;
        let alpha = self.schedule.alpha();
        c.c1 * (1.0 / delta).ln() / alpha + c.d1.value + (c.c5 + c.c6 * ((k + 1) as f64).ln()) / alpha
    }

    /// True when `h` meets `(2ξ/((1-γ̃)α))^{1/(1-ξ)}`.
    pub fn h_condition_met(&self) -> bool {
        self.schedule.h() >= additive_h_threshold(self.constants.gamma_tilde, self.schedule.alpha(), self.schedule.xi())
    }
}

pub fn f_additive(cfg: &AdditiveNoiseConfig, schedule: &StepSchedule, delta: f64, k: u64) -> Result<f64> {
    Ok(AdditiveEnvelope::new(*cfg, *schedule)?.eval(delta, k))
}

/// Smallest admissible offset `(2ξ/((1-γ̃)α))^{1/(1-ξ)}`.
pub fn additive_h_threshold(gamma_tilde: f64, alpha: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    (2.0 * xi / ((1.0 - gamma_tilde) * alpha)).powf(1.0 / (1.0 - xi))
}

/// Euclidean-norm parameters for `F(x, w) = Ax + b + w` with `w ~ N(0, Σ)`.
///
/// Uses `ν = 1 - ‖A‖₂`, `M = 1`, `N = 0`, `R = ∞`, `σ̄² = σ² = λ_max(Σ)`, `c_d = d`
/// and a self-smoothed envelope with Moreau parameter `mu`.
pub fn linear_additive_bound_setup(
    op: &LinearAdditive,
    schedule: &StepSchedule,
    x0: &[f64],
    mu: f64,
) -> Result<(BoundParams, AdditiveEnvelope)> {
    let d = op.dim();
    let gamma_c = op.matrix().clone().singular_values().max();
    if !(gamma_c < 1.0) {
        return Err(Error::invalid(format!("linear part is not a Euclidean contraction (norm {gamma_c})")));
    }
    let s2 = op.noise_cov().clone().symmetric_eigenvalues().max().max(0.0);
    let params = BoundParams {
        nu: 1.0 - gamma_c,
        m: 1.0,
        n: 0.0,
        r: f64::INFINITY,
        sigma_bar_sq: s2,
        sigma_hat_sq: 0.0,
        u_c2: 1.0,
        d,
        schedule: *schedule,
        u_exponent: UExponent::Four,
    };
    params.validate()?;
    let x0_err: f64 = x0.iter().zip(op.fixed_point()).map(|(a, b)| (a - b).powi(2)).sum();
    let cfg = AdditiveNoiseConfig::with_self_smoothing(
        s2,
        gamma_c,
        mu,
        d as f64,
        x0_err,
        1.0,
        1.0,
        schedule.alpha() * (1.0 - gamma_c),
    );
    Ok((params, AdditiveEnvelope::new(cfg, *schedule)?))
}

// ---------------------------------------------------------------------------
// multiplicative-noise envelope

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicativeConfig {
    /// `β₁..β₄`; only `β₄` (and `β₃` through `u₀`) enter the envelope.
    pub beta: [f64; 4],
    pub u0: f64,
}

impl MultiplicativeConfig {
    pub fn new(beta: [f64; 4], u0: f64) -> Result<Self> {
        if beta.iter().any(|b| !(*b > 0.0)) || !(u0 >= 0.0) {
            return Err(Error::invalid("beta constants must be positive and u0 non-negative"));
        }
        Ok(MultiplicativeConfig { beta, u0 })
    }

    /// `u₀ = e² + β₃ α₀ e` with `e = ‖x₁ - x*‖²`.
    pub fn from_initial_error(beta: [f64; 4], x1_err_sq: f64, alpha0: f64) -> Result<Self> {
        Self::new(beta, x1_err_sq * x1_err_sq + beta[2] * alpha0 * x1_err_sq)
    }

    /// `exp(2ξ/h - β₂α/h^ξ) ≤ 1`; a false value only warns.
    pub fn h_condition_met(&self, schedule: &StepSchedule) -> bool {
        let (alpha, h, xi) = (schedule.alpha(), schedule.h(), schedule.xi());
        2.0 * xi / h - self.beta[1] * alpha / h.powf(xi) <= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeEnvelope {
    pub cfg: MultiplicativeConfig,
    pub schedule: StepSchedule,
}

impl MultiplicativeEnvelope {
    pub fn eval(&self, delta: f64, k: u64) -> f64 {
        f_multiplicative_raw(self.cfg.u0, self.cfg.beta[3], &self.schedule, delta, k)
    }
}

fn f_multiplicative_raw(u0: f64, beta4: f64, s: &StepSchedule, delta: f64, k: u64) -> f64 {
    let a0 = s.step(0);
    ((u0 / (a0 * a0) + 4.0 * beta4 * s.partial_sum(k)) / delta).sqrt()
}

pub fn f_multiplicative(cfg: &MultiplicativeConfig, schedule: &StepSchedule, delta: f64, k: u64) -> f64 {
    f_multiplicative_raw(cfg.u0, cfg.beta[3], schedule, delta, k)
}

// ---------------------------------------------------------------------------
// reinforcement-learning leading terms

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdConstants {
    pub r_max: f64,
    pub gamma: f64,
    /// Lookahead; `f64::INFINITY` gives the `γⁿ → 0` limit.
    pub n: f64,
    pub mu_min: f64,
    pub n_states: usize,
}

pub fn leading_td_bound(c: &TdConstants, delta: f64, k: u64) -> f64 {
    let gn = if c.n.is_infinite() { 0.0 } else { c.gamma.powf(c.n) };
    let scale = c.r_max * c.r_max / ((1.0 - c.gamma).powi(2) * (1.0 - gn).powi(2) * c.mu_min * c.mu_min);
    scale * (24.0 * (2.0 / delta).ln() + 3.0 * c.n_states as f64) / (k + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QConstants {
    pub r_max: f64,
    pub gamma: f64,
    pub rho_b: f64,
    pub n_states: usize,
    pub n_actions: usize,
}

pub fn leading_q_bound(c: &QConstants, delta: f64, k: u64) -> f64 {
    let scale = 12.0 * c.r_max * c.r_max / ((1.0 - c.gamma).powi(4) * c.rho_b * c.rho_b);
    scale * (8.0 * (2.0 / delta).ln() + (c.n_states * c.n_actions) as f64) / (k + 1) as f64
}

/// `c (log(1/δ) + 1)/(k+1) + c_hi/(k^{5/4} √δ)`; both constants are uncertified inputs.
pub fn offpolicy_shape(c: f64, c_hi: f64, delta: f64, k: u64) -> f64 {
    let kf = (k.max(1)) as f64;
    c * ((1.0 / delta).ln() + 1.0) / (k + 1) as f64 + c_hi / (kf.powf(1.25) * delta.sqrt())
}

/// Least-squares slope of `log y` on `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
