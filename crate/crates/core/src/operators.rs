//! The operator zoo: every stochastic operator used in the experiments, behind
//! one sampling contract.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, seeded, standard_normal_pair, uniform01, SimRng};

/// Assumption-level constants an operator knows about itself. `None` marks
/// an entry that has to be supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamReport {
    pub nu: Option<f64>,
    pub n_curvature: Option<f64>,
    /// Pseudo-smoothness radius; `f64::INFINITY` for globally smooth operators.
    pub radius: Option<f64>,
    pub sigma_bar_sq: Option<f64>,
    pub sigma_hat_sq: Option<f64>,
    pub gamma_c: Option<f64>,
}

/// A sampled operator `F(x, w)` with mean map `F̄(x) = E[F(x, w)]`.
pub trait StochasticOperator: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes one realization of `F(x, w)` into `out`.
    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]);

    fn mean(&self, x: &[f64], out: &mut [f64]);

    /// A realization of `J_{F_w}(x*, w)`, when the operator exposes one.
    fn jacobian_at_fixed_point(&self, _rng: &mut SimRng) -> Option<DMatrix<f64>> {
        None
    }

    fn fixed_point(&self) -> &[f64];

    fn report(&self) -> ParamReport {
        ParamReport::default()
    }

    fn name(&self) -> &'static str;
}

/// `F(x, w) = Ax + b + w` with `w ~ N(0, Σ)`.
#[derive(Debug, Clone)]
pub struct LinearAdditive {
    a: DMatrix<f64>,
    b: Vec<f64>,
    noise_factor: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    x_star: Vec<f64>,
    report: ParamReport,
}

pub fn make_linear_additive(a: DMatrix<f64>, b: Vec<f64>, noise_cov: DMatrix<f64>) -> Result<LinearAdditive> {
    let d = a.nrows();
    if a.ncols() != d || b.len() != d || noise_cov.shape() != (d, d) {
        return Err(Error::invalid("linear-additive operator: shapes of A, b and the covariance disagree"));
    }
    if (&noise_cov - noise_cov.transpose()).amax() > 1e-12 * noise_cov.amax().max(1.0) {
        return Err(Error::invalid("noise covariance must be symmetric"));
    }
    let i_minus_a = DMatrix::<f64>::identity(d, d) - &a;
    let sv = i_minus_a.clone().singular_values();
    let smin = sv.min();
    if !(smin > 1e-12 * sv.max().max(1.0)) {
        return Err(Error::SingularSystem(smin));
    }
    let x_star = i_minus_a
        .lu()
        .solve(&DVector::from_column_slice(&b))
        .ok_or(Error::SingularSystem(smin))?;

    let eig = noise_cov.clone().symmetric_eigen();
    if eig.eigenvalues.min() < -1e-10 * eig.eigenvalues.amax().max(1.0) {
        return Err(Error::invalid("noise covariance must be positive semidefinite"));
    }
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let noise_factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
    let gamma_c = a.clone().singular_values().max();

    let report = ParamReport {
        nu: Some(smin),
        n_curvature: Some(0.0),
        radius: Some(f64::INFINITY),
        sigma_bar_sq: Some(eig.eigenvalues.max().max(0.0)),
        sigma_hat_sq: Some(0.0),
        gamma_c: Some(gamma_c),
    };
    Ok(LinearAdditive { a, b, noise_factor, noise_cov, x_star: x_star.as_slice().to_vec(), report })
}

impl LinearAdditive {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        let d = self.b.len();
        for i in 0..d {
            let mut s = self.b[i];
            for j in 0..d {
                s += self.a[(i, j)] * x[j];
            }
            out[i] = s;
        }
    }
}

impl StochasticOperator for LinearAdditive {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let d = self.b.len();
        self.affine(x, out);
        let mut z = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if d <= 16 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        fill_standard_normal(rng, z);
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.noise_factor[(i, j)] * z[j];
            }
            out[i] += s;
        }
    }

    fn mean(&self, x: &[f64], out: &mut [f64]) {
        self.affine(x, out);
    }

    fn jacobian_at_fixed_point(&self, _rng: &mut SimRng) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }

    fn fixed_point(&self) -> &[f64] {
        &self.x_star
    }

    fn report(&self) -> ParamReport {
        self.report
    }

    fn name(&self) -> &'static str {
        "linear_additive"
    }
}

/// `F(x, w) = w` where odd coordinates (1-based) share one `N(0, σ̄²/d)` draw
/// and even coordinates share another.
#[derive(Debug, Clone)]
pub struct PairGaussian {
    sigma_bar: f64,
    x_star: Vec<f64>,
}

pub fn make_pair_gaussian_example(d: usize, sigma_bar: f64) -> Result<PairGaussian> {
    if d == 0 || d % 2 == 1 {
        return Err(Error::OddDimension(d));
    }
    if !(sigma_bar > 0.0) {
        return Err(Error::invalid("sigma_bar must be positive"));
    }
    Ok(PairGaussian { sigma_bar, x_star: vec![0.0; d] })
}

impl PairGaussian {
    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }
}

impl StochasticOperator for PairGaussian {
    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn sample(&self, _x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        let sd = self.sigma_bar / (self.x_star.len() as f64).sqrt();
        let (z1, z2) = standard_normal_pair(rng);
        for (j, o) in out.iter_mut().enumerate() {
            // j is 0-based: j = 0, 2, ... are the odd coordinates
            *o = sd * if j % 2 == 0 { z1 } else { z2 };
        }
    }

    fn mean(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    fn jacobian_at_fixed_point(&self, _rng: &mut SimRng) -> Option<DMatrix<f64>> {
        let d = self.x_star.len();
        Some(DMatrix::zeros(d, d))
    }

    fn fixed_point(&self) -> &[f64] {
        &self.x_star
    }

    fn report(&self) -> ParamReport {
        ParamReport {
            nu: Some(1.0),
            n_curvature: Some(0.0),
            radius: Some(f64::INFINITY),
            sigma_bar_sq: Some(self.sigma_bar * self.sigma_bar),
            sigma_hat_sq: Some(0.0),
            gamma_c: Some(0.0),
        }
    }

    fn name(&self) -> &'static str {
        "pair_gaussian"
    }
}

/// Scalar `F(x, w) = w x` with `w ~ N(0, 1)`.
#[derive(Debug, Clone, Default)]
pub struct MultiplicativeGaussian {
    x_star: [f64; 1],
}

pub fn make_multiplicative_gaussian() -> MultiplicativeGaussian {
    MultiplicativeGaussian::default()
}

impl StochasticOperator for MultiplicativeGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        out[0] = standard_normal_pair(rng).0 * x[0];
    }

    fn mean(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn jacobian_at_fixed_point(&self, rng: &mut SimRng) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, standard_normal_pair(rng).0))
    }

    fn fixed_point(&self) -> &[f64] {
        &self.x_star
    }

    fn report(&self) -> ParamReport {
        // the noise vanishes at x* = 0, so σ̄² is left to the user
        ParamReport {
            nu: Some(1.0),
            n_curvature: Some(0.0),
            radius: Some(f64::INFINITY),
            sigma_bar_sq: None,
            sigma_hat_sq: Some(1.0),
            gamma_c: Some(0.0),
        }
    }

    fn name(&self) -> &'static str {
        "multiplicative_gaussian"
    }
}

/// Scalar `F(x, w) = w x` with `P(w = a + N) = 1/(N+1)`, `P(w = a - 1) = N/(N+1)`.
#[derive(Debug, Clone)]
pub struct TwoPointMultiplicative {
    a: f64,
    n: u32,
    x_star: [f64; 1],
}

pub fn make_two_point_multiplicative(a: f64, n: u32) -> Result<TwoPointMultiplicative> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::invalid(format!("two-point law needs a in (0,1), got {a}")));
    }
    if n < 1 {
        return Err(Error::invalid("two-point law needs N >= 1"));
    }
    Ok(TwoPointMultiplicative { a, n, x_star: [0.0] })
}

impl TwoPointMultiplicative {
    pub fn support(&self) -> (f64, f64) {
        (self.a + self.n as f64, self.a - 1.0)
    }

    pub fn prob_high(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    pub fn draw_w(&self, rng: &mut SimRng) -> f64 {
        let (hi, lo) = self.support();
        if uniform01(rng) < self.prob_high() {
            hi
        } else {
            lo
        }
    }
}

impl StochasticOperator for TwoPointMultiplicative {
    fn dim(&self) -> usize {
        1
    }

    fn sample(&self, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
        out[0] = self.draw_w(rng) * x[0];
    }

    fn mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0];
    }

    fn jacobian_at_fixed_point(&self, rng: &mut SimRng) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.draw_w(rng)))
    }

    fn fixed_point(&self) -> &[f64] {
        &self.x_star
    }

    fn report(&self) -> ParamReport {
        let range = self.n as f64 + 1.0;
        ParamReport {
            nu: Some(1.0 - self.a),
            n_curvature: Some(0.0),
            radius: Some(f64::INFINITY),
            sigma_bar_sq: None,
            // Hoeffding: w lives in an interval of length N + 1
            sigma_hat_sq: Some(range * range / 4.0),
            gamma_c: Some(self.a),
        }
    }

    fn name(&self) -> &'static str {
        "two_point_multiplicative"
    }
}

/// Random linear-additive operator whose matrix has spectral norm exactly
/// `gamma_c`, with a Gaussian offset and isotropic noise `N(0, s² I)`.
pub fn make_random_contractive(d: usize, gamma_c: f64, noise_scale: f64, seed: u64) -> Result<LinearAdditive> {
    if !(gamma_c > 0.0 && gamma_c < 1.0) {
        return Err(Error::invalid(format!("gamma_c must lie in (0,1), got {gamma_c}")));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::invalid("noise_scale must be non-negative"));
    }
    let mut rng = seeded(seed);
    let mut entries = vec![0.0; d * d];
    fill_standard_normal(&mut rng, &mut entries);
    let raw = DMatrix::from_row_slice(d, d, &entries);
    let a = &raw * (gamma_c / raw.clone().singular_values().max());
    let mut b = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut b);
    let cov = DMatrix::<f64>::identity(d, d) * (noise_scale * noise_scale);
    make_linear_additive(a, b, cov)
}

/// Declarative description of a zoo operator.
#[derive(Debug, Clone, PartialEq)]
pub enum ExampleConfig {
    LinearAdditive { a: DMatrix<f64>, b: Vec<f64>, noise_cov: DMatrix<f64> },
    PairGaussian { d: usize, sigma_bar: f64 },
    MultiplicativeGaussian,
    TwoPointMultiplicative { a: f64, n: u32 },
    RandomContractive { d: usize, gamma_c: f64, noise_scale: f64, seed: u64 },
}

impl ExampleConfig {
    pub fn build(&self) -> Result<Box<dyn StochasticOperator>> {
        Ok(match self {
            ExampleConfig::LinearAdditive { a, b, noise_cov } => {
                Box::new(make_linear_additive(a.clone(), b.clone(), noise_cov.clone())?)
            }
            ExampleConfig::PairGaussian { d, sigma_bar } => Box::new(make_pair_gaussian_example(*d, *sigma_bar)?),
            ExampleConfig::MultiplicativeGaussian => Box::new(make_multiplicative_gaussian()),
            ExampleConfig::TwoPointMultiplicative { a, n } => Box::new(make_two_point_multiplicative(*a, *n)?),
            ExampleConfig::RandomContractive { d, gamma_c, noise_scale, seed } => {
                Box::new(make_random_contractive(*d, *gamma_c, *noise_scale, *seed)?)
            }
        })
    }
}

/// Per-coordinate check that the empirical mean of `sample(x, ·)` is within
/// `z` standard errors of `mean(x)`. Returns the largest standardized gap.
pub fn unbiasedness_gap(op: &dyn StochasticOperator, x: &[f64], draws: usize, seed: u64) -> f64 {
    let d = op.dim();
    let mut rng = seeded(seed);
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut out = vec![0.0; d];
    for _ in 0..draws {
        op.sample(x, &mut rng, &mut out);
        for i in 0..d {
            sum[i] += out[i];
            sum_sq[i] += out[i] * out[i];
        }
    }
    let mut target = vec![0.0; d];
    op.mean(x, &mut target);
    let n = draws as f64;
    (0..d)
        .map(|i| {
            let m = sum[i] / n;
            let var = (sum_sq[i] / n - m * m).max(0.0);
            let se = (var / n).sqrt();
            let gap = (m - target[i]).abs();
            if se == 0.0 {
                if gap <= 1e-12 * target[i].abs().max(1.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                gap / se
            }
        })
        .fold(0.0, f64::max)
}
