//! Seeded replication ensembles and the statistics computed from them.

use std::io::Write;

use rayon::prelude::*;
use statrs::distribution::{Beta, Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::bounds::{leading_term_small_delta, BoundParams};
use crate::error::{Error, Result};
use crate::norms::NormSpec;
use crate::operators::StochasticOperator;
use crate::rng::replicate_rng;
use crate::sa::{run_sa_with_rng, validate_checkpoints, StepSchedule};

/// What a single replication runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSetup {
    pub schedule: StepSchedule,
    pub x0: Vec<f64>,
    pub checkpoints: Vec<u64>,
    pub norm: NormSpec,
}

/// Squared errors across replications, indexed `[checkpoint][replicate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEnsemble {
    pub checkpoints: Vec<u64>,
    pub err_x: Vec<Vec<f64>>,
    pub err_y: Vec<Vec<f64>>,
    /// Replication index of each surviving sample column.
    pub replicates: Vec<u64>,
    pub n_reps: usize,
    pub divergence_count: usize,
    pub base_seed: u64,
}

/// Runs `n_reps` replications. Replication `r` draws from `replicate_rng(base_seed, r)`,
/// so the result does not depend on `threads`. Divergent replications are counted
/// and dropped.
pub fn run_ensemble(
    op: &dyn StochasticOperator,
    setup: &EnsembleSetup,
    n_reps: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<ErrorEnsemble> {
    if setup.checkpoints.is_empty() {
        return Err(Error::invalid("at least one checkpoint is required"));
    }
    validate_checkpoints(&setup.checkpoints, u64::MAX)?;
    if setup.x0.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: setup.x0.len() });
    }
    let one = |r: usize| {
        run_sa_with_rng(op, &setup.schedule, &setup.x0, &setup.checkpoints, &setup.norm, replicate_rng(base_seed, r as u64))
    };
    let runs: Vec<_> = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(|| (0..n_reps).into_par_iter().map(one).collect()),
        None => (0..n_reps).into_par_iter().map(one).collect(),
    };
    let nc = setup.checkpoints.len();
    let mut ens = ErrorEnsemble {
        checkpoints: setup.checkpoints.clone(),
        err_x: vec![Vec::with_capacity(n_reps); nc],
        err_y: vec![Vec::with_capacity(n_reps); nc],
        replicates: Vec::with_capacity(n_reps),
        n_reps,
        divergence_count: 0,
        base_seed,
    };
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(t) => {
                for c in 0..nc {
                    ens.err_x[c].push(t.err_x[c]);
                    ens.err_y[c].push(t.err_y[c]);
                }
                ens.replicates.push(r as u64);
            }
            Err(Error::NonFiniteIterate { .. }) => ens.divergence_count += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(ens)
}

impl ErrorEnsemble {
    pub fn checkpoint_index(&self, k: u64) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == k)
    }

    pub fn err_y_at(&self, k: u64) -> Option<&[f64]> {
        self.checkpoint_index(k).map(|i| self.err_y[i].as_slice())
    }

    pub fn err_x_at(&self, k: u64) -> Option<&[f64]> {
        self.checkpoint_index(k).map(|i| self.err_x[i].as_slice())
    }

    /// CSV with header `checkpoint,replicate,err_x,err_y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "checkpoint,replicate,err_x,err_y")?;
        for (c, &k) in self.checkpoints.iter().enumerate() {
            for (i, &r) in self.replicates.iter().enumerate() {
                writeln!(w, "{k},{r},{:.16e},{:.16e}", self.err_x[c][i], self.err_y[c][i])?;
            }
        }
        Ok(())
    }
}

pub fn median(samples: &[f64]) -> f64 {
    empirical_quantile(samples, 0.5).map(|q| q.value).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Inverse empirical CDF `x_(⌈nq⌉)` with a 99% order-statistic interval.
///
/// The interval is `[x_(l), x_(u)]` with `l` the 0.5% and `u - 1` the 99.5%
/// quantile of `Binomial(n, q)`, clipped to the sample range.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<QuantileEstimate> {
    if samples.is_empty() {
        return Err(Error::DegenerateSample("empty sample"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {q}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("sample contains NaN"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let at = |i: u64| s[(i.clamp(1, n as u64) - 1) as usize];
    let idx = ((n as f64 * q) - 1e-9).ceil().max(1.0) as u64;
    let bin = Binomial::new(q, n as u64).map_err(|e| Error::invalid(e.to_string()))?;
    let lo = bin.inverse_cdf(0.005);
    let hi = bin.inverse_cdf(0.995) + 1;
    Ok(QuantileEstimate { value: at(idx), ci_lo: at(lo.min(idx)), ci_hi: at(hi.max(idx)) })
}

/// One-sided Clopper–Pearson upper bound on a binomial proportion.
pub fn clopper_pearson_upper(successes: usize, n: usize, confidence: f64) -> f64 {
    assert!(n > 0 && successes <= n);
    if successes == n {
        return 1.0;
    }
    Beta::new(successes as f64 + 1.0, (n - successes) as f64)
        .expect("valid beta shape")
        .inverse_cdf(confidence)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageVerdict {
    pub checkpoint: u64,
    pub delta: f64,
    pub bound: f64,
    pub exceed_count: usize,
    pub n: usize,
    pub binomial_upper_ci: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Counts `err_y > bound(k, δ)` per checkpoint and passes when the 99% Clopper–Pearson
/// upper limit is at most `δ·slack`. Divergent replications count as exceedances.
pub fn coverage_test(
    ens: &ErrorEnsemble,
    bound: &dyn Fn(u64, f64) -> f64,
    delta: f64,
    slack: f64,
) -> Vec<CoverageVerdict> {
    ens.checkpoints
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let b = bound(k, delta);
            let exceed = ens.err_y[c].iter().filter(|&&e| e > b).count() + ens.divergence_count;
            let upper = clopper_pearson_upper(exceed, ens.n_reps, 0.99);
            CoverageVerdict {
                checkpoint: k,
                delta,
                bound: b,
                exceed_count: exceed,
                n: ens.n_reps,
                binomial_upper_ci: upper,
                slack,
                pass: upper <= delta * slack,
            }
        })
        .collect()
}

/// Summary CSV: `checkpoint,delta,quantile,ci_lo,ci_hi,bound,exceed_count,verdict`.
pub fn write_summary_csv<W: Write>(ens: &ErrorEnsemble, verdicts: &[CoverageVerdict], mut w: W) -> Result<()> {
    writeln!(w, "checkpoint,delta,quantile,ci_lo,ci_hi,bound,exceed_count,verdict")?;
    for v in verdicts {
        let c = ens.checkpoint_index(v.checkpoint).ok_or_else(|| Error::invalid("verdict checkpoint not in ensemble"))?;
        let q = empirical_quantile(&ens.err_y[c], 1.0 - v.delta)?;
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            v.checkpoint,
            v.delta,
            q.value,
            q.ci_lo,
            q.ci_hi,
            v.bound,
            v.exceed_count,
            if v.pass { "pass" } else { "fail" }
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightnessReport {
    pub k: u64,
    pub delta: f64,
    /// Empirical `(1-δ)`-quantile of `‖y_k‖₂`.
    pub empirical: QuantileEstimate,
    /// `σ̄ √(k log(1/δ)) / (k+1)`.
    pub exact: f64,
    pub empirical_over_exact: f64,
    /// Square root of the small-δ leading term of the main bound.
    pub leading: f64,
    pub leading_over_exact: f64,
}

/// Compares quantiles of `‖y_k‖₂` from a pair-Gaussian ensemble started at 0
/// with the exact value and with the main bound's leading term.
pub fn tightness_check(ens: &ErrorEnsemble, params: &BoundParams, sigma_bar: f64, delta: f64, k: u64) -> Result<TightnessReport> {
    let c = ens.checkpoint_index(k).ok_or_else(|| Error::invalid(format!("checkpoint {k} not in ensemble")))?;
    let norms: Vec<f64> = ens.err_y[c].iter().map(|e| e.sqrt()).collect();
    let empirical = empirical_quantile(&norms, 1.0 - delta)?;
    let exact = sigma_bar * (k as f64 * (1.0 / delta).ln()).sqrt() / (k + 1) as f64;
    let leading = leading_term_small_delta(params, delta, k).sqrt();
    Ok(TightnessReport {
        k,
        delta,
        empirical,
        exact,
        empirical_over_exact: empirical.value / exact,
        leading,
        leading_over_exact: leading / exact,
    })
}

/// Scalar recursion parameters for the truncated moment generating function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfSetup {
    pub k: u64,
    pub x0: f64,
    pub alpha0: f64,
    pub alpha1: f64,
}

impl MgfSetup {
    /// `(k+1)/(x₀α₀α₁)`.
    pub fn t_star(&self) -> f64 {
        (self.k + 1) as f64 / (self.x0 * self.alpha0 * self.alpha1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgfDivergence {
    pub t: f64,
    pub t_star: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Last value over the one before it.
    pub last_ratio: f64,
    /// Last value over the first.
    pub growth: f64,
    pub convergent: bool,
}

/// `E[exp(t x₀α₀α₁ w₁w₂/(k+1)); |w₁|, |w₂| <= r]` for independent standard normals.
///
/// The inner integral over `w₂` is closed form; the outer one uses composite
/// Gauss–Legendre quadrature.
pub fn truncated_mgf(setup: &MgfSetup, t: f64, r: f64) -> f64 {
    let c = t / setup.t_star();
    let nd = Normal::standard();
    let band = |lo: f64, hi: f64| if lo > 0.0 { nd.sf(lo) - nd.sf(hi) } else { nd.cdf(hi) - nd.cdf(lo) };
    let inner = |a: f64| {
        let m = c * a;
        (-0.5 * a * a * (1.0 - c * c)).exp() * band(-r - m, r - m) / (2.0 * std::f64::consts::PI).sqrt()
    };
    gauss_legendre(&inner, -r, r, (64.0 * r).ceil() as usize)
}

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            X.iter().zip(&W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// Truncated integrals over an increasing radius grid. `convergent` when the last
/// step changes the value by less than 1%.
pub fn truncated_mgf_divergence(setup: &MgfSetup, t: f64, radii: &[f64]) -> Result<MgfDivergence> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] <= 0.0 {
        return Err(Error::invalid("radii must be positive, ascending and at least two"));
    }
    let values: Vec<f64> = radii.iter().map(|&r| truncated_mgf(setup, t, r)).collect();
    let n = values.len();
    let last_ratio = values[n - 1] / values[n - 2];
    Ok(MgfDivergence {
        t,
        t_star: setup.t_star(),
        radii: radii.to_vec(),
        last_ratio,
        growth: values[n - 1] / values[0],
        convergent: last_ratio < 1.01,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    PolynomialTailConsistent,
    ExponentialTailConsistent,
}

impl TailVerdict {
    pub fn label(self) -> &'static str {
        match self {
            TailVerdict::PolynomialTailConsistent => "polynomial-tail-consistent",
            TailVerdict::ExponentialTailConsistent => "exponential-tail-consistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailDiagnostics {
    /// `(fraction, Hill index)` over the top 1%, 2% and 5%.
    pub hill: Vec<(f64, f64)>,
    /// Largest pairwise relative difference is below 25%.
    pub hill_stable: bool,
    /// Slope and RMS residual of `log S(x)` against `x`.
    pub exp_slope: f64,
    pub exp_residual: f64,
    /// Slope and RMS residual of `log S(x)` against `log x`.
    pub poly_slope: f64,
    pub poly_residual: f64,
    /// Shape and RMS residual of `log(-log S(x))` against `log x`.
    pub subweibull_shape: f64,
    pub subweibull_residual: f64,
    pub verdict: TailVerdict,
}

pub const HILL_FRACTIONS: [f64; 3] = [0.01, 0.02, 0.05];

/// Hill estimate of the tail index from the top `fraction` of a sample sorted descending.
pub fn hill_index(desc: &[f64], fraction: f64) -> f64 {
    let k = ((desc.len() as f64 * fraction).floor() as usize).max(2).min(desc.len() - 1);
    let thr = desc[k];
    let mean_log = desc[..k].iter().map(|x| (x / thr).ln()).sum::<f64>() / k as f64;
    1.0 / mean_log
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, (rss / n).sqrt())
}

/// Tail class diagnostics on a positive sample of at least 100 points.
///
/// The survival regressions use 200 log-spaced levels of the empirical survival
/// function between 10% and `10/n`.
pub fn tail_diagnostics(samples: &[f64]) -> Result<TailDiagnostics> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::DegenerateSample("fewer than 100 samples"));
    }
    if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("tail diagnostics need finite non-negative samples"));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let top = ((n as f64 * 0.1) as usize).max(10);
    if desc[top] <= 0.0 || desc[0] <= desc[top] {
        return Err(Error::DegenerateSample("upper tail is constant or not positive"));
    }
    let hill: Vec<(f64, f64)> = HILL_FRACTIONS.iter().map(|&f| (f, hill_index(&desc, f))).collect();
    let hill_stable = hill.iter().all(|a| {
        hill.iter().all(|b| (a.1 - b.1).abs() / a.1.min(b.1) < 0.25)
    });

    let (s_hi, s_lo) = (0.1f64, 10.0 / n as f64);
    if s_lo >= s_hi {
        return Err(Error::DegenerateSample("too few samples for the survival regression"));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(200);
    for j in 0..200 {
        let s = (s_hi.ln() + (s_lo.ln() - s_hi.ln()) * j as f64 / 199.0).exp();
        // desc[m] has exactly m larger order statistics: S(desc[m]) ≈ m/n
        let m = (s * n as f64).round() as usize;
        let x = desc[m];
        if pts.last().map_or(true, |p| p.0 != x) {
            pts.push((x, (m as f64 / n as f64).ln()));
        }
    }
    if pts.len() < 10 {
        return Err(Error::DegenerateSample("upper tail has too few distinct values"));
    }
    let ls: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let llx: Vec<f64> = ls.iter().map(|s| (-s).ln()).collect();
    let (exp_slope, exp_residual) = ols(&xs, &ls);
    let (poly_slope, poly_residual) = ols(&lx, &ls);
    let (subweibull_shape, subweibull_residual) = ols(&lx, &llx);
    let verdict = if poly_residual < exp_residual {
        TailVerdict::PolynomialTailConsistent
    } else {
        TailVerdict::ExponentialTailConsistent
    };
    Ok(TailDiagnostics {
        hill,
        hill_stable,
        exp_slope,
        exp_residual,
        poly_slope,
        poly_residual,
        subweibull_shape,
        subweibull_residual,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_pair_gaussian_example, make_random_contractive};
    use crate::rng::{seeded, standard_exponential, uniform_open0};
    use approx::assert_relative_eq;

    fn pair_setup(k: u64) -> EnsembleSetup {
        EnsembleSetup {
            schedule: StepSchedule::new(1.0, 2.0, 0.0).unwrap(),
            x0: vec![0.0; 2],
            checkpoints: vec![k],
            norm: NormSpec::Euclidean,
        }
    }

    #[test]
    fn quantile_convention() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = empirical_quantile(&s, 0.95).unwrap();
        assert_eq!(q.value, 95.0);
        assert!(q.ci_lo < 95.0 && q.ci_hi > 95.0);
        let c = empirical_quantile(&[3.5; 50], 0.9).unwrap();
        assert_eq!((c.value, c.ci_lo, c.ci_hi), (3.5, 3.5, 3.5));
    }

    #[test]
    fn exponential_quantile() {
        let mut rng = seeded(4);
        let s: Vec<f64> = (0..100_000).map(|_| standard_exponential(&mut rng)).collect();
        let q = empirical_quantile(&s, 0.99).unwrap();
        assert!(q.ci_lo <= 100f64.ln() && 100f64.ln() <= q.ci_hi, "{q:?}");
    }

    #[test]
    fn clopper_pearson_closed_forms() {
        assert_relative_eq!(clopper_pearson_upper(0, 1000, 0.99), 1.0 - 0.01f64.powf(1e-3), max_relative = 1e-10);
        assert_relative_eq!(clopper_pearson_upper(4, 5, 0.99), 0.99f64.powf(0.2), max_relative = 1e-10);
        assert_eq!(clopper_pearson_upper(5, 5, 0.99), 1.0);
    }

    #[test]
    fn zero_noise_replications_identical() {
        let op = make_random_contractive(3, 0.5, 0.0, 1).unwrap();
        let setup = EnsembleSetup {
            schedule: StepSchedule::new(0.5, 2.0, 0.5).unwrap(),
            x0: vec![1.0, -1.0, 2.0],
            checkpoints: vec![10, 100],
            norm: NormSpec::Euclidean,
        };
        let e = run_ensemble(&op, &setup, 8, 3, None).unwrap();
        assert!(e.err_y.iter().all(|row| row.iter().all(|v| *v == row[0])));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let op = make_pair_gaussian_example(2, 1.0).unwrap();
        let a = run_ensemble(&op, &pair_setup(20), 200, 9, Some(1)).unwrap();
        let b = run_ensemble(&op, &pair_setup(20), 200, 9, Some(4)).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 201);
    }

    #[test]
    fn pair_gaussian_mean_error() {
        let op = make_pair_gaussian_example(2, 1.0).unwrap();
        let k = 30;
        let e = run_ensemble(&op, &pair_setup(k), 20_000, 2, None).unwrap();
        let s = &e.err_y[0];
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let sd = (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let want = k as f64 / ((k + 1) as f64).powi(2);
        assert!((m - want).abs() < 4.0 * sd / n.sqrt());
    }

    #[test]
    fn divergence_counted_not_fatal() {
        use crate::operators::make_linear_additive;
        use nalgebra::DMatrix;
        let op = make_linear_additive(DMatrix::from_element(1, 1, 1e300), vec![0.0], DMatrix::zeros(1, 1)).unwrap();
        let setup = EnsembleSetup {
            schedule: StepSchedule::new(1.0, 2.0, 0.0).unwrap(),
            x0: vec![1.0],
            checkpoints: vec![5],
            norm: NormSpec::Euclidean,
        };
        let e = run_ensemble(&op, &setup, 4, 0, None).unwrap();
        assert_eq!(e.divergence_count, 4);
        let v = coverage_test(&e, &|_, _| f64::INFINITY, 0.5, 1.0);
        assert_eq!(v[0].exceed_count, 4);
    }

    #[test]
    fn coverage_trivial_bounds() {
        let op = make_pair_gaussian_example(2, 1.0).unwrap();
        let e = run_ensemble(&op, &pair_setup(10), 2000, 1, None).unwrap();
        let inf = coverage_test(&e, &|_, _| f64::INFINITY, 0.05, 1.0);
        assert!(inf[0].pass && inf[0].exceed_count == 0);
        assert!(!coverage_test(&e, &|_, _| 0.0, 0.05, 1.0)[0].pass);
    }

    #[test]
    fn tightness_limit_delta_to_one() {
        let op = make_pair_gaussian_example(2, 1.0).unwrap();
        let e = run_ensemble(&op, &pair_setup(10), 2000, 1, None).unwrap();
        let q = empirical_quantile(&e.err_y[0], 1e-3).unwrap();
        assert!(q.value < 1e-3);
    }

    #[test]
    fn mgf_examples() {
        let s = MgfSetup { k: 2, x0: 1.0, alpha0: 0.25, alpha1: 0.25 };
        assert_eq!(s.t_star(), 48.0);
        for r in [1.0, 3.0] {
            assert_relative_eq!(truncated_mgf(&s, 0.0, r), (1.0 - 2.0 * Normal::standard().sf(r)).powi(2), max_relative = 1e-9);
        }
        let radii = [2.0, 3.0, 4.0, 5.0, 6.0];
        let below = truncated_mgf_divergence(&s, 24.0, &radii).unwrap();
        assert!(below.convergent);
        // exact full-plane value 1/√(1-c²)
        assert_relative_eq!(below.values[4], 1.0 / (1.0f64 - 0.25).sqrt(), max_relative = 1e-6);
        let above = truncated_mgf_divergence(&s, 96.0, &radii).unwrap();
        assert!(above.growth >= 10.0 && !above.convergent);
    }

    #[test]
    fn hill_on_pareto() {
        let mut rng = seeded(11);
        let s: Vec<f64> = (0..100_000).map(|_| uniform_open0(&mut rng).powf(-0.5)).collect();
        let d = tail_diagnostics(&s).unwrap();
        for (_, h) in &d.hill {
            assert!((h - 2.0).abs() < 0.2, "{h}");
        }
        assert!(d.hill_stable);
        assert_eq!(d.verdict, TailVerdict::PolynomialTailConsistent);
        assert!((d.poly_slope + 2.0).abs() < 0.1);
    }

    #[test]
    fn exponential_verdict() {
        let mut rng = seeded(12);
        let s: Vec<f64> = (0..100_000).map(|_| standard_exponential(&mut rng)).collect();
        let d = tail_diagnostics(&s).unwrap();
        assert_eq!(d.verdict, TailVerdict::ExponentialTailConsistent);
        assert!((d.exp_slope + 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(matches!(tail_diagnostics(&[2.0; 1000]), Err(Error::DegenerateSample(_))));
    }
}
