//! Norm algebra used by the bounds: weighted p-norms and their duals,
//! equivalence constants, the smoothness constant of the squared norm, and
//! the conditioning constant ν of `J - I`.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::{fill_standard_normal, seeded, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub enum NormSpec {
    Euclidean,
    Max,
    /// `(Σ w_i |x_i|^p)^{1/p}` with `p >= 2` and strictly positive weights.
    WeightedP { p: f64, weights: Vec<f64> },
}

impl NormSpec {
    pub fn weighted_p(p: f64, weights: Vec<f64>) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::invalid(format!("weighted p-norm needs finite p >= 2, got {p}")));
        }
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and strictly positive"));
        }
        Ok(NormSpec::WeightedP { p, weights })
    }

    pub fn unweighted_p(p: f64, d: usize) -> Result<Self> {
        Self::weighted_p(p, vec![1.0; d])
    }

    pub fn id(&self) -> String {
        match self {
            NormSpec::Euclidean => "euclidean".into(),
            NormSpec::Max => "max".into(),
            NormSpec::WeightedP { p, weights } => {
                if weights.iter().all(|w| *w == 1.0) {
                    format!("p{p}")
                } else {
                    format!("weighted_p{p}")
                }
            }
        }
    }

    /// The exponent viewed as an lp norm (`∞` for the max norm).
    fn exponent(&self) -> f64 {
        match self {
            NormSpec::Euclidean => 2.0,
            NormSpec::Max => f64::INFINITY,
            NormSpec::WeightedP { p, .. } => *p,
        }
    }

    fn weight_range(&self) -> (f64, f64) {
        match self {
            NormSpec::WeightedP { weights, .. } => weights
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), w| (lo.min(*w), hi.max(*w))),
            _ => (1.0, 1.0),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if let NormSpec::WeightedP { weights, .. } = self {
            if weights.len() != d {
                return Err(Error::DimensionMismatch { expected: weights.len(), got: d });
            }
        }
        Ok(())
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            NormSpec::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormSpec::Max => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            NormSpec::WeightedP { p, weights } => {
                debug_assert_eq!(weights.len(), x.len());
                // scale by the max entry so large p does not overflow
                let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = x
                    .iter()
                    .zip(weights)
                    .map(|(v, w)| w * (v.abs() / scale).powf(*p))
                    .sum();
                scale * s.powf(1.0 / p)
            }
        }
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        let n = self.norm(x);
        n * n
    }

    /// Squared distance `‖x - y‖²`.
    pub fn dist_sq(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm_sq(&diff)
    }

    pub fn dual_norm(&self, u: &[f64]) -> f64 {
        match self {
            NormSpec::Euclidean => NormSpec::Euclidean.norm(u),
            NormSpec::Max => u.iter().map(|v| v.abs()).sum(),
            NormSpec::WeightedP { p, weights } => {
                let q = p / (p - 1.0);
                let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = u
                    .iter()
                    .zip(weights)
                    .map(|(v, w)| w.powf(-1.0 / (p - 1.0)) * (v.abs() / scale).powf(q))
                    .sum();
                scale * s.powf(1.0 / q)
            }
        }
    }

    /// Gradient of `½‖x‖²`: componentwise `sign(x_i) w_i |x_i|^{p-1} ‖x‖^{2-p}`.
    pub fn grad_half_sq(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            NormSpec::Euclidean => Ok(x.to_vec()),
            NormSpec::Max => Err(Error::UnsupportedNorm("max")),
            NormSpec::WeightedP { p, weights } => {
                let n = self.norm(x);
                if n == 0.0 {
                    return Ok(vec![0.0; x.len()]);
                }
                // w_i |x_i|^{p-1} n^{2-p} = n * w_i (|x_i|/n)^{p-1}
                Ok(x.iter()
                    .zip(weights)
                    .map(|(v, w)| v.signum() * n * w * (v.abs() / n).powf(p - 1.0))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceConstants {
    /// ℓ_ab with `ℓ_ab ‖x‖_b <= ‖x‖_a`.
    pub lower: f64,
    /// u_ab with `‖x‖_a <= u_ab ‖x‖_b`.
    pub upper: f64,
}

/// Constants with `ℓ‖x‖_b <= ‖x‖_a <= u‖x‖_b` on `R^d`.
///
/// Exact for unweighted pairs (`u = 1`, `ℓ = d^{1/p_a - 1/p_b}` when
/// `p_a >= p_b`); weighted norms are sandwiched through their extreme weights.
pub fn equivalence_constants(a: &NormSpec, b: &NormSpec, d: usize) -> Result<EquivalenceConstants> {
    a.check_dim(d)?;
    b.check_dim(d)?;
    if a == b {
        return Ok(EquivalenceConstants { lower: 1.0, upper: 1.0 });
    }
    let (pa, pb) = (a.exponent(), b.exponent());
    let inv = |p: f64| if p.is_infinite() { 0.0 } else { 1.0 / p };
    let gap = (d as f64).powf((inv(pa) - inv(pb)).abs());
    let (mut lower, mut upper) = if pa >= pb { (1.0 / gap, 1.0) } else { (1.0, gap) };

    let (a_lo, a_hi) = a.weight_range();
    lower *= a_lo.powf(inv(pa));
    upper *= a_hi.powf(inv(pa));
    let (b_lo, b_hi) = b.weight_range();
    lower /= b_hi.powf(inv(pb));
    upper /= b_lo.powf(inv(pb));
    Ok(EquivalenceConstants { lower, upper })
}

/// Empirical `(min, max)` of `‖x‖_a / ‖x‖_b` from random restarts followed by
/// coordinate pattern search. Used to cross-check [`equivalence_constants`].
pub fn sphere_search_ratio(a: &NormSpec, b: &NormSpec, d: usize, restarts: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let ratio = |z: &[f64]| a.norm(z) / b.norm(z);
    let lo = pattern_search(d, restarts, &mut rng, |z| ratio(z));
    let hi = -pattern_search(d, restarts, &mut rng, |z| -ratio(z));
    (lo, hi)
}

/// Minimizes a scale-invariant objective over nonzero vectors.
fn pattern_search<F: Fn(&[f64]) -> f64>(d: usize, restarts: usize, rng: &mut SimRng, f: F) -> f64 {
    let mut best = f64::INFINITY;
    let mut z = vec![0.0; d];
    for r in 0..restarts.max(1) {
        // first restarts probe the axes and the diagonal, the rest are random
        if r < d {
            z.iter_mut().enumerate().for_each(|(i, v)| *v = if i == r { 1.0 } else { 0.0 });
        } else if r == d {
            z.iter_mut().for_each(|v| *v = 1.0);
        } else {
            fill_standard_normal(rng, &mut z);
        }
        let mut val = f(&z);
        let mut step = 0.5;
        while step > 1e-9 {
            let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut improved = false;
            for i in 0..d {
                for sgn in [1.0, -1.0] {
                    let old = z[i];
                    z[i] = old + sgn * step * scale;
                    let cand = f(&z);
                    if cand < val && cand.is_finite() {
                        val = cand;
                        improved = true;
                    } else {
                        z[i] = old;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(val);
    }
    best
}

/// Smoothness constant `M = p - 1` of `½‖·‖²` (1 for the euclidean norm).
pub fn smoothness_constant(spec: &NormSpec) -> Result<f64> {
    match spec {
        NormSpec::Euclidean => Ok(1.0),
        NormSpec::WeightedP { p, .. } => Ok(p - 1.0),
        NormSpec::Max => Err(Error::UnsupportedNorm("max")),
    }
}

/// `‖∇f(x) - ∇f(y)‖_* / ‖x - y‖` for `f = ½‖·‖²`.
pub fn gradient_lipschitz_ratio(spec: &NormSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    let gx = spec.grad_half_sq(x)?;
    let gy = spec.grad_half_sq(y)?;
    let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
    let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(spec.dual_norm(&dg) / spec.norm(&dx))
}

/// Slack in the smoothness inequality
/// `½‖a+b‖² <= ½‖a‖² + <∇½‖a‖², b> + (M/2)‖b‖²`; non-negative when it holds.
pub fn smoothness_slack(spec: &NormSpec, a: &[f64], b: &[f64], m: f64) -> Result<f64> {
    let g = spec.grad_half_sq(a)?;
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let inner: f64 = g.iter().zip(b).map(|(x, y)| x * y).sum();
    let rhs = 0.5 * spec.norm_sq(a) + inner + 0.5 * m * spec.norm_sq(b);
    Ok(rhs - 0.5 * spec.norm_sq(&ab))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuEstimate {
    pub value: f64,
    /// True when `value` is exact (euclidean, max, weighted 2-norm).
    pub certified: bool,
    pub restarts: usize,
}

const NU_RESTARTS: usize = 24;

/// `ν = min_z ‖(A - I)z‖ / ‖z‖`.
///
/// Exact for the euclidean norm (smallest singular value), the weighted
/// 2-norm (singular value after diagonal rescaling) and the max norm
/// (`1/‖(A-I)^{-1}‖_∞`). Other p-norms get an upper estimate from random
/// restarts of a pattern search with tolerance 1e-9.
pub fn estimate_nu(a: &DMatrix<f64>, norm: &NormSpec) -> Result<NuEstimate> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::invalid("Jacobian must be square"));
    }
    norm.check_dim(d)?;
    let b = a - DMatrix::<f64>::identity(d, d);
    let sv = b.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(Error::SingularJacobian(smin));
    }
    match norm {
        NormSpec::Euclidean => Ok(NuEstimate { value: smin, certified: true, restarts: 0 }),
        NormSpec::Max => {
            let inv = b.try_inverse().ok_or(Error::SingularJacobian(smin))?;
            let row_max = inv
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            Ok(NuEstimate { value: 1.0 / row_max, certified: true, restarts: 0 })
        }
        NormSpec::WeightedP { p, weights } if *p == 2.0 => {
            let s = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, weights.iter().map(|w| w.sqrt())));
            let s_inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, weights.iter().map(|w| 1.0 / w.sqrt())));
            let value = (s * &b * s_inv).singular_values().min();
            Ok(NuEstimate { value, certified: true, restarts: 0 })
        }
        NormSpec::WeightedP { .. } => {
            let mut rng = seeded(0x6e75);
            let value = pattern_search(d, NU_RESTARTS, &mut rng, |z| {
                let bz: Vec<f64> = (0..d).map(|i| (0..d).map(|j| b[(i, j)] * z[j]).sum()).collect();
                norm.norm(&bz) / norm.norm(z)
            });
            Ok(NuEstimate { value, certified: false, restarts: NU_RESTARTS })
        }
    }
}

/// Random vector with i.i.d. standard normal entries scaled by `scale`.
pub fn random_vector<R: RngCore>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_standard_normal(rng, &mut v);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norm_examples() {
        let l2 = NormSpec::unweighted_p(2.0, 2).unwrap();
        assert_relative_eq!(l2.norm(&[3.0, 4.0]), 5.0, max_relative = 1e-15);
        assert_eq!(NormSpec::Max.norm(&[-2.0, 1.5]), 2.0);
        let w = NormSpec::weighted_p(2.0, vec![4.0, 1.0]).unwrap();
        assert_relative_eq!(w.norm(&[1.0, 2.0]), 8f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn dual_examples() {
        assert_relative_eq!(NormSpec::Euclidean.dual_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(NormSpec::Max.dual_norm(&[1.0, -1.0, 2.0]), 4.0);
        let w = NormSpec::weighted_p(2.0, vec![4.0, 1.0]).unwrap();
        assert_relative_eq!(w.dual_norm(&[2.0, 1.0]), 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(NormSpec::weighted_p(1.5, vec![1.0]).is_err());
        assert!(NormSpec::weighted_p(3.0, vec![1.0, 0.0]).is_err());
        assert!(matches!(smoothness_constant(&NormSpec::Max), Err(Error::UnsupportedNorm(_))));
    }

    #[test]
    fn equivalence_examples() {
        let p2 = NormSpec::unweighted_p(2.0, 5).unwrap();
        let c = equivalence_constants(&p2, &NormSpec::Euclidean, 5).unwrap();
        assert_relative_eq!(c.lower, 1.0, max_relative = 1e-15);
        assert_relative_eq!(c.upper, 1.0, max_relative = 1e-15);

        let p4 = NormSpec::unweighted_p(4.0, 16).unwrap();
        let c = equivalence_constants(&p4, &NormSpec::Euclidean, 16).unwrap();
        assert_relative_eq!(c.upper, 1.0);
        assert_relative_eq!(c.lower, 0.5, max_relative = 1e-14);

        let c = equivalence_constants(&NormSpec::Max, &NormSpec::Euclidean, 9).unwrap();
        assert_relative_eq!(c.upper, 1.0);
        assert_relative_eq!(c.lower, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn equivalence_matches_sphere_search() {
        let p4 = NormSpec::unweighted_p(4.0, 16).unwrap();
        let (lo, hi) = sphere_search_ratio(&p4, &NormSpec::Euclidean, 16, 8, 1);
        assert!((lo - 0.5).abs() < 1e-6, "lo = {lo}");
        assert!((hi - 1.0).abs() < 1e-6, "hi = {hi}");

        // weighted constants must sandwich whatever the search finds
        let w = NormSpec::weighted_p(3.0, vec![0.5, 2.0, 1.0]).unwrap();
        let c = equivalence_constants(&w, &NormSpec::Euclidean, 3).unwrap();
        let (lo, hi) = sphere_search_ratio(&w, &NormSpec::Euclidean, 3, 16, 2);
        assert!(c.lower <= lo * (1.0 + 1e-9) && hi <= c.upper * (1.0 + 1e-9));
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(smoothness_constant(&NormSpec::Euclidean).unwrap(), 1.0);
        assert_eq!(smoothness_constant(&NormSpec::unweighted_p(8.0, 3).unwrap()).unwrap(), 7.0);
        let w = NormSpec::weighted_p(3.0, vec![1.0, 2.0, 5.0]).unwrap();
        assert_eq!(smoothness_constant(&w).unwrap(), 2.0);
        let mut rng = seeded(3);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let x = random_vector(&mut rng, 3, 1.0);
            let y = random_vector(&mut rng, 3, 1.0);
            worst = worst.max(gradient_lipschitz_ratio(&w, &x, &y).unwrap());
        }
        assert!(worst <= 2.0 * (1.0 + 1e-8), "worst ratio {worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = NormSpec::weighted_p(5.0, vec![0.3, 1.7, 2.2, 0.9]).unwrap();
        let x = [0.4, -1.3, 0.25, 2.0];
        let g = w.grad_half_sq(&x).unwrap();
        for i in 0..4 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (0.5 * w.norm_sq(&xp) - 0.5 * w.norm_sq(&xm)) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn nu_examples() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_relative_eq!(estimate_nu(&z, &NormSpec::Euclidean).unwrap().value, 1.0, max_relative = 1e-14);
        let g = DMatrix::<f64>::identity(3, 3) * 0.3;
        assert_relative_eq!(estimate_nu(&g, &NormSpec::Euclidean).unwrap().value, 0.7, max_relative = 1e-14);
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(estimate_nu(&id, &NormSpec::Euclidean), Err(Error::SingularJacobian(_))));
    }

    #[test]
    fn nu_search_agrees_with_exact_cases() {
        let a = DMatrix::from_row_slice(3, 3, &[0.2, -0.1, 0.3, 0.05, 0.1, -0.2, 0.0, 0.25, 0.15]);
        // the max norm has a closed form; the search must not undercut it
        let exact = estimate_nu(&a, &NormSpec::Max).unwrap().value;
        let big_p = NormSpec::unweighted_p(2.0, 3).unwrap();
        let e2 = estimate_nu(&a, &big_p).unwrap().value;
        assert_relative_eq!(e2, estimate_nu(&a, &NormSpec::Euclidean).unwrap().value, max_relative = 1e-12);
        let p3 = NormSpec::unweighted_p(3.0, 3).unwrap();
        let est = estimate_nu(&a, &p3).unwrap();
        assert!(!est.certified && est.value > 0.0);
        assert!(exact > 0.0);
    }
}
