//! The Robbins–Monro recursion `x_{k+1} = (1 - α_k) x_k + α_k F(x_k, w_{k+1})`
//! with a running Polyak–Ruppert average `y_k = (x_0 + ... + x_k)/(k+1)`.

use crate::error::{Error, Result};
use crate::norms::NormSpec;
use crate::operators::StochasticOperator;
use crate::rng::{seeded, SimRng};

/// Polynomial step law `α_k = α / (k + h)^ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    alpha: f64,
    h: f64,
    xi: f64,
}

impl StepSchedule {
    pub fn new(alpha: f64, h: f64, xi: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("step scale alpha must be positive, got {alpha}")));
        }
        if !(h > 1.0 && h.is_finite()) {
            return Err(Error::invalid(format!("offset h must exceed 1, got {h}")));
        }
        if !(0.0..1.0).contains(&xi) {
            return Err(Error::invalid(format!("decay exponent xi must lie in [0,1), got {xi}")));
        }
        Ok(StepSchedule { alpha, h, xi })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    #[inline]
    pub fn step(&self, k: u64) -> f64 {
        self.alpha / (k as f64 + self.h).powf(self.xi)
    }

    /// `Σ_{j=0}^{k} α_j`, summed term by term.
    pub fn partial_sum(&self, k: u64) -> f64 {
        (0..=k).map(|j| self.step(j)).sum()
    }
}

pub fn step_size(schedule: &StepSchedule, k: u64) -> f64 {
    schedule.step(k)
}

/// Incremental mean: returns `x_k` when `k = 0`, else `y + (x_k - y)/(k+1)`.
pub fn update_average(y_prev: &[f64], x_k: &[f64], k: u64) -> Vec<f64> {
    let mut y = y_prev.to_vec();
    update_average_in_place(&mut y, x_k, k);
    y
}

#[inline]
pub fn update_average_in_place(y: &mut [f64], x_k: &[f64], k: u64) {
    if k == 0 {
        y.copy_from_slice(x_k);
        return;
    }
    let w = 1.0 / (k as f64 + 1.0);
    for (yi, xi) in y.iter_mut().zip(x_k) {
        *yi += (xi - *yi) * w;
    }
}

/// Live state of one replication.
#[derive(Debug, Clone)]
pub struct SaState {
    pub k: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rng: SimRng,
    scratch: Vec<f64>,
}

impl SaState {
    pub fn new(x0: &[f64], rng: SimRng) -> Self {
        SaState { k: 0, x: x0.to_vec(), y: x0.to_vec(), rng, scratch: vec![0.0; x0.len()] }
    }

    /// Advances from `x_k` to `x_{k+1}` and folds the new iterate into `y`.
    pub fn advance(&mut self, op: &dyn StochasticOperator, schedule: &StepSchedule) -> Result<()> {
        let a = schedule.step(self.k);
        op.sample(&self.x, &mut self.rng, &mut self.scratch);
        let mut finite = true;
        for (x, f) in self.x.iter_mut().zip(&self.scratch) {
            *x += a * (f - *x);
            finite &= x.is_finite();
        }
        self.k += 1;
        if !finite {
            return Err(Error::NonFiniteIterate { step: self.k });
        }
        update_average_in_place(&mut self.y, &self.x, self.k);
        Ok(())
    }
}

/// Squared errors `‖x_k - x*‖²` and `‖y_k - x*‖²` at checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<u64>,
    pub err_x: Vec<f64>,
    pub err_y: Vec<f64>,
    pub norm_id: String,
}

pub(crate) fn validate_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<()> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("checkpoints must be strictly ascending"));
    }
    if let Some(&last) = checkpoints.last() {
        if last > horizon {
            return Err(Error::invalid(format!("checkpoint {last} exceeds horizon {horizon}")));
        }
    }
    Ok(())
}

pub fn run_sa(
    op: &dyn StochasticOperator,
    schedule: &StepSchedule,
    x0: &[f64],
    horizon: u64,
    checkpoints: &[u64],
    norm: &NormSpec,
    seed: u64,
) -> Result<Trajectory> {
    validate_checkpoints(checkpoints, horizon)?;
    run_sa_with_rng(op, schedule, x0, checkpoints, norm, seeded(seed))
}

/// Runs up to the last checkpoint with a caller-provided generator.
pub fn run_sa_with_rng(
    op: &dyn StochasticOperator,
    schedule: &StepSchedule,
    x0: &[f64],
    checkpoints: &[u64],
    norm: &NormSpec,
    rng: SimRng,
) -> Result<Trajectory> {
    if x0.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: x0.len() });
    }
    let x_star = op.fixed_point();
    let mut state = SaState::new(x0, rng);
    let mut traj = Trajectory {
        checkpoints: checkpoints.to_vec(),
        err_x: Vec::with_capacity(checkpoints.len()),
        err_y: Vec::with_capacity(checkpoints.len()),
        norm_id: norm.id(),
    };
    for &cp in checkpoints {
        while state.k < cp {
            state.advance(op, schedule)?;
        }
        traj.err_x.push(norm.dist_sq(&state.x, x_star));
        traj.err_y.push(norm.dist_sq(&state.y, x_star));
    }
    Ok(traj)
}

/// Geometric grid `{⌊r^j⌋ : j >= 0}` truncated at `max`, deduplicated.
pub fn geometric_checkpoints(ratio: f64, max: u64) -> Vec<u64> {
    assert!(ratio > 1.0, "ratio must exceed 1");
    let mut out: Vec<u64> = Vec::new();
    let mut v = 1.0f64;
    while v.floor() as u64 <= max {
        let c = v.floor() as u64;
        if out.last() != Some(&c) {
            out.push(c);
        }
        v *= ratio;
    }
    out
}

/// Logarithmically spaced checkpoints between `lo` and `hi` (inclusive).
pub fn log_spaced_checkpoints(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi > lo && count >= 2);
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    *out.last_mut().unwrap() = hi;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_linear_additive, make_pair_gaussian_example};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn step_size_examples() {
        assert_eq!(StepSchedule::new(1.0, 2.0, 0.0).unwrap().step(7), 1.0);
        assert_eq!(StepSchedule::new(2.0, 4.0, 0.5).unwrap().step(0), 1.0);
        assert_relative_eq!(StepSchedule::new(1.0, 2.0, 0.75).unwrap().step(14), 0.125, max_relative = 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(StepSchedule::new(0.0, 2.0, 0.5).is_err());
        assert!(StepSchedule::new(1.0, 1.0, 0.5).is_err());
        assert!(StepSchedule::new(1.0, 2.0, 1.0).is_err());
        assert!(StepSchedule::new(1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn average_examples() {
        assert_eq!(update_average(&[9.0, 9.0], &[3.0, -1.0], 0), vec![3.0, -1.0]);
        assert_eq!(update_average(&[1.0, 1.0], &[1.0, 1.0], 9), vec![1.0, 1.0]);
        assert_eq!(update_average(&[0.0, 0.0], &[2.0, 4.0], 1), vec![1.0, 2.0]);
    }

    fn constant_map(xs: Vec<f64>) -> crate::operators::LinearAdditive {
        let d = xs.len();
        make_linear_additive(DMatrix::zeros(d, d), xs, DMatrix::zeros(d, d)).unwrap()
    }

    #[test]
    fn deterministic_contraction() {
        let op = constant_map(vec![0.0, 0.0]);
        let sched = StepSchedule::new(0.5, 2.0, 0.0).unwrap();
        let t = run_sa(&op, &sched, &[1.0, 0.0], 3, &[3], &NormSpec::Euclidean, 1).unwrap();
        assert_relative_eq!(t.err_x[0], 0.015625, max_relative = 1e-15);
    }

    #[test]
    fn fixed_point_is_absorbing() {
        let xs = vec![0.3, -2.0, 1.0];
        let op = constant_map(xs.clone());
        let sched = StepSchedule::new(0.9, 3.0, 0.6).unwrap();
        let mut st = SaState::new(&xs, seeded(0));
        for _ in 0..50 {
            st.advance(&op, &sched).unwrap();
            assert_eq!(st.x, xs);
            assert_eq!(st.y, xs);
        }
    }

    #[test]
    fn equal_seeds_give_identical_trajectories() {
        let op = make_pair_gaussian_example(2, 1.0).unwrap();
        let sched = StepSchedule::new(1.0, 2.0, 0.0).unwrap();
        let cps = geometric_checkpoints(2.0, 500);
        let a = run_sa(&op, &sched, &[0.0, 0.0], 500, &cps, &NormSpec::Euclidean, 42).unwrap();
        let b = run_sa(&op, &sched, &[0.0, 0.0], 500, &cps, &NormSpec::Euclidean, 42).unwrap();
        assert_eq!(a, b);
        let c = run_sa(&op, &sched, &[0.0, 0.0], 500, &cps, &NormSpec::Euclidean, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn running_average_matches_two_pass_mean() {
        let op = crate::operators::make_random_contractive(3, 0.6, 1.0, 5).unwrap();
        let sched = StepSchedule::new(0.8, 2.0, 0.5).unwrap();
        let mut st = SaState::new(&[1.0, 2.0, -1.0], seeded(3));
        let mut stored = vec![st.x.clone()];
        for _ in 0..2000 {
            st.advance(&op, &sched).unwrap();
            stored.push(st.x.clone());
        }
        for i in 0..3 {
            let mean = stored.iter().map(|x| x[i]).sum::<f64>() / stored.len() as f64;
            assert!((st.y[i] - mean).abs() <= 1e-10 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn divergence_is_reported() {
        // α = 0.99 with a huge expansive map overflows quickly
        let op = make_linear_additive(DMatrix::identity(1, 1) * 1e200, vec![1.0], DMatrix::zeros(1, 1)).unwrap();
        let sched = StepSchedule::new(0.99, 2.0, 0.0).unwrap();
        let err = run_sa(&op, &sched, &[1.0], 50, &[50], &NormSpec::Euclidean, 0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIterate { .. }));
    }

    #[test]
    fn checkpoint_grids() {
        assert_eq!(geometric_checkpoints(2.0, 20), vec![1, 2, 4, 8, 16]);
        assert_eq!(geometric_checkpoints(1.5, 5), vec![1, 2, 3, 5]);
        let g = log_spaced_checkpoints(1000, 100_000, 5);
        assert_eq!(g, vec![1000, 3162, 10000, 31623, 100_000]);
        assert!(validate_checkpoints(&[3, 2], 10).is_err());
        assert!(validate_checkpoints(&[3, 20], 10).is_err());
    }
}
