//! Error functionals, analytic noise bounds and the Monte Carlo accuracy check.
//!
//! Squared-error figures follow the convention `||W A^+ diag(B)||_F^2`,
//! which counts each Laplace coordinate of scale `b` as contributing `b^2`.
//! The true variance of `Lap(b)` is `2 b^2`; multiply by
//! [`LAPLACE_VARIANCE_FACTOR`] to obtain the actual expected squared error.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::linalg::frobenius_sq;
use crate::query::AccuracyRequirement;
use crate::scalar::Scalar;

/// `Var(Lap(b)) / b^2`.
pub const LAPLACE_VARIANCE_FACTOR: f64 = 2.0;

/// Standard Laplace draw (scale 1) by inversion.
pub fn standard_laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            return -u.signum() * (-2.0 * u.abs()).ln_1p();
        }
    }
}

pub fn sample_laplace<T: Scalar, R: Rng + ?Sized>(rng: &mut R, b: T) -> T {
    b * T::lit(standard_laplace(rng))
}

/// Independent draws, coordinate `i` from `Lap(scales[i])`.
pub fn laplace_vector<T: Scalar>(scales: &[T], seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scales.iter().map(|&b| sample_laplace(&mut rng, b)).collect()
}

fn column_sq<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    (0..m.ncols()).map(|j| m.column(j).norm_squared()).collect()
}

/// `||M diag(B)||_F^2` for `M = W' A'^+`.
pub fn expected_total_squared_error<T: Scalar>(m: &DMatrix<T>, scales: &[T]) -> T {
    assert_eq!(m.ncols(), scales.len(), "one scale per strategy row");
    column_sq(m).into_iter().zip(scales).fold(T::zero(), |acc, (c, &b)| acc + c * b * b)
}

/// Largest scale that the Chebyshev argument certifies for `(alpha, beta)`
/// worst error with every strategy row paid.
pub fn loose_bound<T: Scalar>(m: &DMatrix<T>, alpha: T, beta: T) -> T {
    alpha * (beta / T::lit(2.0)).sqrt() / frobenius_sq(m).sqrt()
}

/// Same certificate when the rows with `Some(scale)` keep their cached noise.
/// `None` when the free rows alone already exhaust the error allowance or no
/// row is paid.
pub fn tight_cached_bound<T: Scalar>(m: &DMatrix<T>, free: &[Option<T>], alpha: T, beta: T) -> Option<T> {
    let cols = column_sq(m);
    let mut fixed = T::zero();
    let mut paid = T::zero();
    for (c, f) in cols.into_iter().zip(free) {
        match f {
            Some(b) => fixed += c * *b * *b,
            None => paid += c,
        }
    }
    let radicand = alpha * alpha * beta / T::lit(2.0) - fixed;
    if radicand < T::zero() || !(paid > T::zero()) {
        return None;
    }
    Some(radicand.sqrt() / paid.sqrt())
}

/// Mean of `||M (B o u)||_2^2` over `samples` Laplace draws.
pub fn monte_carlo_squared_error<T: Scalar>(m: &DMatrix<T>, scales: &[T], samples: usize, seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = vec![T::zero(); scales.len()];
    let mut total = 0.0f64;
    for _ in 0..samples {
        for (n, &b) in noise.iter_mut().zip(scales) {
            *n = sample_laplace(&mut rng, b);
        }
        let e = m * nalgebra::DVector::from_column_slice(&noise);
        total += e.norm_squared().as_f64();
    }
    T::lit(total / samples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(default = "McConfig::default_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl McConfig {
    pub const MIN_SAMPLES: usize = 1000;

    fn default_samples() -> usize {
        10_000
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self { mc_samples: Self::default_samples(), seed: 0 }
    }
}

/// Precomputed state for repeated checks that share a free set.
#[derive(Debug, Clone)]
pub enum PreparedCheck<T> {
    Squared { fixed: T, paid: T },
    /// No paid rows: the outcome does not depend on the paid scale.
    Fixed { pass: bool },
    /// No free rows: per-sample `||M u||_inf` at unit scale.
    PaidOnly { peaks: Vec<T> },
    /// Per-sample error is `x + b * y`, both `samples x l`.
    Mixed { x: DMatrix<T>, y: DMatrix<T> },
}

/// Accuracy check for one mapped workload `M = W' A'^+`.
///
/// All checks reuse one matrix of standard Laplace draws, so decisions for
/// different free sets and paid scales are made on common random numbers.
#[derive(Debug, Clone)]
pub struct AccuracyOracle<T> {
    m: DMatrix<T>,
    requirement: AccuracyRequirement<T>,
    /// `samples x cols(M)` standard Laplace draws; empty for squared-error checks.
    noise: DMatrix<T>,
    z: f64,
    samples: usize,
}

impl<T: Scalar> AccuracyOracle<T> {
    pub fn new(m: DMatrix<T>, requirement: AccuracyRequirement<T>, cfg: McConfig) -> Self {
        let samples = cfg.mc_samples.max(1);
        let (noise, z) = match requirement {
            AccuracyRequirement::WorstError { beta, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let noise = DMatrix::from_fn(samples, m.ncols(), |_, _| T::lit(standard_laplace(&mut rng)));
                let p = beta.as_f64() / 100.0;
                let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - p / 2.0);
                (noise, z)
            }
            AccuracyRequirement::ExpectedSquaredError { .. } => (DMatrix::zeros(0, m.ncols()), 0.0),
        };
        Self { m, requirement, noise, z, samples }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn requirement(&self) -> AccuracyRequirement<T> {
        self.requirement
    }

    /// Starting scale for the search with no free rows: the analytic bound
    /// for worst error, the exact solution for squared error.
    pub fn lower_bound(&self) -> Option<T> {
        let f = frobenius_sq(&self.m);
        if !(f > T::zero()) {
            return None;
        }
        Some(match self.requirement {
            AccuracyRequirement::WorstError { alpha, beta } => loose_bound(&self.m, alpha, beta),
            AccuracyRequirement::ExpectedSquaredError { alpha_sq } => (alpha_sq / f).sqrt(),
        })
    }

    /// Analytic certificate for a given free set, if any.
    pub fn certified_scale(&self, free: &[Option<T>]) -> Option<T> {
        match self.requirement {
            AccuracyRequirement::WorstError { alpha, beta } => tight_cached_bound(&self.m, free, alpha, beta),
            AccuracyRequirement::ExpectedSquaredError { .. } => None,
        }
    }

    pub fn prepare(&self, free: &[Option<T>]) -> PreparedCheck<T> {
        assert_eq!(free.len(), self.m.ncols(), "one entry per strategy row");
        if let AccuracyRequirement::ExpectedSquaredError { .. } = self.requirement {
            let mut fixed = T::zero();
            let mut paid = T::zero();
            for (c, f) in column_sq(&self.m).into_iter().zip(free) {
                match f {
                    Some(b) => fixed += c * *b * *b,
                    None => paid += c,
                }
            }
            return PreparedCheck::Squared { fixed, paid };
        }
        let mut mf = self.m.clone();
        let mut mp = self.m.clone();
        for (j, f) in free.iter().enumerate() {
            match f {
                Some(b) => {
                    mf.column_mut(j).scale_mut(*b);
                    mp.column_mut(j).fill(T::zero());
                }
                None => mf.column_mut(j).fill(T::zero()),
            }
        }
        let any_free = free.iter().any(Option::is_some);
        let any_paid = free.iter().any(Option::is_none);
        if !any_paid {
            let x = &self.noise * mf.transpose();
            let fails = (0..self.samples).filter(|&s| self.exceeds(x.row(s).iter().copied())).count();
            return PreparedCheck::Fixed { pass: self.accept(fails) };
        }
        let y = &self.noise * mp.transpose();
        if !any_free {
            let peaks = (0..self.samples)
                .map(|s| y.row(s).iter().fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m }))
                .collect();
            return PreparedCheck::PaidOnly { peaks };
        }
        let x = &self.noise * mf.transpose();
        PreparedCheck::Mixed { x, y }
    }

    fn alpha(&self) -> T {
        match self.requirement {
            AccuracyRequirement::WorstError { alpha, .. } => alpha,
            AccuracyRequirement::ExpectedSquaredError { alpha_sq } => alpha_sq.sqrt(),
        }
    }

    fn exceeds(&self, errs: impl Iterator<Item = T>) -> bool {
        let alpha = self.alpha();
        errs.into_iter().any(|e| e.abs() > alpha)
    }

    /// Empirical failure count at paid scale `b`; `None` for squared-error checks.
    pub fn failures(&self, prepared: &PreparedCheck<T>, b: T) -> Option<usize> {
        let alpha = self.alpha();
        match prepared {
            PreparedCheck::Squared { .. } | PreparedCheck::Fixed { .. } => None,
            PreparedCheck::PaidOnly { peaks } => Some(peaks.iter().filter(|&&p| p * b > alpha).count()),
            PreparedCheck::Mixed { x, y } => {
                let mut worst = vec![T::zero(); self.samples];
                for i in 0..x.ncols() {
                    let (xc, yc) = (x.column(i), y.column(i));
                    for s in 0..self.samples {
                        let e = (xc[s] + b * yc[s]).abs();
                        if e > worst[s] {
                            worst[s] = e;
                        }
                    }
                }
                Some(worst.into_iter().filter(|&w| w > alpha).count())
            }
        }
    }

    /// Decision at paid scale `b` for a prepared free set.
    pub fn passes(&self, prepared: &PreparedCheck<T>, b: T) -> bool {
        match prepared {
            PreparedCheck::Squared { fixed, paid } => {
                let AccuracyRequirement::ExpectedSquaredError { alpha_sq } = self.requirement else {
                    unreachable!("squared check prepared for a squared requirement")
                };
                *fixed + b * b * *paid <= alpha_sq
            }
            PreparedCheck::Fixed { pass } => *pass,
            other => self.accept(self.failures(other, b).expect("sampled check")),
        }
    }

    /// One-shot check: rows with `Some(scale)` keep that scale, the rest get `b`.
    pub fn check(&self, free: &[Option<T>], b: T) -> bool {
        self.passes(&self.prepare(free), b)
    }

    /// Accept iff `beta_e + delta_beta + p/2 < beta`.
    fn accept(&self, fails: usize) -> bool {
        let AccuracyRequirement::WorstError { beta, .. } = self.requirement else {
            return true;
        };
        let beta = beta.as_f64();
        let n = self.samples as f64;
        let be = fails as f64 / n;
        let delta = self.z * (be * (1.0 - be) / n).sqrt();
        be + delta + beta / 200.0 < beta
    }
}
