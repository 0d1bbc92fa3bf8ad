//! VAR(1) parameter estimation: OLS and LASSO transition matrices, sample
//! covariance, and the endogenous-model square-root construction.
//!
//! The model is S_t = S_{t-1} A + Z_t on row observations, so the transition
//! estimate is A = (X'X)^-1 X'Y with X the lagged block and Y the current one.

use crate::data::{LaggedPair, TimePanel};
use crate::geneig::symmetrize;
use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

/// Penalty convention: the LASSO objective is ||y - Xw||^2 + gamma ||w||_1,
/// with no 1/2 or 1/m factor. A whole column is zero exactly when
/// gamma >= 2 ||X'y||_inf.
pub const LASSO_SWEEP_CAP: usize = 10_000;
pub const LASSO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMethod {
    Ols,
    Lasso,
    Endogenous,
}

/// Non-fatal conditions surfaced by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EstimationFlag {
    /// X'X was rank deficient; a ridge was added before solving.
    RidgeApplied { ridge: f64 },
    /// Spectral radius of the fitted A exceeds 1 (stationarity assumption violated).
    NonStationary { spectral_radius: f64 },
    /// Coordinate descent hit the sweep cap; largest last update reported.
    LassoNotConverged { column: usize, last_update: f64 },
    /// Endogenous sigma was too large for I - sigma Gamma^-1 to stay PSD.
    SigmaShrunk { requested: f64, used: f64 },
}

/// Fitted VAR(1) model: transition A, asset covariance Gamma, noise covariance.
#[derive(Debug, Clone)]
pub struct VarModel<T: Scalar> {
    pub a: DMatrix<T>,
    pub gamma: DMatrix<T>,
    pub sigma_noise: DMatrix<T>,
    pub method: EstimationMethod,
    pub penalty: T,
    pub flags: Vec<EstimationFlag>,
}

impl<T: Scalar> VarModel<T> {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The predictability numerator A' Gamma A, symmetrized.
    pub fn predictability_matrix(&self) -> DMatrix<T> {
        symmetrize(&(self.a.transpose() * &self.gamma * &self.a))
    }

    /// Spectral radius of A (stationarity requires < 1).
    pub fn spectral_radius(&self) -> T {
        spectral_radius(&self.a)
    }
}

fn spectral_radius<T: Scalar>(a: &DMatrix<T>) -> T {
    a.complex_eigenvalues()
        .iter()
        .map(|c| (c.re * c.re + c.im * c.im).sqrt())
        .fold(T::zero(), |acc, v| acc.max(v))
}

fn stationarity_flag<T: Scalar>(a: &DMatrix<T>, flags: &mut Vec<EstimationFlag>) {
    let radius = spectral_radius(a);
    if radius > T::one() + sc(1e-6) {
        flags.push(EstimationFlag::NonStationary { spectral_radius: to_f64(radius) });
    }
}

/// Sample covariance of the rows of a matrix: centered columns,
/// 1/(m-1) divisor, symmetrized.
pub fn sample_cov_rows<T: Scalar>(rows: &DMatrix<T>) -> Result<DMatrix<T>> {
    let m = rows.nrows();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "sample covariance needs at least 2 rows, got {m}"
        )));
    }
    let n = rows.ncols();
    let mf = sc::<T>(m as f64);
    let means = DVector::from_iterator(n, rows.column_iter().map(|c| c.sum() / mf));
    let mut centered = rows.clone();
    for j in 0..n {
        for i in 0..m {
            centered[(i, j)] -= means[j];
        }
    }
    let cov = centered.transpose() * &centered / sc::<T>((m - 1) as f64);
    Ok(symmetrize(&cov))
}

/// Sample covariance of a panel's observations.
pub fn sample_covariance<T: Scalar>(panel: &TimePanel<T>) -> Result<DMatrix<T>> {
    sample_cov_rows(panel.values())
}

/// Least-squares transition estimate A = (X'X)^-1 X'Y with residual and
/// asset covariances. A ridge of 1e-8 * trace rescues rank deficiency.
pub fn ols_transition<T: Scalar>(pair: &LaggedPair<T>) -> Result<VarModel<T>> {
    let x = pair.lagged();
    let y = pair.current();
    let rows = x.nrows();
    if rows < 2 {
        return Err(Error::InsufficientData("need at least 2 lagged observations".into()));
    }
    let mut flags = Vec::new();
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;

    let chol = match Cholesky::new(gram.clone()) {
        Some(c) => c,
        None => {
            let ridge = sc::<T>(1e-8) * gram.trace().max(sc(f64::MIN_POSITIVE));
            let mut shifted = gram.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += ridge;
            }
            flags.push(EstimationFlag::RidgeApplied { ridge: to_f64(ridge) });
            Cholesky::new(shifted).ok_or_else(|| {
                Error::Estimation("lagged design matrix is rank deficient beyond ridge rescue".into())
            })?
        }
    };
    let a = chol.solve(&xty);

    let resid = y - x * &a;
    let sigma_noise = symmetrize(&(resid.transpose() * &resid / sc::<T>((rows - 1).max(1) as f64)));
    let gamma = sample_cov_rows(y)?;
    stationarity_flag(&a, &mut flags);

    Ok(VarModel { a, gamma, sigma_noise, method: EstimationMethod::Ols, penalty: T::zero(), flags })
}

pub(crate) struct CdOutcome<T> {
    pub converged: bool,
    pub last_update: T,
}

/// Cyclic coordinate descent for min_w  w'Qw - 2c'w + gamma ||w||_1
/// (covariance form, soft-thresholding updates). `w` is updated in place;
/// stops when the largest coordinate move in a sweep drops below `tol`.
pub(crate) fn quad_lasso_cd<T: Scalar>(
    q: &DMatrix<T>,
    c: &DVector<T>,
    gamma: T,
    w: &mut DVector<T>,
    tol: T,
    max_sweeps: usize,
) -> CdOutcome<T> {
    let n = c.len();
    let half_gamma = gamma / sc(2.0);
    // s = Q w, maintained incrementally
    let mut s = q * &*w;
    let mut last_update = T::zero();
    for _ in 0..max_sweeps {
        let mut max_move = T::zero();
        for i in 0..n {
            let qii = q[(i, i)];
            let old = w[i];
            let new = if qii <= T::zero() {
                T::zero()
            } else {
                let partial = c[i] - (s[i] - qii * old);
                soft_threshold(partial, half_gamma) / qii
            };
            let delta = new - old;
            if delta != T::zero() {
                w[i] = new;
                for r in 0..n {
                    s[r] += q[(r, i)] * delta;
                }
                max_move = max_move.max(delta.abs());
            }
        }
        last_update = max_move;
        if max_move < tol {
            return CdOutcome { converged: true, last_update };
        }
    }
    CdOutcome { converged: false, last_update }
}

#[inline]
pub(crate) fn soft_threshold<T: Scalar>(v: T, threshold: T) -> T {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        T::zero()
    }
}

/// LASSO transition estimate: each column of A solves
/// min ||S_it - S_{t-1} w||^2 + gamma ||w||_1 by coordinate descent.
/// Columns decouple, so they are solved independently.
pub fn lasso_transition<T: Scalar>(pair: &LaggedPair<T>, gamma_pen: T) -> Result<VarModel<T>> {
    if gamma_pen < T::zero() {
        return Err(Error::Domain("lasso penalty must be nonnegative".into()));
    }
    let x = pair.lagged();
    let y = pair.current();
    let rows = x.nrows();
    if rows < 2 {
        return Err(Error::InsufficientData("need at least 2 lagged observations".into()));
    }
    let n = x.ncols();
    let gram = x.transpose() * x;
    let mut flags = Vec::new();
    let mut a = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let c = x.transpose() * y.column(j);
        let mut w = DVector::<T>::zeros(n);
        let outcome = quad_lasso_cd(&gram, &c, gamma_pen, &mut w, sc(LASSO_TOL), LASSO_SWEEP_CAP);
        if !outcome.converged {
            flags.push(EstimationFlag::LassoNotConverged {
                column: j,
                last_update: to_f64(outcome.last_update),
            });
        }
        a.set_column(j, &w);
    }

    let resid = y - x * &a;
    let sigma_noise = symmetrize(&(resid.transpose() * &resid / sc::<T>((rows - 1).max(1) as f64)));
    let gamma = sample_cov_rows(y)?;
    stationarity_flag(&a, &mut flags);

    Ok(VarModel {
        a,
        gamma,
        sigma_noise,
        method: EstimationMethod::Lasso,
        penalty: gamma_pen,
        flags,
    })
}

/// Fraction of exactly-zero entries in a matrix.
pub fn zero_fraction<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let zeros = m.iter().filter(|&&v| v == T::zero()).count();
    zeros as f64 / (m.nrows() * m.ncols()) as f64
}

/// Smallest penalty whose LASSO solution zeroes out at least the target
/// fraction of coefficients, found by bisection on a bracket that is
/// guaranteed to contain it.
pub fn lasso_penalty_for_sparsity<T: Scalar>(
    pair: &LaggedPair<T>,
    target_zero_fraction: f64,
) -> Result<T> {
    if !(0.0..=1.0).contains(&target_zero_fraction) {
        return Err(Error::Domain(format!(
            "target fraction must lie in [0,1], got {target_zero_fraction}"
        )));
    }
    if target_zero_fraction == 0.0 {
        return Ok(T::zero());
    }
    let x = pair.lagged();
    let y = pair.current();
    // gamma = 2 max_j ||X' y_j||_inf forces every column to zero
    let mut hi = T::zero();
    for j in 0..y.ncols() {
        let c = x.transpose() * y.column(j);
        let peak = c.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
        hi = hi.max(peak * sc(2.0));
    }
    if hi == T::zero() {
        return Ok(T::zero());
    }
    let frac_at = |g: T| -> Result<f64> { Ok(zero_fraction(&lasso_transition(pair, g)?.a)) };
    let mut lo = T::zero();
    if frac_at(lo)? >= target_zero_fraction {
        return Ok(lo);
    }
    for _ in 0..40 {
        let mid = (lo + hi) / sc(2.0);
        if frac_at(mid)? >= target_zero_fraction {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Endogenous-model factor: A with A'A = I - sigma Gamma^-1.
#[derive(Debug, Clone)]
pub struct EndogenousFactor<T: Scalar> {
    /// Upper-triangular factor.
    pub a: DMatrix<T>,
    /// Sigma actually used (shrunk when the requested one breaks PSD-ness).
    pub sigma_used: T,
    pub flags: Vec<EstimationFlag>,
}

/// Upper-triangular A with A'A = I - sigma Gamma^-1 for the endogenous
/// dependence model. Sigma is shrunk to 0.99 / lambda_max(Gamma^-1) when the
/// requested value would make the target indefinite.
pub fn endogenous_transition<T: Scalar>(gamma: &DMatrix<T>, sigma: T) -> Result<EndogenousFactor<T>> {
    if sigma <= T::zero() {
        return Err(Error::Domain("sigma must be positive".into()));
    }
    let gamma_inv = crate::geneig::spd_inverse(gamma)?;
    let eigs = nalgebra::SymmetricEigen::new(gamma_inv.clone()).eigenvalues;
    let lam_max = eigs.iter().fold(T::zero(), |acc, &v| acc.max(v));
    if lam_max <= T::zero() {
        return Err(Error::Conditioning {
            message: "Gamma^-1 has no positive eigenvalue".into(),
            min_eigenvalue: to_f64(lam_max),
        });
    }

    let mut flags = Vec::new();
    let mut sigma_used = sigma;
    if sigma * lam_max >= T::one() {
        sigma_used = sc::<T>(0.99) / lam_max;
        flags.push(EstimationFlag::SigmaShrunk { requested: to_f64(sigma), used: to_f64(sigma_used) });
    }

    let n = gamma.nrows();
    loop {
        let mut target = DMatrix::<T>::identity(n, n) - &gamma_inv * sigma_used;
        target = symmetrize(&target);
        if let Some(chol) = Cholesky::new(target) {
            let a = chol.l().transpose();
            return Ok(EndogenousFactor { a, sigma_used, flags });
        }
        // boundary PSD case: pull sigma in slightly and note it
        let shrunk = sigma_used * sc(0.99);
        if flags.is_empty() {
            flags.push(EstimationFlag::SigmaShrunk { requested: to_f64(sigma), used: to_f64(shrunk) });
        } else if let Some(EstimationFlag::SigmaShrunk { used, .. }) = flags.last_mut() {
            *used = to_f64(shrunk);
        }
        sigma_used = shrunk;
        if sigma_used < sc(1e-300) {
            return Err(Error::Conditioning {
                message: "endogenous sigma shrank to zero".into(),
                min_eigenvalue: 0.0,
            });
        }
    }
}

/// Penalized least-squares objective ||Y - X A||_F^2 + gamma * sum |A_ij|,
/// shared by tests and the sparsity search.
pub fn lasso_objective<T: Scalar>(pair: &LaggedPair<T>, a: &DMatrix<T>, gamma_pen: T) -> T {
    let resid = pair.current() - pair.lagged() * a;
    let fit = resid.iter().fold(T::zero(), |acc, &v| acc + v * v);
    let l1 = a.iter().fold(T::zero(), |acc, &v| acc + v.abs());
    fit + gamma_pen * l1
}
