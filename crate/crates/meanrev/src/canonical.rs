//! Dense canonical decompositions ranking portfolios by predictability:
//! the variance-ratio (Box-Tiao style) decomposition on a fitted VAR(1)
//! model, and the Johansen-style cointegration decomposition on
//! differences against lagged levels.

use crate::data::{make_lagged_pair, LaggedPair, TimePanel};
use crate::estimate::{ols_transition, VarModel};
use crate::geneig::{generalized_eig, quad_form, spd_solve, SymmetricPair};
use crate::ou::estimate_ou;
use crate::stats::ar1_slope_p_value;
use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    BoxTiao,
    Johansen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CanonicalFlag {
    /// A predictability value fell outside [0, 1] beyond tolerance
    /// (finite-sample noise on stationary data).
    NuOutOfRange { index: usize, nu: f64 },
}

/// Portfolios ranked by predictability, most predictable first. Column j of
/// `weights` is normalized per the eigen kernel convention (w' B w = 1 for
/// the flavor's denominator matrix B).
#[derive(Debug, Clone)]
pub struct CanonicalBasis<T: Scalar> {
    pub weights: DMatrix<T>,
    /// Descending: predictability nu for the variance-ratio flavor,
    /// squared canonical correlations for the Johansen flavor.
    pub predictability: DVector<T>,
    pub flavor: Flavor,
    /// Column j holds the track P_t = S_t . weights_j.
    pub portfolio_series: DMatrix<T>,
    pub flags: Vec<CanonicalFlag>,
}

impl<T: Scalar> CanonicalBasis<T> {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Least predictable portfolio (strongest mean-reversion proxy).
    pub fn least_predictable(&self) -> (T, DVector<T>) {
        let last = self.dim() - 1;
        (self.predictability[last], self.weights.column(last).into_owned())
    }
}

/// Predictability nu(x) = x' A' Gamma A x / x' Gamma x of a portfolio
/// under the fitted model.
pub fn predictability<T: Scalar>(model: &VarModel<T>, x: &DVector<T>) -> Result<T> {
    if x.len() != model.dim() {
        return Err(Error::Shape(format!(
            "{} weights for a model over {} assets",
            x.len(),
            model.dim()
        )));
    }
    if x.iter().all(|&v| v == T::zero()) {
        return Err(Error::Domain("predictability of the zero portfolio".into()));
    }
    let den = quad_form(&model.gamma, x);
    if den <= T::zero() {
        return Err(Error::Domain("x' Gamma x must be positive".into()));
    }
    let u = &model.a * x;
    Ok(quad_form(&model.gamma, &u) / den)
}

fn nu_range_flags<T: Scalar>(values: &DVector<T>) -> Vec<CanonicalFlag> {
    let tol = sc::<T>(1e-8);
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < -tol || v > T::one() + tol)
        .map(|(i, &v)| CanonicalFlag::NuOutOfRange { index: i, nu: to_f64(v) })
        .collect()
}

/// Variance-ratio decomposition of a lagged pair: eigenvectors of the pencil
/// (A' Gamma A, Gamma) under the OLS model, ranked by predictability.
/// Solved as a generalized eigenproblem rather than forming the explicit
/// inverse-square-root product; the two routes agree (see kernel tests).
pub fn box_tiao<T: Scalar>(pair: &LaggedPair<T>) -> Result<CanonicalBasis<T>> {
    let model = ols_transition(pair)?;
    box_tiao_from_model(&model, pair)
}

/// Same decomposition from an already-fitted model (penalized estimates
/// plug in here).
pub fn box_tiao_from_model<T: Scalar>(
    model: &VarModel<T>,
    pair: &LaggedPair<T>,
) -> Result<CanonicalBasis<T>> {
    if model.dim() != pair.ncols() {
        return Err(Error::Shape("model and pair dimensions differ".into()));
    }
    let pencil = SymmetricPair::new(model.predictability_matrix(), model.gamma.clone())?;
    let eig = generalized_eig(&pencil)?;
    let portfolio_series = pair.current() * &eig.eigenvectors;
    let flags = nu_range_flags(&eig.eigenvalues);
    Ok(CanonicalBasis {
        weights: eig.eigenvectors,
        predictability: eig.eigenvalues,
        flavor: Flavor::BoxTiao,
        portfolio_series,
        flags,
    })
}

/// Johansen-style decomposition: solve the pencil
/// (L' D (D' D)^-1 D' L, L' L) with L the lagged levels and D the first
/// differences. Eigenvalues are squared canonical correlations in [0, 1];
/// leading columns are the candidate cointegrating vectors.
pub fn johansen<T: Scalar>(panel: &TimePanel<T>) -> Result<CanonicalBasis<T>> {
    let pair = make_lagged_pair(panel, true)?;
    let rows = pair.nrows();
    let n = pair.ncols();
    if rows <= n {
        return Err(Error::InsufficientData(format!(
            "need more than {n} usable rows for a {n}-asset Johansen decomposition"
        )));
    }
    let lagged = pair.lagged();
    // Differences are invariant to the common centering; demean them so a
    // deterministic drift does not masquerade as a canonical direction.
    let mut diff = pair.current() - lagged;
    let rows_f = sc::<T>(rows as f64);
    for j in 0..n {
        let mean = diff.column(j).sum() / rows_f;
        for i in 0..rows {
            diff[(i, j)] -= mean;
        }
    }

    let b = lagged.transpose() * lagged;
    let e = diff.transpose() * &diff;
    let c = lagged.transpose() * &diff;
    // A = C E^-1 C'
    let einv_ct = spd_solve(&e, &c.transpose())?;
    let a = &c * einv_ct;

    let pencil = SymmetricPair::new(crate::geneig::symmetrize(&a), crate::geneig::symmetrize(&b))?;
    let eig = generalized_eig(&pencil)?;
    let portfolio_series = panel.values() * &eig.eigenvectors;
    let flags = nu_range_flags(&eig.eigenvalues);
    Ok(CanonicalBasis {
        weights: eig.eigenvectors,
        predictability: eig.eigenvalues,
        flavor: Flavor::Johansen,
        portfolio_series,
        flags,
    })
}

/// Mean-reversion speed of a portfolio track: thin delegation to the
/// Ornstein-Uhlenbeck estimator.
pub fn fit_portfolio_lambda<T: Scalar>(series: &DVector<T>, dt: T) -> Result<T> {
    let params = estimate_ou(series.as_slice(), dt)?;
    Ok(params.lambda)
}

/// Per-portfolio summary row: the canonical table columns
/// (predictability, mean reversion, p-value, volatility).
#[derive(Debug, Clone, Serialize)]
pub struct PortfolioStats {
    pub index: usize,
    pub nu: f64,
    pub lambda: f64,
    pub half_life_years: Option<f64>,
    /// One-sided AR(1) slope t-test against no mean reversion
    /// (an approximation; the flavor of test is not canonical).
    pub p_value: f64,
    /// OU diffusion volatility of the track.
    pub volatility: f64,
}

/// Summarize every portfolio in a basis: OU fit, half-life, p-value.
pub fn basis_summary<T: Scalar>(basis: &CanonicalBasis<T>, dt: T) -> Result<Vec<PortfolioStats>> {
    let mut out = Vec::with_capacity(basis.dim());
    for j in 0..basis.dim() {
        let track = basis.portfolio_series.column(j).into_owned();
        let params = estimate_ou(track.as_slice(), dt)?;
        let p_value = ar1_slope_p_value(track.as_slice())?;
        out.push(PortfolioStats {
            index: j,
            nu: to_f64(basis.predictability[j]),
            lambda: to_f64(params.lambda),
            half_life_years: if params.lambda > T::zero() {
                Some(to_f64(crate::ou::half_life(&params)?))
            } else {
                None
            },
            p_value: to_f64(p_value),
            volatility: to_f64(params.sigma),
        });
    }
    Ok(out)
}
