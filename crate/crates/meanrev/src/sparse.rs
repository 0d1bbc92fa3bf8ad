//! Cardinality-constrained generalized eigenvalue solvers: greedy forward
//! search, semidefinite relaxation with rounding, and an exhaustive oracle
//! for verification — plus the panel-level mean-reversion pipeline.
//!
//! The problem: optimize x'Ax / x'Bx over unit vectors with Card(x) <= k.
//! MINIMIZE sense runs as MAXIMIZE of the reciprocal quotient with (A, B)
//! swapped; A gets a small ridge first when it is not positive definite,
//! which keeps a single solver path for both senses.

use crate::covsel::{graphical_lasso, GlassoOptions};
use crate::data::{make_lagged_pair, TimePanel};
use crate::estimate::{
    lasso_penalty_for_sparsity, lasso_transition, ols_transition, sample_cov_rows, EstimationMethod,
    VarModel,
};
use crate::geneig::{generalized_eig, rayleigh, spd_inverse, SymmetricPair};
use crate::ou::estimate_ou;
use crate::sdp::{certified_upper_bound, leading_eigenvector, solve_relaxation, SdpOptions};
use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

/// Candidate values within this absolute gap count as ties; the lowest
/// index wins, which keeps greedy runs deterministic across platforms.
const TIE_TOL: f64 = 1e-12;
/// Guard on the number of supports the exhaustive oracle may enumerate.
const ORACLE_GUARD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    /// Maximize the Rayleigh quotient (predictability / momentum).
    Maximize,
    /// Minimize it (mean reversion).
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Greedy,
    Sdp,
    Oracle,
}

/// A cardinality-constrained pencil problem.
#[derive(Debug, Clone)]
pub struct SparseProblem<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    k: usize,
    sense: Sense,
}

impl<T: Scalar> SparseProblem<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, k: usize, sense: Sense) -> Result<Self> {
        let pair = SymmetricPair::new(a, b)?; // validates shape and symmetry
        let n = pair.dim();
        if k == 0 || k > n {
            return Err(Error::Domain(format!("cardinality k={k} out of range 1..{n}")));
        }
        Ok(SparseProblem { a: pair.a().clone(), b: pair.b().clone(), k, sense })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn original_pair(&self) -> SymmetricPair<T> {
        SymmetricPair::new(self.a.clone(), self.b.clone()).expect("already validated")
    }
}

/// A sparse solution: unit-norm weights with hard zeros off the support.
#[derive(Debug, Clone)]
pub struct SparsePortfolio<T: Scalar> {
    pub weights: DVector<T>,
    /// Sorted support indices.
    pub support: Vec<usize>,
    /// Rayleigh quotient at the weights, in the problem's original sense.
    pub value: T,
    pub method: Method,
    /// For MAXIMIZE: certified upper bound on the optimal value.
    /// For MINIMIZE: certified lower bound (no sparse portfolio can do better).
    pub bound: Option<T>,
    /// Whether the SDP solve met its residual tolerance.
    pub certified: Option<bool>,
    /// Predictability of the portfolio (set by the panel pipeline).
    pub nu: Option<T>,
    /// Fitted OU mean-reversion speed of the track (set by the pipeline).
    pub lambda_ou: Option<T>,
    /// Ridge added to the numerator when routing a MINIMIZE problem with a
    /// singular numerator through the reciprocal form.
    pub numerator_ridge: Option<T>,
}

/// Execution-space problem: always a MAXIMIZE of xs'As x / xs'Bs x.
struct ExecProblem<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    ridge_added: Option<T>,
}

impl<T: Scalar> ExecProblem<T> {
    fn from(problem: &SparseProblem<T>) -> Result<Self> {
        match problem.sense {
            Sense::Maximize => Ok(ExecProblem {
                a: problem.a.clone(),
                b: problem.b.clone(),
                ridge_added: None,
            }),
            Sense::Minimize => {
                // maximize x'Bx / x'Ax; the denominator must be PD
                let n = problem.dim();
                let mut denom = problem.a.clone();
                let mut ridge_added = None;
                if Cholesky::new(denom.clone()).is_none() {
                    let base = denom.trace().abs().max(sc(f64::MIN_POSITIVE)) / sc(n as f64);
                    let mut ridge = sc::<T>(1e-10) * base;
                    loop {
                        let mut shifted = problem.a.clone();
                        for i in 0..n {
                            shifted[(i, i)] += ridge;
                        }
                        if Cholesky::new(shifted.clone()).is_some() {
                            denom = shifted;
                            ridge_added = Some(ridge);
                            break;
                        }
                        ridge *= sc(10.0);
                        if ridge > sc::<T>(1e-4) * base {
                            return Err(Error::Conditioning {
                                message: "numerator matrix cannot be made positive definite"
                                    .into(),
                                min_eigenvalue: f64::NAN,
                            });
                        }
                    }
                }
                Ok(ExecProblem { a: problem.b.clone(), b: denom, ridge_added })
            }
        }
    }

    fn pair(&self) -> SymmetricPair<T> {
        SymmetricPair::new(self.a.clone(), self.b.clone()).expect("validated construction")
    }
}

/// Lexicographic size-k subsets of 0..n. Enumerating size exactly k is
/// enough for the oracle: feasible sets nest, so smaller supports never
/// beat the best size-k support.
pub fn combinations(n: usize, k: usize) -> CombinationIter {
    assert!(k >= 1 && k <= n);
    CombinationIter { n, k, state: None }
}

pub struct CombinationIter {
    n: usize,
    k: usize,
    state: Option<Vec<usize>>,
}

impl Iterator for CombinationIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        match &mut self.state {
            None => {
                let first: Vec<usize> = (0..self.k).collect();
                self.state = Some(first.clone());
                Some(first)
            }
            Some(current) => {
                // advance the rightmost index that has room
                let k = self.k;
                let n = self.n;
                let mut i = k;
                loop {
                    if i == 0 {
                        return None;
                    }
                    i -= 1;
                    if current[i] < n - (k - i) {
                        current[i] += 1;
                        for j in i + 1..k {
                            current[j] = current[j - 1] + 1;
                        }
                        return Some(current.clone());
                    }
                }
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0f64;
    for i in 0..k {
        out *= (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Top eigenvalue and eigenvector of the exec pencil restricted to a support.
fn restricted_top<T: Scalar>(pair: &SymmetricPair<T>, support: &[usize]) -> Result<(T, DVector<T>)> {
    let sub = pair.restrict(support)?;
    let eig = generalized_eig(&sub)?;
    Ok(eig.top())
}

/// Embed a restricted vector into n dimensions, unit-normalize, fix sign.
fn embed<T: Scalar>(n: usize, support: &[usize], sub: &DVector<T>) -> DVector<T> {
    let mut w = DVector::<T>::zeros(n);
    for (r, &i) in support.iter().enumerate() {
        w[i] = sub[r];
    }
    let norm = w.norm();
    if norm > T::zero() {
        w /= norm;
    }
    crate::geneig::fix_sign(&mut w);
    w
}

fn portfolio_from_support<T: Scalar>(
    problem: &SparseProblem<T>,
    exec: &ExecProblem<T>,
    exec_pair: &SymmetricPair<T>,
    support: &[usize],
    method: Method,
) -> Result<SparsePortfolio<T>> {
    let (_, sub) = restricted_top(exec_pair, support)?;
    let weights = embed(problem.dim(), support, &sub);
    let value = rayleigh(&problem.original_pair(), &weights)?;
    Ok(SparsePortfolio {
        weights,
        support: support.to_vec(),
        value,
        method,
        bound: None,
        certified: None,
        nu: None,
        lambda_ou: None,
        numerator_ridge: exec.ridge_added,
    })
}

/// Greedy forward search: start from the best diagonal ratio, then at each
/// step solve the (n - k) restricted problems that add one index and keep
/// the best. Returns the full ladder for k = 1..problem.k with nested
/// supports. Each step costs O(k^2 (n-k)) so a full sweep is O(n^4).
pub fn greedy_search<T: Scalar>(problem: &SparseProblem<T>) -> Result<Vec<SparsePortfolio<T>>> {
    let exec = ExecProblem::from(problem)?;
    let exec_pair = exec.pair();
    let n = problem.dim();
    let tie = sc::<T>(TIE_TOL);

    // k = 1: best diagonal ratio, lowest index on ties
    let mut best_i = 0;
    let mut best_ratio = T::min_value().unwrap();
    for i in 0..n {
        let bii = exec.b[(i, i)];
        if bii <= T::zero() {
            continue;
        }
        let ratio = exec.a[(i, i)] / bii;
        if ratio > best_ratio + tie {
            best_ratio = ratio;
            best_i = i;
        }
    }
    let mut support = vec![best_i];
    let mut ladder = Vec::with_capacity(problem.k);
    let mut prev = portfolio_from_support(problem, &exec, &exec_pair, &support, Method::Greedy)?;
    ladder.push(prev.clone());

    while support.len() < problem.k {
        let mut best_val = T::min_value().unwrap();
        let mut best_candidate: Option<(usize, Vec<usize>)> = None;
        for i in 0..n {
            if support.contains(&i) {
                continue;
            }
            let mut cand = support.clone();
            cand.push(i);
            cand.sort_unstable();
            let (val, _) = restricted_top(&exec_pair, &cand)?;
            if val > best_val + tie {
                best_val = val;
                best_candidate = Some((i, cand));
            }
        }
        let (_, cand) = best_candidate.expect("at least one candidate remains");
        support = cand;
        let mut portfolio = portfolio_from_support(problem, &exec, &exec_pair, &support, Method::Greedy)?;
        // the previous weights stay feasible on the grown support; keep them
        // if round-off ever nudges the fresh solve below (exact monotonicity)
        let improved = match problem.sense {
            Sense::Maximize => portfolio.value >= prev.value,
            Sense::Minimize => portfolio.value <= prev.value,
        };
        if !improved {
            portfolio.weights = prev.weights.clone();
            portfolio.value = prev.value;
        }
        prev = portfolio.clone();
        ladder.push(portfolio);
    }
    Ok(ladder)
}

/// Optional backward refinement: from the final support, try swapping each
/// member for each non-member and accept the best improving swap, repeated
/// to a fixpoint (capped at 10 n swaps). Supports are no longer nested.
pub fn refine_swaps<T: Scalar>(
    problem: &SparseProblem<T>,
    portfolio: &SparsePortfolio<T>,
) -> Result<SparsePortfolio<T>> {
    let exec = ExecProblem::from(problem)?;
    let exec_pair = exec.pair();
    let n = problem.dim();
    let tie = sc::<T>(TIE_TOL);
    let mut support = portfolio.support.clone();
    let (mut current_val, _) = restricted_top(&exec_pair, &support)?;

    for _ in 0..10 * n {
        let mut best_val = current_val;
        let mut best_swap: Option<Vec<usize>> = None;
        for out_pos in 0..support.len() {
            for cand_in in 0..n {
                if support.contains(&cand_in) {
                    continue;
                }
                let mut cand = support.clone();
                cand[out_pos] = cand_in;
                cand.sort_unstable();
                let (val, _) = restricted_top(&exec_pair, &cand)?;
                if val > best_val + tie {
                    best_val = val;
                    best_swap = Some(cand);
                }
            }
        }
        match best_swap {
            Some(cand) => {
                support = cand;
                current_val = best_val;
            }
            None => break,
        }
    }
    let mut refined = portfolio_from_support(problem, &exec, &exec_pair, &support, portfolio.method)?;
    refined.bound = portfolio.bound;
    refined.certified = portfolio.certified;
    Ok(refined)
}

/// True optimum by enumerating every size-k support; guarded at C(n,k) <= 1e6.
pub fn exhaustive_oracle<T: Scalar>(problem: &SparseProblem<T>) -> Result<SparsePortfolio<T>> {
    let n = problem.dim();
    let k = problem.k;
    let count = binomial(n, k);
    if count > ORACLE_GUARD {
        return Err(Error::CombinatorialGuard { n, k, count, limit: ORACLE_GUARD });
    }
    let exec = ExecProblem::from(problem)?;
    let exec_pair = exec.pair();
    let tie = sc::<T>(TIE_TOL);

    let mut best_val = T::min_value().unwrap();
    let mut best_support: Option<Vec<usize>> = None;
    for support in combinations(n, k) {
        let (val, _) = restricted_top(&exec_pair, &support)?;
        if val > best_val + tie {
            best_val = val;
            best_support = Some(support);
        }
    }
    let support = best_support.expect("combinations are non-empty");
    portfolio_from_support(problem, &exec, &exec_pair, &support, Method::Oracle)
}

/// Diagnostics from the SDP route.
#[derive(Debug, Clone, Serialize)]
pub struct SdpReport {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// lambda_2 / lambda_1 of the solution matrix: near zero means tight.
    pub rank_one_gap: f64,
    /// Certified bound in execution (MAXIMIZE) space.
    pub bound_exec: f64,
    pub bound_theta: f64,
}

/// Semidefinite relaxation with rank-one rounding: solve the relaxation,
/// take the leading eigenvector of Y, keep its k largest-magnitude entries,
/// re-optimize on that support, and attach a certified bound.
pub fn sdp_relaxation<T: Scalar>(
    problem: &SparseProblem<T>,
    options: &SdpOptions<T>,
) -> Result<(SparsePortfolio<T>, SdpReport)> {
    let exec = ExecProblem::from(problem)?;
    let exec_pair = exec.pair();
    let n = problem.dim();
    let k = problem.k;

    let outcome = solve_relaxation(&exec.a, &exec.b, k, options)?;
    let (_, lead) = leading_eigenvector(&outcome.y);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        lead[j].abs().partial_cmp(&lead[i].abs()).unwrap().then(i.cmp(&j))
    });
    let mut support: Vec<usize> = order.into_iter().take(k).collect();
    support.sort_unstable();

    let mut portfolio = portfolio_from_support(problem, &exec, &exec_pair, &support, Method::Sdp)?;
    let bound_exec = certified_upper_bound(&exec.a, &exec.b, k, Some(&portfolio.weights))?;

    portfolio.certified = Some(outcome.converged);
    portfolio.bound = Some(match problem.sense {
        Sense::Maximize => bound_exec.value,
        // bound on max x'Bx/x'Ax maps to a lower bound on min x'Ax/x'Bx
        Sense::Minimize => {
            if bound_exec.value > T::zero() {
                T::one() / bound_exec.value
            } else {
                T::zero()
            }
        }
    });

    let report = SdpReport {
        iterations: outcome.iterations,
        primal_residual: to_f64(outcome.primal_residual),
        dual_residual: to_f64(outcome.dual_residual),
        converged: outcome.converged,
        rank_one_gap: to_f64(outcome.rank_one_gap),
        bound_exec: to_f64(bound_exec.value),
        bound_theta: to_f64(bound_exec.theta),
    };
    Ok((portfolio, report))
}

/// How the pipeline estimates the transition matrix A.
#[derive(Debug, Clone)]
pub enum TransitionKind<T: Scalar> {
    Ols,
    Lasso { gamma: T },
    /// Pick the penalty that zeroes out this fraction of coefficients.
    LassoZeroFraction { target: f64 },
    /// Endogenous model: A'A = I - sigma Gamma^-1.
    Endogenous { sigma: T },
}

/// How the pipeline estimates the asset covariance Gamma.
#[derive(Debug, Clone)]
pub enum CovarianceKind<T: Scalar> {
    Sample,
    /// Graphical-lasso precision at this penalty, inverted.
    Covsel { rho: T },
}

#[derive(Debug, Clone)]
pub struct EstimationOptions<T: Scalar> {
    pub transition: TransitionKind<T>,
    pub covariance: CovarianceKind<T>,
    pub center: bool,
}

impl<T: Scalar> Default for EstimationOptions<T> {
    fn default() -> Self {
        EstimationOptions {
            transition: TransitionKind::Ols,
            covariance: CovarianceKind::Sample,
            center: true,
        }
    }
}

/// Estimate a VAR model from a panel per the options; the covariance choice
/// overrides the model's Gamma so penalized estimates flow into the pencil.
pub fn estimate_model<T: Scalar>(
    panel: &TimePanel<T>,
    options: &EstimationOptions<T>,
) -> Result<VarModel<T>> {
    let pair = make_lagged_pair(panel, options.center)?;
    let gamma = match &options.covariance {
        CovarianceKind::Sample => sample_cov_rows(pair.current())?,
        CovarianceKind::Covsel { rho } => {
            let sigma = sample_cov_rows(pair.current())?;
            let precision = graphical_lasso(&sigma, *rho, &GlassoOptions::default())?;
            spd_inverse(&precision.x)?
        }
    };
    let mut model = match &options.transition {
        TransitionKind::Ols => ols_transition(&pair)?,
        TransitionKind::Lasso { gamma } => lasso_transition(&pair, *gamma)?,
        TransitionKind::LassoZeroFraction { target } => {
            let pen = lasso_penalty_for_sparsity(&pair, *target)?;
            lasso_transition(&pair, pen)?
        }
        TransitionKind::Endogenous { sigma } => {
            let factor = crate::estimate::endogenous_transition(&gamma, *sigma)?;
            let n = gamma.nrows();
            VarModel {
                a: factor.a.clone(),
                gamma: gamma.clone(),
                sigma_noise: DMatrix::identity(n, n) * factor.sigma_used,
                method: EstimationMethod::Endogenous,
                penalty: T::zero(),
                flags: factor.flags,
            }
        }
    };
    model.gamma = gamma;
    Ok(model)
}

/// Full pipeline: estimate, form the pencil (A' Gamma A, Gamma), run the
/// MINIMIZE-sense sparse solver, and attach predictability and the fitted
/// OU mean reversion of the resulting track.
pub fn sparse_mean_reverting<T: Scalar>(
    panel: &TimePanel<T>,
    k: usize,
    method: Method,
    options: &EstimationOptions<T>,
) -> Result<SparsePortfolio<T>> {
    let model = estimate_model(panel, options)?;
    let problem =
        SparseProblem::new(model.predictability_matrix(), model.gamma.clone(), k, Sense::Minimize)?;
    let mut portfolio = match method {
        Method::Greedy => greedy_search(&problem)?.pop().expect("ladder is non-empty"),
        Method::Oracle => exhaustive_oracle(&problem)?,
        Method::Sdp => sdp_relaxation(&problem, &SdpOptions::default())?.0,
    };
    attach_track_stats(panel, &mut portfolio)?;
    Ok(portfolio)
}

/// Ladder variant for the per-k tables: one entry per k = 1..k_max.
pub fn sparse_mean_reverting_ladder<T: Scalar>(
    panel: &TimePanel<T>,
    k_max: usize,
    method: Method,
    options: &EstimationOptions<T>,
) -> Result<Vec<SparsePortfolio<T>>> {
    let model = estimate_model(panel, options)?;
    let pencil_a = model.predictability_matrix();
    let mut out = Vec::with_capacity(k_max);
    match method {
        Method::Greedy => {
            let problem = SparseProblem::new(pencil_a, model.gamma.clone(), k_max, Sense::Minimize)?;
            out = greedy_search(&problem)?;
        }
        Method::Oracle | Method::Sdp => {
            for k in 1..=k_max {
                let problem =
                    SparseProblem::new(pencil_a.clone(), model.gamma.clone(), k, Sense::Minimize)?;
                let portfolio = match method {
                    Method::Oracle => exhaustive_oracle(&problem)?,
                    _ => sdp_relaxation(&problem, &SdpOptions::default())?.0,
                };
                out.push(portfolio);
            }
        }
    }
    for portfolio in &mut out {
        attach_track_stats(panel, portfolio)?;
    }
    Ok(out)
}

fn attach_track_stats<T: Scalar>(panel: &TimePanel<T>, portfolio: &mut SparsePortfolio<T>) -> Result<()> {
    portfolio.nu = Some(portfolio.value);
    let track = panel.portfolio_track(&portfolio.weights)?;
    match estimate_ou(track.as_slice(), panel.dt()) {
        Ok(params) => portfolio.lambda_ou = Some(params.lambda),
        Err(Error::Domain(_)) | Err(Error::InsufficientData(_)) => portfolio.lambda_ou = None,
        Err(e) => return Err(e),
    }
    Ok(())
}

/// Momentum variant: MAXIMIZE-sense solve over the same pencil.
pub fn sparse_momentum<T: Scalar>(
    panel: &TimePanel<T>,
    k: usize,
    method: Method,
    options: &EstimationOptions<T>,
) -> Result<SparsePortfolio<T>> {
    let model = estimate_model(panel, options)?;
    let problem =
        SparseProblem::new(model.predictability_matrix(), model.gamma.clone(), k, Sense::Maximize)?;
    let mut portfolio = match method {
        Method::Greedy => greedy_search(&problem)?.pop().expect("ladder is non-empty"),
        Method::Oracle => exhaustive_oracle(&problem)?,
        Method::Sdp => sdp_relaxation(&problem, &SdpOptions::default())?.0,
    };
    attach_track_stats(panel, &mut portfolio)?;
    Ok(portfolio)
}
