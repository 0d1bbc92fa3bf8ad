//! First-order semidefinite solver for the sparse generalized eigenvalue
//! relaxation, plus independently certified dual upper bounds.
//!
//! The relaxation (for a symmetric pencil (A, B), B positive definite, and
//! cardinality budget k) is
//!
//!   maximize Tr(AY)  s.t.  1'|Y|1 - k z <= 0,  Tr(Y) - z = 0,
//!                          Tr(BY) = 1,  Y >= 0 (PSD),
//!
//! with z eliminated as z = Tr(Y). It is solved by three-block consensus
//! ADMM splitting over (i) the PSD cone, (ii) the l1/trace cone
//! {Y : sum|Y_ij| <= k Tr(Y)}, and (iii) the linear objective with the
//! Tr(BY) = 1 affine constraint.
//!
//! Upper bounds are certified separately through weak duality: a triple
//! (mu, theta, G) with |G_ij| <= theta and A - mu B + theta k I - G
//! negative semidefinite proves mu bounds the relaxation. Certificates are
//! searched by bisection over mu with entrywise-clamped G, and by a rank-one
//! KKT construction around the rounded solution; every candidate is verified
//! before use, so returned bounds are valid regardless of solver accuracy.

use crate::geneig::{generalized_eig, symmetrize, SymmetricPair};
use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct SdpOptions<T: Scalar> {
    /// Normalized primal/dual residual target.
    pub tol: T,
    pub max_iterations: usize,
    pub rho_init: T,
}

impl<T: Scalar> Default for SdpOptions<T> {
    fn default() -> Self {
        SdpOptions { tol: sc(1e-6), max_iterations: 50_000, rho_init: T::one() }
    }
}

#[derive(Debug, Clone)]
pub struct SdpOutcome<T: Scalar> {
    /// PSD, Tr(B'Y) = 1 solution in the normalized problem; rounding only
    /// uses its eigenvectors so the scaling is immaterial.
    pub y: DMatrix<T>,
    /// Objective Tr(AY)/Tr(BY) in the original scale.
    pub objective: T,
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub converged: bool,
    /// Ratio of the second to the leading eigenvalue of Y; near zero means
    /// the relaxation is numerically rank one (tight).
    pub rank_one_gap: T,
}

fn psd_project<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let se = SymmetricEigen::new(symmetrize(m));
    let clamped = se.eigenvalues.map(|v| v.max(T::zero()));
    symmetrize(&(&se.eigenvectors * DMatrix::from_diagonal(&clamped) * se.eigenvectors.transpose()))
}

fn cone_violation<T: Scalar>(m: &DMatrix<T>, k: T) -> T {
    let l1 = m.iter().fold(T::zero(), |acc, &v| acc + v.abs());
    l1 - k * m.trace()
}

/// Prox of theta * (|y| - k y) on diagonal entries, soft threshold elsewhere.
fn shrink_to_cone<T: Scalar>(v: &DMatrix<T>, theta: T, k: T) -> DMatrix<T> {
    let n = v.nrows();
    let mut out = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let val = v[(i, j)];
            out[(i, j)] = if i == j {
                if val > theta * (T::one() - k) {
                    val + theta * (k - T::one())
                } else if val < -theta * (T::one() + k) {
                    val + theta * (T::one() + k)
                } else {
                    T::zero()
                }
            } else {
                crate::estimate::soft_threshold(val, theta)
            };
        }
    }
    out
}

/// Euclidean projection onto {Y symmetric : sum |Y_ij| <= k Tr(Y)} by
/// bisection on the constraint multiplier.
fn l1_cone_project<T: Scalar>(m: &DMatrix<T>, k: T) -> DMatrix<T> {
    let v = symmetrize(m);
    if cone_violation(&v, k) <= T::zero() {
        return v;
    }
    let peak = v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    let mut hi = peak.max(sc(1e-12));
    let mut guard = 0;
    while cone_violation(&shrink_to_cone(&v, hi, k), k) > T::zero() && guard < 80 {
        hi *= sc(2.0);
        guard += 1;
    }
    let mut lo = T::zero();
    let mut feasible = shrink_to_cone(&v, hi, k);
    for _ in 0..80 {
        let mid = (lo + hi) * sc(0.5);
        let cand = shrink_to_cone(&v, mid, k);
        if cone_violation(&cand, k) <= T::zero() {
            hi = mid;
            feasible = cand;
        } else {
            lo = mid;
        }
    }
    feasible
}

/// Three-block consensus ADMM on the normalized problem.
pub fn solve_relaxation<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: usize,
    options: &SdpOptions<T>,
) -> Result<SdpOutcome<T>> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::Shape("pencil matrices must be square and equal-sized".into()));
    }
    let n = a.nrows();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("cardinality k={k} out of range 1..{n}")));
    }
    let kf = sc::<T>(k as f64);

    let fa = a.norm().max(sc(f64::MIN_POSITIVE));
    let fb = b.norm().max(sc(f64::MIN_POSITIVE));
    let an = a / fa;
    let bn = b / fb;
    let tr_ab = (&an * &bn).trace();
    // after normalization Tr(B'B') = 1 exactly
    let trace_bn = bn.trace();
    if trace_bn <= T::zero() {
        return Err(Error::Conditioning {
            message: "B must have positive trace".into(),
            min_eigenvalue: to_f64(trace_bn),
        });
    }

    let mut w = DMatrix::<T>::identity(n, n) / trace_bn;
    let mut u = [DMatrix::<T>::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
    let mut rho = options.rho_init;
    let third = T::one() / sc(3.0);
    let mut primal = T::max_value().unwrap();
    let mut dual = T::max_value().unwrap();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=options.max_iterations {
        iterations = iter;
        let y1 = psd_project(&(&w - &u[0]));
        let y2 = l1_cone_project(&(&w - &u[1]), kf);
        let v3 = &w - &u[2];
        let mu = rho * ((&bn * &v3).trace() - T::one()) + tr_ab;
        let y3 = &v3 + (&an - &bn * mu) / rho;

        let w_new = (&y1 + &y2 + &y3 + &u[0] + &u[1] + &u[2]) * third;
        u[0] += &y1 - &w_new;
        u[1] += &y2 - &w_new;
        u[2] += &y3 - &w_new;

        let pri = ((&y1 - &w_new).norm_squared()
            + (&y2 - &w_new).norm_squared()
            + (&y3 - &w_new).norm_squared())
        .sqrt();
        let scale = w_new.norm().max(T::one());
        primal = pri / (sc::<T>(3.0).sqrt() * scale);
        dual = rho * (&w_new - &w).norm() / scale;
        w = w_new;

        if primal <= options.tol && dual <= options.tol {
            converged = true;
            break;
        }
        if iter % 100 == 0 && iter <= 20_000 {
            if primal > sc::<T>(10.0) * dual && rho < sc(1e3) {
                rho *= sc(2.0);
                for ui in u.iter_mut() {
                    *ui /= sc::<T>(2.0);
                }
            } else if dual > sc::<T>(10.0) * primal && rho > sc(1e-3) {
                rho /= sc(2.0);
                for ui in u.iter_mut() {
                    *ui *= sc::<T>(2.0);
                }
            }
        }
    }

    // Final polish: a PSD, Tr(B'Y)=1 point for rounding and reporting.
    let mut y = psd_project(&w);
    let tb = (&bn * &y).trace();
    if tb > T::zero() {
        y /= tb;
    }
    let se = SymmetricEigen::new(y.clone());
    let mut eigs: Vec<T> = se.eigenvalues.iter().cloned().collect();
    eigs.sort_by(|x, z| z.partial_cmp(x).unwrap());
    let rank_one_gap = if eigs[0] > T::zero() && n > 1 {
        (eigs[1].max(T::zero())) / eigs[0]
    } else {
        T::zero()
    };

    let objective = (&an * &y).trace() * fa / fb;
    Ok(SdpOutcome {
        y,
        objective,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        rank_one_gap,
    })
}

/// Leading eigenpair of a symmetric matrix (largest eigenvalue).
pub fn leading_eigenvector<T: Scalar>(m: &DMatrix<T>) -> (T, DVector<T>) {
    let se = SymmetricEigen::new(symmetrize(m));
    let mut best = 0;
    for i in 1..se.eigenvalues.len() {
        if se.eigenvalues[i] > se.eigenvalues[best] {
            best = i;
        }
    }
    let mut v = se.eigenvectors.column(best).into_owned();
    crate::geneig::fix_sign(&mut v);
    (se.eigenvalues[best], v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    Dense,
    ClampBisection,
    RankOne,
}

/// A certified upper bound on the relaxation optimum (hence on the sparse
/// optimum) in MAXIMIZE sense.
#[derive(Debug, Clone, Copy)]
pub struct UpperBound<T: Scalar> {
    pub value: T,
    pub theta: T,
    pub source: BoundSource,
}

fn lambda_max<T: Scalar>(m: &DMatrix<T>) -> T {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(T::min_value().unwrap(), |acc, &v| acc.max(v))
}

fn lambda_min<T: Scalar>(m: &DMatrix<T>) -> T {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(T::max_value().unwrap(), |acc, &v| acc.min(v))
}

/// lambda_max of the clamp-certificate residual soft(A - mu B + theta k I, theta).
fn clamp_residual_lambda_max<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    kf: T,
    mu: T,
    theta: T,
) -> T {
    let n = a.nrows();
    let mut m = a - b * mu;
    for i in 0..n {
        m[(i, i)] += theta * kf;
    }
    for v in m.iter_mut() {
        *v = crate::estimate::soft_threshold(*v, theta);
    }
    lambda_max(&m)
}

fn theta_grid<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, mu: T) -> Vec<T> {
    let amax = a.amax();
    let bmax = b.amax();
    let scale = to_f64(amax + mu.abs() * bmax).max(1e-12);
    let mut grid = vec![T::zero()];
    let lo = scale * 1e-8;
    let hi = scale * 20.0;
    let points = 48;
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        grid.push(sc(lo * (hi / lo).powf(t)));
    }
    grid
}

/// Feasibility of mu under the clamp certificate: does some theta give
/// a negative-semidefinite residual?
fn clamp_feasible<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, kf: T, mu: T, slack: T) -> Option<T> {
    let mut best_theta = None;
    let mut best_val = T::max_value().unwrap();
    for &theta in &theta_grid(a, b, mu) {
        let v = clamp_residual_lambda_max(a, b, kf, mu, theta);
        if v < best_val {
            best_val = v;
            best_theta = Some(theta);
        }
    }
    if best_val <= slack {
        best_theta
    } else {
        None
    }
}

/// Certified bound by bisection on mu with the clamped-G certificate.
/// Tight at k = n (theta = 0 gives the dense bound) and at k = 1.
fn clamp_bisection_bound<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: usize,
    dense: T,
    value_hint: Option<T>,
) -> Option<UpperBound<T>> {
    let kf = sc::<T>(k as f64);
    let scale = dense.abs().max(T::one());
    let slack = sc::<T>(1e-11) * scale;

    let mut hi = dense;
    let mut tries = 0;
    let mut hi_theta = loop {
        if let Some(theta) = clamp_feasible(a, b, kf, hi, slack) {
            break theta;
        }
        hi += slack.max(hi.abs() * sc(1e-12)) * sc(4.0);
        tries += 1;
        if tries > 50 {
            return None;
        }
    };
    let mut lo = value_hint.map(|v| v - scale * sc(1e-9)).unwrap_or_else(T::zero).min(hi);
    for _ in 0..60 {
        let mid = (lo + hi) * sc(0.5);
        match clamp_feasible(a, b, kf, mid, slack) {
            Some(theta) => {
                hi = mid;
                hi_theta = theta;
            }
            None => lo = mid,
        }
    }
    Some(UpperBound { value: hi, theta: hi_theta, source: BoundSource::ClampBisection })
}

/// Certified bound from the rank-one KKT system around a candidate solution
/// x (unit norm, supported on few coordinates). Solves the on-support
/// stationarity for (mu, theta), builds an explicit subgradient matrix G,
/// and repairs any PSD deficiency by pushing mu up along B. Exact when the
/// relaxation is tight at x.
fn rank_one_bound<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: usize,
    x: &DVector<T>,
    lambda_min_b: T,
) -> Option<UpperBound<T>> {
    let n = a.nrows();
    let kf = sc::<T>(k as f64);
    let support: Vec<usize> = (0..n).filter(|&i| x[i] != T::zero()).collect();
    if support.is_empty() || lambda_min_b <= T::zero() {
        return None;
    }
    let p = b * x;
    let q = a * x;
    let l1 = x.iter().fold(T::zero(), |acc, &v| acc + v.abs());

    // least squares for mu p_i + theta c_i = q_i over the support
    let mut spp = T::zero();
    let mut spc = T::zero();
    let mut scc = T::zero();
    let mut spq = T::zero();
    let mut scq = T::zero();
    for &i in &support {
        let c = x[i].signum() * l1 - kf * x[i];
        spp += p[i] * p[i];
        spc += p[i] * c;
        scc += c * c;
        spq += p[i] * q[i];
        scq += c * q[i];
    }
    let det = spp * scc - spc * spc;
    let (mut mu, mut theta);
    if det.abs() > sc(1e-30) {
        mu = (scc * spq - spc * scq) / det;
        theta = (spp * scq - spc * spq) / det;
    } else if spp > T::zero() {
        mu = spq / spp;
        theta = T::zero();
    } else {
        return None;
    }
    if theta < T::zero() {
        theta = T::zero();
        if spp > T::zero() {
            mu = spq / spp;
        }
    }
    // off-support rows may require a larger theta to stay within the box
    if support.len() < n {
        for i in 0..n {
            if x[i] == T::zero() {
                let needed = (q[i] - mu * p[i]).abs() / l1;
                theta = theta.max(needed);
            }
        }
    }

    // explicit symmetric subgradient matrix G with |G_ij| <= theta
    let mut g = DMatrix::<T>::zeros(n, n);
    for &i in &support {
        for &j in &support {
            g[(i, j)] = theta * x[i].signum() * x[j].signum();
        }
    }
    if theta > T::zero() {
        for i in 0..n {
            if x[i] == T::zero() {
                let target = q[i] - mu * p[i];
                let t = target.max(-theta * l1).min(theta * l1);
                for &j in &support {
                    let val = t * x[j].signum() / l1;
                    g[(i, j)] = val;
                    g[(j, i)] = val;
                }
            }
        }
    }

    // S = mu B - A - theta k I + G must be PSD; repair along B if not
    let mut s = b * mu - a + &g;
    for i in 0..n {
        s[(i, i)] -= theta * kf;
    }
    let deficiency = lambda_min(&s);
    let mu_cert = if deficiency < T::zero() { mu - deficiency / lambda_min_b } else { mu };
    // final verification with the certified mu
    let s_final = &s + b * (mu_cert - mu);
    let check = lambda_min(&s_final);
    let tol = sc::<T>(-1e-9) * (T::one() + mu_cert.abs());
    if check < tol {
        return None;
    }
    Some(UpperBound { value: mu_cert, theta, source: BoundSource::RankOne })
}

/// Smallest verified upper bound on max_x x'Ax/x'Bx s.t. Card(x) <= k.
/// Every candidate is independently certified, so the minimum is valid even
/// when the ADMM iterate is inaccurate.
pub fn certified_upper_bound<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: usize,
    rounded: Option<&DVector<T>>,
) -> Result<UpperBound<T>> {
    let pair = SymmetricPair::new(a.clone(), b.clone())?;
    let dense = generalized_eig(&pair)?.eigenvalues[0];
    let mut best = UpperBound { value: dense, theta: T::zero(), source: BoundSource::Dense };

    let value_hint = match rounded {
        Some(x) => crate::geneig::rayleigh(&pair, x).ok(),
        None => None,
    };
    if let Some(cand) = clamp_bisection_bound(a, b, k, dense, value_hint) {
        if cand.value < best.value {
            best = cand;
        }
    }
    if let Some(x) = rounded {
        let lam_min_b = lambda_min(b);
        if let Some(cand) = rank_one_bound(a, b, k, x, lam_min_b) {
            if cand.value < best.value {
                best = cand;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_pencil, SeededRng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn psd_projection_clamps_negative_directions() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let p = psd_project(&m);
        assert_abs_diff_eq!(p[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cone_projection_is_feasible_and_idempotent_inside() {
        let mut rng = SeededRng::new(61);
        for k in [1usize, 2, 4] {
            let kf = k as f64;
            let v = rng.normal_matrix::<f64>(4, 4);
            let v = symmetrize(&v);
            let proj = l1_cone_project(&v, kf);
            assert!(cone_violation(&proj, kf) <= 1e-12, "projection must land in the cone");
            if cone_violation(&v, kf) <= 0.0 {
                assert!((proj - &v).amax() < 1e-14);
            } else {
                // re-projecting is a no-op
                let again = l1_cone_project(&proj, kf);
                assert!((again - &proj).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_identity_case_is_tight() {
        // A = diag(1,4,9), B = I, k = 1: optimum 9 with support {3rd asset}
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0, 9.0]));
        let b = DMatrix::<f64>::identity(3, 3);
        let out = solve_relaxation(&a, &b, 1, &SdpOptions::default()).unwrap();
        assert!(out.converged, "ADMM should converge on the diagonal case");
        let (_, v) = leading_eigenvector(&out.y);
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&i, &j| v[j].abs().partial_cmp(&v[i].abs()).unwrap());
        assert_eq!(idx[0], 2, "leading eigenvector mass should sit on the third asset");

        let e3 = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        let bound = certified_upper_bound(&a, &b, 1, Some(&e3)).unwrap();
        assert!(bound.value >= 9.0 - 1e-8);
        assert!(bound.value <= 9.0 + 1e-6, "k=1 diagonal bound should be tight, got {}", bound.value);
    }

    #[test]
    fn full_cardinality_bound_equals_dense_eigenvalue() {
        let mut rng = SeededRng::new(62);
        for _ in 0..5 {
            let (a, b) = random_pencil::<f64>(6, &mut rng);
            let pair = SymmetricPair::new(a.clone(), b.clone()).unwrap();
            let dense = generalized_eig(&pair).unwrap().eigenvalues[0];
            let bound = certified_upper_bound(&a, &b, 6, None).unwrap();
            assert!(bound.value >= dense - 1e-9);
            assert!(bound.value <= dense + 1e-5, "k=n bound {} vs dense {dense}", bound.value);
        }
    }

    #[test]
    fn admm_objective_approaches_dense_at_full_cardinality() {
        let mut rng = SeededRng::new(63);
        let (a, b) = random_pencil::<f64>(5, &mut rng);
        let pair = SymmetricPair::new(a.clone(), b.clone()).unwrap();
        let dense = generalized_eig(&pair).unwrap().eigenvalues[0];
        let out = solve_relaxation(&a, &b, 5, &SdpOptions::default()).unwrap();
        assert!(out.converged);
        assert!(
            (out.objective - dense).abs() <= 1e-4 * dense.abs().max(1.0),
            "objective {} vs dense {dense}",
            out.objective
        );
    }

    #[test]
    fn certificates_dominate_restricted_solutions() {
        let mut rng = SeededRng::new(64);
        for trial in 0..8 {
            let (a, b) = random_pencil::<f64>(6, &mut rng);
            for k in 1..=6usize {
                let bound = certified_upper_bound(&a, &b, k, None).unwrap();
                // brute force over all supports of size k
                let pair = SymmetricPair::new(a.clone(), b.clone()).unwrap();
                let mut best = f64::MIN;
                let combos = crate::sparse::combinations(6, k);
                for support in combos {
                    let sub = pair.restrict(&support).unwrap();
                    let top = generalized_eig(&sub).unwrap().eigenvalues[0];
                    best = best.max(top);
                }
                assert!(
                    best <= bound.value + 1e-5,
                    "trial {trial} k={k}: oracle {best} exceeds bound {}",
                    bound.value
                );
            }
        }
    }
}
