//! Symmetric-definite generalized eigenvalue kernel: solve det(lambda B - A) = 0
//! for symmetric A and positive-definite B.
//!
//! Every decomposition in the library funnels through [`generalized_eig`].
//! B is whitened by a triangular factor (Cholesky); when that factor is
//! ill-conditioned the kernel falls back to an eigendecomposition-based
//! inverse square root. Near-singular B gets a small escalating ridge,
//! since covariances estimated on short windows frequently need one.

use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Asymmetry allowed before a matrix is rejected as "not symmetric".
const SYMMETRY_TOL: f64 = 1e-10;
/// Relative ridge schedule applied to B's diagonal: start, escalation, cap.
const RIDGE_START: f64 = 1e-10;
const RIDGE_CAP: f64 = 1e-6;
/// Condition-number estimate above which the triangular factor is distrusted.
const CHOL_CONDITION_LIMIT: f64 = 1e12;
/// Eigenvalues of B + ridge*I must clear this floor.
const EIG_FLOOR: f64 = 1e-12;

/// A symmetric pencil (A, B) with B positive definite (possibly after ridge).
#[derive(Debug, Clone)]
pub struct SymmetricPair<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    ridge: T,
}

impl<T: Scalar> SymmetricPair<T> {
    /// Symmetrize and validate the pencil. Inputs may carry round-off
    /// asymmetry up to 1e-10 relative to their largest entry.
    pub fn new(a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        Self::with_ridge(a, b, T::zero())
    }

    /// Same as [`SymmetricPair::new`] with an extra ridge requested on B.
    pub fn with_ridge(a: DMatrix<T>, b: DMatrix<T>, ridge: T) -> Result<Self> {
        if !a.is_square() || !b.is_square() || a.nrows() != b.nrows() {
            return Err(Error::Shape(format!(
                "pencil needs square matrices of equal size, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if ridge < T::zero() {
            return Err(Error::Domain("ridge must be nonnegative".into()));
        }
        check_symmetry(&a, "A")?;
        check_symmetry(&b, "B")?;
        Ok(SymmetricPair { a: symmetrize(&a), b: symmetrize(&b), ridge })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Restriction of the pencil to a support set (used by sparse solvers).
    pub fn restrict(&self, support: &[usize]) -> Result<Self> {
        let k = support.len();
        if k == 0 {
            return Err(Error::Shape("empty support".into()));
        }
        let sub = |m: &DMatrix<T>| DMatrix::from_fn(k, k, |i, j| m[(support[i], support[j])]);
        Ok(SymmetricPair { a: sub(&self.a), b: sub(&self.b), ridge: self.ridge })
    }
}

fn check_symmetry<T: Scalar>(m: &DMatrix<T>, name: &str) -> Result<()> {
    let scale = m.iter().fold(T::zero(), |acc, &v| acc.max(v.abs())).max(T::one());
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > sc::<T>(SYMMETRY_TOL) * scale {
        return Err(Error::Shape(format!(
            "matrix {name} is not symmetric (max asymmetry {:e})",
            to_f64(worst)
        )));
    }
    Ok(())
}

pub(crate) fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = sc::<T>(0.5);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)]) * half)
}

/// Full spectrum of the pencil, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct GenEigResult<T: Scalar> {
    /// Descending eigenvalues.
    pub eigenvalues: DVector<T>,
    /// Column i pairs with eigenvalue i; columns are B-normalized
    /// (v' B v = 1) and sign-fixed so the largest-magnitude entry is positive.
    pub eigenvectors: DMatrix<T>,
    /// Ridge actually added to B's diagonal.
    pub ridge_used: T,
}

impl<T: Scalar> GenEigResult<T> {
    pub fn top(&self) -> (T, DVector<T>) {
        (self.eigenvalues[0], self.eigenvectors.column(0).into_owned())
    }

    pub fn bottom(&self) -> (T, DVector<T>) {
        let last = self.eigenvalues.len() - 1;
        (self.eigenvalues[last], self.eigenvectors.column(last).into_owned())
    }
}

enum Whitener<T: Scalar> {
    /// B + rI = L L'; whiten with L^-1.
    Chol(Cholesky<T, Dyn>),
    /// B + rI = Q diag(w) Q'; whiten with Q diag(w^-1/2) Q'.
    InverseSqrt(DMatrix<T>),
}

impl<T: Scalar> Whitener<T> {
    fn whiten(&self, a: &DMatrix<T>) -> Result<DMatrix<T>> {
        match self {
            Whitener::Chol(chol) => {
                let l = chol.l();
                let m = l
                    .solve_lower_triangular(a)
                    .ok_or_else(|| conditioning("triangular solve failed", 0.0))?;
                let c = l
                    .solve_lower_triangular(&m.transpose())
                    .ok_or_else(|| conditioning("triangular solve failed", 0.0))?;
                Ok(symmetrize(&c))
            }
            Whitener::InverseSqrt(r) => Ok(symmetrize(&(r * a * r))),
        }
    }

    fn unwhiten_vectors(&self, u: &DMatrix<T>) -> Result<DMatrix<T>> {
        match self {
            Whitener::Chol(chol) => chol
                .l()
                .transpose()
                .solve_upper_triangular(u)
                .ok_or_else(|| conditioning("triangular solve failed", 0.0)),
            Whitener::InverseSqrt(r) => Ok(r * u),
        }
    }
}

fn conditioning(message: &str, min_eigenvalue: f64) -> Error {
    Error::Conditioning { message: message.into(), min_eigenvalue }
}

fn add_ridge<T: Scalar>(b: &DMatrix<T>, r: T) -> DMatrix<T> {
    let mut out = b.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += r;
    }
    out
}

/// Ridge schedule: the extra ridge requested on the pair, then
/// 1e-10 * trace(B)/n escalated by 10x up to 1e-6 * trace(B)/n.
fn ridge_schedule<T: Scalar>(b: &DMatrix<T>, extra: T) -> Vec<T> {
    let n = sc::<T>(b.nrows() as f64);
    let scale = (b.trace() / n).abs().max(sc(f64::MIN_POSITIVE));
    let mut out = vec![extra];
    let mut r = sc::<T>(RIDGE_START) * scale;
    let cap = sc::<T>(RIDGE_CAP) * scale;
    while r <= cap * sc(1.0 + 1e-9) {
        out.push(extra + r);
        r *= sc(10.0);
    }
    out
}

/// Pick a whitener for B, escalating the ridge until B + rI factors cleanly.
fn factor_b<T: Scalar>(b: &DMatrix<T>, extra: T) -> Result<(Whitener<T>, T)> {
    let mut last_min_eig = f64::NAN;
    for &r in &ridge_schedule(b, extra) {
        let shifted = add_ridge(b, r);
        if let Some(chol) = Cholesky::new(shifted.clone()) {
            // Squared diagonal ratio of L estimates cond(B).
            let diag = chol.l_dirty().map_diagonal(|d| d);
            let dmax = diag.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
            let dmin = diag.iter().fold(dmax, |acc, &v| acc.min(v.abs()));
            if dmin > T::zero() && dmax * dmax <= sc::<T>(CHOL_CONDITION_LIMIT) * (dmin * dmin) {
                return Ok((Whitener::Chol(chol), r));
            }
        }
        // Cholesky refused or ill-conditioned: eigendecomposition fallback.
        let se = SymmetricEigen::new(shifted);
        let min_eig = se.eigenvalues.iter().fold(T::max_value().unwrap(), |acc, &v| acc.min(v));
        last_min_eig = to_f64(min_eig);
        if min_eig > sc(EIG_FLOOR) {
            let inv_sqrt = &se.eigenvectors
                * DMatrix::from_diagonal(&se.eigenvalues.map(|v| T::one() / v.sqrt()))
                * se.eigenvectors.transpose();
            return Ok((Whitener::InverseSqrt(symmetrize(&inv_sqrt)), r));
        }
    }
    Err(conditioning(
        "B is not positive definite even after the maximum ridge",
        last_min_eig,
    ))
}

/// Solve the pencil by whitening B and diagonalizing the whitened A.
pub fn generalized_eig<T: Scalar>(pair: &SymmetricPair<T>) -> Result<GenEigResult<T>> {
    let (whitener, ridge_used) = factor_b(pair.b(), pair.ridge())?;
    let c = whitener.whiten(pair.a())?;
    let se = SymmetricEigen::new(c);
    let mut vectors = whitener.unwhiten_vectors(&se.eigenvectors)?;

    let n = pair.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j].partial_cmp(&se.eigenvalues[i]).expect("eigenvalues are finite")
    });

    let b_shifted = add_ridge(pair.b(), ridge_used);
    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = se.eigenvalues[src];
        let mut v = vectors.column_mut(src);
        // Renormalize against B + rI; whitening keeps this near 1 already.
        let norm2 = (v.transpose() * &b_shifted * &v)[(0, 0)];
        if norm2 > T::zero() {
            v /= norm2.sqrt();
        }
        fix_sign(&mut v.into_owned());
        let mut col = vectors.column(src).into_owned();
        let nb = (col.transpose() * &b_shifted * &col)[(0, 0)];
        if nb > T::zero() {
            col /= nb.sqrt();
        }
        fix_sign(&mut col);
        eigenvectors.set_column(dst, &col);
    }
    Ok(GenEigResult { eigenvalues, eigenvectors, ridge_used })
}

/// Flip a vector so its largest-magnitude entry (first on ties) is positive.
/// Makes eigenvector output deterministic across platforms.
pub(crate) fn fix_sign<T: Scalar>(v: &mut DVector<T>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Rayleigh quotient x'Ax / x'Bx of the pencil.
pub fn rayleigh<T: Scalar>(pair: &SymmetricPair<T>, x: &DVector<T>) -> Result<T> {
    if x.len() != pair.dim() {
        return Err(Error::Shape(format!(
            "vector of length {} against pencil of size {}",
            x.len(),
            pair.dim()
        )));
    }
    if x.iter().all(|&v| v == T::zero()) {
        return Err(Error::Domain("rayleigh quotient of the zero vector".into()));
    }
    let num = quad_form(pair.a(), x);
    let den = quad_form(pair.b(), x);
    if den <= T::zero() {
        return Err(Error::Domain("x'Bx must be positive".into()));
    }
    Ok(num / den)
}

pub(crate) fn quad_form<T: Scalar>(m: &DMatrix<T>, x: &DVector<T>) -> T {
    (x.transpose() * m * x)[(0, 0)]
}

/// Symmetric R with R m R = I, computed by eigendecomposition.
pub fn inverse_sqrt<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::Shape("inverse_sqrt needs a square matrix".into()));
    }
    check_symmetry(m, "M")?;
    let sym = symmetrize(m);
    for &r in &ridge_schedule(&sym, T::zero()) {
        let se = SymmetricEigen::new(add_ridge(&sym, r));
        let min_eig = se.eigenvalues.iter().fold(T::max_value().unwrap(), |acc, &v| acc.min(v));
        if min_eig > sc(EIG_FLOOR) {
            let r_mat = &se.eigenvectors
                * DMatrix::from_diagonal(&se.eigenvalues.map(|v| T::one() / v.sqrt()))
                * se.eigenvectors.transpose();
            return Ok(symmetrize(&r_mat));
        }
        if r == T::zero() {
            // only escalate if the unshifted matrix fails
            continue;
        }
    }
    let se = SymmetricEigen::new(sym);
    let min_eig = se.eigenvalues.iter().fold(T::max_value().unwrap(), |acc, &v| acc.min(v));
    Err(conditioning("matrix is not positive definite", to_f64(min_eig)))
}

/// Solve M X = RHS for symmetric positive-definite M with the same ridge
/// escalation policy as the eigen kernel.
pub(crate) fn spd_solve<T: Scalar>(m: &DMatrix<T>, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
    let sym = symmetrize(m);
    let mut last = f64::NAN;
    for &r in &ridge_schedule(&sym, T::zero()) {
        if let Some(chol) = Cholesky::new(add_ridge(&sym, r)) {
            return Ok(chol.solve(rhs));
        }
        last = r.to_f64().unwrap_or(f64::NAN);
    }
    Err(conditioning("matrix not positive definite for solve", last))
}

/// Inverse of a symmetric positive-definite matrix.
pub(crate) fn spd_inverse<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let inv = spd_solve(m, &DMatrix::identity(m.nrows(), m.ncols()))?;
    Ok(symmetrize(&inv))
}
