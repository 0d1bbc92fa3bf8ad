//! Covariance selection: l1-penalized maximum-likelihood inverse covariance
//! (graphical lasso), the induced dependence graph, connected-component
//! clusters, and chordality analysis.
//!
//! The estimation problem is max_X  log det X - Tr(Sigma X) - rho sum_ij |X_ij|,
//! with the penalty summed over *all* entries including the diagonal. Solved
//! by block coordinate descent over columns where each column is a LASSO
//! subproblem reusing the coordinate-descent kernel from [`crate::estimate`].

use crate::data::TimePanel;
use crate::estimate::quad_lasso_cd;
use crate::geneig::{spd_inverse, symmetrize};
use crate::{sc, to_f64, Error, Result, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

/// Simple undirected graph on 0..n with deterministic adjacency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        Adjacency { neighbors: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Adjacency::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        assert!(i != j && i < self.len() && j < self.len());
        if !self.neighbors[i].contains(&j) {
            self.neighbors[i].push(j);
            self.neighbors[i].sort_unstable();
            self.neighbors[j].push(i);
            self.neighbors[j].sort_unstable();
        }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as (i, j) with i < j, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for &j in &self.neighbors[i] {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Connected components via union-find, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, j) in self.edges() {
            let ri = find(&mut parent, i);
            let rj = find(&mut parent, j);
            if ri != rj {
                let (lo, hi) = if ri < rj { (ri, rj) } else { (rj, ri) };
                parent[hi] = lo;
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }
}

/// Penalized inverse-covariance estimate with its dependence graph.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate<T: Scalar> {
    /// The estimated precision matrix X (SPD).
    pub x: DMatrix<T>,
    pub rho: T,
    /// Off-diagonal entries count as edges when |x_ij| exceeds this
    /// threshold times max |x_ij|.
    pub edge_threshold: T,
    pub graph: Adjacency,
    /// Connected components of the graph, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// Max-norm KKT residual of the stationarity condition at x.
    pub kkt_residual: T,
    pub converged: bool,
    pub sweeps: usize,
    /// Objective value after each outer sweep (nondecreasing).
    pub objective_trace: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct GlassoOptions<T: Scalar> {
    /// Include the diagonal in the l1 penalty (the literal objective does).
    pub penalize_diagonal: bool,
    pub max_sweeps: usize,
    /// Target on the max-norm KKT residual.
    pub tol: T,
    /// Relative edge threshold for the dependence graph.
    pub edge_threshold: T,
}

impl<T: Scalar> Default for GlassoOptions<T> {
    fn default() -> Self {
        GlassoOptions {
            penalize_diagonal: true,
            max_sweeps: 500,
            tol: sc(1e-5),
            edge_threshold: sc(1e-5),
        }
    }
}

/// Penalized log-likelihood objective log det X - Tr(Sigma X) - rho sum |X_ij|.
pub fn glasso_objective<T: Scalar>(
    sigma: &DMatrix<T>,
    x: &DMatrix<T>,
    rho: T,
    penalize_diagonal: bool,
) -> Result<T> {
    let chol = Cholesky::new(x.clone()).ok_or_else(|| Error::Conditioning {
        message: "objective evaluated at a non-PD point".into(),
        min_eigenvalue: f64::NAN,
    })?;
    let logdet = chol
        .l_dirty()
        .map_diagonal(|d| d)
        .iter()
        .fold(T::zero(), |acc, &d| acc + d.ln())
        * sc(2.0);
    let trace = (sigma * x).trace();
    let mut l1 = T::zero();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            if i != j || penalize_diagonal {
                l1 += x[(i, j)].abs();
            }
        }
    }
    Ok(logdet - trace - rho * l1)
}

/// Max-norm residual of the KKT condition X^-1 - Sigma - rho G = 0 for some
/// valid subgradient G of the l1 term.
fn kkt_residual<T: Scalar>(
    sigma: &DMatrix<T>,
    x: &DMatrix<T>,
    rho: T,
    penalize_diagonal: bool,
) -> Result<T> {
    let w = spd_inverse(x)?;
    let mut worst = T::zero();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let slack = w[(i, j)] - sigma[(i, j)];
            let penalized = i != j || penalize_diagonal;
            let r = if !penalized {
                slack.abs()
            } else if x[(i, j)] != T::zero() {
                (slack - rho * x[(i, j)].signum()).abs()
            } else {
                (slack.abs() - rho).max(T::zero())
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Graphical lasso via block coordinate descent on the covariance side.
pub fn graphical_lasso<T: Scalar>(
    sigma: &DMatrix<T>,
    rho: T,
    options: &GlassoOptions<T>,
) -> Result<PrecisionEstimate<T>> {
    if rho <= T::zero() {
        return Err(Error::Domain("rho must be positive".into()));
    }
    if !sigma.is_square() {
        return Err(Error::Shape("covariance must be square".into()));
    }
    let sigma = symmetrize(sigma);
    let n = sigma.nrows();

    // Dual diagonal is fixed by the KKT conditions: W_ii = Sigma_ii + rho
    // when the diagonal is penalized, else W_ii = Sigma_ii.
    let mut w = sigma.clone();
    if options.penalize_diagonal {
        for i in 0..n {
            w[(i, i)] += rho;
        }
    }
    let mut betas = DMatrix::<T>::zeros(n, n);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let mut residual = T::max_value().unwrap();

    if n == 1 {
        let x = DMatrix::from_element(1, 1, T::one() / w[(0, 0)]);
        let obj = glasso_objective(&sigma, &x, rho, options.penalize_diagonal)?;
        return finish(sigma, x, rho, options, vec![obj], T::zero(), true, 0);
    }

    for sweep in 1..=options.max_sweeps {
        sweeps = sweep;
        for col in 0..n {
            // Partition: W11 over the other indices, s12 = Sigma column `col`
            let others: Vec<usize> = (0..n).filter(|&i| i != col).collect();
            let w11 = DMatrix::from_fn(n - 1, n - 1, |i, j| w[(others[i], others[j])]);
            let s12 = DVector::from_fn(n - 1, |i, _| sigma[(others[i], col)]);
            // min 1/2 b' W11 b - s12' b + rho |b|_1, in covariance form
            let q = &w11 * sc::<T>(0.5);
            let c = &s12 * sc::<T>(0.5);
            let mut beta = DVector::from_fn(n - 1, |i, _| betas[(others[i], col)]);
            quad_lasso_cd(&q, &c, rho, &mut beta, sc(1e-10), 5_000);
            let w12 = &w11 * &beta;
            for (r, &other) in others.iter().enumerate() {
                w[(other, col)] = w12[r];
                w[(col, other)] = w12[r];
                betas[(other, col)] = beta[r];
            }
        }

        let x = primal_from_dual(&w, &betas)?;
        trace.push(glasso_objective(&sigma, &x, rho, options.penalize_diagonal)?);
        residual = kkt_residual(&sigma, &x, rho, options.penalize_diagonal)?;
        if residual <= options.tol {
            converged = true;
            break;
        }
    }

    let x = primal_from_dual(&w, &betas)?;
    finish(sigma, x, rho, options, trace, residual, converged, sweeps)
}

/// Recover the primal X from the dual covariance W and the column
/// regression coefficients: x_jj = 1/(w_jj - w12' beta_j), x_12 = -beta x_jj.
/// Exact zeros in beta become exact zeros in X.
fn primal_from_dual<T: Scalar>(w: &DMatrix<T>, betas: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = w.nrows();
    let mut x = DMatrix::<T>::zeros(n, n);
    for col in 0..n {
        let mut dot = T::zero();
        for i in 0..n {
            if i != col {
                dot += w[(i, col)] * betas[(i, col)];
            }
        }
        let denom = w[(col, col)] - dot;
        if denom <= T::zero() {
            return Err(Error::Conditioning {
                message: "dual iterate lost positive definiteness".into(),
                min_eigenvalue: to_f64(denom),
            });
        }
        let xjj = T::one() / denom;
        x[(col, col)] = xjj;
        for i in 0..n {
            if i != col {
                let val = if betas[(i, col)] == T::zero() { T::zero() } else { -betas[(i, col)] * xjj };
                x[(i, col)] = val;
            }
        }
    }
    // Column extractions differ by round-off; average but keep exact zeros.
    let half = sc::<T>(0.5);
    let mut out = x.clone();
    for i in 0..n {
        for j in 0..i {
            let merged = if x[(i, j)] == T::zero() && x[(j, i)] == T::zero() {
                T::zero()
            } else {
                (x[(i, j)] + x[(j, i)]) * half
            };
            out[(i, j)] = merged;
            out[(j, i)] = merged;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Scalar>(
    sigma: DMatrix<T>,
    x: DMatrix<T>,
    rho: T,
    options: &GlassoOptions<T>,
    trace: Vec<T>,
    residual: T,
    converged: bool,
    sweeps: usize,
) -> Result<PrecisionEstimate<T>> {
    let _ = sigma;
    let graph = dependence_graph(&x, options.edge_threshold);
    let clusters = graph.components();
    Ok(PrecisionEstimate {
        x,
        rho,
        edge_threshold: options.edge_threshold,
        graph,
        clusters,
        kkt_residual: residual,
        converged,
        sweeps,
        objective_trace: trace,
    })
}

/// Graph with an edge wherever |x_ij| exceeds threshold * max |x_ij|, i != j.
pub fn dependence_graph<T: Scalar>(x: &DMatrix<T>, relative_threshold: T) -> Adjacency {
    let n = x.nrows();
    let mut peak = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                peak = peak.max(x[(i, j)].abs());
            }
        }
    }
    let cutoff = relative_threshold * peak;
    let mut g = Adjacency::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if x[(i, j)].abs() > cutoff && x[(i, j)] != T::zero() {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Connected components of the estimate's graph (already computed on
/// construction; exposed as the spec operation).
pub fn clusters<T: Scalar>(estimate: &PrecisionEstimate<T>) -> Vec<Vec<usize>> {
    estimate.graph.components()
}

/// Chordality check by maximum cardinality search plus perfect-elimination
/// verification. Returns the elimination ordering when the graph is chordal.
pub fn is_chordal(graph: &Adjacency) -> Option<Vec<usize>> {
    let n = graph.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // MCS visit: repeatedly pick the unvisited vertex with the most visited
    // neighbors, lowest index on ties. Elimination order is the reverse.
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut visit_order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = usize::MAX;
        for v in 0..n {
            if !visited[v] && (best == usize::MAX || weight[v] > weight[best]) {
                best = v;
            }
        }
        visited[best] = true;
        visit_order.push(best);
        for &u in graph.neighbors(best) {
            if !visited[u] {
                weight[u] += 1;
            }
        }
    }
    let elimination: Vec<usize> = visit_order.iter().rev().cloned().collect();

    // Perfect elimination check: for each vertex, its later neighbors must
    // form a clique; it suffices that the earliest of them sees the rest.
    let mut position = vec![0usize; n];
    for (pos, &v) in elimination.iter().enumerate() {
        position[v] = pos;
    }
    for (pos, &v) in elimination.iter().enumerate() {
        let later: Vec<usize> = graph
            .neighbors(v)
            .iter()
            .cloned()
            .filter(|&u| position[u] > pos)
            .collect();
        let Some(&first) = later.iter().min_by_key(|&&u| position[u]) else {
            continue;
        };
        for &u in &later {
            if u != first && !graph.has_edge(first, u) {
                return None;
            }
        }
    }
    Some(elimination)
}

/// One sub-panel per cluster of at least `min_size` assets, columns
/// restricted to the cluster members.
pub fn restrict_to_clusters<T: Scalar>(
    panel: &TimePanel<T>,
    estimate: &PrecisionEstimate<T>,
    min_size: usize,
) -> Result<Vec<TimePanel<T>>> {
    if estimate.x.nrows() != panel.ncols() {
        return Err(Error::Shape(format!(
            "estimate over {} assets does not match panel with {} columns",
            estimate.x.nrows(),
            panel.ncols()
        )));
    }
    let mut out = Vec::new();
    for cluster in &estimate.clusters {
        if cluster.len() >= min_size {
            out.push(panel.select_columns(cluster)?);
        }
    }
    Ok(out)
}

/// Edge record for CSV export: weight is the precision entry, sign its
/// direction (conditional dependence networks distinguish the two).
#[derive(Debug, Clone, Serialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    pub sign: i8,
}

pub fn edge_list<T: Scalar>(estimate: &PrecisionEstimate<T>) -> Vec<EdgeRecord> {
    estimate
        .graph
        .edges()
        .into_iter()
        .map(|(i, j)| {
            let w = to_f64(estimate.x[(i, j)]);
            EdgeRecord { from: i, to: j, weight: w, sign: if w >= 0.0 { 1 } else { -1 } }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::sample_covariance;
    use crate::synth::{block_covariance_panel, random_spd, SeededRng};
    use crate::TimePanel64;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tiny_rho_recovers_inverse_covariance() {
        let mut rng = SeededRng::new(21);
        let sigma = random_spd::<f64>(4, &mut rng, 0.5, 2.0);
        let est = graphical_lasso(&sigma, 1e-8, &GlassoOptions::default()).unwrap();
        let inv = spd_inverse(&sigma).unwrap();
        assert!(
            (est.x.clone() - inv).amax() <= 1e-3,
            "X should approach Sigma^-1 as rho -> 0, err {}",
            (est.x - spd_inverse(&sigma).unwrap()).amax()
        );
    }

    #[test]
    fn large_rho_gives_exact_diagonal_solution() {
        let mut rng = SeededRng::new(22);
        let sigma = random_spd::<f64>(5, &mut rng, 0.5, 2.0);
        let mut max_off = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    max_off = max_off.max(sigma[(i, j)].abs());
                }
            }
        }
        let rho = max_off * 1.05;
        let est = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    assert_abs_diff_eq!(est.x[(i, j)], 1.0 / (sigma[(i, i)] + rho), epsilon = 1e-6);
                } else {
                    assert_eq!(est.x[(i, j)], 0.0);
                }
            }
        }
        assert!(est.kkt_residual <= 1e-5);
        assert_eq!(est.clusters.len(), 5);
    }

    #[test]
    fn kkt_residual_below_tolerance_on_random_instances() {
        let mut rng = SeededRng::new(23);
        for n in [3usize, 6, 9] {
            let sigma = random_spd::<f64>(n, &mut rng, 0.3, 3.0);
            for rho in [0.01, 0.1, 0.5] {
                let est = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
                assert!(
                    est.converged && est.kkt_residual <= 1e-5,
                    "n={n} rho={rho}: residual {}",
                    est.kkt_residual
                );
                assert!(Cholesky::new(est.x.clone()).is_some(), "X must stay SPD");
            }
        }
    }

    /// Proximal-gradient ascent on the primal with backtracking; independent
    /// of the column-wise solver, used as the objective oracle.
    fn prox_grad_oracle(sigma: &DMatrix<f64>, rho: f64, iters: usize) -> f64 {
        let n = sigma.nrows();
        let mut x = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            x[(i, i)] = 1.0 / (sigma[(i, i)] + rho);
        }
        let mut obj = glasso_objective(sigma, &x, rho, true).unwrap();
        let mut step = 1.0;
        for _ in 0..iters {
            let grad = spd_inverse(&x).unwrap() - sigma;
            let mut accepted = false;
            while !accepted && step > 1e-14 {
                let mut cand = &x + &grad * step;
                for i in 0..n {
                    for j in 0..n {
                        cand[(i, j)] = crate::estimate::soft_threshold(cand[(i, j)], rho * step);
                    }
                }
                let cand = symmetrize(&cand);
                if Cholesky::new(cand.clone()).is_some() {
                    let cand_obj = glasso_objective(sigma, &cand, rho, true).unwrap();
                    if cand_obj >= obj - 1e-14 {
                        x = cand;
                        obj = cand_obj;
                        accepted = true;
                        step *= 1.1;
                    }
                }
                if !accepted {
                    step *= 0.5;
                }
            }
        }
        obj
    }

    #[test]
    fn objective_matches_independent_solver_on_6x6() {
        let mut rng = SeededRng::new(24);
        let sigma = random_spd::<f64>(6, &mut rng, 0.4, 2.5);
        let rho = 0.1;
        let est = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
        let ours = glasso_objective(&sigma, &est.x, rho, true).unwrap();
        let oracle = prox_grad_oracle(&sigma, rho, 20_000);
        let rel = (ours - oracle).abs() / oracle.abs().max(1.0);
        assert!(rel <= 1e-5, "objective {ours} vs oracle {oracle} (rel {rel})");
    }

    #[test]
    fn objective_trace_is_monotone_and_beats_unpenalized_start() {
        let mut rng = SeededRng::new(25);
        let sigma = random_spd::<f64>(6, &mut rng, 0.4, 2.5);
        let rho = 0.2;
        let est = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
        for w in est.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective decreased: {} -> {}", w[0], w[1]);
        }
        let at_inverse = glasso_objective(&sigma, &spd_inverse(&sigma).unwrap(), rho, true).unwrap();
        let at_solution = *est.objective_trace.last().unwrap();
        assert!(at_solution >= at_inverse - 1e-9);
    }

    #[test]
    fn support_shrinks_with_rho_on_fixture() {
        let mut rng = SeededRng::new(26);
        let sigma = random_spd::<f64>(7, &mut rng, 0.3, 3.0);
        let mut prev_edges = usize::MAX;
        for rho in [0.02, 0.08, 0.2, 0.6] {
            let est = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
            let edges = est.graph.edge_count();
            assert!(edges <= prev_edges, "edges grew from {prev_edges} to {edges} at rho={rho}");
            prev_edges = edges;
        }
    }

    #[test]
    fn diagonal_penalty_flag_changes_diagonal() {
        let mut rng = SeededRng::new(27);
        let sigma = random_spd::<f64>(4, &mut rng, 0.5, 2.0);
        let rho = 0.3;
        let with = graphical_lasso(&sigma, rho, &GlassoOptions::default()).unwrap();
        let without = graphical_lasso(
            &sigma,
            rho,
            &GlassoOptions { penalize_diagonal: false, ..Default::default() },
        )
        .unwrap();
        // unpenalized diagonal gives larger precision diagonal entries
        for i in 0..4 {
            assert!(without.x[(i, i)] > with.x[(i, i)]);
        }
        assert!(without.kkt_residual <= 1e-5);
    }

    #[test]
    fn clusters_examples() {
        // diagonal precision: n singletons
        let x = DMatrix::<f64>::identity(4, 4);
        let g = dependence_graph(&x, 1e-5);
        assert_eq!(g.components(), vec![vec![0], vec![1], vec![2], vec![3]]);

        // block diagonal {0,1} and {2,3,4}
        let mut x = DMatrix::<f64>::identity(5, 5) * 2.0;
        x[(0, 1)] = -0.5;
        x[(1, 0)] = -0.5;
        x[(2, 3)] = 0.4;
        x[(3, 2)] = 0.4;
        x[(3, 4)] = 0.4;
        x[(4, 3)] = 0.4;
        let g = dependence_graph(&x, 1e-5);
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3, 4]]);

        // chain 0-1-2 is one cluster
        let g = Adjacency::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(g.components(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn chordality_examples() {
        let triangle = Adjacency::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(is_chordal(&triangle).is_some());

        let square = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(is_chordal(&square).is_none());

        let square_with_chord = Adjacency::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        assert!(is_chordal(&square_with_chord).is_some());

        let tree = Adjacency::from_edges(6, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]);
        assert!(is_chordal(&tree).is_some());

        // 5-cycle with one chord still has a chordless 4-cycle
        let five = Adjacency::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]);
        assert!(is_chordal(&five).is_none());
    }

    #[test]
    fn elimination_ordering_is_perfect() {
        let g = Adjacency::from_edges(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]);
        let ord = is_chordal(&g).expect("graph is chordal");
        let mut position = vec![0usize; 5];
        for (pos, &v) in ord.iter().enumerate() {
            position[v] = pos;
        }
        for &v in &ord {
            let later: Vec<usize> =
                g.neighbors(v).iter().cloned().filter(|&u| position[u] > position[v]).collect();
            for a in 0..later.len() {
                for b in (a + 1)..later.len() {
                    assert!(g.has_edge(later[a], later[b]));
                }
            }
        }
    }

    #[test]
    fn restrict_to_clusters_examples() {
        let (panel, _block): (TimePanel64, _) = block_covariance_panel(5, 2, 400, 0.6, 31).unwrap();
        // single cluster of everything: sub-panel equals the original
        let x_full = DMatrix::<f64>::from_fn(5, 5, |i, j| if i == j { 2.0 } else { 0.5 });
        let est = PrecisionEstimate {
            x: x_full.clone(),
            rho: 0.1,
            edge_threshold: 1e-5,
            graph: dependence_graph(&x_full, 1e-5),
            clusters: dependence_graph(&x_full, 1e-5).components(),
            kkt_residual: 0.0,
            converged: true,
            sweeps: 0,
            objective_trace: vec![],
        };
        let subs = restrict_to_clusters(&panel, &est, 1).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].values(), panel.values());

        // clusters {0,1}, {2}, min_size 2 keeps only the pair
        let mut x_split = DMatrix::<f64>::identity(5, 5);
        x_split[(0, 1)] = 0.4;
        x_split[(1, 0)] = 0.4;
        let est2 = PrecisionEstimate {
            graph: dependence_graph(&x_split, 1e-5),
            clusters: dependence_graph(&x_split, 1e-5).components(),
            x: x_split,
            rho: 0.1,
            edge_threshold: 1e-5,
            kkt_residual: 0.0,
            converged: true,
            sweeps: 0,
            objective_trace: vec![],
        };
        let subs = restrict_to_clusters(&panel, &est2, 2).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].ncols(), 2);
        assert_eq!(subs[0].labels(), &panel.labels()[0..2]);
    }

    #[test]
    fn planted_block_is_recovered() {
        let (panel, block): (TimePanel64, _) = block_covariance_panel(20, 6, 3_000, 0.6, 32).unwrap();
        let sigma = sample_covariance(&panel).unwrap();
        let est = graphical_lasso(&sigma, 0.12, &GlassoOptions::default()).unwrap();
        let recovered = est
            .clusters
            .iter()
            .find(|c| c.len() >= 2)
            .expect("a non-trivial cluster should exist");
        assert_eq!(recovered, &block, "recovered cluster should match the planted block");
    }

    #[test]
    fn edge_list_is_deterministic_and_signed() {
        let mut x = DMatrix::<f64>::identity(3, 3) * 2.0;
        x[(0, 1)] = -0.7;
        x[(1, 0)] = -0.7;
        x[(1, 2)] = 0.3;
        x[(2, 1)] = 0.3;
        let est = PrecisionEstimate {
            graph: dependence_graph(&x, 1e-5),
            clusters: dependence_graph(&x, 1e-5).components(),
            x,
            rho: 0.1,
            edge_threshold: 1e-5,
            kkt_residual: 0.0,
            converged: true,
            sweeps: 0,
            objective_trace: vec![],
        };
        let edges = edge_list(&est);
        assert_eq!(edges.len(), 2);
        assert_eq!((edges[0].from, edges[0].to, edges[0].sign), (0, 1, -1));
        assert_eq!((edges[1].from, edges[1].to, edges[1].sign), (1, 2, 1));
    }
}
