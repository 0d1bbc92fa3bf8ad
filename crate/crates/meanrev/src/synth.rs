//! Seeded synthetic data generators: fixture panels for tests, the
//! acceptance suite, and the `synth` CLI subcommand.

use crate::data::{TimePanel, DEFAULT_DT};
use crate::{sc, Result, Scalar};
use nalgebra::{DMatrix, DVector, QR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Deterministic RNG used by every generator. Sampling always goes through
/// `f64` so a given seed yields the same panel for every scalar type.
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random()
    }

    pub fn normal_vector<T: Scalar>(&mut self, n: usize) -> DVector<T> {
        DVector::from_fn(n, |_, _| sc(self.normal()))
    }

    pub fn normal_matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> DMatrix<T> {
        DMatrix::from_fn(rows, cols, |_, _| sc(self.normal()))
    }
}

/// Random symmetric positive-definite matrix with eigenvalues spread
/// geometrically over [min_eig, max_eig] and a random orthogonal basis.
pub fn random_spd<T: Scalar>(n: usize, rng: &mut SeededRng, min_eig: f64, max_eig: f64) -> DMatrix<T> {
    assert!(min_eig > 0.0 && max_eig >= min_eig);
    let g = rng.normal_matrix::<T>(n, n);
    let q = QR::new(g).q();
    let eigs = DVector::from_fn(n, |i, _| {
        if n == 1 {
            sc::<T>(max_eig)
        } else {
            let t = i as f64 / (n - 1) as f64;
            sc::<T>(min_eig * (max_eig / min_eig).powf(t))
        }
    });
    let m = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    crate::geneig::symmetrize(&m)
}

/// Random symmetric-definite pencil (A, B) for sparse-solver stress tests.
pub fn random_pencil<T: Scalar>(n: usize, rng: &mut SeededRng) -> (DMatrix<T>, DMatrix<T>) {
    let a = random_spd(n, rng, 0.2, 4.0);
    let b = random_spd(n, rng, 0.5, 2.0);
    (a, b)
}

/// Exact-discretization sample path of dP = lambda (mu - P) dt + sigma dZ.
/// Starts from a stationary draw unless `x0` pins the first value.
pub fn ou_series<T: Scalar>(
    lambda: f64,
    sigma: f64,
    mu: f64,
    dt: f64,
    n: usize,
    rng: &mut SeededRng,
    x0: Option<f64>,
) -> DVector<T> {
    assert!(lambda > 0.0 && sigma >= 0.0 && dt > 0.0 && n > 0);
    let decay = (-lambda * dt).exp();
    let shock = sigma * ((1.0 - (-2.0 * lambda * dt).exp()) / (2.0 * lambda)).sqrt();
    let mut x = x0.unwrap_or_else(|| mu + sigma / (2.0 * lambda).sqrt() * rng.normal());
    let mut out = DVector::zeros(n);
    out[0] = sc(x);
    for i in 1..n {
        x = mu + decay * (x - mu) + shock * rng.normal();
        out[i] = sc(x);
    }
    out
}

/// Stationary VAR(1) panel S_t = S_{t-1} A + Z with A scaled to the given
/// spectral radius and unit-variance Gaussian noise. Returns the true A.
pub fn stationary_var_panel<T: Scalar>(
    n: usize,
    m: usize,
    spectral_radius: f64,
    seed: u64,
) -> Result<(TimePanel<T>, DMatrix<T>)> {
    assert!(spectral_radius > 0.0 && spectral_radius < 1.0);
    let mut rng = SeededRng::new(seed);
    let raw = rng.normal_matrix::<f64>(n, n);
    let radius = raw
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let a64 = raw * (spectral_radius / radius);

    let burn = 500;
    let mut state = DVector::<f64>::zeros(n);
    let mut values = DMatrix::<T>::zeros(m, n);
    for t in 0..burn + m {
        let noise = DVector::from_fn(n, |_, _| rng.normal());
        state = a64.transpose() * &state + noise;
        if t >= burn {
            for j in 0..n {
                values[(t - burn, j)] = sc(state[j]);
            }
        }
    }
    let a = a64.map(|v| sc::<T>(v));
    Ok((TimePanel::from_values(values, sc(DEFAULT_DT))?, a))
}

/// Panel of independent random walks with N(0, step_sigma^2) increments.
pub fn random_walk_panel<T: Scalar>(
    n: usize,
    m: usize,
    step_sigma: f64,
    seed: u64,
) -> Result<TimePanel<T>> {
    let mut rng = SeededRng::new(seed);
    let mut values = DMatrix::<T>::zeros(m, n);
    let mut level = vec![0.0f64; n];
    for t in 0..m {
        for j in 0..n {
            level[j] += step_sigma * rng.normal();
            values[(t, j)] = sc(level[j]);
        }
    }
    TimePanel::from_values(values, sc(DEFAULT_DT))
}

/// Independent AR(1) columns x_t = a x_{t-1} + e with stationary start.
pub fn ar1_panel<T: Scalar>(coeffs: &[f64], m: usize, seed: u64) -> Result<TimePanel<T>> {
    let mut rng = SeededRng::new(seed);
    let n = coeffs.len();
    let mut values = DMatrix::<T>::zeros(m, n);
    let mut state: Vec<f64> = coeffs
        .iter()
        .map(|&a| rng.normal() / (1.0 - a * a).sqrt())
        .collect();
    for t in 0..m {
        for j in 0..n {
            state[j] = coeffs[j] * state[j] + rng.normal();
            values[(t, j)] = sc(state[j]);
        }
    }
    TimePanel::from_values(values, sc(DEFAULT_DT))
}

/// Panel of i.i.d. Gaussian noise (a "white" panel).
pub fn white_noise_panel<T: Scalar>(n: usize, m: usize, sigma: f64, seed: u64) -> Result<TimePanel<T>> {
    let mut rng = SeededRng::new(seed);
    let values = DMatrix::from_fn(m, n, |_, _| sc::<T>(sigma * rng.normal()));
    TimePanel::from_values(values, sc(DEFAULT_DT))
}

/// Configuration of the planted-spread panel used by the sparse recovery
/// experiments: two assets share a random walk plus/minus half an OU spread,
/// the rest are independent random walks with per-asset drift.
#[derive(Debug, Clone)]
pub struct PlantedSpreadConfig {
    pub n_assets: usize,
    pub m: usize,
    pub dt: f64,
    /// Mean-reversion speed of the planted spread.
    pub lambda: f64,
    /// Diffusion volatility of the planted spread.
    pub sigma_spread: f64,
    /// Per-step volatility of the random walks.
    pub sigma_walk: f64,
    /// Scale of the per-asset drift on the non-planted walks. Drift keeps
    /// their in-sample behavior firmly persistent, which separates the
    /// planted pair from spurious in-sample cointegration among walks.
    pub drift: f64,
    /// Indices of the planted pair.
    pub pair: (usize, usize),
}

impl Default for PlantedSpreadConfig {
    fn default() -> Self {
        PlantedSpreadConfig {
            n_assets: 8,
            m: 2_000,
            dt: DEFAULT_DT,
            lambda: 10.0,
            sigma_spread: 4.0,
            sigma_walk: 0.05,
            drift: 0.02,
            pair: (1, 4),
        }
    }
}

/// Build the planted-spread panel. The combination e_i - e_j of the planted
/// pair recovers the OU spread exactly.
pub fn planted_spread_panel<T: Scalar>(config: &PlantedSpreadConfig, seed: u64) -> Result<TimePanel<T>> {
    let (i, j) = config.pair;
    assert!(i != j && i < config.n_assets && j < config.n_assets);
    let mut rng = SeededRng::new(seed);
    let spread = ou_series::<f64>(
        config.lambda,
        config.sigma_spread,
        0.0,
        config.dt,
        config.m,
        &mut rng,
        None,
    );
    let mut values = DMatrix::<T>::zeros(config.m, config.n_assets);
    let mut shared = 0.0f64;
    let mut walks = vec![0.0f64; config.n_assets];
    let drifts: Vec<f64> = (0..config.n_assets).map(|_| config.drift * rng.normal()).collect();
    for t in 0..config.m {
        shared += config.sigma_walk * rng.normal();
        for c in 0..config.n_assets {
            if c == i {
                values[(t, c)] = sc(shared + spread[t] / 2.0);
            } else if c == j {
                values[(t, c)] = sc(shared - spread[t] / 2.0);
            } else {
                walks[c] += config.sigma_walk * rng.normal() + drifts[c];
                values[(t, c)] = sc(walks[c]);
            }
        }
    }
    TimePanel::from_values(values, sc(config.dt))
}

/// Two-asset cointegrated panel: S2 = S1 + stationary OU noise.
pub fn cointegrated_pair_panel<T: Scalar>(
    m: usize,
    ou_lambda: f64,
    ou_sigma: f64,
    walk_sigma: f64,
    seed: u64,
) -> Result<TimePanel<T>> {
    let mut rng = SeededRng::new(seed);
    let noise = ou_series::<f64>(ou_lambda, ou_sigma, 0.0, DEFAULT_DT, m, &mut rng, None);
    let mut values = DMatrix::<T>::zeros(m, 2);
    let mut walk = 0.0f64;
    for t in 0..m {
        walk += walk_sigma * rng.normal();
        values[(t, 0)] = sc(walk);
        values[(t, 1)] = sc(walk + noise[t]);
    }
    TimePanel::from_values(values, sc(DEFAULT_DT))
}

/// Gaussian panel whose population covariance carries one correlated block;
/// all other assets are independent. Returns the panel and the block indices.
pub fn block_covariance_panel<T: Scalar>(
    n: usize,
    block: usize,
    m: usize,
    within_correlation: f64,
    seed: u64,
) -> Result<(TimePanel<T>, Vec<usize>)> {
    assert!(block <= n && within_correlation > 0.0 && within_correlation < 1.0);
    let mut sigma = DMatrix::<f64>::identity(n, n);
    for i in 0..block {
        for j in 0..block {
            if i != j {
                sigma[(i, j)] = within_correlation;
            }
        }
    }
    let chol = nalgebra::Cholesky::new(sigma).expect("block covariance is PD");
    let l = chol.l();
    let mut rng = SeededRng::new(seed);
    let mut values = DMatrix::<T>::zeros(m, n);
    for t in 0..m {
        let z = DVector::from_fn(n, |_, _| rng.normal());
        let row = &l * z;
        for j in 0..n {
            values[(t, j)] = sc(row[j]);
        }
    }
    Ok((TimePanel::from_values(values, sc(DEFAULT_DT))?, (0..block).collect()))
}

/// VAR(p) panel for p in {1, 2}; each lag matrix scaled so the companion
/// system stays stationary. Used by the `synth` subcommand.
pub fn var_panel<T: Scalar>(
    n: usize,
    m: usize,
    order: usize,
    spectral_radius: f64,
    seed: u64,
) -> Result<TimePanel<T>> {
    assert!(order == 1 || order == 2, "var order must be 1 or 2");
    if order == 1 {
        return Ok(stationary_var_panel(n, m, spectral_radius, seed)?.0);
    }
    let mut rng = SeededRng::new(seed);
    // Split the target radius across the two lags.
    let scale_to = |raw: DMatrix<f64>, r: f64| {
        let rad = raw
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        raw * (r / rad)
    };
    let a1 = scale_to(rng.normal_matrix::<f64>(n, n), spectral_radius * 0.6);
    let a2 = scale_to(rng.normal_matrix::<f64>(n, n), spectral_radius * 0.3);

    let burn = 500;
    let mut prev = DVector::<f64>::zeros(n);
    let mut prev2 = DVector::<f64>::zeros(n);
    let mut values = DMatrix::<T>::zeros(m, n);
    for t in 0..burn + m {
        let noise = DVector::from_fn(n, |_, _| rng.normal());
        let next = a1.transpose() * &prev + a2.transpose() * &prev2 + noise;
        prev2 = std::mem::replace(&mut prev, next);
        if t >= burn {
            for j in 0..n {
                values[(t - burn, j)] = sc(prev[j]);
            }
        }
    }
    TimePanel::from_values(values, sc(DEFAULT_DT))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generators_are_deterministic() {
        let a: TimePanel<f64> = random_walk_panel(3, 50, 0.1, 9).unwrap();
        let b: TimePanel<f64> = random_walk_panel(3, 50, 0.1, 9).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn random_spd_is_spd() {
        let mut rng = SeededRng::new(1);
        let m = random_spd::<f64>(6, &mut rng, 0.5, 5.0);
        assert!(nalgebra::Cholesky::new(m.clone()).is_some());
        assert!((m.clone() - m.transpose()).amax() < 1e-12);
    }

    #[test]
    fn ou_series_mean_reverts() {
        let mut rng = SeededRng::new(2);
        let s = ou_series::<f64>(50.0, 0.1, 1.0, DEFAULT_DT, 20_000, &mut rng, None);
        let mean = s.sum() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "OU mean {mean} far from 1");
    }

    #[test]
    fn planted_spread_recovers_ou_combination() {
        let config = PlantedSpreadConfig::default();
        let panel: TimePanel<f64> = planted_spread_panel(&config, 3).unwrap();
        let (i, j) = config.pair;
        // spread = asset_i - asset_j must stay bounded while walks wander
        let spread_range: f64 = (0..panel.nrows())
            .map(|t| panel.values()[(t, i)] - panel.values()[(t, j)])
            .fold(0.0, |acc: f64, v| acc.max(v.abs()));
        assert!(spread_range < 10.0 * config.sigma_spread / (2.0 * config.lambda).sqrt());
    }

    #[test]
    fn var2_panel_is_finite() {
        let panel: TimePanel<f64> = var_panel(4, 300, 2, 0.8, 7).unwrap();
        assert!(panel.values().iter().all(|v| v.is_finite()));
    }
}
