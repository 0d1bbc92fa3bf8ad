//! Small statistics helpers: standard normal CDF/quantile, slope t-test
//! p-values, and an exact binomial sign test.

use crate::{sc, to_f64, Error, Result, Scalar};

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation
/// (absolute error below 1.5e-7, plenty for p-values).
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    let xf = to_f64(x);
    sc(0.5 * (1.0 + erf(xf / std::f64::consts::SQRT_2)))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal quantile (inverse CDF) via Acklam's rational
/// approximation; relative error below 1.2e-9 over (0, 1).
pub fn norm_quantile<T: Scalar>(p: T) -> Result<T> {
    let p = to_f64(p);
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(Error::Domain(format!("quantile probability must lie in (0,1), got {p}")));
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];

    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    Ok(sc(x))
}

/// One-sided p-value of the AR(1) slope t-test against no mean reversion.
///
/// Regresses demeaned P_t on demeaned P_{t-1} through the origin and tests
/// H0: slope = 1 against slope < 1. Small values mean significant mean
/// reversion. This is an approximation used for summary tables.
pub fn ar1_slope_p_value<T: Scalar>(series: &[T]) -> Result<T> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("need at least 10 observations, got {n}")));
    }
    let nf = n as f64;
    let mean = series.iter().map(|&v| to_f64(v)).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for t in 1..n {
        let x = to_f64(series[t - 1]) - mean;
        let y = to_f64(series[t]) - mean;
        sxx += x * x;
        sxy += x * y;
    }
    if sxx <= 0.0 {
        return Err(Error::Domain("series has zero variance".into()));
    }
    let slope = sxy / sxx;
    let mut rss = 0.0;
    for t in 1..n {
        let x = to_f64(series[t - 1]) - mean;
        let y = to_f64(series[t]) - mean;
        let e = y - slope * x;
        rss += e * e;
    }
    let dof = (n - 1).saturating_sub(1).max(1) as f64;
    let se = (rss / dof / sxx).sqrt();
    if se == 0.0 {
        return Ok(if slope < 1.0 { T::zero() } else { T::one() });
    }
    let t_stat = (slope - 1.0) / se;
    Ok(norm_cdf(sc::<T>(t_stat)))
}

/// Exact one-sided binomial sign test: probability of at least `successes`
/// out of `trials` under a fair coin.
pub fn sign_test_p_value(successes: usize, trials: usize) -> f64 {
    assert!(successes <= trials && trials > 0);
    // term = C(trials, i) / 2^trials, built iteratively to avoid overflow
    let mut term = 0.5f64.powi(trials as i32);
    let mut cumulative = 0.0;
    for i in 0..=trials {
        if i >= successes {
            cumulative += term;
        }
        if i < trials {
            term *= (trials - i) as f64 / (i + 1) as f64;
        }
    }
    cumulative.min(1.0)
}

/// Mean and (sample) standard deviation.
pub fn mean_std<T: Scalar>(values: &[T]) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let nf = sc::<T>(n as f64);
    let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / nf;
    if n == 1 {
        return (mean, T::zero());
    }
    let ss = values.iter().fold(T::zero(), |acc, &v| {
        let d = v - mean;
        acc + d * d
    });
    (mean, (ss / sc::<T>((n - 1) as f64)).sqrt())
}
