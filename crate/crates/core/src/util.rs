//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for the stream addressed by `(seed, keys...)`.
///
/// Streams depend only on their address, so draws do not depend on the
/// order in which threads request them.
pub fn stream_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for k in keys {
        h = splitmix(h ^ splitmix(*k));
    }
    ChaCha8Rng::seed_from_u64(h)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Tauchen discretisation of `x' = (1−ρ)μ + ρx + σε` on `n` points spanning
/// `μ ± m·σ/√(1−ρ²)`. Returns the grid and the row-stochastic transition matrix.
pub fn tauchen(mu: f64, rho: f64, sigma: f64, n: usize, m: f64) -> (DVector<f64>, DMatrix<f64>) {
    assert!(n >= 2, "tauchen needs at least two states");
    let sd = sigma / (1.0 - rho * rho).sqrt();
    let lo = mu - m * sd;
    let step = 2.0 * m * sd / (n - 1) as f64;
    let grid = DVector::from_fn(n, |k, _| lo + step * k as f64);
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let mean = (1.0 - rho) * mu + rho * grid[i];
        if sigma == 0.0 {
            let k = ((mean - lo) / step).round().clamp(0.0, (n - 1) as f64) as usize;
            p[(i, k)] = 1.0;
            continue;
        }
        for k in 0..n {
            let up = if k == n - 1 { 1.0 } else { norm_cdf((grid[k] + step / 2.0 - mean) / sigma) };
            let dn = if k == 0 { 0.0 } else { norm_cdf((grid[k] - step / 2.0 - mean) / sigma) };
            p[(i, k)] = up - dn;
        }
        let s = p.row(i).sum();
        p.row_mut(i).scale_mut(1.0 / s);
    }
    (grid, p)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with the `n − 1` denominator.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Median of the finite entries.
pub fn median(x: &[f64]) -> f64 {
    let mut v: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// OLS slope of `y` on `x` with an intercept.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
