//! Stochastic final demand, consumption panels, leave-out shifter
//! estimation and shift-share aggregation.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_model::{NetworkModel, SectorLabel};
use crate::network_metrics::{exposure_shares, model_upstreamness, weighted_shock, OmegaParams};
use crate::util::{self, stream_rng};

const MAX_REDRAWS: usize = 1000;
const TAG_DEMAND: u64 = 1;
const TAG_PANEL: u64 = 2;

/// AR(1) final demand per destination with equicorrelated innovations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandProcess {
    pub dbar: Vec<f64>,
    pub rho: f64,
    pub sigma: Vec<f64>,
    pub varrho: f64,
    pub seed: u64,
}

impl DemandProcess {
    pub fn validate(&self) -> Result<()> {
        if self.dbar.len() != self.sigma.len() || self.dbar.is_empty() {
            return Err(Error::Parameter("dbar and sigma must be non-empty and of equal length".into()));
        }
        if self.dbar.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Parameter("dbar must be positive".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Parameter(format!("rho = {} must lie in (-1, 1)", self.rho)));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Parameter("sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn n_destinations(&self) -> usize {
        self.dbar.len()
    }
}

/// Σ with Σ_jj = σ_j² and Σ_jk = ϱσ_jσ_k.
pub fn build_covariance(sigma: &[f64], varrho: f64) -> Result<DMatrix<f64>> {
    let j = sigma.len();
    if j == 0 {
        return Err(Error::Parameter("empty sigma".into()));
    }
    if sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Parameter("sigma must be non-negative".into()));
    }
    let lower = if j > 1 { -1.0 / (j as f64 - 1.0) } else { -1.0 };
    if !(varrho >= lower && varrho <= 1.0) {
        return Err(Error::Parameter(format!(
            "varrho = {varrho} outside the PSD range [{lower}, 1] for {j} destinations"
        )));
    }
    Ok(DMatrix::from_fn(j, j, |a, b| if a == b { sigma[a] * sigma[a] } else { varrho * sigma[a] * sigma[b] }))
}

/// Lower-triangular factor of a positive semi-definite matrix. Zero pivots
/// (within a relative tolerance) produce zero columns, so degenerate
/// correlation structures factor without error.
pub fn psd_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = (0..n).map(|k| m[(k, k)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let d = m[(c, c)] - (0..c).map(|k| l[(c, k)] * l[(c, k)]).sum::<f64>();
        if d < -tol {
            return Err(Error::Parameter("covariance matrix is not positive semi-definite".into()));
        }
        if d <= tol {
            continue;
        }
        let piv = d.sqrt();
        l[(c, c)] = piv;
        for r in c + 1..n {
            let s = m[(r, c)] - (0..c).map(|k| l[(r, k)] * l[(c, k)]).sum::<f64>();
            l[(r, c)] = s / piv;
        }
    }
    // Verify the reconstruction; catches indefinite inputs that slip through
    // the zero-pivot branch.
    let err = (&l * l.transpose() - m).abs().max();
    if err > 1e-9 * scale {
        return Err(Error::Parameter("covariance matrix is not positive semi-definite".into()));
    }
    Ok(l)
}

/// Simulated demand levels, one J×T matrix per path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandPaths {
    pub paths: Vec<DMatrix<f64>>,
    /// Number of paths redrawn because a level was non-positive.
    pub rejections: usize,
}

/// Standard-normal innovations for one path, drawn from per-destination streams.
pub fn path_innovations(seed: u64, path: u64, attempt: u64, j: usize, t: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(j, t);
    for d in 0..j {
        let mut rng = stream_rng(seed, &[TAG_DEMAND, path, d as u64, attempt]);
        for k in 0..t {
            z[(d, k)] = StandardNormal.sample(&mut rng);
        }
    }
    z
}

/// Draws one path starting from the stationary distribution.
pub fn draw_path(process: &DemandProcess, chol: &DMatrix<f64>, t: usize, path: u64) -> Result<(DMatrix<f64>, usize)> {
    let j = process.n_destinations();
    let rho = process.rho;
    let stat = 1.0 / (1.0 - rho * rho).sqrt();
    for attempt in 0..MAX_REDRAWS {
        let z = path_innovations(process.seed, path, attempt as u64, j, t);
        let eps = chol * z;
        let mut d = DMatrix::zeros(j, t);
        for c in 0..j {
            d[(c, 0)] = process.dbar[c] + stat * eps[(c, 0)];
            for k in 1..t {
                d[(c, k)] = (1.0 - rho) * process.dbar[c] + rho * d[(c, k - 1)] + eps[(c, k)];
            }
        }
        if d.iter().all(|v| *v > 0.0) {
            return Ok((d, attempt));
        }
    }
    Err(Error::Simulation(format!("path {path}: {MAX_REDRAWS} consecutive draws produced non-positive demand")))
}

/// Draws `n_paths` independent demand paths of length `t` in parallel.
pub fn draw_demand(process: &DemandProcess, t: usize, n_paths: usize) -> Result<DemandPaths> {
    process.validate()?;
    if t < 2 {
        return Err(Error::Parameter("horizon must be at least 2".into()));
    }
    let cov = build_covariance(&process.sigma, process.varrho)?;
    let chol = psd_cholesky(&cov)?;
    let drawn: Vec<(DMatrix<f64>, usize)> =
        (0..n_paths as u64).into_par_iter().map(|p| draw_path(process, &chol, t, p)).collect::<Result<_>>()?;
    let rejections = drawn.iter().map(|x| x.1).sum();
    Ok(DemandPaths { paths: drawn.into_iter().map(|x| x.0).collect(), rejections })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthKind {
    /// ΔD/D₋₁.
    #[default]
    Arithmetic,
    /// Δ log D.
    Log,
}

/// Growth rates along the time axis of a (rows × T) level matrix.
pub fn growth_rates(levels: &DMatrix<f64>, kind: GrowthKind) -> DMatrix<f64> {
    let (n, t) = levels.shape();
    DMatrix::from_fn(n, t.saturating_sub(1), |r, k| match kind {
        GrowthKind::Arithmetic => (levels[(r, k + 1)] - levels[(r, k)]) / levels[(r, k)],
        GrowthKind::Log => levels[(r, k + 1)].ln() - levels[(r, k)].ln(),
    })
}

/// Destination shifters and their industry aggregates for one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShockPanel {
    pub d: DMatrix<f64>,
    pub eta_dest: DMatrix<f64>,
    pub eta_ind: DMatrix<f64>,
    pub upsilon: DMatrix<f64>,
}

pub fn shock_panel(model: &NetworkModel, params: &OmegaParams, d: &DMatrix<f64>, kind: GrowthKind) -> Result<ShockPanel> {
    let eta_dest = growth_rates(d, kind);
    let xi = exposure_shares(model)?.xi;
    let eta_ind = shift_share(&xi, &eta_dest)?;
    let n = model.n_sectors();
    let mut upsilon = DMatrix::zeros(n, eta_dest.ncols());
    for k in 0..eta_dest.ncols() {
        let col = weighted_shock(model, params, &eta_dest.column(k).into_owned())?;
        upsilon.set_column(k, &col);
    }
    Ok(ShockPanel { d: d.clone(), eta_dest, eta_ind, upsilon })
}

/// η_i^r = Σ_j ξ_j^r η_j for each period. Rows of ξ that are undefined
/// (NaN) propagate as NaN.
pub fn shift_share(xi: &DMatrix<f64>, eta_dest: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if xi.ncols() != eta_dest.nrows() {
        return Err(Error::Dimension(format!("ξ has {} destinations, η has {}", xi.ncols(), eta_dest.nrows())));
    }
    for r in 0..xi.nrows() {
        let s = xi.row(r).sum();
        if s.is_finite() && (s - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("share row {r} sums to {s}")));
        }
    }
    Ok(xi * eta_dest)
}

/// Simulated log final-demand flows by origin sector, destination and period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionPanel {
    pub sectors: Vec<SectorLabel>,
    pub n_dest: usize,
    pub n_periods: usize,
    /// Δ log f, indexed by [`ConsumptionPanel::idx`].
    pub dlog_f: Vec<f64>,
    pub noise_sd: f64,
    /// Generating shifters (J×T).
    pub shifters: DMatrix<f64>,
}

impl ConsumptionPanel {
    pub fn idx(&self, sector: usize, dest: usize, t: usize) -> usize {
        (sector * self.n_dest + dest) * self.n_periods + t
    }

    pub fn dlog(&self, sector: usize, dest: usize, t: usize) -> f64 {
        self.dlog_f[self.idx(sector, dest, t)]
    }

    /// Log levels starting from zero, N×J×(T+1).
    pub fn log_f(&self, sector: usize, dest: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_periods + 1];
        for t in 0..self.n_periods {
            out[t + 1] = out[t] + self.dlog(sector, dest, t);
        }
        out
    }
}

/// Generates Δ log f = η_jt + ν with ν ~ N(0, sd²) i.i.d.
pub fn synthesize_consumption_panel(
    sectors: &[SectorLabel],
    shifters: &DMatrix<f64>,
    idio_sd: f64,
    seed: u64,
) -> Result<ConsumptionPanel> {
    if shifters.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("shifters must be finite".into()));
    }
    if !(idio_sd >= 0.0) {
        return Err(Error::Parameter("noise sd must be non-negative".into()));
    }
    let (j, t) = shifters.shape();
    let n = sectors.len();
    let dlog_f: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = stream_rng(seed, &[TAG_PANEL, s as u64]);
            let mut out = Vec::with_capacity(j * t);
            for d in 0..j {
                for k in 0..t {
                    let nu: f64 = StandardNormal.sample(&mut rng);
                    out.push(shifters[(d, k)] + idio_sd * nu);
                }
            }
            out
        })
        .collect();
    Ok(ConsumptionPanel { sectors: sectors.to_vec(), n_dest: j, n_periods: t, dlog_f, noise_sd: idio_sd, shifters: shifters.clone() })
}

/// Leave-out shifter estimate: for each (j, t), the mean of Δ log f over
/// origin sectors outside country `origin` and outside industry `industry`.
pub fn estimate_shifters(panel: &ConsumptionPanel, origin: &str, industry: &str) -> Result<DMatrix<f64>> {
    let keep: Vec<usize> = (0..panel.sectors.len())
        .filter(|&k| panel.sectors[k].country != origin && panel.sectors[k].industry != industry)
        .collect();
    if keep.len() < 2 {
        return Err(Error::Estimation(format!(
            "leave-out cell for ({origin}, {industry}) has {} origin sectors; at least 2 required",
            keep.len()
        )));
    }
    let m = keep.len() as f64;
    Ok(DMatrix::from_fn(panel.n_dest, panel.n_periods, |d, t| {
        // Shifted mean: exact when all cells share the same value.
        let x0 = panel.dlog(keep[0], d, t);
        x0 + keep.iter().map(|&k| panel.dlog(k, d, t) - x0).sum::<f64>() / m
    }))
}

/// How σ_η is summarised across sectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdMeasure {
    /// Mean across sectors of each sector's time-series sd.
    #[default]
    TimeSeries,
    /// Mean across periods of the cross-sectional sd.
    CrossSectional,
}

/// Volatility summary of a sectors × periods panel, skipping NaN rows.
pub fn panel_sd(x: &DMatrix<f64>, measure: SdMeasure) -> f64 {
    match measure {
        SdMeasure::TimeSeries => {
            let v: Vec<f64> = (0..x.nrows())
                .map(|r| x.row(r).iter().copied().collect::<Vec<_>>())
                .filter(|r| r.iter().all(|v| v.is_finite()))
                .map(|r| util::sd(&r))
                .collect();
            util::mean(&v)
        }
        SdMeasure::CrossSectional => {
            let v: Vec<f64> = (0..x.ncols())
                .map(|c| x.column(c).iter().copied().filter(|v| v.is_finite()).collect::<Vec<_>>())
                .map(|c| util::sd(&c))
                .collect();
            util::mean(&v)
        }
    }
}

/// Population slope of sd(η_i) on U across sectors for a given ϱ,
/// with sd(η_i) = sqrt(ξ_iᵀ Σ(ϱ) ξ_i).
pub fn shift_share_sd_slope(xi: &DMatrix<f64>, u: &DVector<f64>, sigma_eta: &[f64], varrho: f64) -> Result<f64> {
    let cov = build_covariance(sigma_eta, varrho)?;
    let mut us = Vec::new();
    let mut sds = Vec::new();
    for r in 0..xi.nrows() {
        if !u[r].is_finite() || xi.row(r).iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = xi.row(r).transpose();
        us.push(u[r]);
        sds.push((x.transpose() * &cov * &x)[(0, 0)].max(0.0).sqrt());
    }
    if us.len() < 2 {
        return Err(Error::Estimation("fewer than two sectors with defined shares".into()));
    }
    Ok(util::slope(&us, &sds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub varrho: f64,
    pub slope: f64,
    pub iterations: usize,
    /// Whether the slope was nondecreasing in ϱ on an 11-point check grid.
    pub monotone: bool,
}

/// Bisection on ϱ ∈ [0, 0.99] so the population slope of sd(η_i) on U
/// matches `target`.
pub fn calibrate_varrho_from(xi: &DMatrix<f64>, u: &DVector<f64>, sigma_eta: &[f64], target: f64, tol: f64) -> Result<Calibration> {
    let f = |v: f64| shift_share_sd_slope(xi, u, sigma_eta, v);
    let (mut lo, mut hi) = (0.0, 0.99);
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    let grid: Vec<f64> = (0..=10).map(|k| f(0.099 * k as f64)).collect::<Result<_>>()?;
    let monotone = grid.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let (bmin, bmax) = (f_lo.min(f_hi), f_lo.max(f_hi));
    if !(target >= bmin && target <= bmax) {
        return Err(Error::Calibration { target, lo: bmin, hi: bmax });
    }
    let increasing = f_hi >= f_lo;
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    let mut s_mid = f(mid)?;
    while iterations < 60 {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        s_mid = f(mid)?;
        if (s_mid - target).abs() <= tol {
            break;
        }
        if (s_mid < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration { varrho: mid, slope: s_mid, iterations, monotone })
}

/// Calibrates ϱ on a model: ξ and U from the network, σ_η_j = σ_j / D̄_j.
pub fn calibrate_varrho(model: &NetworkModel, sigma: &[f64], target: f64) -> Result<Calibration> {
    let xi = exposure_shares(model)?.xi;
    let u = model_upstreamness(model)?.values;
    let sig_eta: Vec<f64> = sigma.iter().zip(model.dbar.iter()).map(|(s, d)| s / d).collect();
    calibrate_varrho_from(&xi, &u, &sig_eta, target, 1e-6)
}
