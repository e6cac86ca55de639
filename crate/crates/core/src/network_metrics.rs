//! Positional statistics of a production network.
//!
//! Every application of a Leontief-type inverse goes through an LU
//! factorisation; truncated power series appear only in tests.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_model::{IoTable, NetworkModel};

/// Inventory rule parameters shared by all sectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaParams {
    pub alpha: f64,
    pub rho: f64,
}

impl OmegaParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        let p = Self { alpha, rho };
        p.validate()?;
        Ok(p)
    }

    /// ω = 1 + α(ρ − 1).
    pub fn omega(&self) -> f64 {
        1.0 + self.alpha * (self.rho - 1.0)
    }

    /// Requires α ≥ 0, ρ ∈ (−1, 1] and ω ∈ (0, 1]. The endpoint ω = 1 is
    /// the no-inventory (or permanent-shock) case, where 𝒰 is evaluated
    /// through its series limit.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha = {} must be non-negative", self.alpha)));
        }
        if !(self.rho > -1.0 && self.rho <= 1.0) {
            return Err(Error::Domain(format!("rho = {} must lie in (-1, 1]", self.rho)));
        }
        let w = self.omega();
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::Domain(format!("omega = {w} outside (0, 1) for alpha = {}, rho = {}", self.alpha, self.rho)));
        }
        Ok(())
    }
}

/// LU factorisation of `I − k·M`, reusable across right-hand sides.
pub struct Resolvent {
    lu: LU<f64, Dyn, Dyn>,
    n: usize,
}

impl Resolvent {
    pub fn new(m: &DMatrix<f64>, k: f64) -> Result<Self> {
        let n = m.nrows();
        let lhs = DMatrix::identity(n, n) - m * k;
        let norm1 = one_norm(&lhs);
        let lu = lhs.lu();
        let r = Self { lu, n };
        let inv = r.solve_mat(&DMatrix::identity(n, n)).ok_or_else(|| Error::Numerical {
            msg: "I − kÃ is singular".into(),
            cond: f64::INFINITY,
        })?;
        let cond = norm1 * one_norm(&inv);
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::Numerical { msg: "I − kÃ is near-singular".into(), cond });
        }
        Ok(r)
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(b).expect("factorisation checked at construction")
    }

    fn solve_mat(&self, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.lu.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.solve_mat(b).expect("factorisation checked at construction")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_matrix(&DMatrix::identity(self.n, self.n))
    }
}

/// Maximum absolute column sum.
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Power-iteration estimate of the spectral radius of a non-negative matrix.
pub fn spectral_radius_estimate(m: &DMatrix<f64>, iters: usize) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..iters {
        let y = m * &x;
        let nrm = y.iter().map(|v| v.abs()).sum::<f64>();
        if nrm == 0.0 {
            return 0.0;
        }
        est = nrm / x.iter().map(|v| v.abs()).sum::<f64>();
        x = y / nrm;
    }
    est
}

/// Tail bound ‖M‖₁^{k+1}/(1 − ‖M‖₁) for a Neumann series truncated after `k` terms.
pub fn neumann_tail_bound(m: &DMatrix<f64>, terms: usize) -> f64 {
    let q = one_norm(m);
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q.powi(terms as i32 + 1) / (1.0 - q)
    }
}

/// L̃ = [I − Ã]⁻¹.
pub fn leontief(model: &NetworkModel) -> Result<DMatrix<f64>> {
    Ok(Resolvent::new(&model.atilde, 1.0)?.inverse())
}

/// A per-sector statistic with the sectors it could not be computed for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorStat {
    /// NaN for excluded sectors.
    pub values: DVector<f64>,
    pub excluded: Vec<usize>,
}

fn data_requirements(table: &IoTable) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if table.delta_n.as_ref().is_some_and(|d| d.iter().any(|v| *v != 0.0)) {
        return Err(Error::Validation("table carries inventory changes; apply inventory_correct first".into()));
    }
    let n = table.n_sectors();
    let dead: Vec<usize> = (0..n).filter(|&s| table.y[s] <= 0.0).collect();
    let a = DMatrix::from_fn(n, n, |r, s| {
        if table.y[s] > 0.0 && table.y[r] > 0.0 { table.z[(r, s)] / table.y[s] } else { 0.0 }
    });
    Ok((a, dead))
}

/// U = Ŷ⁻¹[I − 𝒜]⁻²F with the data requirements 𝒜 and total final demand.
pub fn upstreamness(table: &IoTable) -> Result<SectorStat> {
    let (a, dead) = data_requirements(table)?;
    let n = table.n_sectors();
    let solver = Resolvent::new(&a, 1.0)?;
    let f = DVector::from_fn(n, |r, _| table.f.row(r).sum());
    let l2f = solver.solve(&solver.solve(&f));
    let values = DVector::from_fn(n, |r, _| if dead.contains(&r) { f64::NAN } else { l2f[r] / table.y[r] });
    Ok(SectorStat { values, excluded: dead })
}

/// Solves D = 1 + 𝒜ᵀD, the average number of stages embodied in a sector's output.
pub fn downstreamness(table: &IoTable) -> Result<SectorStat> {
    let (a, dead) = data_requirements(table)?;
    let n = table.n_sectors();
    let solver = Resolvent::new(&a.transpose(), 1.0)?;
    let d = solver.solve(&DVector::from_element(n, 1.0));
    let values = DVector::from_fn(n, |r, _| if dead.contains(&r) { f64::NAN } else { d[r] });
    Ok(SectorStat { values, excluded: dead })
}

/// U evaluated on the model objects: L̃²BD̄ / L̃BD̄ (the ρ → 1 limit of 𝒰).
pub fn model_upstreamness(model: &NetworkModel) -> Result<SectorStat> {
    let solver = Resolvent::new(&model.atilde, 1.0)?;
    let bd = &model.b * &model.dbar;
    let y = solver.solve(&bd);
    let y2 = solver.solve(&y);
    let excluded: Vec<usize> = (0..model.n_sectors()).filter(|&r| y[r] <= 0.0).collect();
    let values = DVector::from_fn(model.n_sectors(), |r, _| if y[r] > 0.0 { y2[r] / y[r] } else { f64::NAN });
    Ok(SectorStat { values, excluded })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureShares {
    /// ξ_j^r; rows of undefined sectors are NaN.
    pub xi: DMatrix<f64>,
    pub undefined: Vec<usize>,
}

/// ξ_j^r = (L̃B_jD̄_j)_r / (L̃BD̄)_r.
pub fn exposure_shares(model: &NetworkModel) -> Result<ExposureShares> {
    let solver = Resolvent::new(&model.atilde, 1.0)?;
    let n = model.n_sectors();
    let j = model.n_destinations();
    let bd = DMatrix::from_fn(n, j, |r, c| model.b[(r, c)] * model.dbar[c]);
    let x = solver.solve_matrix(&bd);
    let mut xi = DMatrix::from_element(n, j, f64::NAN);
    let mut undefined = Vec::new();
    for r in 0..n {
        let tot = x.row(r).sum();
        if tot > 0.0 {
            for c in 0..j {
                xi[(r, c)] = x[(r, c)] / tot;
            }
        } else {
            undefined.push(r);
        }
    }
    Ok(ExposureShares { xi, undefined })
}

/// Herfindahl index of each sector's destination shares. Undefined rows give NaN.
pub fn hhi(xi: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(xi.nrows());
    for r in 0..xi.nrows() {
        let row = xi.row(r);
        if row.iter().any(|v| v.is_nan()) {
            out[r] = f64::NAN;
            continue;
        }
        if row.iter().any(|v| *v < -1e-12) || (row.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("share row {r} does not sum to one")));
        }
        out[r] = row.iter().map(|v| v * v).sum();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InventoryUpstreamness {
    /// 𝒰_j^r; NaN where sector r does not reach destination j.
    pub ucal: DMatrix<f64>,
    /// 𝒰^r = Σ_j ξ_j^r 𝒰_j^r.
    pub avg: DVector<f64>,
}

/// Inventory-weighted upstreamness.
///
/// Uses Σ_n Ã^n Σ_{i≤n} ω^i = L̃[I − ωÃ]⁻¹, so that
/// 𝒰_j^r = (L̃[I − ωÃ]⁻¹B_j)_r / (L̃B_j)_r. This equals the
/// 1/(1−ω) resolvent form for ω < 1 and stays well defined at ω = 1.
pub fn inventory_upstreamness(model: &NetworkModel, params: &OmegaParams) -> Result<InventoryUpstreamness> {
    params.validate()?;
    let w = params.omega();
    let l = Resolvent::new(&model.atilde, 1.0)?;
    let r = Resolvent::new(&model.atilde, w)?;
    let n = model.n_sectors();
    let j = model.n_destinations();
    let mut ucal = DMatrix::from_element(n, j, f64::NAN);
    let mut num_avg = DVector::<f64>::zeros(n);
    let mut den_avg = DVector::<f64>::zeros(n);
    for c in 0..j {
        let bj = model.b.column(c).into_owned();
        let lb = l.solve(&bj);
        let mb = l.solve(&r.solve(&bj));
        for k in 0..n {
            if lb[k] > 0.0 {
                ucal[(k, c)] = mb[k] / lb[k];
            }
            num_avg[k] += mb[k] * model.dbar[c];
            den_avg[k] += lb[k] * model.dbar[c];
        }
    }
    let avg = DVector::from_fn(n, |k, _| if den_avg[k] > 0.0 { num_avg[k] / den_avg[k] } else { f64::NAN });
    Ok(InventoryUpstreamness { ucal, avg })
}

/// 𝒰_j^r through the explicit resolvent identity
/// 1/(1−ω) − (ω/(1−ω))·([I−ωÃ]⁻¹B_j)_r/(L̃B_j)_r; requires ω < 1.
pub fn inventory_upstreamness_resolvent(model: &NetworkModel, params: &OmegaParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let w = params.omega();
    if w >= 1.0 {
        return Err(Error::Domain("resolvent form needs omega < 1".into()));
    }
    let l = Resolvent::new(&model.atilde, 1.0)?;
    let r = Resolvent::new(&model.atilde, w)?;
    let n = model.n_sectors();
    let mut out = DMatrix::from_element(n, model.n_destinations(), f64::NAN);
    for c in 0..model.n_destinations() {
        let bj = model.b.column(c).into_owned();
        let lb = l.solve(&bj);
        let rb = r.solve(&bj);
        for k in 0..n {
            if lb[k] > 0.0 {
                out[(k, c)] = 1.0 / (1.0 - w) - w / (1.0 - w) * rb[k] / lb[k];
            }
        }
    }
    Ok(out)
}

/// υ^r = Σ_j 𝒰_j^r ξ_j^r η_j.
///
/// Evaluated as η^r/(1−ω) − (ω/(1−ω))·([I−ωÃ]⁻¹ Σ_j B_jD̄_jη_j)_r/(L̃BD̄)_r;
/// near ω = 1 the explicit double sum is used instead.
pub fn weighted_shock(model: &NetworkModel, params: &OmegaParams, eta: &DVector<f64>) -> Result<DVector<f64>> {
    params.validate()?;
    if eta.len() != model.n_destinations() {
        return Err(Error::Dimension(format!("eta has {} entries for {} destinations", eta.len(), model.n_destinations())));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("eta must be finite".into()));
    }
    let w = params.omega();
    let n = model.n_sectors();
    if 1.0 - w < 1e-6 {
        let iu = inventory_upstreamness(model, params)?;
        let xi = exposure_shares(model)?.xi;
        return Ok(DVector::from_fn(n, |r, _| {
            (0..eta.len())
                .filter(|&c| xi[(r, c)] > 0.0)
                .map(|c| iu.ucal[(r, c)] * xi[(r, c)] * eta[c])
                .sum()
        }));
    }
    let l = Resolvent::new(&model.atilde, 1.0)?;
    let r = Resolvent::new(&model.atilde, w)?;
    let bd = &model.b * &model.dbar;
    let bde = &model.b * DVector::from_fn(eta.len(), |c, _| model.dbar[c] * eta[c]);
    let y = l.solve(&bd);
    let le = l.solve(&bde);
    let re = r.solve(&bde);
    Ok(DVector::from_fn(n, |k, _| {
        if y[k] > 0.0 {
            (le[k] / (1.0 - w) - w / (1.0 - w) * re[k]) / y[k]
        } else {
            f64::NAN
        }
    }))
}

/// Number of suppliers (in) and buyers (out) with positive input requirement.
pub fn degrees(model: &NetworkModel) -> (DVector<f64>, DVector<f64>) {
    let n = model.n_sectors();
    let indeg = DVector::from_fn(n, |s, _| model.a.column(s).iter().filter(|v| **v > 0.0).count() as f64);
    let outdeg = DVector::from_fn(n, |r, _| model.a.row(r).iter().filter(|v| **v > 0.0).count() as f64);
    (indeg, outdeg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretized {
    /// 1 where a_rs ≥ cutoff.
    pub adjacency: DMatrix<u8>,
    /// −1 for η ≤ η*, 0 for η* < η < η**, `None` for η ≥ η**.
    pub shocks: Vec<Option<i8>>,
}

/// Binary network and three-way shock coding.
pub fn discretize(model: &NetworkModel, a_cut: f64, eta: &[f64], eta_star: f64, eta_starstar: f64) -> Result<Discretized> {
    if !(eta_star < 0.0 && eta_starstar > 0.0) {
        return Err(Error::Parameter(format!("thresholds must satisfy η* < 0 < η**, got {eta_star}, {eta_starstar}")));
    }
    if !(a_cut > 0.0) {
        return Err(Error::Parameter("network cutoff must be positive".into()));
    }
    let adjacency = model.a.map(|v| u8::from(v >= a_cut));
    let shocks = eta
        .iter()
        .map(|&e| {
            if e <= eta_star {
                Some(-1)
            } else if e < eta_starstar {
                Some(0)
            } else {
                None
            }
        })
        .collect();
    Ok(Discretized { adjacency, shocks })
}

/// Everything the `metrics` command reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMetrics {
    pub l: DMatrix<f64>,
    pub u: DVector<f64>,
    pub ddown: DVector<f64>,
    pub xi: DMatrix<f64>,
    pub hhi: DVector<f64>,
    pub indegree: DVector<f64>,
    pub outdegree: DVector<f64>,
    pub ucal: DMatrix<f64>,
    pub ucal_avg: DVector<f64>,
    /// Sectors excluded from one or more statistics (zero output or sales).
    pub excluded: Vec<usize>,
}

pub fn position_metrics(table: &IoTable, model: &NetworkModel, params: &OmegaParams) -> Result<PositionMetrics> {
    let u = upstreamness(table)?;
    let d = downstreamness(table)?;
    let xs = exposure_shares(model)?;
    let h = hhi(&xs.xi)?;
    let (indegree, outdegree) = degrees(model);
    let iu = inventory_upstreamness(model, params)?;
    let mut excluded: Vec<usize> = u.excluded.iter().chain(&d.excluded).chain(&xs.undefined).copied().collect();
    excluded.sort_unstable();
    excluded.dedup();
    Ok(PositionMetrics {
        l: leontief(model)?,
        u: u.values,
        ddown: d.values,
        xi: xs.xi,
        hhi: h,
        indegree,
        outdegree,
        ucal: iu.ucal,
        ucal_avg: iu.avg,
        excluded,
    })
}
