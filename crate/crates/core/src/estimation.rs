//! Panel regressions on simulated sector data: within-transformation,
//! OLS, binned upstreamness interactions, the model-consistent (δ1, δ2)
//! specification and the saturated triple interaction.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::hetero_output;
use crate::error::{Error, Result};
use crate::io_model::NetworkModel;
use crate::network_metrics::{exposure_shares, inventory_upstreamness, leontief, model_upstreamness, OmegaParams};
use crate::shock_engine::{shock_panel, DemandPaths, GrowthKind};
use crate::util::stream_rng;

/// Long-form panel: one row per (unit, time) with named numeric columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub unit: Vec<usize>,
    pub time: Vec<usize>,
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(unit: Vec<usize>, time: Vec<usize>) -> Result<Self> {
        if unit.len() != time.len() {
            return Err(Error::Dimension("unit and time columns differ in length".into()));
        }
        Ok(Self { unit, time, names: Vec::new(), data: Vec::new() })
    }

    pub fn n_rows(&self) -> usize {
        self.unit.len()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_rows() {
            return Err(Error::Dimension(format!("column {name} has {} rows, panel has {}", values.len(), self.n_rows())));
        }
        if let Some(k) = self.names.iter().position(|n| *n == name) {
            self.data[k] = values;
        } else {
            self.names.push(name);
            self.data.push(values);
        }
        Ok(())
    }

    pub fn col(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.data[k].as_slice())
            .ok_or_else(|| Error::Estimation(format!("panel has no column {name}")))
    }

    /// Keeps the rows where `keep` is true.
    pub fn filter(&self, keep: &[bool]) -> Self {
        let pick = |v: &[usize]| v.iter().zip(keep).filter(|x| *x.1).map(|x| *x.0).collect();
        Self {
            unit: pick(&self.unit),
            time: pick(&self.time),
            names: self.names.clone(),
            data: self.data.iter().map(|c| c.iter().zip(keep).filter(|x| *x.1).map(|x| *x.0).collect()).collect(),
        }
    }

    /// Drops rows with a non-finite value in any of `names`.
    pub fn complete_cases(&self, names: &[&str]) -> Result<Self> {
        let cols: Vec<&[f64]> = names.iter().map(|n| self.col(n)).collect::<Result<_>>()?;
        let keep: Vec<bool> = (0..self.n_rows()).map(|i| cols.iter().all(|c| c[i].is_finite())).collect();
        Ok(self.filter(&keep))
    }

    /// Appends the rows of `other`, which must carry the same columns.
    pub fn append(&mut self, other: &Panel) -> Result<()> {
        if self.n_rows() == 0 && self.names.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.names != other.names {
            return Err(Error::Dimension("panels carry different columns".into()));
        }
        self.unit.extend_from_slice(&other.unit);
        self.time.extend_from_slice(&other.time);
        for (c, o) in self.data.iter_mut().zip(&other.data) {
            c.extend_from_slice(o);
        }
        Ok(())
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["unit".to_string(), "time".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.unit[i].to_string(), self.time[i].to_string()];
            rec.extend(self.data.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "unit" || header[1] != "time" {
            return Err(Error::Parse { line: 1, msg: "panel header must start with unit,time".into() });
        }
        let names = header[2..].to_vec();
        let mut p = Panel { names, data: vec![Vec::new(); header.len() - 2], ..Default::default() };
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k as u64 + 2;
            if rec.len() != header.len() {
                return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", header.len(), rec.len()) });
            }
            let int = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("{s}: {e}") });
            p.unit.push(int(&rec[0])?);
            p.time.push(int(&rec[1])?);
            for (c, field) in rec.iter().skip(2).enumerate() {
                let v = field.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("{field}: {e}") })?;
                p.data[c].push(v);
            }
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }
}

/// Fixed-effect dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeKey {
    Unit,
    Time,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demeaned {
    pub panel: Panel,
    /// Rows that are the only member of their group; their values are zero.
    pub singletons: Vec<usize>,
}

fn group_ids(panel: &Panel, key: FeKey) -> (Vec<usize>, usize) {
    let raw = match key {
        FeKey::Unit => &panel.unit,
        FeKey::Time => &panel.time,
    };
    let mut map = HashMap::new();
    let ids = raw
        .iter()
        .map(|v| {
            let n = map.len();
            *map.entry(*v).or_insert(n)
        })
        .collect();
    (ids, map.len())
}

fn subtract_group_means(x: &mut [f64], ids: &[usize], groups: usize, counts: &[f64]) {
    let mut sums = vec![0.0; groups];
    for (v, g) in x.iter().zip(ids) {
        sums[*g] += v;
    }
    for (v, g) in x.iter_mut().zip(ids) {
        *v -= sums[*g] / counts[*g];
    }
}

/// Within transformation of every data column. One key is exact; several
/// keys use alternating projections to 1e−14.
pub fn demean(panel: &Panel, keys: &[FeKey]) -> Result<Demeaned> {
    if keys.is_empty() {
        return Err(Error::Estimation("no fixed-effect keys given".into()));
    }
    let groups: Vec<(Vec<usize>, usize, Vec<f64>)> = keys
        .iter()
        .map(|k| {
            let (ids, g) = group_ids(panel, *k);
            let mut counts = vec![0.0; g];
            for i in &ids {
                counts[*i] += 1.0;
            }
            (ids, g, counts)
        })
        .collect();
    let singletons: Vec<usize> =
        (0..panel.n_rows()).filter(|&r| groups.iter().any(|(ids, _, counts)| counts[ids[r]] == 1.0)).collect();
    if !singletons.is_empty() {
        log::warn!("{} singleton rows zeroed by the within transformation", singletons.len());
    }
    let mut out = panel.clone();
    for col in out.data.iter_mut() {
        if groups.len() == 1 {
            let (ids, g, counts) = &groups[0];
            subtract_group_means(col, ids, *g, counts);
        } else {
            for _ in 0..10_000 {
                let before = col.clone();
                for (ids, g, counts) in &groups {
                    subtract_group_means(col, ids, *g, counts);
                }
                let change = col.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if change < 1e-14 {
                    break;
                }
            }
        }
        for &r in &singletons {
            col[r] = 0.0;
        }
    }
    Ok(Demeaned { panel: out, singletons })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    /// Homoskedastic standard errors.
    pub se: Vec<f64>,
    pub sigma2: f64,
    pub r2: f64,
    pub n: usize,
    /// ‖Xᵀe‖∞ / (‖X‖_F‖y‖).
    pub orthogonality: f64,
}

impl RegressionResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|k| self.coef[k])
    }
}

/// Columns whose Gram-Schmidt residual vanishes against the preceding ones.
fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for k in 0..x.ncols() {
        let orig = x.column(k).into_owned();
        let norm = orig.norm();
        let mut v = orig.clone();
        for _ in 0..2 {
            for q in &basis {
                let p = q.dot(&v);
                v.axpy(-p, q, 1.0);
            }
        }
        let rest = v.norm();
        if norm == 0.0 || rest <= 1e-9 * norm {
            bad.push(k);
        } else {
            basis.push(v / rest);
        }
    }
    bad
}

/// OLS by Householder QR. Rank deficiency is reported with the names of
/// the columns that are linear combinations of earlier ones.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<RegressionResult> {
    let (n, k) = x.shape();
    if y.len() != n || names.len() != k {
        return Err(Error::Dimension(format!("y has {} rows, X is {n}×{k}, {} names", y.len(), names.len())));
    }
    if n <= k {
        return Err(Error::Estimation(format!("{n} observations for {k} regressors")));
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Estimation("non-finite values in regression data".into()));
    }
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(Error::RankDeficient(bad.into_iter().map(|b| names[b].clone()).collect()));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical { msg: "singular R in QR".into(), cond: f64::INFINITY })?;
    let resid = y - x * &coef;
    let ssr = resid.norm_squared();
    let sigma2 = ssr / (n - k) as f64;
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerical { msg: "singular R in QR".into(), cond: f64::INFINITY })?;
    let se = (0..k).map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt()).collect();
    let scale = x.norm() * y.norm();
    let orthogonality = if scale > 0.0 { (x.transpose() * &resid).amax() / scale } else { 0.0 };
    Ok(RegressionResult { names: names.to_vec(), coef: coef.iter().copied().collect(), se, sigma2, r2, n, orthogonality })
}

/// Within estimator: demeans `y` and `x` columns by the keys and runs OLS
/// without an intercept.
pub fn within_ols(panel: &Panel, y: &str, x: &[&str], keys: &[FeKey]) -> Result<RegressionResult> {
    let mut cols: Vec<&str> = vec![y];
    cols.extend_from_slice(x);
    let sub = panel.complete_cases(&cols)?;
    let mut slim = Panel::new(sub.unit.clone(), sub.time.clone())?;
    for c in &cols {
        slim.push_column(*c, sub.col(c)?.to_vec())?;
    }
    let dm = if keys.is_empty() { slim } else { demean(&slim, keys)?.panel };
    let yv = DVector::from_column_slice(dm.col(y)?);
    let xm = DMatrix::from_fn(dm.n_rows(), x.len(), |i, j| dm.col(x[j]).map(|c| c[i]).unwrap_or(f64::NAN));
    ols(&yv, &xm, &x.iter().map(|s| s.to_string()).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedResult {
    /// (lower, upper) edges; the top bin is open.
    pub bins: Vec<(f64, f64)>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub counts: Vec<usize>,
    /// Original bin indices that were empty and merged into the next bin.
    pub merged: Vec<usize>,
    pub result: RegressionResult,
}

/// Integer edges 1, 2, …, 6; the last bin absorbs U ≥ 6.
pub fn default_bin_edges() -> Vec<f64> {
    (1..=6).map(f64::from).collect()
}

/// Δlog Y = Σ_j β_j·η·1[U ∈ bin j] + unit effect + ε.
///
/// `edges` are the lower bounds of the bins; values below the first edge
/// fall into the first bin. Empty bins are merged into the next non-empty
/// bin (the last one into the previous).
pub fn binned_regression(panel: &Panel, y: &str, eta: &str, u: &str, edges: &[f64]) -> Result<BinnedResult> {
    if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("bin edges must be strictly increasing and non-empty".into()));
    }
    let sub = panel.complete_cases(&[y, eta, u])?;
    let uv = sub.col(u)?;
    let bin_of = |x: f64| edges.iter().rposition(|e| x >= *e).unwrap_or(0);
    let raw: Vec<usize> = uv.iter().map(|x| bin_of(*x)).collect();
    let nb = edges.len();
    let mut counts = vec![0usize; nb];
    for b in &raw {
        counts[*b] += 1;
    }
    if counts.iter().all(|c| *c == 0) {
        return Err(Error::Estimation("no observations".into()));
    }
    // Map each original bin to a live group.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut merged = Vec::new();
    for b in 0..nb {
        pending.push(b);
        if counts[b] > 0 {
            groups.push(std::mem::take(&mut pending));
        } else {
            merged.push(b);
        }
    }
    if !pending.is_empty() {
        groups.last_mut().expect("at least one live bin").extend(pending);
    }
    if !merged.is_empty() {
        log::warn!("empty upstreamness bins {merged:?} merged");
    }
    let mut group_of = vec![0usize; nb];
    for (g, members) in groups.iter().enumerate() {
        for m in members {
            group_of[*m] = g;
        }
    }
    let ng = groups.len();
    let bins: Vec<(f64, f64)> = groups
        .iter()
        .map(|m| {
            let lo = edges[*m.iter().min().unwrap()];
            let top = *m.iter().max().unwrap();
            (lo, if top + 1 < nb { edges[top + 1] } else { f64::INFINITY })
        })
        .collect();
    let ev = sub.col(eta)?.to_vec();
    let mut work = Panel::new(sub.unit.clone(), sub.time.clone())?;
    work.push_column(y, sub.col(y)?.to_vec())?;
    let names: Vec<String> = (0..ng).map(|g| format!("eta_bin{g}")).collect();
    for (g, name) in names.iter().enumerate() {
        work.push_column(name.clone(), (0..ev.len()).map(|i| if group_of[raw[i]] == g { ev[i] } else { 0.0 }).collect())?;
    }
    let xn: Vec<&str> = names.iter().map(String::as_str).collect();
    let result = within_ols(&work, y, &xn, &[FeKey::Unit])?;
    let gcounts = groups.iter().map(|m| m.iter().map(|b| counts[*b]).sum()).collect();
    Ok(BinnedResult { bins, beta: result.coef.clone(), se: result.se.clone(), counts: gcounts, merged, result })
}

/// How the υ regressor enters the model-consistent regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsilonLoading {
    /// Regressor α_i·υ_i; δ2 estimates ρ.
    #[default]
    AlphaWeighted,
    /// Regressor υ_i; δ2 estimates αρ.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConsistent {
    pub delta1: f64,
    pub delta2: f64,
    /// αρ implied by δ2 and the loading convention.
    pub implied_alpha_rho: f64,
    pub loading: UpsilonLoading,
    pub result: RegressionResult,
}

/// Δlog Y = δ1·η + δ2·(α·υ) + unit effect + ε.
pub fn model_consistent_regression(panel: &Panel, y: &str, eta: &str, upsilon: &str, alpha: &str, loading: UpsilonLoading) -> Result<ModelConsistent> {
    let sub = panel.complete_cases(&[y, eta, upsilon, alpha])?;
    let a = sub.col(alpha)?;
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::Estimation("α = 0 everywhere: δ2 is not identified".into()));
    }
    let ups = sub.col(upsilon)?;
    let reg: Vec<f64> = match loading {
        UpsilonLoading::AlphaWeighted => ups.iter().zip(a).map(|(u, a)| u * a).collect(),
        UpsilonLoading::Raw => ups.to_vec(),
    };
    let mut work = Panel::new(sub.unit.clone(), sub.time.clone())?;
    work.push_column(y, sub.col(y)?.to_vec())?;
    work.push_column("eta", sub.col(eta)?.to_vec())?;
    work.push_column("alpha_upsilon", reg)?;
    let result = match within_ols(&work, y, &["eta", "alpha_upsilon"], &[FeKey::Unit]) {
        Err(Error::RankDeficient(cols)) => {
            return Err(Error::Estimation(format!(
                "η and υ are collinear ({cols:?}); single-destination data cannot separate them, use multi-destination data"
            )))
        }
        other => other?,
    };
    let (delta1, delta2) = (result.coef[0], result.coef[1]);
    let abar = crate::util::mean(a);
    let implied_alpha_rho = match loading {
        UpsilonLoading::AlphaWeighted => delta2 * abar,
        UpsilonLoading::Raw => delta2,
    };
    Ok(ModelConsistent { delta1, delta2, implied_alpha_rho, loading, result })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturated {
    /// Loadings on η, η·U, η·α and η·U·α.
    pub beta: [f64; 4],
    pub result: RegressionResult,
}

/// Δlog Y = β1η + β2ηU + β3ηα + β4ηUα + unit effect + ε.
pub fn saturated_regression(panel: &Panel, y: &str, eta: &str, u: &str, alpha: &str) -> Result<Saturated> {
    let sub = panel.complete_cases(&[y, eta, u, alpha])?;
    let (e, uu, a) = (sub.col(eta)?, sub.col(u)?, sub.col(alpha)?);
    let n = sub.n_rows();
    let mut work = Panel::new(sub.unit.clone(), sub.time.clone())?;
    work.push_column(y, sub.col(y)?.to_vec())?;
    work.push_column("eta", e.to_vec())?;
    work.push_column("eta_u", (0..n).map(|i| e[i] * uu[i]).collect())?;
    work.push_column("eta_alpha", (0..n).map(|i| e[i] * a[i]).collect())?;
    work.push_column("eta_u_alpha", (0..n).map(|i| e[i] * uu[i] * a[i]).collect())?;
    let result = within_ols(&work, y, &["eta", "eta_u", "eta_alpha", "eta_u_alpha"], &[FeKey::Unit])?;
    let c = &result.coef;
    Ok(Saturated { beta: [c[0], c[1], c[2], c[3]], result })
}

/// Panel of first-order model growth: Δlog Y = η^r + αρυ^r (+ noise).
///
/// One unit per (path, sector). Columns: `dlogy`, `eta`, `upsilon`, `u`
/// (model upstreamness), `ucal` (average 𝒰) and `alpha`. Sectors with
/// undefined exposure shares are dropped.
pub fn first_order_panel(model: &NetworkModel, params: &OmegaParams, demand: &DemandPaths, noise_sd: f64, seed: u64) -> Result<Panel> {
    let n = model.n_sectors();
    let u = model_upstreamness(model)?.values;
    let ucal = inventory_upstreamness(model, params)?.avg;
    let mut out = Panel::default();
    for (p, d) in demand.paths.iter().enumerate() {
        let sp = shock_panel(model, params, d, GrowthKind::Arithmetic)?;
        let t = sp.eta_ind.ncols();
        let mut rng = stream_rng(seed, &[3, p as u64]);
        let mut panel = Panel::new(Vec::with_capacity(n * t), Vec::with_capacity(n * t))?;
        let mut cols: [Vec<f64>; 6] = Default::default();
        for r in 0..n {
            for k in 0..t {
                let e = sp.eta_ind[(r, k)];
                let ups = sp.upsilon[(r, k)];
                if !e.is_finite() || !ups.is_finite() {
                    continue;
                }
                let z: f64 = if noise_sd > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
                panel.unit.push(p * n + r);
                panel.time.push(k);
                cols[0].push(e + params.alpha * params.rho * ups + noise_sd * z);
                cols[1].push(e);
                cols[2].push(ups);
                cols[3].push(u[r]);
                cols[4].push(ucal[r]);
                cols[5].push(params.alpha);
            }
        }
        for (name, c) in ["dlogy", "eta", "upsilon", "u", "ucal", "alpha"].iter().zip(cols) {
            panel.push_column(*name, c)?;
        }
        out.append(&panel)?;
    }
    Ok(out)
}

/// Panel of simulated growth under sector-specific α. Columns: `dlogy`
/// (arithmetic growth of simulated output), `eta`, `u`, `alpha` and
/// `alpha_chain` (the Leontief-weighted inventory measure L̃α).
pub fn hetero_panel(model: &NetworkModel, alpha: &DVector<f64>, rho: f64, demand: &DemandPaths) -> Result<Panel> {
    let n = model.n_sectors();
    let u = model_upstreamness(model)?.values;
    let xi = exposure_shares(model)?.xi;
    // Inventories along the chain: own plus those of every downstream customer.
    let chain = leontief(model)? * alpha;
    let mut out = Panel::default();
    for (p, d) in demand.paths.iter().enumerate() {
        let y = hetero_output(model, alpha, rho, d)?;
        let eta_dest = crate::shock_engine::growth_rates(d, GrowthKind::Arithmetic);
        let eta = &xi * &eta_dest;
        let t = eta.ncols();
        let mut panel = Panel::new(Vec::new(), Vec::new())?;
        let mut cols: [Vec<f64>; 5] = Default::default();
        for r in 0..n {
            for k in 0..t {
                let g = y.growth[(r, k)];
                if !g.is_finite() || !eta[(r, k)].is_finite() {
                    continue;
                }
                panel.unit.push(p * n + r);
                panel.time.push(k);
                cols[0].push(g);
                cols[1].push(eta[(r, k)]);
                cols[2].push(u[r]);
                cols[3].push(alpha[r]);
                cols[4].push(chain[r]);
            }
        }
        for (name, c) in ["dlogy", "eta", "u", "alpha", "alpha_chain"].iter().zip(cols) {
            panel.push_column(*name, c)?;
        }
        out.append(&panel)?;
    }
    Ok(out)
}
