//! Scenario orchestration: counterfactual Monte Carlo with common random
//! numbers, moment tables, plot data and the end-to-end pipeline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{fragment, NetworkSolver};
use crate::error::{Error, Result};
use crate::estimation::{binned_regression, first_order_panel, model_consistent_regression, Panel, UpsilonLoading};
use crate::io_model::{build_network, inventory_correct, load_io_table, synthesize, table_from_model, IoTable, NetworkModel, SyntheticSpec};
use crate::network_metrics::{exposure_shares, model_upstreamness, position_metrics, OmegaParams};
use crate::shock_engine::{build_covariance, calibrate_varrho, draw_demand, growth_rates, panel_sd, shift_share, DemandPaths, DemandProcess, GrowthKind, SdMeasure};
use crate::util;

/// Where a network comes from. Relative paths resolve against the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum NetworkSource {
    /// Input-output table CSV; inventory-corrected when it carries ΔN.
    Table { path: PathBuf },
    /// Serialized [`NetworkModel`] JSON.
    Model { path: PathBuf },
    Synthetic { spec: SyntheticSpec },
}

impl NetworkSource {
    /// Loads the network and, when available or derivable, the balanced table.
    pub fn load(&self, base: &Path) -> Result<(IoTable, NetworkModel)> {
        match self {
            NetworkSource::Table { path } => {
                let mut table = load_io_table(base.join(path))?;
                if table.delta_n.is_some() {
                    table = inventory_correct(&table)?;
                }
                let model = build_network(&table)?;
                Ok((table, model))
            }
            NetworkSource::Model { path } => {
                let model: NetworkModel = serde_json::from_reader(std::fs::File::open(base.join(path))?)?;
                model.validate()?;
                Ok((table_from_model(&model)?, model))
            }
            NetworkSource::Synthetic { spec } => {
                let model = synthesize(spec)?;
                Ok((table_from_model(&model)?, model))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One aggregate destination; B is the demand-weighted row sum.
    SingleDestination,
    #[default]
    MultiDestination,
}

/// Innovation standard deviations per destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaSource {
    /// Levels σ_j, one per destination.
    Vector { sigma: Vec<f64> },
    /// σ_j = share·D̄_j.
    Proportional { share: f64 },
}

/// Average cross-destination correlation of innovations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VarrhoSource {
    Fixed { varrho: f64 },
    /// Chosen so the slope of sd(η_i) on U matches the target.
    Calibrated { target_slope: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub baseline: NetworkSource,
    /// Replacement network; defaults to the baseline.
    #[serde(default)]
    pub counterfactual: Option<NetworkSource>,
    /// Sector of the counterfactual network to split into two stages.
    #[serde(default)]
    pub fragment: Option<usize>,
    pub alpha: f64,
    /// Counterfactual α is `alpha·alpha_scale`.
    #[serde(default = "one")]
    pub alpha_scale: f64,
    pub rho: f64,
    pub varrho: VarrhoSource,
    pub sigma: SigmaSource,
    pub t: usize,
    pub n_sims: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
}

/// Monte Carlo moments of one economy, averaged across simulations.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Mean across sectors of the time-series sd of η^r.
    pub sigma_eta: f64,
    /// Mean across sectors of the time-series sd of output growth.
    pub sigma_y: f64,
    /// Median of growth/η^r over sector-periods.
    pub elasticity: f64,
    /// Cross-sector slope of sd(η^r) on U.
    pub slope_sd_eta_u: f64,
    pub negative_output: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub scenario: String,
    pub mode: Mode,
    pub varrho: f64,
    pub baseline: Moments,
    pub counterfactual: Moments,
}

/// Growth and shift-share series of one path; used for the bit-identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct PathOutcome {
    pub growth: DMatrix<f64>,
    pub eta: DMatrix<f64>,
}

struct Economy {
    model: NetworkModel,
    solver: NetworkSolver,
    xi: DMatrix<f64>,
    u: DVector<f64>,
}

impl Economy {
    fn new(model: NetworkModel, params: &OmegaParams) -> Result<Self> {
        let solver = NetworkSolver::new(&model, params)?;
        let xi = exposure_shares(&model)?.xi;
        let u = model_upstreamness(&model)?.values;
        Ok(Self { model, solver, xi, u })
    }

    fn outcome(&self, d: &DMatrix<f64>) -> Result<(PathOutcome, usize)> {
        let panel = self.solver.panel(d);
        let eta = shift_share(&self.xi, &growth_rates(d, GrowthKind::Arithmetic))?;
        Ok((PathOutcome { growth: panel.growth, eta }, panel.negative))
    }

    fn path_moments(&self, d: &DMatrix<f64>) -> Result<Moments> {
        let (o, negative) = self.outcome(d)?;
        let mut ratios = Vec::new();
        for (g, e) in o.growth.iter().zip(o.eta.iter()) {
            if e.abs() > 1e-12 && g.is_finite() && e.is_finite() {
                ratios.push(g / e);
            }
        }
        let (mut us, mut sds) = (Vec::new(), Vec::new());
        for r in 0..self.model.n_sectors() {
            let row: Vec<f64> = o.eta.row(r).iter().copied().collect();
            if self.u[r].is_finite() && row.iter().all(|v| v.is_finite()) {
                us.push(self.u[r]);
                sds.push(util::sd(&row));
            }
        }
        let slope = if us.len() >= 2 { util::slope(&us, &sds) } else { f64::NAN };
        Ok(Moments {
            sigma_eta: panel_sd(&o.eta, SdMeasure::TimeSeries),
            sigma_y: panel_sd(&o.growth, SdMeasure::TimeSeries),
            elasticity: util::median(&ratios),
            slope_sd_eta_u: slope,
            negative_output: negative,
        })
    }
}

fn average(ms: &[Moments]) -> Moments {
    let f = |g: fn(&Moments) -> f64| util::mean(&ms.iter().map(g).collect::<Vec<_>>());
    Moments {
        sigma_eta: f(|m| m.sigma_eta),
        sigma_y: f(|m| m.sigma_y),
        elasticity: f(|m| m.elasticity),
        slope_sd_eta_u: f(|m| m.slope_sd_eta_u),
        negative_output: ms.iter().map(|m| m.negative_output).sum(),
    }
}

/// Everything a scenario needs after loading its inputs.
pub struct PreparedScenario {
    pub baseline: NetworkModel,
    pub counterfactual: NetworkModel,
    pub params: OmegaParams,
    pub cf_params: OmegaParams,
    pub process: DemandProcess,
}

fn sigma_levels(model: &NetworkModel, sigma: &SigmaSource) -> Result<Vec<f64>> {
    let j = model.n_destinations();
    match sigma {
        SigmaSource::Vector { sigma } if sigma.len() == j => Ok(sigma.clone()),
        SigmaSource::Vector { sigma } => Err(Error::Dimension(format!("{} sigmas for {j} destinations", sigma.len()))),
        SigmaSource::Proportional { share } => Ok(model.dbar.iter().map(|d| share * d).collect()),
    }
}

pub fn prepare_scenario(s: &Scenario, base: &Path) -> Result<PreparedScenario> {
    let (_, baseline) = s.baseline.load(base)?;
    let mut cf = match &s.counterfactual {
        Some(src) => {
            let (_, m) = src.load(base)?;
            if m.n_sectors() != baseline.n_sectors() || m.n_destinations() != baseline.n_destinations() {
                return Err(Error::Dimension(format!(
                    "counterfactual network is {}×{}, baseline is {}×{}",
                    m.n_sectors(),
                    m.n_destinations(),
                    baseline.n_sectors(),
                    baseline.n_destinations()
                )));
            }
            m
        }
        None => baseline.clone(),
    };
    if let Some(i) = s.fragment {
        cf = fragment(&cf, i)?;
    }
    let params = OmegaParams::new(s.alpha, s.rho)?;
    let cf_params = OmegaParams::new(s.alpha * s.alpha_scale, s.rho)?;
    for p in [&params, &cf_params] {
        let w = p.omega();
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Parameter(format!("ω = {w} must lie in (0,1); check α, its scale and ρ")));
        }
    }
    let sigma = sigma_levels(&baseline, &s.sigma)?;
    let varrho = match s.varrho {
        VarrhoSource::Fixed { varrho } => varrho,
        VarrhoSource::Calibrated { target_slope } => calibrate_varrho(&baseline, &sigma, target_slope)?.varrho,
    };
    let (baseline, counterfactual, dbar, sigma) = match s.mode {
        Mode::MultiDestination => (baseline.clone(), cf, baseline.dbar.iter().copied().collect(), sigma),
        Mode::SingleDestination => {
            let cov = build_covariance(&sigma, varrho)?;
            let total = cov.sum().max(0.0).sqrt();
            let b = baseline.collapse_destinations();
            let dbar = vec![b.dbar[0]];
            (b, cf.collapse_destinations(), dbar, vec![total])
        }
    };
    let varrho = if s.mode == Mode::SingleDestination { 0.0 } else { varrho };
    let process = DemandProcess { dbar, rho: s.rho, sigma, varrho, seed: s.seed };
    process.validate()?;
    Ok(PreparedScenario { baseline, counterfactual, params, cf_params, process })
}

/// Per-path baseline and counterfactual outcomes under shared demand draws.
pub fn scenario_paths(prep: &PreparedScenario, t: usize, n_sims: usize) -> Result<Vec<(PathOutcome, PathOutcome)>> {
    let demand = draw_demand(&prep.process, t + 1, n_sims)?;
    let base = Economy::new(prep.baseline.clone(), &prep.params)?;
    let cf = Economy::new(prep.counterfactual.clone(), &prep.cf_params)?;
    demand.paths.par_iter().map(|d| Ok((base.outcome(d)?.0, cf.outcome(d)?.0))).collect()
}

/// Simulates baseline and counterfactual on the same demand draws.
pub fn run_scenario(s: &Scenario, base: &Path) -> Result<MomentReport> {
    if s.n_sims == 0 || s.t < 3 {
        return Err(Error::Parameter("need at least one simulation and three periods".into()));
    }
    let prep = prepare_scenario(s, base)?;
    let demand = draw_demand(&prep.process, s.t + 1, s.n_sims)?;
    let b = Economy::new(prep.baseline.clone(), &prep.params)?;
    let c = Economy::new(prep.counterfactual.clone(), &prep.cf_params)?;
    let per: Vec<(Moments, Moments)> = demand.paths.par_iter().map(|d| Ok((b.path_moments(d)?, c.path_moments(d)?))).collect::<Result<_>>()?;
    let (bm, cm): (Vec<Moments>, Vec<Moments>) = per.into_iter().unzip();
    let report = MomentReport { scenario: s.name.clone(), mode: s.mode, varrho: prep.process.varrho, baseline: average(&bm), counterfactual: average(&cm) };
    for m in [&report.baseline, &report.counterfactual] {
        if ![m.sigma_eta, m.sigma_y, m.elasticity].iter().all(|v| v.is_finite()) {
            return Err(Error::Simulation(format!("scenario {} produced non-finite moments", s.name)));
        }
        if m.negative_output > 0 {
            log::warn!("scenario {}: {} negative output levels", s.name, m.negative_output);
        }
    }
    Ok(report)
}

/// Reference moments from the empirical calibration, printed as annotations only.
pub const REFERENCE_MOMENTS: [(&str, f64); 5] =
    [("sigma_eta", 0.13), ("sigma_y", 0.173), ("elasticity", 1.34), ("sigma_y/sigma_eta", 1.26), ("slope sd(eta) on U", -0.0084)];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentTable {
    pub csv: String,
    pub text: String,
}

const COLUMNS: [&str; 6] = ["base_sigma_eta", "base_sigma_y", "base_elasticity", "cf_sigma_eta", "cf_sigma_y", "cf_elasticity"];

fn row_values(r: &MomentReport) -> [f64; 6] {
    let (b, c) = (&r.baseline, &r.counterfactual);
    [b.sigma_eta, b.sigma_y, b.elasticity, c.sigma_eta, c.sigma_y, c.elasticity]
}

/// Baseline | counterfactual × {σ_η, σ_y, elasticity} as CSV and aligned text.
pub fn moment_table(reports: &[MomentReport]) -> Result<MomentTable> {
    if reports.is_empty() {
        return Err(Error::Parameter("no reports to tabulate".into()));
    }
    let mut csv = String::from("scenario,mode");
    for c in COLUMNS {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    let width = reports.iter().map(|r| r.scenario.len()).max().unwrap_or(0).max(8);
    let mut text = format!("{:<width$}  {:<18}", "scenario", "mode");
    for c in COLUMNS {
        let _ = write!(text, " {c:>16}");
    }
    text.push('\n');
    for r in reports {
        let mode = match r.mode {
            Mode::SingleDestination => "single-destination",
            Mode::MultiDestination => "multi-destination",
        };
        let vals = row_values(r);
        let _ = write!(csv, "{},{}", r.scenario, mode);
        let _ = write!(text, "{:<width$}  {:<18}", r.scenario, mode);
        for v in vals {
            let _ = write!(csv, ",{v:.6}");
            let _ = write!(text, " {v:>16.6}");
        }
        csv.push('\n');
        text.push('\n');
    }
    text.push_str("\nreference (empirical calibration, not reproduced here):");
    for (k, v) in REFERENCE_MOMENTS {
        let _ = write!(text, " {k}={v}");
    }
    text.push('\n');
    Ok(MomentTable { csv, text })
}

/// Edges at the 0, 1/k, …, (k−1)/k quantiles of the finite values.
pub fn quantile_edges(values: &[f64], k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || k == 0 {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..k).map(|q| v[(q * v.len()) / k]).collect();
    edges.dedup();
    edges
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    /// "inventories" or "no-inventories".
    pub economy: String,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub beta: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// Binned coefficients per simulation for the economy with inventories
/// (`params`) and without (α = 0); the band is ±1 sd across simulations.
pub fn figure_data(model: &NetworkModel, params: &OmegaParams, demand: &DemandPaths, edges: &[f64]) -> Result<Vec<FigureRow>> {
    let mut rows = Vec::new();
    let zero = OmegaParams::new(0.0, params.rho)?;
    for (label, p) in [("inventories", params), ("no-inventories", &zero)] {
        let per: Vec<(Vec<(f64, f64)>, Vec<f64>)> = demand
            .paths
            .par_iter()
            .map(|d| {
                let one = DemandPaths { paths: vec![d.clone()], rejections: 0 };
                let panel = first_order_panel(model, p, &one, 0.0, 0)?;
                let br = binned_regression(&panel, "dlogy", "eta", "u", edges)?;
                Ok((br.bins, br.beta))
            })
            .collect::<Result<_>>()?;
        let bins = &per[0].0;
        if per.iter().any(|x| x.0.len() != bins.len()) {
            return Err(Error::Estimation("bin layout differs across simulations".into()));
        }
        for (k, (lo, hi)) in bins.iter().enumerate() {
            let b: Vec<f64> = per.iter().map(|x| x.1[k]).collect();
            let m = util::mean(&b);
            let s = if b.len() > 1 { util::sd(&b) } else { 0.0 };
            rows.push(FigureRow { economy: label.into(), bin: k, lower: *lo, upper: *hi, beta: m, band_lo: m - s, band_hi: m + s });
        }
    }
    Ok(rows)
}

pub fn figure_csv(rows: &[FigureRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).map_err(|e| Error::Simulation(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSpec {
    pub name: String,
    #[serde(default)]
    pub network: Option<NetworkSource>,
    #[serde(default = "one")]
    pub alpha_scale: f64,
    #[serde(default)]
    pub fragment: Option<usize>,
    #[serde(default)]
    pub mode: Mode,
}

fn default_bins() -> usize {
    5
}

/// Pipeline configuration (JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub network: NetworkSource,
    pub alpha: f64,
    pub rho: f64,
    pub sigma: SigmaSource,
    pub varrho: VarrhoSource,
    pub t: usize,
    pub n_sims: usize,
    /// Upstreamness bin edges; quantile bins when absent.
    #[serde(default)]
    pub bin_edges: Option<Vec<f64>>,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    /// Sd of measurement noise added to the estimation panel.
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub counterfactuals: Vec<CounterfactualSpec>,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn scenario(&self, cf: &CounterfactualSpec) -> Scenario {
        Scenario {
            name: cf.name.clone(),
            baseline: self.network.clone(),
            counterfactual: cf.network.clone(),
            fragment: cf.fragment,
            alpha: self.alpha,
            alpha_scale: cf.alpha_scale,
            rho: self.rho,
            varrho: self.varrho.clone(),
            sigma: self.sigma.clone(),
            t: self.t,
            n_sims: self.n_sims,
            seed: self.seed,
            mode: cf.mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub ok: bool,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub version: String,
    pub config: String,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub failed_stage: Option<String>,
}

impl Manifest {
    pub fn ok(&self) -> bool {
        self.failed_stage.is_none()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<FileRecord>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileRecord { path: name.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }
}

/// Panel rows written to disk; estimation uses all simulations.
const PANEL_PATHS_WRITTEN: usize = 5;

/// Runs load → metrics → shocks → estimation → counterfactuals → figures,
/// writing artifacts into `out`. A failing stage stops the run; artifacts
/// written so far are kept and the manifest records the stage.
pub fn pipeline(config_path: &Path, out: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out)?;
    let mut manifest = Manifest {
        seed: 0,
        version: env!("CARGO_PKG_VERSION").into(),
        config: config_path.display().to_string(),
        stages: Vec::new(),
        files: Vec::new(),
        failed_stage: None,
    };
    let mut art = Artifacts { dir: out, files: Vec::new() };
    let result = run_stages(config_path, &mut art, &mut manifest);
    manifest.files = art.files;
    if let Err(e) = &result {
        log::error!("pipeline failed: {e}");
    }
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn stage<T>(manifest: &mut Manifest, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let r = f();
    manifest.stages.push(StageRecord {
        name: name.into(),
        seconds: start.elapsed().as_secs_f64(),
        ok: r.is_ok(),
        error: r.as_ref().err().map(|e| e.to_string()),
    });
    if r.is_err() {
        manifest.failed_stage = Some(name.into());
    }
    r
}

fn run_stages(config_path: &Path, art: &mut Artifacts, manifest: &mut Manifest) -> Result<()> {
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let (cfg, table, model) = stage(manifest, "load", || {
        let cfg = PipelineConfig::load(config_path)?;
        let (table, model) = cfg.network.load(&base)?;
        Ok((cfg, table, model))
    })?;
    manifest.seed = cfg.seed;
    art.write("model.json", model.to_json()?.as_bytes())?;
    let params = OmegaParams::new(cfg.alpha, cfg.rho)?;
    stage(manifest, "metrics", || {
        let m = position_metrics(&table, &model, &params)?;
        art.write("metrics.json", serde_json::to_string_pretty(&m)?.as_bytes())
    })?;
    let (demand, varrho) = stage(manifest, "shocks", || {
        let sigma = sigma_levels(&model, &cfg.sigma)?;
        let varrho = match cfg.varrho {
            VarrhoSource::Fixed { varrho } => varrho,
            VarrhoSource::Calibrated { target_slope } => calibrate_varrho(&model, &sigma, target_slope)?.varrho,
        };
        let process = DemandProcess { dbar: model.dbar.iter().copied().collect(), rho: cfg.rho, sigma, varrho, seed: cfg.seed };
        let demand = draw_demand(&process, cfg.t + 1, cfg.n_sims)?;
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let mut header = vec!["path".to_string(), "time".to_string()];
            header.extend(model.destinations.iter().cloned());
            w.write_record(&header)?;
            for (p, d) in demand.paths.iter().enumerate().take(PANEL_PATHS_WRITTEN) {
                for k in 0..d.ncols() {
                    let mut rec = vec![p.to_string(), k.to_string()];
                    rec.extend(d.column(k).iter().map(|v| v.to_string()));
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
        }
        art.write("demand.csv", &buf)?;
        Ok((demand, varrho))
    })?;
    let u_values = model_upstreamness(&model)?.values;
    let edges = match &cfg.bin_edges {
        Some(e) => e.clone(),
        None => quantile_edges(u_values.as_slice(), cfg.n_bins),
    };
    stage(manifest, "estimation", || {
        let panel = first_order_panel(&model, &params, &demand, cfg.noise_sd, cfg.seed)?;
        let first = DemandPaths { paths: demand.paths.iter().take(PANEL_PATHS_WRITTEN).cloned().collect(), rejections: 0 };
        let head: Panel = first_order_panel(&model, &params, &first, cfg.noise_sd, cfg.seed)?;
        let mut buf = Vec::new();
        head.to_csv(&mut buf)?;
        art.write("panel.csv", &buf)?;
        let binned = binned_regression(&panel, "dlogy", "eta", "u", &edges)?;
        let mc = if cfg.alpha > 0.0 && model.n_destinations() > 1 {
            Some(model_consistent_regression(&panel, "dlogy", "eta", "upsilon", "alpha", UpsilonLoading::AlphaWeighted)?)
        } else {
            None
        };
        let coefs = serde_json::json!({ "varrho": varrho, "binned": binned, "model_consistent": mc });
        art.write("coefficients.json", serde_json::to_string_pretty(&coefs)?.as_bytes())
    })?;
    stage(manifest, "counterfactuals", || {
        let reports: Vec<MomentReport> = cfg.counterfactuals.iter().map(|c| run_scenario(&cfg.scenario(c), &base)).collect::<Result<_>>()?;
        if reports.is_empty() {
            return Ok(());
        }
        let table = moment_table(&reports)?;
        art.write("moments.csv", table.csv.as_bytes())?;
        art.write("moments.txt", table.text.as_bytes())?;
        art.write("moments.json", serde_json::to_string_pretty(&reports)?.as_bytes())
    })?;
    stage(manifest, "figures", || {
        let rows = figure_data(&model, &params, &demand, &edges)?;
        art.write("figure.csv", figure_csv(&rows)?.as_bytes())
    })?;
    Ok(())
}
