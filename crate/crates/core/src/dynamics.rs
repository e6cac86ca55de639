//! Output determination: the vertical chain with arbitrary inventory
//! rules, the general network under a common linear rule, heterogeneous
//! intensities, and analytic growth and volatility.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_model::{NetworkModel, SectorLabel, Weighting};
use crate::network_metrics::{exposure_shares, inventory_upstreamness, weighted_shock, OmegaParams, Resolvent};

/// Target inventory as a function of expected next-period demand.
pub trait InventoryRule: Send + Sync {
    fn level(&self, expected: f64) -> f64;
    fn derivative(&self, expected: f64) -> f64;
}

/// I(x) = αx.
#[derive(Clone, Copy, Debug)]
pub struct LinearRule(pub f64);

impl InventoryRule for LinearRule {
    fn level(&self, x: f64) -> f64 {
        self.0 * x
    }
    fn derivative(&self, _: f64) -> f64 {
        self.0
    }
}

/// I(x) = k·x^p on x > 0.
#[derive(Clone, Copy, Debug)]
pub struct PowerRule {
    pub scale: f64,
    pub exponent: f64,
}

impl InventoryRule for PowerRule {
    fn level(&self, x: f64) -> f64 {
        self.scale * x.max(0.0).powf(self.exponent)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.scale * self.exponent * x.max(f64::MIN_POSITIVE).powf(self.exponent - 1.0)
    }
}

/// No inventories.
#[derive(Clone, Copy, Debug)]
pub struct ZeroRule;

impl InventoryRule for ZeroRule {
    fn level(&self, _: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _: f64) -> f64 {
        0.0
    }
}

/// Paths of a vertical chain. Stage 0 sells to consumers; stage n+1 sells to stage n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Final demand D⁰_t.
    pub demand: Vec<f64>,
    /// Demand faced by each stage, `stage_demand[n][t] = D^n_t`.
    pub stage_demand: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
    /// End-of-period inventories I^n_t.
    pub inventory: Vec<Vec<f64>>,
    /// Inventories carried into period 0.
    pub initial_inventory: Vec<f64>,
}

struct Chain<'a> {
    rules: &'a [Box<dyn InventoryRule>],
    rho: f64,
    dbar: f64,
}

impl Chain<'_> {
    fn expect(&self, x: f64) -> f64 {
        (1.0 - self.rho) * self.dbar + self.rho * x
    }

    /// D^n_t as a function of (D⁰_t, D⁰_{t−1}).
    fn demand_at(&self, n: usize, x: f64, y: f64) -> f64 {
        if n == 0 { x } else { self.output(n - 1, x, y) }
    }

    /// E_t D^n_{t+1} given D⁰_t = x. Expectations enter each stage's demand
    /// function at the conditional mean of final demand.
    fn expected_next(&self, n: usize, x: f64) -> f64 {
        self.demand_at(n, self.expect(x), x)
    }

    /// Y^n_t = D^n_t + I_n(E_t D^n_{t+1}) − I_n(E_{t−1} D^n_t).
    fn output(&self, n: usize, x: f64, y: f64) -> f64 {
        let rule = &self.rules[n];
        self.demand_at(n, x, y) + rule.level(self.expected_next(n, x)) - rule.level(self.expected_next(n, y))
    }
}

/// Simulates a chain with one inventory rule per stage. Final demand before
/// the first period is taken to be `dbar`.
pub fn simulate_chain(rules: &[Box<dyn InventoryRule>], demand: &[f64], rho: f64, dbar: f64) -> Result<ChainState> {
    if rules.is_empty() {
        return Err(Error::Parameter("a chain needs at least one stage".into()));
    }
    let chain = Chain { rules, rho, dbar };
    let n = rules.len();
    let t = demand.len();
    let mut stage_demand = vec![vec![0.0; t]; n];
    let mut output = vec![vec![0.0; t]; n];
    let mut inventory = vec![vec![0.0; t]; n];
    let initial_inventory = (0..n).map(|s| rules[s].level(chain.expected_next(s, dbar))).collect();
    for k in 0..t {
        let x = demand[k];
        let y = if k == 0 { dbar } else { demand[k - 1] };
        for s in 0..n {
            stage_demand[s][k] = chain.demand_at(s, x, y);
            output[s][k] = chain.output(s, x, y);
            inventory[s][k] = rules[s].level(chain.expected_next(s, x));
            if output[s][k] < 0.0 {
                return Err(Error::NegativeOutput { stage: s, period: k, value: output[s][k] });
            }
        }
    }
    Ok(ChainState { demand: demand.to_vec(), stage_demand, output, inventory, initial_inventory })
}

/// Per-stage response of a chain at the steady state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplificationReport {
    /// ρI′_n Π_{j<n}(1 + (ρ−1)I′_j).
    pub increments: Vec<f64>,
    /// 1 + cumulative increments: ∂Y^n/∂D at the steady state.
    pub elasticities: Vec<f64>,
    /// 0 ≤ I′_n < 1/(1−ρ).
    pub stage_ok: Vec<bool>,
    pub amplifies: bool,
}

pub fn amplification_from_derivatives(derivs: &[f64], rho: f64) -> AmplificationReport {
    let mut increments = Vec::with_capacity(derivs.len());
    let mut elasticities = Vec::with_capacity(derivs.len());
    let mut carry = 1.0;
    let mut cum = 1.0;
    for &d in derivs {
        let inc = rho * d * carry;
        increments.push(inc);
        cum += inc;
        elasticities.push(cum);
        carry *= 1.0 + (rho - 1.0) * d;
    }
    let bound = if rho < 1.0 { 1.0 / (1.0 - rho) } else { f64::INFINITY };
    let stage_ok: Vec<bool> = derivs.iter().map(|&d| d >= 0.0 && d < bound).collect();
    let amplifies = stage_ok.iter().all(|b| *b) && derivs.iter().any(|&d| d > 0.0);
    AmplificationReport { increments, elasticities, stage_ok, amplifies }
}

/// Evaluates each rule's derivative at the steady state and applies the
/// amplification condition.
pub fn amplification_check(rules: &[Box<dyn InventoryRule>], rho: f64, dbar: f64) -> AmplificationReport {
    let d: Vec<f64> = rules.iter().map(|r| r.derivative(dbar)).collect();
    amplification_from_derivatives(&d, rho)
}

/// Sectoral output levels and growth rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPanel {
    /// N×T levels.
    pub y: DMatrix<f64>,
    /// N×(T−1) arithmetic growth.
    pub growth: DMatrix<f64>,
    /// N×(T−1) log growth.
    pub log_growth: DMatrix<f64>,
    /// Count of negative output entries.
    pub negative: usize,
}

impl OutputPanel {
    fn from_levels(y: DMatrix<f64>) -> Self {
        let (n, t) = y.shape();
        let growth = DMatrix::from_fn(n, t.saturating_sub(1), |r, k| (y[(r, k + 1)] - y[(r, k)]) / y[(r, k)]);
        let log_growth = DMatrix::from_fn(n, t.saturating_sub(1), |r, k| y[(r, k + 1)].ln() - y[(r, k)].ln());
        let negative = y.iter().filter(|v| **v < 0.0).count();
        Self { y, growth, log_growth, negative }
    }
}

/// Factorised network for repeated output evaluation under a common rule.
///
/// Y_t = L̃BD_t + αρ·L̃[I − ωÃ]⁻¹BΔ_t.
pub struct NetworkSolver {
    l: Resolvent,
    r: Resolvent,
    b: DMatrix<f64>,
    alpha_rho: f64,
    pub dbar: DVector<f64>,
}

impl NetworkSolver {
    pub fn new(model: &NetworkModel, params: &OmegaParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            l: Resolvent::new(&model.atilde, 1.0)?,
            r: Resolvent::new(&model.atilde, params.omega())?,
            b: model.b.clone(),
            alpha_rho: params.alpha * params.rho,
            dbar: model.dbar.clone(),
        })
    }

    /// Output for current demand `d` and previous demand `d_prev`.
    pub fn output(&self, d: &DVector<f64>, d_prev: &DVector<f64>) -> DVector<f64> {
        let base = self.l.solve(&(&self.b * d));
        if self.alpha_rho == 0.0 {
            return base;
        }
        let delta = &self.b * (d - d_prev);
        base + self.l.solve(&self.r.solve(&delta)) * self.alpha_rho
    }

    pub fn steady_state(&self) -> DVector<f64> {
        self.l.solve(&(&self.b * &self.dbar))
    }

    /// Growth on impact when destination demand moves from D̄ to D̄(1 + η).
    pub fn impact_growth(&self, eta: &DVector<f64>) -> DVector<f64> {
        let y0 = self.steady_state();
        let d1 = self.dbar.component_mul(&eta.map(|e| 1.0 + e));
        let y1 = self.output(&d1, &self.dbar);
        DVector::from_fn(y0.len(), |k, _| if y0[k] > 0.0 { (y1[k] - y0[k]) / y0[k] } else { f64::NAN })
    }

    /// Output along a J×T demand path; demand before the first period is D̄.
    pub fn panel(&self, demand: &DMatrix<f64>) -> OutputPanel {
        let t = demand.ncols();
        let n = self.b.nrows();
        let mut y = DMatrix::zeros(n, t);
        let mut prev = self.dbar.clone();
        for k in 0..t {
            let d = demand.column(k).into_owned();
            y.set_column(k, &self.output(&d, &prev));
            prev = d;
        }
        OutputPanel::from_levels(y)
    }
}

/// Output panel for a J×T demand path under a common linear rule.
pub fn network_output(model: &NetworkModel, params: &OmegaParams, demand: &DMatrix<f64>) -> Result<OutputPanel> {
    if demand.nrows() != model.n_destinations() {
        return Err(Error::Dimension(format!("demand has {} rows for {} destinations", demand.nrows(), model.n_destinations())));
    }
    if demand.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Validation("demand must be positive".into()));
    }
    Ok(NetworkSolver::new(model, params)?.panel(demand))
}

/// First-order growth η^r + αρ Σ_j 𝒰_j^r ξ_j^r η_j; exact for the
/// impact response of the linear model.
pub fn growth_approx(model: &NetworkModel, params: &OmegaParams, eta: &DVector<f64>) -> Result<DVector<f64>> {
    let xi = exposure_shares(model)?.xi;
    let eta_r = &xi * eta;
    let ups = weighted_shock(model, params, eta)?;
    Ok(eta_r + ups * (params.alpha * params.rho))
}

/// Var(growth_r) = Σ_j Σ_k Ψ_j Ψ_k ξ_j ξ_k C_jk with Ψ_j = 1 + αρ𝒰_j^r and
/// C the covariance of destination shifters.
pub fn analytic_variance(model: &NetworkModel, params: &OmegaParams, cov_eta: &DMatrix<f64>) -> Result<DVector<f64>> {
    let j = model.n_destinations();
    if cov_eta.shape() != (j, j) {
        return Err(Error::Dimension(format!("covariance must be {j}×{j}")));
    }
    let off_diag = (0..j).any(|a| (0..j).any(|b| a != b && cov_eta[(a, b)] != 0.0));
    if off_diag {
        log::warn!("destination shocks are correlated; including covariance cross terms");
    }
    let xi = exposure_shares(model)?.xi;
    let iu = inventory_upstreamness(model, params)?;
    let ar = params.alpha * params.rho;
    Ok(DVector::from_fn(model.n_sectors(), |r, _| {
        if xi.row(r).iter().any(|v| v.is_nan()) {
            return f64::NAN;
        }
        let w: Vec<f64> = (0..j)
            .map(|c| if xi[(r, c)] > 0.0 { (1.0 + ar * iu.ucal[(r, c)]) * xi[(r, c)] } else { 0.0 })
            .collect();
        (0..j).flat_map(|a| (0..j).map(move |b| (a, b))).map(|(a, b)| w[a] * w[b] * cov_eta[(a, b)]).sum()
    }))
}

/// Variance under independent destination shifters with the given sds.
pub fn analytic_variance_iid(model: &NetworkModel, params: &OmegaParams, sigma_eta: &[f64]) -> Result<DVector<f64>> {
    let c = DMatrix::from_diagonal(&DVector::from_iterator(sigma_eta.len(), sigma_eta.iter().map(|s| s * s)));
    analytic_variance(model, params, &c)
}

fn check_hetero(model: &NetworkModel, alpha: &DVector<f64>, rho: f64) -> Result<()> {
    if alpha.len() != model.n_sectors() {
        return Err(Error::Dimension(format!("{} intensities for {} sectors", alpha.len(), model.n_sectors())));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho = {rho} must lie in (-1, 1)")));
    }
    let bound = 1.0 / (1.0 - rho);
    if let Some(k) = alpha.iter().position(|a| !(*a >= 0.0 && *a < bound)) {
        return Err(Error::Domain(format!("alpha[{k}] = {} outside [0, {bound})", alpha[k])));
    }
    Ok(())
}

/// Δ-loading K (N×J) with heterogeneous intensities: Y = L̃BD + KΔ.
///
/// Each sector holds α_r E_t[demand_{t+1}], so K solves
/// K = ÃK + diag(α)(ρL̃B + (ρ−1)ÃK). Evaluated as the staged series
/// Σ_m (GÃ)^m ρ diag(α) L̃B with G = diag(1 + (ρ−1)α), stopped once the
/// increment falls below 1e−12 of the accumulated sum.
pub fn hetero_loading(model: &NetworkModel, alpha: &DVector<f64>, rho: f64) -> Result<DMatrix<f64>> {
    check_hetero(model, alpha, rho)?;
    let n = model.n_sectors();
    let l = Resolvent::new(&model.atilde, 1.0)?;
    let lb = l.solve_matrix(&model.b);
    let ga = DMatrix::from_fn(n, n, |r, s| (1.0 + (rho - 1.0) * alpha[r]) * model.atilde[(r, s)]);
    let mut term = DMatrix::from_fn(n, model.n_destinations(), |r, c| rho * alpha[r] * lb[(r, c)]);
    let mut acc = term.clone();
    for _ in 0..100_000 {
        term = &ga * &term;
        acc += &term;
        let inc = term.abs().max();
        if inc <= 1e-12 * acc.abs().max().max(1e-300) || inc == 0.0 {
            return Ok(acc);
        }
        if !inc.is_finite() {
            break;
        }
    }
    Err(Error::Domain("heterogeneous inventory series does not converge".into()))
}

/// Output with sector-specific inventory intensities.
pub fn hetero_output(model: &NetworkModel, alpha: &DVector<f64>, rho: f64, demand: &DMatrix<f64>) -> Result<OutputPanel> {
    if demand.nrows() != model.n_destinations() {
        return Err(Error::Dimension("demand rows must match destinations".into()));
    }
    let k = hetero_loading(model, alpha, rho)?;
    let l = Resolvent::new(&model.atilde, 1.0)?;
    let lb = l.solve_matrix(&model.b);
    let t = demand.ncols();
    let mut y = DMatrix::zeros(model.n_sectors(), t);
    let mut prev = model.dbar.clone();
    for c in 0..t {
        let d = demand.column(c).into_owned();
        y.set_column(c, &(&lb * &d + &k * (&d - &prev)));
        prev = d;
    }
    Ok(OutputPanel::from_levels(y))
}

/// Condition for sector `s`, pure direct upstream to `r`, to respond more
/// than `r` to a unit demand change:
/// α_s(ρc_r + (ρ−1)k_r) > ((1 − ã_sr)/ã_sr)(c_r + k_r), where c and k
/// are r's level and Δ loadings on total demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureUpstreamCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub amplifies: bool,
}

pub fn pure_direct_upstream_condition(model: &NetworkModel, alpha: &DVector<f64>, rho: f64, s: usize, r: usize) -> Result<PureUpstreamCheck> {
    let n = model.n_sectors();
    if s >= n || r >= n || s == r {
        return Err(Error::Parameter("sectors must be distinct and in range".into()));
    }
    let pure = (0..n).all(|k| k == r || model.atilde[(s, k)] == 0.0)
        && model.atilde[(s, r)] > 0.0
        && model.atilde[(r, s)] == 0.0
        && model.b.row(s).iter().all(|v| *v == 0.0);
    if !pure {
        return Err(Error::Parameter(format!("sector {s} is not pure direct upstream to {r}")));
    }
    let one = model.collapse_destinations();
    let k = hetero_loading(&one, alpha, rho)?;
    let l = Resolvent::new(&one.atilde, 1.0)?;
    let c = l.solve(&one.b.column(0).into_owned());
    let a = one.atilde[(s, r)];
    let lhs = alpha[s] * (rho * c[r] + (rho - 1.0) * k[(r, 0)]);
    let rhs = (1.0 - a) / a * (c[r] + k[(r, 0)]);
    Ok(PureUpstreamCheck { lhs, rhs, amplifies: lhs > rhs })
}

/// Inserts a pass-through sector between sector `i` and its suppliers.
///
/// Sector `i` keeps its sales, consumption weights and label; it now buys
/// only from a new sector (appended last) with requirement c = (1 + γ_i)/2.
/// The new sector buys i's former inputs scaled by 1/c and sells only to
/// `i`. Path weights through Ã are preserved and lengthened by one stage.
pub fn fragment(model: &NetworkModel, i: usize) -> Result<NetworkModel> {
    let n = model.n_sectors();
    if i >= n {
        return Err(Error::Parameter(format!("sector {i} out of range")));
    }
    let gamma_i = model.a.column(i).sum();
    let c = 0.5 * (1.0 + gamma_i);
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&model.a);
    for r in 0..n {
        a[(r, n)] = model.a[(r, i)] / c;
        a[(r, i)] = 0.0;
    }
    a[(n, i)] = c;
    let mut b = DMatrix::zeros(n + 1, model.n_destinations());
    b.view_mut((0, 0), (n, model.n_destinations())).copy_from(&model.b);
    let mut sectors = model.sectors.clone();
    let base = &model.sectors[i];
    sectors.push(SectorLabel::new(format!("{}-upstream", base.id), base.country.clone(), format!("{}-upstream", base.industry)));
    NetworkModel::new(sectors, model.destinations.clone(), a, b, model.dbar.clone(), Weighting::InputShare)
}
