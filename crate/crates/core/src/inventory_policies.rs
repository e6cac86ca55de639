//! Firm-level inventory problems: the linear-quadratic rule and its
//! smoothing and productivity variants, a breakdown-risk dynamic program,
//! and a time-to-sell model with stock-out penalties.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{self, norm_cdf, norm_pdf, stream_rng, tauchen};

/// Parameters of the linear-quadratic inventory problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqParams {
    pub alpha: f64,
    pub delta: f64,
    pub beta: f64,
    pub c: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub tau: f64,
    pub rho: f64,
}

impl LqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.delta > 0.0 && self.beta > 0.0 && self.beta <= 1.0 && self.c >= 0.0 && self.theta >= 0.0 && self.tau >= 0.0) {
            return Err(Error::Parameter(format!("invalid LQ parameters {self:?}")));
        }
        Ok(())
    }
}

/// I = max{(β − 1)c/δ + α·E Q′, 0}.
pub fn lq_policy(params: &LqParams, expected_sales: f64) -> Result<f64> {
    params.validate()?;
    Ok(((params.beta - 1.0) * params.c / params.delta + params.alpha * expected_sales).max(0.0))
}

/// Production-smoothing variant. Only θ(1+β) + δ > 0 is required, so the
/// closed form can be studied beyond the δ > 0 region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub theta: f64,
    pub rho: f64,
}

impl From<&LqParams> for SmoothingParams {
    fn from(p: &LqParams) -> Self {
        Self { alpha: p.alpha, beta: p.beta, delta: p.delta, theta: p.theta, rho: p.rho }
    }
}

/// ∂I/∂D = (𝓑𝓧/(1 − 𝓑θβρ))·(1 − 2𝓑²θ²β)/(1 − 𝓑²θ²β) with
/// 𝓑 = (θ(1+β) + δ)⁻¹ and 𝓧 = δαρ + θ(1 − βρ).
pub fn smoothing_derivative(p: &SmoothingParams) -> Result<f64> {
    let denom = p.theta * (1.0 + p.beta) + p.delta;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!("θ(1+β)+δ = {denom} must be positive")));
    }
    let bb = 1.0 / denom;
    let q1 = bb * bb * p.theta * p.theta * p.beta;
    let q2 = bb * p.theta * p.rho * p.beta;
    if q1.abs() >= 1.0 {
        return Err(Error::Domain(format!("𝓑²θ²β = {q1} outside the unit circle")));
    }
    if q2.abs() >= 1.0 {
        return Err(Error::Domain(format!("𝓑θρβ = {q2} outside the unit circle")));
    }
    let x = p.delta * p.alpha * p.rho + p.theta * (1.0 - p.beta * p.rho);
    Ok(bb * x / (1.0 - q2) * (1.0 - 2.0 * q1) / (1.0 - q1))
}

/// θ solving 2𝓑²θ²β = 1, i.e. θ = δ/(√(2β) − 1 − β). Since √(2β) < 1 + β
/// this is positive only for δ < 0; `None` otherwise.
pub fn smoothing_sign_boundary(beta: f64, delta: f64) -> Option<f64> {
    let k = (2.0 * beta).sqrt() - 1.0 - beta;
    let th = delta / k;
    (th > 0.0 && th.is_finite()).then_some(th)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductivityParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub rho_zeta: f64,
    pub zeta_bar: f64,
}

/// I = αE𝒟′ + (βEζ′ − ζ)/δ, Eζ′ = (1 − ρ^ζ)ζ̄ + ρ^ζζ. Returns the level and ∂I/∂ζ = (βρ^ζ − 1)/δ.
pub fn productivity_policy(p: &ProductivityParams, zeta: f64, expected_demand: f64) -> Result<(f64, f64)> {
    if !(p.rho_zeta <= 1.0 && p.delta > 0.0) {
        return Err(Error::Parameter("require ρ^ζ ≤ 1 and δ > 0".into()));
    }
    let ez = (1.0 - p.rho_zeta) * p.zeta_bar + p.rho_zeta * zeta;
    let level = p.alpha * expected_demand + (p.beta * ez - zeta) / p.delta;
    Ok((level, (p.beta * p.rho_zeta - 1.0) / p.delta))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Linear interpolation on a uniform grid, clamped at the ends.
fn interp1(grid: &[f64], v: &[f64], x: f64) -> f64 {
    let n = grid.len();
    let h = grid[1] - grid[0];
    let x = x.clamp(grid[0], grid[n - 1]);
    let k = (((x - grid[0]) / h) as usize).min(n - 2);
    let t = (x - grid[k]) / h;
    (1.0 - t) * v[k] + t * v[k + 1]
}

/// Firm facing production breakdowns with probability χ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownProblem {
    pub demand_mean: f64,
    pub demand_rho: f64,
    pub demand_sigma: f64,
    pub n_demand: usize,
    pub tauchen_m: f64,
    pub inv_max: f64,
    pub n_inv: usize,
    pub p: f64,
    pub c: f64,
    pub beta: f64,
    pub chi: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BreakdownProblem {
    fn default() -> Self {
        Self {
            demand_mean: 1.0,
            demand_rho: 0.9,
            demand_sigma: 0.1,
            n_demand: 15,
            tauchen_m: 3.0,
            inv_max: 2.0,
            n_inv: 50,
            p: 1.0,
            c: 0.5,
            beta: 0.95,
            chi: 0.1,
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownSolution {
    pub inv_grid: Vec<f64>,
    pub demand_grid: Vec<f64>,
    pub transition: DMatrix<f64>,
    /// Indexed `[inventory][demand]`.
    pub v_good: DMatrix<f64>,
    pub v_bad: DMatrix<f64>,
    /// End-of-period inventory chosen in the good state.
    pub policy: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Value iteration on
/// V^G(I,A) = max_{I′ ≥ I − q(A)} p·q(A) − c·(I′ − I + q(A)) + βE[χV^B(I′,A′) + (1−χ)V^G(I′,A′)],
/// V^B(I,A) = p·min(q(A), I) + βE V^G(max(I − q(A), 0), A′),
/// with q(A) = A, the choice restricted to the inventory grid, and a bad
/// period always followed by a good one.
pub fn solve_breakdown_vfi(prob: &BreakdownProblem) -> Result<BreakdownSolution> {
    if !(0.0..=1.0).contains(&prob.chi) || !(prob.beta > 0.0 && prob.beta < 1.0) {
        return Err(Error::Parameter("require χ ∈ [0,1] and β ∈ (0,1)".into()));
    }
    if prob.n_inv < 2 || prob.n_demand < 2 || !(prob.inv_max > 0.0) {
        return Err(Error::Parameter("grids need at least two points and positive range".into()));
    }
    let (dg, tr) = tauchen(prob.demand_mean, prob.demand_rho, prob.demand_sigma, prob.n_demand, prob.tauchen_m);
    let demand_grid: Vec<f64> = dg.iter().copied().collect();
    if demand_grid[0] <= 0.0 {
        return Err(Error::Parameter("demand grid reaches non-positive values".into()));
    }
    let inv_grid = linspace(0.0, prob.inv_max, prob.n_inv);
    let (ni, na) = (prob.n_inv, prob.n_demand);
    let mut vg = DMatrix::<f64>::zeros(ni, na);
    let mut vb = DMatrix::<f64>::zeros(ni, na);
    let mut policy = DMatrix::<f64>::zeros(ni, na);
    let h = inv_grid[1] - inv_grid[0];
    let mut residual = f64::INFINITY;
    for it in 1..=prob.max_iter {
        // Continuation for each (I′, A): E over A′.
        let cont_g = &vg * tr.transpose();
        let cont_b = &vb * tr.transpose();
        let mut vg_new = DMatrix::zeros(ni, na);
        let mut vb_new = DMatrix::zeros(ni, na);
        for a in 0..na {
            let q = demand_grid[a];
            let col_g: Vec<f64> = cont_g.column(a).iter().copied().collect();
            for i in 0..ni {
                let inv = inv_grid[i];
                let floor = inv - q;
                let lo = if floor <= 0.0 { 0 } else { ((floor / h) - 1e-9).ceil() as usize };
                let value = |k: usize| {
                    let y = inv_grid[k] - inv + q;
                    prob.p * q - prob.c * y + prob.beta * (prob.chi * cont_b[(k, a)] + (1.0 - prob.chi) * col_g[k])
                };
                let (mut best, mut arg) = (f64::NEG_INFINITY, lo);
                if lo < ni {
                    for k in lo..ni {
                        let v = value(k);
                        if v > best {
                            best = v;
                            arg = k;
                        }
                    }
                    // Prefer the smallest maximiser to keep ties deterministic.
                    let tie = 1e-12 * best.abs().max(1.0);
                    arg = (lo..=arg).find(|&k| value(k) >= best - tie).unwrap_or(arg);
                } else {
                    return Err(Error::Parameter("inventory grid too short for the feasible set".into()));
                }
                vg_new[(i, a)] = best;
                policy[(i, a)] = inv_grid[arg];
                vb_new[(i, a)] = prob.p * q.min(inv) + prob.beta * interp1(&inv_grid, &col_g, (inv - q).max(0.0));
            }
        }
        residual = (&vg_new - &vg).abs().max().max((&vb_new - &vb).abs().max());
        vg = vg_new;
        vb = vb_new;
        if residual < prob.tol {
            return Ok(BreakdownSolution { inv_grid, demand_grid, transition: tr, v_good: vg, v_bad: vb, policy, iterations: it, residual });
        }
    }
    Err(Error::Convergence { iterations: prob.max_iter, residual })
}

/// Parameters of the time-to-sell model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeToSellParams {
    pub p: f64,
    pub beta: f64,
    pub c: f64,
    /// Share of current production that can be sold within the period.
    pub chi: f64,
    /// Penalty per stock-out event.
    pub b: f64,
    pub dbar: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl Default for TimeToSellParams {
    fn default() -> Self {
        Self { p: 3.0, beta: 0.95, c: 0.3, chi: 0.5, b: 10.0, dbar: 1.0, rho: 0.9, sigma: 0.1 }
    }
}

/// Discretisation of the time-to-sell problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeToSellGrid {
    pub s_max: f64,
    pub n_s: usize,
    pub n_d: usize,
    pub tauchen_m: f64,
    /// Quadrature nodes for the innovation, spanning ±`eps_span`·σ.
    pub n_eps: usize,
    pub eps_span: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub tol: f64,
    /// Policy-evaluation sweeps between improvement steps.
    pub howard: usize,
    pub max_iter: usize,
}

impl Default for TimeToSellGrid {
    fn default() -> Self {
        Self { s_max: 4.0, n_s: 161, n_d: 15, tauchen_m: 3.0, n_eps: 41, eps_span: 4.0, q_max: 8.0, n_q: 801, tol: 1e-8, howard: 30, max_iter: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeToSellSolution {
    pub params: TimeToSellParams,
    pub grid: TimeToSellGrid,
    pub s_grid: Vec<f64>,
    /// Previous-period demand levels.
    pub d_grid: Vec<f64>,
    /// Indexed `[stock][previous demand]`.
    pub value: DMatrix<f64>,
    pub policy: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl TimeToSellSolution {
    /// Bilinear interpolation of a `[stock][demand]` table, clamped.
    fn interp(&self, table: &DMatrix<f64>, s: f64, d: f64) -> f64 {
        bilinear(&self.s_grid, &self.d_grid, table, s, d)
    }

    pub fn production(&self, s: f64, d_prev: f64) -> f64 {
        self.interp(&self.policy, s, d_prev).max(0.0)
    }
}

fn bilinear(sg: &[f64], dg: &[f64], v: &DMatrix<f64>, s: f64, d: f64) -> f64 {
    let (ns, nd) = (sg.len(), dg.len());
    let hs = sg[1] - sg[0];
    let s = s.clamp(sg[0], sg[ns - 1]);
    let i = (((s - sg[0]) / hs) as usize).min(ns - 2);
    let ts = (s - sg[i]) / hs;
    if nd == 1 {
        return (1.0 - ts) * v[(i, 0)] + ts * v[(i + 1, 0)];
    }
    let hd = dg[1] - dg[0];
    let d = d.clamp(dg[0], dg[nd - 1]);
    let j = (((d - dg[0]) / hd) as usize).min(nd - 2);
    let td = (d - dg[j]) / hd;
    (1.0 - ts) * (1.0 - td) * v[(i, j)] + ts * (1.0 - td) * v[(i + 1, j)] + (1.0 - ts) * td * v[(i, j + 1)] + ts * td * v[(i + 1, j + 1)]
}

struct TtsKernel<'a> {
    pr: TimeToSellParams,
    s_grid: &'a [f64],
    d_grid: &'a [f64],
    eps: &'a [f64],
    w: &'a [f64],
}

impl TtsKernel<'_> {
    /// −cq + pE min{cap, y} − b·Pr(y > cap) + βE V(s′, y).
    fn objective(&self, v: &DMatrix<f64>, s: f64, d_prev: f64, q: f64) -> f64 {
        let pr = &self.pr;
        let mu = (1.0 - pr.rho) * pr.dbar + pr.rho * d_prev;
        let cap = s + pr.chi * q;
        let (emin, pout) = if pr.sigma > 0.0 {
            let z = (cap - mu) / pr.sigma;
            let tail = 1.0 - norm_cdf(z);
            (mu - pr.sigma * (norm_pdf(z) - z * tail), tail)
        } else {
            (cap.min(mu), if mu > cap { 1.0 } else { 0.0 })
        };
        let mut cont = 0.0;
        for (e, w) in self.eps.iter().zip(self.w) {
            let y = (mu + e).max(0.0);
            let sales = cap.min(y);
            cont += w * bilinear(self.s_grid, self.d_grid, v, s + q - sales, y);
        }
        -pr.c * q + pr.p * emin - pr.b * pout + pr.beta * cont
    }
}

/// Solves the time-to-sell model by modified policy iteration.
///
/// State: inventory s carried in and previous demand. Production q is chosen
/// before demand y = (1−ρ)D̄ + ρy₋₁ + ε is realised; sales are
/// min{s + χq, y} and s′ = s + q − sales. The current-period expectations
/// use the normal closed forms; the continuation sums over a normal-bin
/// quadrature of ε.
pub fn solve_timetosell(params: &TimeToSellParams, grid: &TimeToSellGrid) -> Result<TimeToSellSolution> {
    let pr = *params;
    if !(pr.beta > 0.0 && pr.beta < 1.0 && pr.chi >= 0.0 && pr.chi <= 1.0 && pr.sigma >= 0.0 && pr.rho.abs() < 1.0) {
        return Err(Error::Parameter(format!("invalid time-to-sell parameters {pr:?}")));
    }
    if grid.n_s < 2 || grid.n_q < 2 || grid.n_d < 1 || grid.n_eps < 1 {
        return Err(Error::Parameter("time-to-sell grids are too small".into()));
    }
    let s_grid = linspace(0.0, grid.s_max, grid.n_s);
    let (d_grid, eps, w) = if pr.sigma > 0.0 && grid.n_d >= 2 {
        let (dg, _) = tauchen(pr.dbar, pr.rho, pr.sigma, grid.n_d, grid.tauchen_m);
        let nodes = if grid.n_eps == 1 { vec![0.0] } else { linspace(-grid.eps_span * pr.sigma, grid.eps_span * pr.sigma, grid.n_eps) };
        let mut wts = Vec::with_capacity(nodes.len());
        for k in 0..nodes.len() {
            let up = if k + 1 == nodes.len() { 1.0 } else { norm_cdf(0.5 * (nodes[k] + nodes[k + 1]) / pr.sigma) };
            let dn = if k == 0 { 0.0 } else { norm_cdf(0.5 * (nodes[k - 1] + nodes[k]) / pr.sigma) };
            wts.push(up - dn);
        }
        (dg.iter().copied().collect::<Vec<_>>(), nodes, wts)
    } else {
        (vec![pr.dbar], vec![0.0], vec![1.0])
    };
    let q_grid = linspace(0.0, grid.q_max, grid.n_q);
    let kernel = TtsKernel { pr, s_grid: &s_grid, d_grid: &d_grid, eps: &eps, w: &w };
    let (ns, nd) = (s_grid.len(), d_grid.len());
    let mut v = DMatrix::<f64>::zeros(ns, nd);
    let mut policy = DMatrix::<f64>::zeros(ns, nd);
    let dq = q_grid[1] - q_grid[0];
    let mut residual = f64::INFINITY;
    for it in 1..=grid.max_iter {
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..ns)
            .into_par_iter()
            .map(|i| {
                let mut vals = Vec::with_capacity(nd);
                let mut pols = Vec::with_capacity(nd);
                for j in 0..nd {
                    let f = |q: f64| kernel.objective(&v, s_grid[i], d_grid[j], q);
                    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
                    for &q in &q_grid {
                        let val = f(q);
                        if val > best {
                            best = val;
                            arg = q;
                        }
                    }
                    // Golden-section refinement inside the neighbouring cells.
                    let (mut a, mut b) = ((arg - dq).max(0.0), (arg + dq).min(grid.q_max));
                    let g = 0.5 * (5f64.sqrt() - 1.0);
                    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
                    let (mut f1, mut f2) = (f(x1), f(x2));
                    for _ in 0..40 {
                        if f1 < f2 {
                            a = x1;
                            x1 = x2;
                            f1 = f2;
                            x2 = a + g * (b - a);
                            f2 = f(x2);
                        } else {
                            b = x2;
                            x2 = x1;
                            f2 = f1;
                            x1 = b - g * (b - a);
                            f1 = f(x1);
                        }
                    }
                    let (xr, fr) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
                    if fr > best {
                        best = fr;
                        arg = xr;
                    }
                    vals.push(best);
                    pols.push(arg);
                }
                (vals, pols)
            })
            .collect();
        let mut v_new = DMatrix::zeros(ns, nd);
        for (i, (vals, pols)) in rows.into_iter().enumerate() {
            for j in 0..nd {
                v_new[(i, j)] = vals[j];
                policy[(i, j)] = pols[j];
            }
        }
        residual = (&v_new - &v).abs().max();
        v = v_new;
        if residual < grid.tol {
            return Ok(TimeToSellSolution { params: pr, grid: *grid, s_grid, d_grid, value: v, policy, iterations: it, residual });
        }
        for _ in 0..grid.howard {
            let cols: Vec<f64> = (0..ns * nd)
                .into_par_iter()
                .map(|k| {
                    let (i, j) = (k / nd, k % nd);
                    kernel.objective(&v, s_grid[i], d_grid[j], policy[(i, j)])
                })
                .collect();
            v = DMatrix::from_fn(ns, nd, |i, j| cols[i * nd + j]);
        }
    }
    Err(Error::Convergence { iterations: grid.max_iter, residual })
}

/// Moments at one aggregation frequency.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// Mean across paths of mean inventory over mean sales.
    pub alpha_mean: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Pooled correlation of the period ratio I/sales with demand.
    pub corr_alpha_demand: f64,
    pub corr_inv_demand: f64,
    pub corr_inv_sales: f64,
    /// σ(production) / σ(demand).
    pub sd_output_over_demand: f64,
    /// σ(sales) / σ(demand).
    pub sd_sales_over_demand: f64,
    /// σ(production) / σ(sales).
    pub sd_output_over_sales: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeToSellMoments {
    pub monthly: MomentSet,
    pub annual: MomentSet,
    /// Share of visits where the stock exceeded the grid.
    pub clamp_share: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Monthly,
    Annual,
}

struct PathSeries {
    q: Vec<f64>,
    sales: Vec<f64>,
    inv: Vec<f64>,
    demand: Vec<f64>,
    clamps: usize,
}

fn simulate_path(sol: &TimeToSellSolution, t: usize, burn: usize, seed: u64, path: u64) -> PathSeries {
    let pr = &sol.params;
    let s_top = *sol.s_grid.last().unwrap();
    let mut rng = stream_rng(seed, &[7, path]);
    let (mut s, mut d_prev) = (0.0, pr.dbar);
    let keep = t - burn;
    let mut out = PathSeries { q: Vec::with_capacity(keep), sales: Vec::with_capacity(keep), inv: Vec::with_capacity(keep), demand: Vec::with_capacity(keep), clamps: 0 };
    for k in 0..t {
        if s > s_top {
            out.clamps += 1;
        }
        let q = sol.production(s, d_prev);
        let z: f64 = StandardNormal.sample(&mut rng);
        let d = (1.0 - pr.rho) * pr.dbar + pr.rho * d_prev + pr.sigma * z;
        let y = d.max(0.0);
        let sales = (s + pr.chi * q).min(y);
        s = s + q - sales;
        if k >= burn {
            out.q.push(q);
            out.sales.push(sales);
            out.inv.push(s);
            out.demand.push(y);
        }
        d_prev = d;
    }
    out
}

fn aggregate(p: &PathSeries, how: Aggregation) -> PathSeries {
    match how {
        Aggregation::Monthly => PathSeries { q: p.q.clone(), sales: p.sales.clone(), inv: p.inv.clone(), demand: p.demand.clone(), clamps: p.clamps },
        Aggregation::Annual => {
            let n = p.q.len() / 12;
            let sum = |x: &[f64]| (0..n).map(|k| x[12 * k..12 * k + 12].iter().sum()).collect::<Vec<f64>>();
            PathSeries {
                q: sum(&p.q),
                sales: sum(&p.sales),
                inv: (0..n).map(|k| p.inv[12 * k + 11]).collect(),
                demand: sum(&p.demand),
                clamps: p.clamps,
            }
        }
    }
}

fn sd_or_zero(x: &[f64]) -> f64 {
    let v = util::sd(x);
    if v.is_finite() { v } else { 0.0 }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 { a / b } else { 0.0 }
}

fn corr_or_zero(x: &[f64], y: &[f64]) -> f64 {
    let c = util::correlation(x, y);
    if c.is_finite() { c } else { 0.0 }
}

fn moments(paths: &[PathSeries]) -> MomentSet {
    let alphas: Vec<f64> = paths.iter().map(|p| ratio(util::mean(&p.inv), util::mean(&p.sales))).collect();
    let (mut ai, mut dm, mut iv, mut sl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for p in paths {
        for k in 0..p.q.len() {
            if p.sales[k] > 0.0 {
                ai.push(p.inv[k] / p.sales[k]);
                dm.push(p.demand[k]);
            }
        }
        iv.extend_from_slice(&p.inv);
        sl.extend_from_slice(&p.sales);
    }
    let dm_all: Vec<f64> = paths.iter().flat_map(|p| p.demand.iter().copied()).collect();
    let sdq = util::mean(&paths.iter().map(|p| sd_or_zero(&p.q)).collect::<Vec<_>>());
    let sds = util::mean(&paths.iter().map(|p| sd_or_zero(&p.sales)).collect::<Vec<_>>());
    let sdd = util::mean(&paths.iter().map(|p| sd_or_zero(&p.demand)).collect::<Vec<_>>());
    MomentSet {
        alpha_mean: util::mean(&alphas),
        alpha_min: alphas.iter().copied().fold(f64::INFINITY, f64::min),
        alpha_max: alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        corr_alpha_demand: corr_or_zero(&ai, &dm),
        corr_inv_demand: corr_or_zero(&iv, &dm_all),
        corr_inv_sales: corr_or_zero(&iv, &sl),
        sd_output_over_demand: ratio(sdq, sdd),
        sd_sales_over_demand: ratio(sds, sdd),
        sd_output_over_sales: ratio(sdq, sds),
    }
}

/// Simulates `paths` independent firms for `t` months, drops `burn`, and
/// reports monthly and annual moments. Annual flows are 12-month sums and
/// the annual stock is the end-of-year stock.
pub fn simulate_policy(sol: &TimeToSellSolution, paths: usize, t: usize, burn: usize, seed: u64) -> Result<TimeToSellMoments> {
    if burn >= t || t - burn < 24 || paths == 0 {
        return Err(Error::Parameter("need at least 24 post burn-in periods and one path".into()));
    }
    let raw: Vec<PathSeries> = (0..paths as u64).into_par_iter().map(|p| simulate_path(sol, t, burn, seed, p)).collect();
    let clamps: usize = raw.iter().map(|p| p.clamps).sum();
    let clamp_share = clamps as f64 / (paths * t) as f64;
    if clamp_share > 1e-3 {
        return Err(Error::Simulation(format!("stock left the grid in {:.3}% of visits", 100.0 * clamp_share)));
    }
    let monthly: Vec<PathSeries> = raw.iter().map(|p| aggregate(p, Aggregation::Monthly)).collect();
    let annual: Vec<PathSeries> = raw.iter().map(|p| aggregate(p, Aggregation::Annual)).collect();
    Ok(TimeToSellMoments { monthly: moments(&monthly), annual: moments(&annual), clamp_share })
}

/// Breakdown policy as a plain table: one row per inventory node.
pub fn policy_table(sol: &BreakdownSolution) -> Vec<Vec<f64>> {
    (0..sol.inv_grid.len()).map(|i| sol.policy.row(i).iter().copied().collect()).collect()
}

/// Simulated inventory path of the breakdown model from I = `start`,
/// drawing demand states from the Tauchen chain and breakdowns with prob. χ.
pub fn simulate_breakdown(sol: &BreakdownSolution, chi: f64, periods: usize, start: f64, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = stream_rng(seed, &[11]);
    let na = sol.demand_grid.len();
    let mut a = na / 2;
    let mut inv = start;
    let mut bad = false;
    let mut out = Vec::with_capacity(periods);
    for _ in 0..periods {
        let q = sol.demand_grid[a];
        inv = if bad {
            (inv - q).max(0.0)
        } else {
            let col: Vec<f64> = sol.policy.column(a).iter().copied().collect();
            interp1(&sol.inv_grid, &col, inv)
        };
        out.push(inv);
        bad = !bad && rng.random::<f64>() < chi;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row: DVector<f64> = sol.transition.row(a).transpose();
        a = (0..na).find(|&k| {
            acc += row[k];
            u < acc
        }).unwrap_or(na - 1);
    }
    out
}
