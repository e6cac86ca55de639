//! Input-output tables and the network technology derived from them.
//!
//! Orientation is fixed everywhere: row = supplier, column = buyer.
//! `z[(r, s)]` is the value of r's output used by s and `f[(r, j)]` the
//! value of r's output consumed in destination j.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative balance tolerance applied to tables read from disk.
pub const INGEST_TOL: f64 = 1e-6;
/// Relative balance tolerance applied to tables built in memory.
pub const INTERNAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLabel {
    pub id: String,
    pub country: String,
    pub industry: String,
}

impl SectorLabel {
    pub fn new(id: impl Into<String>, country: impl Into<String>, industry: impl Into<String>) -> Self {
        Self { id: id.into(), country: country.into(), industry: industry.into() }
    }

    /// Labels `0..n` spread round-robin over the given countries.
    pub fn synthetic(n: usize, countries: &[String]) -> Vec<Self> {
        (0..n)
            .map(|k| {
                let c = &countries[k % countries.len()];
                Self::new(k.to_string(), c.clone(), format!("ind{}", k / countries.len()))
            })
            .collect()
    }
}

/// An input-output table with intermediate flows, final demand by
/// destination and optional inventory changes and value added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoTable {
    pub sectors: Vec<SectorLabel>,
    pub destinations: Vec<String>,
    pub z: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub delta_n: Option<DMatrix<f64>>,
    pub va: Option<DVector<f64>>,
    /// Gross output.
    pub y: DVector<f64>,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

impl IoTable {
    /// Builds a table whose gross output is the row identity
    /// `Y = ΣZ + ΣF (+ ΣΔN)`.
    pub fn new(
        sectors: Vec<SectorLabel>,
        destinations: Vec<String>,
        z: DMatrix<f64>,
        f: DMatrix<f64>,
        delta_n: Option<DMatrix<f64>>,
        va: Option<DVector<f64>>,
    ) -> Result<Self> {
        let n = sectors.len();
        let mut y = DVector::zeros(n);
        for r in 0..n.min(z.nrows()).min(f.nrows()) {
            y[r] = z.row(r).sum() + f.row(r).sum() + delta_n.as_ref().map_or(0.0, |d| d.row(r).sum());
        }
        let t = Self { sectors, destinations, z, f, delta_n, va, y };
        t.validate(INTERNAL_TOL)?;
        Ok(t)
    }

    pub fn n_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn n_destinations(&self) -> usize {
        self.destinations.len()
    }

    /// Row identity residual, relative to gross output, per sector.
    pub fn balance_residuals(&self) -> DVector<f64> {
        DVector::from_fn(self.n_sectors(), |r, _| {
            let rhs = self.z.row(r).sum()
                + self.f.row(r).sum()
                + self.delta_n.as_ref().map_or(0.0, |d| d.row(r).sum());
            if self.y[r] == 0.0 && rhs == 0.0 {
                0.0
            } else {
                rel_gap(self.y[r], rhs)
            }
        })
    }

    /// Checks shapes, signs, and row (and, with VA, column) balance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.n_sectors();
        let j = self.n_destinations();
        if self.z.shape() != (n, n) {
            return Err(Error::Dimension(format!("Z is {:?}, expected ({n}, {n})", self.z.shape())));
        }
        if self.f.shape() != (n, j) {
            return Err(Error::Dimension(format!("F is {:?}, expected ({n}, {j})", self.f.shape())));
        }
        if let Some(d) = &self.delta_n {
            if d.shape() != (n, j) {
                return Err(Error::Dimension(format!("dN is {:?}, expected ({n}, {j})", d.shape())));
            }
        }
        if let Some(va) = &self.va {
            if va.len() != n {
                return Err(Error::Dimension(format!("VA has {} entries, expected {n}", va.len())));
            }
        }
        if self.y.len() != n {
            return Err(Error::Dimension(format!("Y has {} entries, expected {n}", self.y.len())));
        }
        for (name, m) in [("Z", &self.z), ("F", &self.f)] {
            if let Some((k, v)) = m.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                let (r, c) = (k % m.nrows(), k / m.nrows());
                return Err(Error::Validation(format!(
                    "{name}[{}][{c}] = {v} is negative or not finite",
                    self.sectors[r].id
                )));
            }
        }
        let res = self.balance_residuals();
        let (worst, gap) = res.iter().enumerate().fold((0, 0.0), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
        if gap > tol {
            return Err(Error::Validation(format!(
                "row balance residual {gap:e} exceeds {tol:e}; worst sector {}",
                self.sectors[worst].id
            )));
        }
        if let Some(va) = &self.va {
            for s in 0..n {
                let col = self.z.column(s).sum() + va[s];
                if (self.y[s] != 0.0 || col != 0.0) && rel_gap(self.y[s], col) > tol {
                    return Err(Error::Validation(format!(
                        "column balance residual {:e} for sector {}",
                        rel_gap(self.y[s], col),
                        self.sectors[s].id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multiplies every flow by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            sectors: self.sectors.clone(),
            destinations: self.destinations.clone(),
            z: &self.z * k,
            f: &self.f * k,
            delta_n: self.delta_n.as_ref().map(|d| d * k),
            va: self.va.as_ref().map(|v| v * k),
            y: &self.y * k,
        }
    }

    /// Value added implied by the column identity when none is stored.
    pub fn value_added(&self) -> DVector<f64> {
        match &self.va {
            Some(v) => v.clone(),
            None => DVector::from_fn(self.n_sectors(), |s, _| self.y[s] - self.z.column(s).sum()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a CSV table: `sector_id,country,industry,Z_1..Z_N,F_1..F_J,[dN_1..dN_J],[VA],Y`.
pub fn load_io_table(path: impl AsRef<Path>) -> Result<IoTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_io_table(file)
}

pub fn read_io_table<R: Read>(reader: R) -> Result<IoTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let bad_header = |msg: &str| Error::Parse { line: 1, msg: msg.to_string() };
    if header.len() < 5 || header[0] != "sector_id" || header[1] != "country" || header[2] != "industry" {
        return Err(bad_header("header must start with sector_id,country,industry"));
    }
    if header.last().map(String::as_str) != Some("Y") {
        return Err(bad_header("last column must be Y"));
    }
    let cols = &header[3..header.len() - 1];
    let n_z = cols.iter().take_while(|c| c.starts_with("Z_")).count();
    let n_f = cols[n_z..].iter().take_while(|c| c.starts_with("F_")).count();
    let n_dn = cols[n_z + n_f..].iter().take_while(|c| c.starts_with("dN_")).count();
    let rest = &cols[n_z + n_f + n_dn..];
    let has_va = match rest {
        [] => false,
        [v] if v == "VA" => true,
        _ => return Err(bad_header(&format!("unexpected columns {rest:?}"))),
    };
    if n_f == 0 {
        return Err(bad_header("at least one F_ column is required"));
    }
    if n_dn != 0 && n_dn != n_f {
        return Err(bad_header("dN_ columns must match F_ columns"));
    }
    let destinations: Vec<String> = cols[n_z..n_z + n_f].iter().map(|c| c[2..].to_string()).collect();

    let mut sectors = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Parse { line, msg: format!("expected {} fields, found {}", header.len(), rec.len()) });
        }
        sectors.push(SectorLabel::new(&rec[0], &rec[1], &rec[2]));
        let vals = rec
            .iter()
            .skip(3)
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("'{s}': {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: format!("non-finite value {v}") });
        }
        rows.push(vals);
    }
    let n = sectors.len();
    if n_z != n {
        return Err(bad_header(&format!("{n_z} Z_ columns for {n} sector rows")));
    }
    let j = n_f;
    let z = DMatrix::from_fn(n, n, |r, s| rows[r][s]);
    let f = DMatrix::from_fn(n, j, |r, c| rows[r][n + c]);
    let delta_n = (n_dn > 0).then(|| DMatrix::from_fn(n, j, |r, c| rows[r][n + j + c]));
    let va = has_va.then(|| DVector::from_fn(n, |r, _| rows[r][n + j + n_dn]));
    let y = DVector::from_fn(n, |r, _| *rows[r].last().unwrap());
    for (name, m) in [("Z", &z), ("F", &f)] {
        if let Some(k) = m.iter().position(|v| *v < 0.0) {
            let r = k % n;
            return Err(Error::Validation(format!("negative {name} flow in sector {}", sectors[r].id)));
        }
    }
    let t = IoTable { sectors, destinations, z, f, delta_n, va, y };
    t.validate(INGEST_TOL)?;
    Ok(t)
}

pub fn save_io_table(table: &IoTable, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_io_table(table, file)
}

/// Writes the CSV layout read by [`read_io_table`]. Floats use the
/// shortest round-trip representation, so canonical files are reproduced
/// byte for byte.
pub fn write_io_table<W: Write>(table: &IoTable, writer: W) -> Result<()> {
    let n = table.n_sectors();
    let j = table.n_destinations();
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["sector_id".to_string(), "country".into(), "industry".into()];
    header.extend((1..=n).map(|k| format!("Z_{k}")));
    header.extend(table.destinations.iter().map(|d| format!("F_{d}")));
    if table.delta_n.is_some() {
        header.extend(table.destinations.iter().map(|d| format!("dN_{d}")));
    }
    if table.va.is_some() {
        header.push("VA".into());
    }
    header.push("Y".into());
    w.write_record(&header)?;
    for r in 0..n {
        let s = &table.sectors[r];
        let mut rec = vec![s.id.clone(), s.country.clone(), s.industry.clone()];
        rec.extend((0..n).map(|c| table.z[(r, c)].to_string()));
        rec.extend((0..j).map(|c| table.f[(r, c)].to_string()));
        if let Some(d) = &table.delta_n {
            rec.extend((0..j).map(|c| d[(r, c)].to_string()));
        }
        if let Some(va) = &table.va {
            rec.push(va[r].to_string());
        }
        rec.push(table.y[r].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Folds the inventory-change columns into intermediate use.
///
/// Each supplier's inventory change towards destination j is imputed to
/// the buyers located in j in proportion to their intermediate purchases
/// and added to those intermediate flows. A buyer's imputed inventory
/// consumption is capped at its value added; any amount that cannot be
/// placed reduces the supplier's corrected output. Value added is then
/// reset so that columns balance against the corrected output.
pub fn inventory_correct(table: &IoTable) -> Result<IoTable> {
    let dn = table
        .delta_n
        .as_ref()
        .ok_or_else(|| Error::Validation("inventory correction requires dN columns".into()))?;
    let n = table.n_sectors();
    let mut buyers_by_country: HashMap<&str, Vec<usize>> = HashMap::new();
    for (s, lab) in table.sectors.iter().enumerate() {
        buyers_by_country.entry(lab.country.as_str()).or_default().push(s);
    }
    let everyone: Vec<usize> = (0..n).collect();

    // Proportional imputation ΔN^{rs}.
    let mut alloc = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for (j, dest) in table.destinations.iter().enumerate() {
            let d = dn[(r, j)];
            if d == 0.0 {
                continue;
            }
            let buyers = buyers_by_country.get(dest.as_str()).unwrap_or(&everyone);
            let base: f64 = buyers.iter().map(|&s| table.z[(r, s)]).sum();
            if base <= 0.0 {
                return Err(Error::Allocation { sector: table.sectors[r].id.clone(), delta_n: d });
            }
            for &s in buyers {
                alloc[(r, s)] += table.z[(r, s)] / base * d;
            }
        }
    }

    // Cap inventory consumption at value added. Unplaced amounts shrink the
    // supplier's output, which in turn tightens that sector's own cap, so
    // iterate to the (monotone) fixed point.
    let va0 = table.value_added();
    let dn_total = DVector::from_fn(n, |r, _| dn.row(r).sum());
    let mut scale = vec![1.0; n];
    for _ in 0..=n + 1 {
        let placed = DVector::from_fn(n, |r, _| (0..n).map(|s| alloc[(r, s)] * scale[s]).sum::<f64>());
        let rem = &dn_total - &placed;
        let mut changed = false;
        for s in 0..n {
            let use_s: f64 = alloc.column(s).sum();
            let room = (va0[s] - rem[s]).max(0.0);
            if use_s > room {
                let k = if use_s > 0.0 { room / use_s } else { 0.0 };
                if k < scale[s] - 1e-15 {
                    scale[s] = k;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut z = table.z.clone();
    for r in 0..n {
        for s in 0..n {
            z[(r, s)] += alloc[(r, s)] * scale[s];
            if z[(r, s)] < -1e-12 * table.y[r].abs().max(1.0) {
                return Err(Error::Validation(format!(
                    "inventory drawdown makes flow {}->{} negative",
                    table.sectors[r].id, table.sectors[s].id
                )));
            }
            z[(r, s)] = z[(r, s)].max(0.0);
        }
    }
    let y = DVector::from_fn(n, |r, _| z.row(r).sum() + table.f.row(r).sum());
    let va = DVector::from_fn(n, |s, _| {
        let v = y[s] - z.column(s).sum();
        if v.abs() <= 1e-12 * y[s].abs().max(1.0) { 0.0 } else { v }
    });
    let out = IoTable {
        sectors: table.sectors.clone(),
        destinations: table.destinations.clone(),
        z,
        f: table.f.clone(),
        delta_n: None,
        va: Some(va),
        y,
    };
    out.validate(INTERNAL_TOL)?;
    Ok(out)
}

/// How the expenditure-share matrix Ã is formed from input requirements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Ã = 𝒜Γ̂ with γ_s the column sums of 𝒜.
    #[default]
    InputShare,
    /// Ã = 𝒜, so that L̃BD̄ reproduces measured gross output.
    Direct,
}

/// The technology consumed by every other module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub sectors: Vec<SectorLabel>,
    pub destinations: Vec<String>,
    /// Input requirements, `a[(r, s)] = Z[r][s] / Y[s]`.
    pub a: DMatrix<f64>,
    pub atilde: DMatrix<f64>,
    /// Consumption weights, one column per destination.
    pub b: DMatrix<f64>,
    pub dbar: DVector<f64>,
}

impl NetworkModel {
    /// Builds a model from input requirements using the chosen weighting.
    pub fn new(
        sectors: Vec<SectorLabel>,
        destinations: Vec<String>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        dbar: DVector<f64>,
        weighting: Weighting,
    ) -> Result<Self> {
        let atilde = match weighting {
            Weighting::InputShare => {
                let gamma: Vec<f64> = (0..a.ncols()).map(|s| a.column(s).sum()).collect();
                DMatrix::from_fn(a.nrows(), a.ncols(), |r, s| gamma[s] * a[(r, s)])
            }
            Weighting::Direct => a.clone(),
        };
        let m = Self { sectors, destinations, a, atilde, b, dbar };
        m.validate()?;
        Ok(m)
    }

    /// Builds a model directly from Ã; 𝒜 is recovered as `ã_rs / sqrt(Σ_r ã_rs)`.
    pub fn from_atilde(atilde: DMatrix<f64>, b: DMatrix<f64>, dbar: DVector<f64>) -> Result<Self> {
        let n = atilde.nrows();
        let gamma: Vec<f64> = (0..atilde.ncols()).map(|s| atilde.column(s).sum().max(0.0).sqrt()).collect();
        let a = DMatrix::from_fn(n, atilde.ncols(), |r, s| if gamma[s] > 0.0 { atilde[(r, s)] / gamma[s] } else { 0.0 });
        let dests: Vec<String> = (0..b.ncols()).map(|j| format!("c{j}")).collect();
        let m = Self { sectors: SectorLabel::synthetic(n, &dests), destinations: dests, a, atilde, b, dbar };
        m.validate()?;
        Ok(m)
    }

    pub fn n_sectors(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_destinations(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sectors.len();
        let j = self.destinations.len();
        if self.a.shape() != (n, n) || self.atilde.shape() != (n, n) {
            return Err(Error::Dimension("A and Ã must be N×N".into()));
        }
        if self.b.shape() != (n, j) || self.dbar.len() != j {
            return Err(Error::Dimension(format!("B must be {n}×{j} and D̄ length {j}")));
        }
        for s in 0..n {
            let cs = self.a.column(s).sum();
            if cs >= 1.0 || self.a.column(s).iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::BrauerSolow { sector: self.sectors[s].id.clone(), col_sum: cs });
            }
            let ct = self.atilde.column(s).sum();
            if ct >= 1.0 || self.atilde.column(s).iter().any(|v| *v < 0.0 || *v >= 1.0) {
                return Err(Error::BrauerSolow { sector: self.sectors[s].id.clone(), col_sum: ct });
            }
        }
        for c in 0..j {
            let sum = self.b.column(c).sum();
            if (sum - 1.0).abs() > 1e-12 || self.b.column(c).iter().any(|v| *v < 0.0) {
                return Err(Error::Validation(format!(
                    "consumption weights of destination {} sum to {sum}",
                    self.destinations[c]
                )));
            }
            if !(self.dbar[c] > 0.0) {
                return Err(Error::Validation(format!("D̄ of destination {} is not positive", self.destinations[c])));
            }
        }
        Ok(())
    }

    /// Collapses destinations into one, with B equal to the demand-weighted
    /// row sums and D̄ equal to total demand.
    pub fn collapse_destinations(&self) -> Self {
        let total = self.dbar.sum();
        let b = DMatrix::from_fn(self.n_sectors(), 1, |r, _| {
            (0..self.n_destinations()).map(|j| self.b[(r, j)] * self.dbar[j]).sum::<f64>() / total
        });
        Self {
            sectors: self.sectors.clone(),
            destinations: vec!["world".into()],
            a: self.a.clone(),
            atilde: self.atilde.clone(),
            b,
            dbar: DVector::from_element(1, total),
        }
    }

    /// Replaces the technology matrices, keeping labels, B and D̄.
    pub fn with_atilde(&self, atilde: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::from_atilde(atilde, self.b.clone(), self.dbar.clone())?;
        m.sectors = self.sectors.clone();
        m.destinations = self.destinations.clone();
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the network from a balanced table with the default weighting.
pub fn build_network(table: &IoTable) -> Result<NetworkModel> {
    build_network_with(table, Weighting::InputShare)
}

pub fn build_network_with(table: &IoTable, weighting: Weighting) -> Result<NetworkModel> {
    let n = table.n_sectors();
    let j = table.n_destinations();
    let mut a = DMatrix::zeros(n, n);
    for s in 0..n {
        if table.y[s] <= 0.0 {
            continue;
        }
        for r in 0..n {
            a[(r, s)] = table.z[(r, s)] / table.y[s];
        }
        let cs = a.column(s).sum();
        if cs >= 1.0 {
            return Err(Error::BrauerSolow { sector: table.sectors[s].id.clone(), col_sum: cs });
        }
    }
    for r in 0..n {
        if table.y[r] <= 0.0 {
            a.row_mut(r).fill(0.0);
        }
    }
    let dbar = DVector::from_fn(j, |c, _| table.f.column(c).sum());
    let mut b = DMatrix::zeros(n, j);
    for c in 0..j {
        if dbar[c] <= 0.0 {
            return Err(Error::Validation(format!("destination {} has no final demand", table.destinations[c])));
        }
        for r in 0..n {
            b[(r, c)] = table.f[(r, c)] / dbar[c];
        }
    }
    NetworkModel::new(table.sectors.clone(), table.destinations.clone(), a, b, dbar, weighting)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    Line,
    Diamond,
    RandomSparse { density: f64, seed: u64 },
    Dag { depth: usize, seed: u64 },
}

/// Recipe for a synthetic economy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_sectors: usize,
    pub n_destinations: usize,
    pub topology: Topology,
    /// Minimum consumption share of every sector (random topologies only).
    #[serde(default)]
    pub final_share_floor: f64,
    /// Input-requirement column sums are drawn in `weight_scale·[0.5, 1]`;
    /// chains use exactly `weight_scale`.
    pub weight_scale: f64,
}

impl SyntheticSpec {
    pub fn line(n: usize, weight_scale: f64) -> Self {
        Self { n_sectors: n, n_destinations: 1, topology: Topology::Line, final_share_floor: 0.0, weight_scale }
    }

    pub fn random(n: usize, j: usize, density: f64, seed: u64) -> Self {
        Self {
            n_sectors: n,
            n_destinations: j,
            topology: Topology::RandomSparse { density, seed },
            final_share_floor: 0.0,
            weight_scale: 0.7,
        }
    }
}

fn random_consumption(rng: &mut ChaCha8Rng, eligible: &[usize], n: usize, j: usize, floor: f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, j);
    let spare = 1.0 - floor * n as f64;
    for c in 0..j {
        let raw: Vec<f64> = eligible.iter().map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
        let tot: f64 = raw.iter().sum();
        for r in 0..n {
            b[(r, c)] = floor;
        }
        for (k, &r) in eligible.iter().enumerate() {
            b[(r, c)] += spare * raw[k] / tot;
        }
        let s = b.column(c).sum();
        b.column_mut(c).scale_mut(1.0 / s);
    }
    b
}

/// Deterministically generates a network from a [`SyntheticSpec`].
pub fn synthesize(spec: &SyntheticSpec) -> Result<NetworkModel> {
    let n = spec.n_sectors;
    let j = spec.n_destinations;
    if n == 0 || j == 0 {
        return Err(Error::Spec("n_sectors and n_destinations must be positive".into()));
    }
    if !(spec.weight_scale > 0.0 && spec.weight_scale < 1.0) {
        return Err(Error::Spec(format!("weight_scale {} must lie in (0,1)", spec.weight_scale)));
    }
    if !(spec.final_share_floor >= 0.0 && spec.final_share_floor * (n as f64) < 1.0) {
        return Err(Error::Spec(format!("final_share_floor {} infeasible for {n} sectors", spec.final_share_floor)));
    }
    let dests: Vec<String> = (0..j).map(|c| format!("c{c}")).collect();
    let labels = SectorLabel::synthetic(n, &dests);
    let w = spec.weight_scale;
    let mut a = DMatrix::zeros(n, n);
    let (b, dbar) = match &spec.topology {
        Topology::Line => {
            for k in 1..n {
                a[(k, k - 1)] = w;
            }
            let mut b = DMatrix::zeros(n, j);
            b.row_mut(0).fill(1.0);
            (b, DVector::from_element(j, 1.0))
        }
        Topology::Diamond => {
            if n < 3 {
                return Err(Error::Spec("diamond needs at least 3 sectors".into()));
            }
            let mid = n - 2;
            for m in 1..=mid {
                a[(m, 0)] = w / mid as f64;
                a[(n - 1, m)] = w;
            }
            let mut b = DMatrix::zeros(n, j);
            b.row_mut(0).fill(1.0);
            (b, DVector::from_element(j, 1.0))
        }
        Topology::RandomSparse { density, seed } => {
            if !(*density > 0.0 && *density <= 1.0) {
                return Err(Error::Spec(format!("density {density} must lie in (0,1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for s in 0..n {
                let mut col: Vec<(usize, f64)> = Vec::new();
                for r in 0..n {
                    if r != s && rng.random::<f64>() < *density {
                        col.push((r, 0.1 + 0.9 * rng.random::<f64>()));
                    }
                }
                let target = w * (0.5 + 0.5 * rng.random::<f64>());
                let tot: f64 = col.iter().map(|x| x.1).sum();
                for (r, v) in col {
                    a[(r, s)] = target * v / tot;
                }
            }
            let all: Vec<usize> = (0..n).collect();
            let b = random_consumption(&mut rng, &all, n, j, spec.final_share_floor);
            let dbar = DVector::from_fn(j, |_, _| 0.5 + rng.random::<f64>());
            (b, dbar)
        }
        Topology::Dag { depth, seed } => {
            let depth = *depth;
            if depth == 0 || depth > n {
                return Err(Error::Spec(format!("dag depth {depth} must lie in 1..={n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let layer: Vec<usize> = (0..n).map(|k| if k < depth { k } else { rng.random_range(0..depth) }).collect();
            let by_layer: Vec<Vec<usize>> = (0..depth).map(|l| (0..n).filter(|&k| layer[k] == l).collect()).collect();
            let mut raw = DMatrix::<f64>::zeros(n, n);
            for r in 0..n {
                let l = layer[r];
                if l == 0 {
                    continue;
                }
                let below = &by_layer[l - 1];
                let s = below[rng.random_range(0..below.len())];
                raw[(r, s)] = 0.1 + 0.9 * rng.random::<f64>();
                for s in 0..n {
                    if layer[s] < l && raw[(r, s)] == 0.0 && rng.random::<f64>() < 0.3 {
                        raw[(r, s)] = 0.1 + 0.9 * rng.random::<f64>();
                    }
                }
            }
            for s in 0..n {
                let tot = raw.column(s).sum();
                if tot > 0.0 {
                    let target = w * (0.5 + 0.5 * rng.random::<f64>());
                    for r in 0..n {
                        a[(r, s)] = target * raw[(r, s)] / tot;
                    }
                }
            }
            let b = random_consumption(&mut rng, &by_layer[0], n, j, spec.final_share_floor);
            let dbar = DVector::from_fn(j, |_, _| 0.5 + rng.random::<f64>());
            (b, dbar)
        }
    };
    NetworkModel::new(labels, dests, a, b, dbar, Weighting::InputShare)
}

/// Gross output implied by a model: `Y = (I − 𝒜)⁻¹ F` with `F = B·diag(D̄)`,
/// returned as a balanced table. Useful for round-tripping synthetic
/// economies through the data path.
pub fn table_from_model(model: &NetworkModel) -> Result<IoTable> {
    let n = model.n_sectors();
    let j = model.n_destinations();
    let f = DMatrix::from_fn(n, j, |r, c| model.b[(r, c)] * model.dbar[c]);
    let fr = DVector::from_fn(n, |r, _| f.row(r).sum());
    let lhs = DMatrix::identity(n, n) - &model.a;
    let y = lhs
        .lu()
        .solve(&fr)
        .ok_or_else(|| Error::Numerical { msg: "I − A is singular".into(), cond: f64::INFINITY })?;
    let z = DMatrix::from_fn(n, n, |r, s| model.a[(r, s)] * y[s]);
    let mut t = IoTable {
        sectors: model.sectors.clone(),
        destinations: model.destinations.clone(),
        z,
        f,
        delta_n: None,
        va: None,
        y: y.clone(),
    };
    t.y = DVector::from_fn(n, |r, _| t.z.row(r).sum() + t.f.row(r).sum());
    t.validate(INTERNAL_TOL)?;
    Ok(t)
}
