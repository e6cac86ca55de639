use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use invamp::estimation::{binned_regression, first_order_panel, model_consistent_regression, saturated_regression, Panel, UpsilonLoading};
use invamp::inventory_policies::{self as pol, BreakdownProblem, TimeToSellGrid, TimeToSellParams};
use invamp::io_model::{IoTable, NetworkModel, SyntheticSpec};
use invamp::network_metrics::{exposure_shares, position_metrics, OmegaParams};
use invamp::runner::{self, quantile_edges, NetworkSource, Scenario};
use invamp::shock_engine::{calibrate_varrho, draw_demand, DemandProcess};
use invamp::Result;

#[derive(Parser)]
#[command(name = "invamp", version, about = "Inventory amplification in production networks")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct NetworkArgs {
    /// Input-output table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Network model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Synthetic economy spec JSON.
    #[arg(long)]
    synthetic: Option<PathBuf>,
}

impl NetworkArgs {
    fn load(&self) -> Result<(IoTable, NetworkModel)> {
        let src = if let Some(p) = &self.table {
            NetworkSource::Table { path: p.clone() }
        } else if let Some(p) = &self.model {
            NetworkSource::Model { path: p.clone() }
        } else {
            let path = self.synthetic.as_ref().expect("clap enforces one source");
            let spec: SyntheticSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
            NetworkSource::Synthetic { spec }
        };
        src.load(Path::new(""))
    }
}

#[derive(Args, Clone, Copy)]
struct RuleArgs {
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    rho: f64,
}

#[derive(Args, Clone, Copy)]
struct DemandArgs {
    /// Innovation sd as a share of steady-state demand.
    #[arg(long, default_value_t = 0.05)]
    sigma_share: f64,
    /// Cross-destination innovation correlation.
    #[arg(long, default_value_t = 0.0)]
    varrho: f64,
    /// Calibrate ϱ to this slope of sd(η) on upstreamness instead.
    #[arg(long)]
    calibrate_slope: Option<f64>,
    #[arg(long, default_value_t = 200)]
    t: usize,
    #[arg(long, default_value_t = 100)]
    n_paths: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Spec {
    Binned,
    ModelConsistent,
    Saturated,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    TimeToSell,
    Breakdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyAction {
    Solve,
    Simulate,
}

#[derive(Subcommand)]
enum Command {
    /// Network position metrics.
    Metrics {
        #[command(flatten)]
        network: NetworkArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the network model JSON.
        #[arg(long)]
        emit_model: Option<PathBuf>,
        /// Also write exposure shares as CSV.
        #[arg(long)]
        emit_xi: Option<PathBuf>,
    },
    /// Draw destination demand paths.
    Shocks {
        #[command(flatten)]
        network: NetworkArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        demand: DemandArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a first-order sector growth panel.
    Simulate {
        #[command(flatten)]
        network: NetworkArgs,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        demand: DemandArgs,
        /// Measurement noise added to growth.
        #[arg(long, default_value_t = 0.0)]
        noise_sd: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve or simulate a firm-level inventory problem.
    Policy {
        #[arg(value_enum)]
        action: PolicyAction,
        #[arg(long, value_enum, default_value = "time-to-sell")]
        kind: PolicyKind,
        /// Parameter JSON; defaults when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[arg(long, default_value_t = 960)]
        periods: usize,
        #[arg(long, default_value_t = 240)]
        burn: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regressions on a simulated panel.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, value_enum)]
        spec: Spec,
        /// Upstreamness bin edges (comma separated); quantiles when absent.
        #[arg(long, value_delimiter = ',')]
        bins: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        n_bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Baseline versus counterfactual moments for scenario JSON files.
    Counterfactual {
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end run from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn process(model: &NetworkModel, d: &DemandArgs, seed: u64, rho: f64) -> Result<DemandProcess> {
    let sigma: Vec<f64> = model.dbar.iter().map(|x| x * d.sigma_share).collect();
    let varrho = match d.calibrate_slope {
        Some(target) => calibrate_varrho(model, &sigma, target)?.varrho,
        None => d.varrho,
    };
    Ok(DemandProcess { dbar: model.dbar.iter().copied().collect(), rho, sigma, varrho, seed })
}

fn run(cli: Cli) -> Result<bool> {
    let seed = cli.seed;
    match cli.command {
        Command::Metrics { network, rule, out, emit_model, emit_xi } => {
            let (table, model) = network.load()?;
            let params = OmegaParams::new(rule.alpha, rule.rho)?;
            write_json(&out, &position_metrics(&table, &model, &params)?)?;
            if let Some(p) = emit_model {
                fs::write(p, model.to_json()?)?;
            }
            if let Some(p) = emit_xi {
                let xi = exposure_shares(&model)?.xi;
                let mut s = String::from("sector");
                for d in &model.destinations {
                    s.push(',');
                    s.push_str(d);
                }
                s.push('\n');
                for (r, lab) in model.sectors.iter().enumerate() {
                    s.push_str(&lab.id);
                    for c in 0..xi.ncols() {
                        s.push_str(&format!(",{}", xi[(r, c)]));
                    }
                    s.push('\n');
                }
                fs::write(p, s)?;
            }
        }
        Command::Shocks { network, rule, demand, out } => {
            let (_, model) = network.load()?;
            let pr = process(&model, &demand, seed, rule.rho)?;
            let paths = draw_demand(&pr, demand.t, demand.n_paths)?;
            let mut s = String::from("path,time");
            for d in &model.destinations {
                s.push(',');
                s.push_str(d);
            }
            s.push('\n');
            for (p, m) in paths.paths.iter().enumerate() {
                for k in 0..m.ncols() {
                    s.push_str(&format!("{p},{k}"));
                    for v in m.column(k).iter() {
                        s.push_str(&format!(",{v}"));
                    }
                    s.push('\n');
                }
            }
            fs::write(out, s)?;
        }
        Command::Simulate { network, rule, demand, noise_sd, out } => {
            let (_, model) = network.load()?;
            let params = OmegaParams::new(rule.alpha, rule.rho)?;
            let pr = process(&model, &demand, seed, rule.rho)?;
            let paths = draw_demand(&pr, demand.t + 1, demand.n_paths)?;
            first_order_panel(&model, &params, &paths, noise_sd, seed)?.save(out)?;
        }
        Command::Policy { action, kind, params, paths, periods, burn, out } => {
            let text = params.map(fs::read_to_string).transpose()?;
            match kind {
                PolicyKind::TimeToSell => {
                    let p: TimeToSellParams = text.map(|t| serde_json::from_str(&t)).transpose()?.unwrap_or_default();
                    let sol = pol::solve_timetosell(&p, &TimeToSellGrid::default())?;
                    match action {
                        PolicyAction::Solve => write_json(&out, &sol)?,
                        PolicyAction::Simulate => write_json(&out, &pol::simulate_policy(&sol, paths, periods, burn, seed)?)?,
                    }
                }
                PolicyKind::Breakdown => {
                    let p: BreakdownProblem = text.map(|t| serde_json::from_str(&t)).transpose()?.unwrap_or_default();
                    let sol = pol::solve_breakdown_vfi(&p)?;
                    match action {
                        PolicyAction::Solve => write_json(&out, &sol)?,
                        PolicyAction::Simulate => write_json(&out, &pol::simulate_breakdown(&sol, p.chi, periods, 0.0, seed))?,
                    }
                }
            }
        }
        Command::Estimate { panel, spec, bins, n_bins, out } => {
            let panel = Panel::load(panel)?;
            match spec {
                Spec::Binned => {
                    let edges = bins.unwrap_or_else(|| quantile_edges(panel.col("u").unwrap_or(&[]), n_bins));
                    write_json(&out, &binned_regression(&panel, "dlogy", "eta", "u", &edges)?)?;
                }
                Spec::ModelConsistent => {
                    write_json(&out, &model_consistent_regression(&panel, "dlogy", "eta", "upsilon", "alpha", UpsilonLoading::AlphaWeighted)?)?;
                }
                Spec::Saturated => write_json(&out, &saturated_regression(&panel, "dlogy", "eta", "u", "alpha")?)?,
            }
        }
        Command::Counterfactual { scenario, out } => {
            fs::create_dir_all(&out)?;
            let mut reports = Vec::new();
            for path in scenario {
                let mut s: Scenario = serde_json::from_str(&fs::read_to_string(&path)?)?;
                s.seed = s.seed.wrapping_add(seed);
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                reports.push(runner::run_scenario(&s, &base)?);
            }
            let table = runner::moment_table(&reports)?;
            fs::write(out.join("moments.csv"), &table.csv)?;
            fs::write(out.join("moments.txt"), &table.text)?;
            write_json(&out.join("moments.json"), &reports)?;
            print!("{}", table.text);
        }
        Command::Pipeline { config, out } => {
            let manifest = runner::pipeline(&config, &out)?;
            if let Some(stage) = &manifest.failed_stage {
                eprintln!("pipeline failed at stage {stage}");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
