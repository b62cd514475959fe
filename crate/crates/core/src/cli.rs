//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::driver::{run, EstimatorResult};
use crate::figures::{write_figure, Figure, FigureOptions};
use crate::level_stats::LevelMoments;
use crate::mimc::{mimc_plan, CovarianceOracle, MimcPlan, MultiIndex, SeparableModel, TableOracle, Weighting};
use crate::output::{fmt_num, to_json, Table};
use crate::planner::{mlmc_plan, wmlmc_plan, WmlmcPlan};

pub const OUT_DIR_ENV: &str = "WMLMC_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "wmlmc", version, about = "Weighted multilevel and multi-index Monte Carlo")]
pub struct Cli {
    /// Worker thread count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FigureArg {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Optimized,
    Epsilon,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Adaptive estimate to a target MSE.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MLMC and WMLMC plans for a table of level moments.
    Plan {
        /// JSON array of level moments.
        #[arg(long)]
        moments: PathBuf,
        /// Standard deviation target.
        #[arg(long, conflicts_with = "target_mse")]
        v: Option<f64>,
        /// MSE target, split evenly between bias and variance.
        #[arg(long)]
        target_mse: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Figure datasets as CSV.
    Figures {
        #[arg(long, value_enum, default_value = "all")]
        which: Vec<FigureArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        samples_per_level: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        max_level: Option<u32>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 1e-5)]
        target_mse: f64,
    },
    /// Weighted multi-index plan from a covariance table.
    MimcPlan {
        /// JSON covariance table; omit to use the built-in separable model.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Dimension; must match the table.
        #[arg(long)]
        dim: Option<usize>,
        /// Top multi-index, e.g. 3,2.
        #[arg(long)]
        top: String,
        #[arg(long)]
        v: f64,
        #[arg(long, value_enum, default_value = "optimized")]
        weighting: WeightingArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    NotConverged(String),
    Other(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::NotConverged(m) | CliError::Other(m) => m,
        }
    }
}

fn other<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Other(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn out_dir(flag: Option<PathBuf>, configured: Option<&str>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| configured.map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Other(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text).map_err(|e| CliError::Other(format!("{}: {e}", dir.join(name).display())))
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    to_json(v).map_err(other)
}

pub fn levels_table(result: &EstimatorResult) -> Table {
    let mut t = Table::new(&["level", "n_samples", "theta", "big_theta", "delta", "eta", "cost"]);
    for l in &result.levels {
        t.push(vec![
            l.level.into(),
            l.n_samples.into(),
            l.theta.into(),
            l.big_theta.into(),
            l.delta.into(),
            l.eta.into(),
            l.cost.into(),
        ]);
    }
    t
}

#[derive(Serialize)]
struct EstimateFile<'a> {
    config: &'a ExperimentConfig,
    result: &'a EstimatorResult,
}

fn cmd_estimate(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<String, CliError> {
    let text = read(config)?;
    let mut cfg =
        ExperimentConfig::from_json(&text).map_err(|e| CliError::Schema(format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    let rc = cfg.run_config().map_err(|e| CliError::Schema(e.to_string()))?;
    let result = run(&rc).map_err(other)?;
    let dir = out_dir(out, cfg.output.path.as_deref())?;
    if cfg.output.format != OutputFormat::Csv {
        write(&dir, "estimate.json", &json(&EstimateFile { config: &cfg, result: &result })?)?;
    }
    if cfg.output.format != OutputFormat::Json {
        write(&dir, "levels.csv", &levels_table(&result).to_csv())?;
    }
    let line = format!(
        "value {} variance {} cost {} L {}",
        fmt_num(result.value),
        fmt_num(result.variance),
        fmt_num(result.total_cost),
        result.final_level
    );
    if !result.converged {
        return Err(CliError::NotConverged(format!("bias target not met by max_level; {line}")));
    }
    Ok(line)
}

pub fn plan_table(plan: &WmlmcPlan) -> Table {
    let mut t = Table::new(&[
        "level", "theta", "big_theta", "delta", "e_cum", "alpha", "beta", "active", "n_samples", "n_continuous",
    ]);
    let nc = plan.continuous_samples();
    for (lp, n) in plan.levels.iter().zip(&plan.n_samples) {
        t.push(vec![
            lp.level.into(),
            lp.theta.into(),
            plan.big_theta[lp.level].into(),
            lp.delta.into(),
            lp.e_cum.into(),
            lp.alpha.into(),
            lp.beta.into(),
            lp.active.into(),
            (*n).into(),
            nc[lp.level].into(),
        ]);
    }
    t
}

#[derive(Serialize)]
struct PlanSummary<'a> {
    v: f64,
    cost_mlmc: f64,
    cost_wmlmc: f64,
    ratio: f64,
    coarsest_mlmc: usize,
    coarsest_wmlmc: usize,
    mlmc: &'a WmlmcPlan,
    wmlmc: &'a WmlmcPlan,
}

fn cmd_plan(moments: &Path, v: Option<f64>, mse: Option<f64>, out: Option<PathBuf>) -> Result<String, CliError> {
    let text = read(moments)?;
    let table: Vec<LevelMoments> =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", moments.display())))?;
    let v = match (v, mse) {
        (Some(v), _) => v,
        (None, Some(m)) => (m / 2.0).sqrt(),
        (None, None) => return Err(CliError::Schema("one of --v or --target-mse is required".into())),
    };
    let schema = |e: crate::planner::PlanError| CliError::Schema(format!("{}: {e}", moments.display()));
    let ml = mlmc_plan(&table, v).map_err(schema)?;
    let wm = wmlmc_plan(&table, v).map_err(schema)?;
    let dir = out_dir(out, None)?;
    write(&dir, "plan_mlmc.csv", &plan_table(&ml).to_csv())?;
    write(&dir, "plan_wmlmc.csv", &plan_table(&wm).to_csv())?;
    let summary = PlanSummary {
        v,
        cost_mlmc: ml.planned_cost(),
        cost_wmlmc: wm.planned_cost(),
        ratio: ml.planned_cost() / wm.planned_cost(),
        coarsest_mlmc: ml.coarsest,
        coarsest_wmlmc: wm.coarsest,
        mlmc: &ml,
        wmlmc: &wm,
    };
    write(&dir, "plan_summary.json", &json(&summary)?)?;
    Ok(format!("ratio {}", fmt_num(summary.ratio)))
}

fn cmd_figures(which: &[FigureArg], out: Option<PathBuf>, opts: &FigureOptions) -> Result<String, CliError> {
    let dir = out_dir(out, None)?;
    let mut figs: Vec<Figure> = Vec::new();
    for w in which {
        let add: Vec<Figure> = match w {
            FigureArg::All => Figure::ALL.to_vec(),
            FigureArg::Fig1 => vec![Figure::Fig1],
            FigureArg::Fig2 => vec![Figure::Fig2],
            FigureArg::Fig3 => vec![Figure::Fig3],
            FigureArg::Fig4 => vec![Figure::Fig4],
            FigureArg::Fig5 => vec![Figure::Fig5],
            FigureArg::Fig6 => vec![Figure::Fig6],
            FigureArg::Fig7 => vec![Figure::Fig7],
        };
        for f in add {
            if !figs.contains(&f) {
                figs.push(f);
            }
        }
    }
    let mut files = Vec::new();
    for f in figs {
        files.extend(write_figure(f, &dir, opts).map_err(other)?);
    }
    Ok(files.join(" "))
}

pub fn mimc_nodes_table(plan: &MimcPlan) -> Table {
    let join = |xs: Vec<String>, sep: &str| xs.join(sep);
    let mut t = Table::new(&[
        "index", "norm1", "t", "delta", "delta_hat", "w", "alpha", "beta", "base", "big_theta", "n_samples",
    ]);
    for (nu, node) in &plan.nodes {
        t.push(vec![
            join(nu.0.iter().map(|x| x.to_string()).collect(), ":").as_str().into(),
            nu.norm1().into(),
            join(node.t.iter().map(|&x| fmt_num(x)).collect(), ";").as_str().into(),
            node.delta.into(),
            node.delta_hat.into(),
            node.w.into(),
            node.alpha.into(),
            node.beta.into(),
            node.base.into(),
            plan.big_theta.get(nu).copied().unwrap_or(0.0).into(),
            plan.n_samples.get(nu).copied().unwrap_or(0).into(),
        ]);
    }
    t
}

fn cmd_mimc_plan(
    oracle: Option<&Path>,
    dim: Option<usize>,
    top: &str,
    v: f64,
    weighting: WeightingArg,
    out: Option<PathBuf>,
) -> Result<String, CliError> {
    let top: MultiIndex = top.parse().map_err(|e| CliError::Schema(format!("--top: {e}")))?;
    let table: Box<dyn CovarianceOracle> = match oracle {
        Some(p) => {
            let t: TableOracle =
                serde_json::from_str(&read(p)?).map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?;
            t.validate().map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?;
            Box::new(t)
        }
        None => Box::new(SeparableModel::geometric(top.dim(), top.0.iter().copied().max().unwrap_or(0), 1.5, 1.0)),
    };
    if let Some(d) = dim {
        if d != table.dim() || d != top.dim() {
            return Err(CliError::Schema(format!("--dim {d} does not match the table or --top")));
        }
    }
    let w = match weighting {
        WeightingArg::Optimized => Weighting::Optimized,
        WeightingArg::Epsilon => Weighting::EpsilonSigns,
    };
    let plan = mimc_plan(&top, table.as_ref(), v, w).map_err(|e| match e {
        crate::mimc::MimcError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
        crate::mimc::MimcError::Unsupported(_) => CliError::Other(e.to_string()),
        _ => CliError::Schema(e.to_string()),
    })?;
    let dir = out_dir(out, None)?;
    write(&dir, "mimc_plan.json", &json(&plan)?)?;
    write(&dir, "mimc_nodes.csv", &mimc_nodes_table(&plan).to_csv())?;
    Ok(format!("cost {}", fmt_num(plan.planned_cost())))
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Estimate { config, seed, out } => cmd_estimate(&config, seed, out),
        Command::Plan { moments, v, target_mse, out } => cmd_plan(&moments, v, target_mse, out),
        Command::Figures { which, out, samples_per_level, seed, max_level, reps, target_mse } => {
            let opts = FigureOptions { samples_per_level, seed, max_level, reps, target_mse };
            cmd_figures(&which, out, &opts)
        }
        Command::MimcPlan { oracle, dim, top, v, weighting, out } => {
            cmd_mimc_plan(oracle.as_deref(), dim, &top, v, weighting, out)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let threads = cli.threads;
    let go = move || dispatch(cli);
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(go),
            Err(e) => Err(other(e)),
        },
        None => go(),
    };
    match outcome {
        Ok(line) => {
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
