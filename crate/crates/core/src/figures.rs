//! Figure datasets as CSV tables.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{compare_levels, fit_rates, moment_table, replicate, sweep, CostModel, DriverError, Method, RunConfig, SweepConfig};
use crate::level_stats::LevelMoments;
use crate::output::{to_json, Table};
use crate::payoff::{PayoffKind, PayoffSpec};
use crate::planner::{mlmc_plan, wmlmc_plan, PlanError};
use crate::sde::{ModelSpec, SchemeKind, SchemeSpec};

/// 1/sqrt(2) + 1/4, where two-level MLMC stops beating single-level MC for M = 2.
pub const RHO_STAR: f64 = FRAC_1_SQRT_2 + 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 7] =
        [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub samples_per_level: u64,
    pub seed: u64,
    pub max_level: Option<u32>,
    pub reps: usize,
    pub target_mse: f64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { samples_per_level: 100_000, seed: 1, max_level: None, reps: 100, target_mse: 1e-5 }
    }
}

/// Moment table with equal sigmas and eta_l = 2^{l/2}, as on a grid with M = 2.
pub fn equal_sigma_chain(rhos: &[f64]) -> Vec<LevelMoments> {
    let mut m = vec![LevelMoments::synthetic(1.0, None, 1.0)];
    for (i, &r) in rhos.iter().enumerate() {
        m.push(LevelMoments::synthetic(1.0, Some((1.0, r)), 2f64.powf((i + 1) as f64 / 2.0)));
    }
    m
}

/// Normalized squared costs (MLMC, WMLMC) at the finest level of `moments`.
pub fn normalized_costs(moments: &[LevelMoments]) -> Result<(f64, f64), PlanError> {
    let top = moments.last().unwrap();
    let single = (top.sigma_fine * top.eta).powi(2);
    let ml = mlmc_plan(moments, 1.0)?.planned_cost();
    let wm = wmlmc_plan(moments, 1.0)?.planned_cost();
    Ok((ml / single, wm / single))
}

/// Grid on [lo, hi] with the given step, plus RHO_STAR, sorted.
pub fn rho_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    if (lo..=hi).contains(&RHO_STAR) {
        g.push(RHO_STAR);
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

pub fn fig1_table() -> Result<Table, PlanError> {
    let mut t = Table::new(&["rho", "delta2_mlmc", "delta2_wmlmc", "ratio"]);
    for rho in rho_grid(0.0, 1.0, 0.0025) {
        let (ml, wm) = normalized_costs(&equal_sigma_chain(&[rho]))?;
        t.push(vec![rho.into(), ml.into(), wm.into(), (ml / wm).into()]);
    }
    Ok(t)
}

pub fn fig2_table() -> Result<Table, PlanError> {
    let mut t = Table::new(&["rho1", "rho2", "delta2_mlmc", "delta2_wmlmc", "ratio"]);
    let grid = rho_grid(0.7, 1.0, 0.005);
    for &r1 in &grid {
        for &r2 in &grid {
            let (ml, wm) = normalized_costs(&equal_sigma_chain(&[r1, r2]))?;
            t.push(vec![r1.into(), r2.into(), ml.into(), wm.into(), (ml / wm).into()]);
        }
    }
    Ok(t)
}

/// The Monte Carlo sweep settings behind fig3 to fig6.
pub fn sweep_setup(fig: Figure, opts: &FigureOptions) -> Option<SweepConfig> {
    let (model, kind, m, payoff, depth) = match fig {
        Figure::Fig3 => (ModelSpec::gbm(), SchemeKind::Milstein, 2, PayoffKind::Asian, 12),
        Figure::Fig4 => (ModelSpec::igbm(), SchemeKind::Milstein, 2, PayoffKind::Call, 12),
        Figure::Fig5 => (ModelSpec::cir(), SchemeKind::Milstein, 4, PayoffKind::Call, 6),
        Figure::Fig6 => (ModelSpec::gbm(), SchemeKind::Euler, 4, PayoffKind::Digital, 6),
        _ => return None,
    };
    Some(SweepConfig {
        model,
        scheme: SchemeSpec::new(kind, m),
        payoff: PayoffSpec::new(payoff, 100.0),
        samples_per_level: opts.samples_per_level,
        max_level: opts.max_level.unwrap_or(depth),
        seed: opts.seed,
        bias_fraction: 0.5,
        cost_model: CostModel::CoupledSteps,
    })
}

/// Target MSE values from 1e-2 down to 1e-7, three per decade.
pub fn default_mse_grid() -> Vec<f64> {
    (0..=15).map(|i| 10f64.powf(-2.0 - i as f64 / 3.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub figure: String,
    pub finest_level: usize,
    pub cost_ratio: f64,
    pub coarsest_mlmc: usize,
    pub coarsest_wmlmc: usize,
    pub big_theta_0_wmlmc: f64,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub moments: Vec<LevelMoments>,
}

pub struct SweepFigure {
    pub costs: Table,
    pub levels: Table,
    pub summary: SweepSummary,
}

/// Cost sweep plus the per-level breakdown at the finest level.
pub fn sweep_figure(name: &str, cfg: &SweepConfig, mse_grid: &[f64]) -> Result<SweepFigure, DriverError> {
    let moments = moment_table(cfg)?;
    let rows = sweep(&moments, &cfg.scheme, mse_grid, cfg.bias_fraction)?;
    let mut costs = Table::new(&[
        "eps2",
        "level",
        "bias_met",
        "cost_single",
        "cost_mlmc",
        "cost_wmlmc",
        "eps2_cost_single",
        "eps2_cost_mlmc",
        "eps2_cost_wmlmc",
        "ratio",
        "coarsest_mlmc",
        "coarsest_wmlmc",
    ]);
    for r in &rows {
        costs.push(vec![
            r.eps2.into(),
            r.level.into(),
            r.bias_met.into(),
            r.cost_single.into(),
            r.cost_mlmc.into(),
            r.cost_wmlmc.into(),
            (r.eps2 * r.cost_single).into(),
            (r.eps2 * r.cost_mlmc).into(),
            (r.eps2 * r.cost_wmlmc).into(),
            r.ratio.into(),
            r.coarsest_mlmc.into(),
            r.coarsest_wmlmc.into(),
        ]);
    }
    let (ml, wm, cmp) = compare_levels(&moments, 1.0)?;
    let mut levels = Table::new(&[
        "level",
        "rho",
        "sqrt_one_minus_rho2",
        "var_y",
        "mean_y",
        "theta_wmlmc",
        "big_theta_wmlmc",
        "cost_share_mlmc",
        "cost_share_wmlmc",
    ]);
    let (tm, tw) = (ml.planned_cost(), wm.planned_cost());
    let unit = moments[0].eta.powi(2);
    for c in &cmp {
        levels.push(vec![
            c.level.into(),
            c.rho.into(),
            c.sqrt_one_minus_rho2.into(),
            c.var_y.into(),
            c.mean_y.into(),
            c.theta_wmlmc.into(),
            c.big_theta_wmlmc.into(),
            (c.cost_mlmc * unit / tm).into(),
            (c.cost_wmlmc * unit / tw).into(),
        ]);
    }
    let top = moments.len() - 1;
    let rates = fit_rates(&moments, top);
    let summary = SweepSummary {
        figure: name.to_string(),
        finest_level: top,
        cost_ratio: tm / tw,
        coarsest_mlmc: ml.coarsest,
        coarsest_wmlmc: wm.coarsest,
        big_theta_0_wmlmc: wm.big_theta[0],
        alpha_hat: rates.alpha,
        beta_hat: rates.beta,
        gamma_hat: rates.gamma,
        moments,
    };
    Ok(SweepFigure { costs, levels, summary })
}

/// Equal-width bins over the pooled range of both samples.
pub fn histogram(a: &[f64], b: &[f64], bins: usize) -> Table {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let count = |xs: &[f64]| {
        let mut c = vec![0u64; bins];
        for &x in xs {
            c[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
        c
    };
    let (ca, cb) = (count(a), count(b));
    let mut t = Table::new(&["bin_lo", "bin_hi", "count_mlmc", "count_wmlmc"]);
    for i in 0..bins {
        let l = lo + width * i as f64;
        t.push(vec![l.into(), (l + width).into(), ca[i].into(), cb[i].into()]);
    }
    t
}

/// The adaptive-run configuration behind fig7.
pub fn replication_setup(opts: &FigureOptions) -> RunConfig {
    let mut c = RunConfig::new(
        ModelSpec::igbm(),
        SchemeSpec::new(SchemeKind::Milstein, 2),
        PayoffSpec::new(PayoffKind::Call, 100.0),
        opts.target_mse,
    );
    c.seed = opts.seed;
    c.max_level = opts.max_level.unwrap_or(14);
    c
}

/// Reference value from one WMLMC run at 1/40 of the target MSE on a disjoint seed.
pub fn replication_reference(config: &RunConfig) -> Result<f64, DriverError> {
    let r = RunConfig {
        target_mse: config.target_mse / 40.0,
        seed: config.seed ^ 0x5eed_0000_0000,
        method: Method::Wmlmc,
        ..config.clone()
    };
    Ok(crate::driver::run(&r)?.value)
}

fn json<T: Serialize>(v: &T) -> Result<String, DriverError> {
    to_json(v).map_err(|e| DriverError::Config(e.to_string()))
}

fn write(dir: &Path, file: &str, text: &str) -> Result<(), DriverError> {
    std::fs::write(dir.join(file), text).map_err(|e| DriverError::Config(format!("{}: {e}", dir.join(file).display())))
}

/// Writes the datasets of one figure into `dir`; returns the file names.
pub fn write_figure(fig: Figure, dir: &Path, opts: &FigureOptions) -> Result<Vec<String>, DriverError> {
    let name = fig.name();
    let mut files = Vec::new();
    let mut put = |file: String, text: String| -> Result<(), DriverError> {
        write(dir, &file, &text)?;
        files.push(file);
        Ok(())
    };
    match fig {
        Figure::Fig1 => put(format!("{name}.csv"), fig1_table()?.to_csv())?,
        Figure::Fig2 => put(format!("{name}.csv"), fig2_table()?.to_csv())?,
        Figure::Fig7 => {
            let cfg = replication_setup(opts);
            let reference = replication_reference(&cfg)?;
            let rep = replicate(&cfg, opts.reps, reference)?;
            let mut runs = Table::new(&[
                "rep",
                "value_mlmc",
                "cost_mlmc",
                "level_mlmc",
                "value_wmlmc",
                "cost_wmlmc",
                "level_wmlmc",
            ]);
            for i in 0..opts.reps {
                runs.push(vec![
                    i.into(),
                    rep.mlmc.values[i].into(),
                    rep.mlmc.costs[i].into(),
                    rep.mlmc.final_levels[i].into(),
                    rep.wmlmc.values[i].into(),
                    rep.wmlmc.costs[i].into(),
                    rep.wmlmc.final_levels[i].into(),
                ]);
            }
            put(format!("{name}_runs.csv"), runs.to_csv())?;
            put(format!("{name}_values.csv"), histogram(&rep.mlmc.values, &rep.wmlmc.values, 30).to_csv())?;
            put(format!("{name}_costs.csv"), histogram(&rep.mlmc.costs, &rep.wmlmc.costs, 30).to_csv())?;
            put(format!("{name}_summary.json"), json(&rep)?)?;
        }
        _ => {
            let cfg = sweep_setup(fig, opts).unwrap();
            let f = sweep_figure(name, &cfg, &default_mse_grid())?;
            put(format!("{name}_costs.csv"), f.costs.to_csv())?;
            put(format!("{name}_levels.csv"), f.levels.to_csv())?;
            put(format!("{name}_summary.json"), json(&f.summary)?)?;
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::Cell;

    #[test]
    fn grid_contains_threshold_once() {
        let g = rho_grid(0.0, 1.0, 0.0025);
        assert_eq!(g.iter().filter(|&&r| r == RHO_STAR).count(), 1);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn histogram_counts_everything() {
        let t = histogram(&[0.0, 0.5, 1.0], &[0.25], 4);
        let total: i64 = t.rows.iter().map(|r| match (&r[2], &r[3]) {
            (Cell::Int(a), Cell::Int(b)) => a + b,
            _ => 0,
        }).sum();
        assert_eq!(total, 4);
    }
}
