//! Adaptive target-MSE estimation, cost sweeps and replication studies.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level_stats::{LevelMoments, MomentAccumulator, StatsError};
use crate::payoff::{evaluate, PayoffError, PayoffSpec};
use crate::planner::{mlmc_plan, mlmc_plan_from, wmlmc_plan, PlanError, WmlmcPlan};
use crate::rng::StreamFactory;
use crate::sde::{CoupledSampler, ModelSpec, SchemeSpec, SdeError};

const BLOCK: u64 = 256;
const FINE_ONLY_KEY: u32 = 1 << 22;
const MAX_TOP_UPS: usize = 30;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] SdeError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("level {level}: {source}")]
    Stats { level: usize, source: StatsError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mlmc,
    Wmlmc,
    #[serde(rename = "single")]
    SingleLevel,
}

/// How per-sample cost is charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Fine plus coarse steps, doubled under antithetic sampling.
    CoupledSteps,
    /// Fine steps only, the cost of a single-level sample at the same level.
    FineSteps,
    /// Wall-clock nanoseconds; not reproducible.
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    pub payoff: PayoffSpec,
    pub target_mse: f64,
    pub pilot_n: u64,
    pub max_level: u32,
    pub seed: u64,
    pub method: Method,
    pub bias_fraction: f64,
    pub cost_model: CostModel,
}

impl RunConfig {
    pub fn new(model: ModelSpec, scheme: SchemeSpec, payoff: PayoffSpec, target_mse: f64) -> Self {
        Self {
            model,
            scheme,
            payoff,
            target_mse,
            pilot_n: 20,
            max_level: 12,
            seed: 1,
            method: Method::Wmlmc,
            bias_fraction: 0.5,
            cost_model: CostModel::CoupledSteps,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        self.model.validate()?;
        self.scheme.validate()?;
        self.payoff.validate()?;
        let bad = |m: &str| Err(DriverError::Config(m.to_string()));
        if !(self.target_mse > 0.0 && self.target_mse.is_finite()) {
            return bad("target_mse must be positive");
        }
        if self.pilot_n < 2 {
            return bad("pilot_n must be at least 2");
        }
        if !(self.bias_fraction > 0.0 && self.bias_fraction < 1.0) {
            return bad("bias_fraction must lie in (0, 1)");
        }
        if self.max_level > self.scheme.max_supported_level() {
            return bad("max_level too large for the refinement factor");
        }
        Ok(())
    }

    /// Standard deviation budget for the estimator.
    pub fn v(&self) -> f64 {
        (self.target_mse * (1.0 - self.bias_fraction)).sqrt()
    }
}

/// Draws coupled samples in fixed index blocks and merges them in index order.
pub struct LevelEngine {
    model: ModelSpec,
    scheme: SchemeSpec,
    payoff: PayoffSpec,
    cost_model: CostModel,
    factory: StreamFactory,
}

/// A request for `count` samples starting at sample index `start`.
#[derive(Clone, Copy, Debug)]
pub struct Draw {
    pub level: u32,
    pub coupled: bool,
    pub start: u64,
    pub count: u64,
}

impl LevelEngine {
    pub fn new(model: ModelSpec, scheme: SchemeSpec, payoff: PayoffSpec, cost_model: CostModel, seed: u64) -> Self {
        Self { model, scheme, payoff, cost_model, factory: StreamFactory::new(seed) }
    }

    fn block(&self, d: Draw) -> MomentAccumulator {
        let mut sampler = CoupledSampler::new(self.model, self.scheme, self.payoff.average_rule());
        let mut acc = MomentAccumulator::new();
        let key = if d.coupled { d.level } else { FINE_ONLY_KEY | d.level };
        let pay = |p: &crate::sde::PathSummary| evaluate(&self.payoff, p, &self.model);
        for i in d.start..d.start + d.count {
            let t0 = (self.cost_model == CostModel::Measured).then(Instant::now);
            let s = sampler.sample(d.level, d.coupled, &mut self.factory.substream(key, i));
            let Ok(s) = s else {
                acc.reject();
                continue;
            };
            let (mut pf, mut pc) = (pay(&s.fine), s.coarse.as_ref().map(pay));
            if let Some(a) = &s.antithetic {
                pf = 0.5 * (pf + pay(&a.fine));
                pc = pc.zip(a.coarse.as_ref()).map(|(c, ac)| 0.5 * (c + pay(ac)));
            }
            let cost = match self.cost_model {
                CostModel::CoupledSteps => s.cost_units,
                CostModel::FineSteps => self.scheme.fine_cost(d.level),
                CostModel::Measured => t0.map_or(1.0, |t| t.elapsed().as_nanos().max(1) as f64),
            };
            acc.update(pf, pc, cost);
        }
        acc
    }

    /// Executes the requests, returning one accumulator per request.
    pub fn draw_many(&self, draws: &[Draw]) -> Vec<MomentAccumulator> {
        let blocks: Vec<(usize, Draw)> = draws
            .iter()
            .enumerate()
            .flat_map(|(k, d)| {
                let end = d.start + d.count;
                let mut out = Vec::new();
                let mut s = d.start;
                while s < end {
                    let e = ((s / BLOCK + 1) * BLOCK).min(end);
                    out.push((k, Draw { start: s, count: e - s, ..*d }));
                    s = e;
                }
                out
            })
            .collect();
        let parts: Vec<(usize, MomentAccumulator)> = blocks.par_iter().map(|&(k, d)| (k, self.block(d))).collect();
        let mut out = vec![MomentAccumulator::new(); draws.len()];
        for (k, acc) in parts {
            out[k] = out[k].merge(&acc);
        }
        out
    }

    pub fn draw(&self, level: u32, coupled: bool, start: u64, count: u64) -> MomentAccumulator {
        self.draw_many(&[Draw { level, coupled, start, count }]).pop().unwrap()
    }
}

/// Fitted rates: log2 decay of |E[Y_l]|, Var[Y_l] and growth of eta_l^2 per level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

fn weighted_slope(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    if points.len() < 2 || !(sw > 0.0) {
        return None;
    }
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    Some((sxy / sxx, my - sxy / sxx * mx))
}

/// Remaining bias at level `top` and the fitted weak rate.
///
/// Fits log2|E[Y_l]| over the last min(3, top) levels, weighting each by the inverse
/// standard error of its log, with the rate floored at 0.5. The bias is the fitted
/// |E[Y_top]| / (2^alpha - 1).
pub fn estimate_bias(moments: &[LevelMoments], top: usize) -> (f64, f64) {
    const FLOOR: f64 = 0.5;
    let lo = top.saturating_sub(2).max(1);
    let points: Vec<(f64, f64, f64)> = (lo..=top)
        .filter(|&l| moments[l].mean_y != 0.0)
        .map(|l| {
            let m = &moments[l];
            let se = (m.variance_y() / m.n.max(1) as f64).sqrt();
            let se_log = se / (m.mean_y.abs() * std::f64::consts::LN_2);
            (l as f64, m.mean_y.abs().log2(), 1.0 / se_log.max(1e-8))
        })
        .collect();
    if points.is_empty() {
        return (0.0, f64::NAN);
    }
    let alpha = match weighted_slope(&points) {
        Some((slope, _)) => (-slope).max(FLOOR),
        None => 1.0,
    };
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let intercept = points.iter().map(|p| p.2 * (p.1 + alpha * p.0)).sum::<f64>() / sw;
    let fitted = 2f64.powf(intercept - alpha * top as f64);
    (fitted / (2f64.powf(alpha) - 1.0), alpha)
}

/// Unweighted log2 fits of Var[Y_l] and eta_l^2 over levels 1..=top.
pub fn fit_rates(moments: &[LevelMoments], top: usize) -> Rates {
    let fit = |f: &dyn Fn(&LevelMoments) -> f64| {
        let pts: Vec<(f64, f64, f64)> = (1..=top.min(moments.len() - 1))
            .map(|l| (l as f64, f(&moments[l])))
            .filter(|p| p.1 > 0.0 && p.1.is_finite())
            .map(|p| (p.0, p.1.log2(), 1.0))
            .collect();
        weighted_slope(&pts).map(|(s, _)| s)
    };
    let alpha = estimate_bias(moments, top).1;
    Rates {
        alpha: alpha.is_finite().then_some(alpha),
        beta: fit(&|m| m.variance_y()).map(|s| -s),
        gamma: fit(&|m| m.eta * m.eta),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub n_samples: u64,
    pub rejected: u64,
    pub theta: f64,
    pub big_theta: f64,
    pub delta: f64,
    pub eta: f64,
    pub cost: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub rho: Option<f64>,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub method: Method,
    pub value: f64,
    pub variance: f64,
    pub bias_estimate: f64,
    pub target_mse: f64,
    pub total_cost: f64,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub final_level: usize,
    pub coarsest: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub levels: Vec<LevelSummary>,
}

/// Work still to be done to reach the plan's sample counts.
pub fn remaining_cost(plan: &WmlmcPlan, drawn: &[u64]) -> f64 {
    plan.levels
        .iter()
        .zip(&plan.n_samples)
        .map(|(lp, &n)| n.saturating_sub(drawn.get(lp.level).copied().unwrap_or(0)) as f64 * lp.eta * lp.eta)
        .sum()
}

/// Plan for the method. For MLMC, a previously used coarsest level is kept when
/// that leaves less remaining work than the optimum, so drawn samples are not discarded.
pub fn plan_for(
    method: Method,
    moments: &[LevelMoments],
    v: f64,
    drawn: &[u64],
    prev_coarsest: Option<usize>,
) -> Result<WmlmcPlan, PlanError> {
    match method {
        Method::Mlmc => {
            let best = mlmc_plan(moments, v)?;
            match prev_coarsest {
                Some(c) if c < best.coarsest => {
                    let keep = mlmc_plan_from(moments, v, c)?;
                    if remaining_cost(&keep, drawn) <= remaining_cost(&best, drawn) {
                        Ok(keep)
                    } else {
                        Ok(best)
                    }
                }
                _ => Ok(best),
            }
        }
        _ => wmlmc_plan(moments, v),
    }
}

fn finalize(accs: &[MomentAccumulator]) -> Result<Vec<LevelMoments>, DriverError> {
    accs.iter()
        .enumerate()
        .map(|(level, a)| a.finalize().map_err(|source| DriverError::Stats { level, source }))
        .collect()
}

/// Adaptive estimation to the configured target MSE.
pub fn run(config: &RunConfig) -> Result<EstimatorResult, DriverError> {
    config.validate()?;
    let engine = LevelEngine::new(config.model, config.scheme, config.payoff, config.cost_model, config.seed);
    let v = config.v();
    let bias_budget = config.bias_fraction * config.target_mse;
    let mut top = config.max_level.min(2) as usize;
    let mut accs: Vec<MomentAccumulator> = Vec::new();
    let mut next: Vec<u64> = Vec::new();
    let mut single = MomentAccumulator::new();
    let mut single_next = 0u64;
    let mut coarsest: Option<usize> = None;
    let draw = |accs: &mut Vec<MomentAccumulator>, next: &mut Vec<u64>, want: &[(usize, u64)]| {
        let draws: Vec<Draw> = want
            .iter()
            .map(|&(l, c)| Draw { level: l as u32, coupled: true, start: next[l], count: c })
            .collect();
        for (&(l, c), acc) in want.iter().zip(engine.draw_many(&draws)) {
            accs[l] = accs[l].merge(&acc);
            next[l] += c;
        }
    };
    let (converged, bias) = loop {
        while accs.len() <= top {
            accs.push(MomentAccumulator::new());
            next.push(0);
        }
        let pilots: Vec<(usize, u64)> = (0..=top)
            .filter(|&l| accs[l].n < config.pilot_n)
            .map(|l| (l, config.pilot_n - accs[l].n))
            .collect();
        draw(&mut accs, &mut next, &pilots);
        let moments = if config.method == Method::SingleLevel {
            let mut m = finalize(&accs)?;
            for _ in 0..MAX_TOP_UPS {
                if single.n < 2 {
                    single = single.merge(&engine.draw(top as u32, false, single_next, config.pilot_n));
                    single_next += config.pilot_n;
                }
                let s = single.finalize().map_err(|source| DriverError::Stats { level: top, source })?;
                let want = (s.sigma_fine.powi(2) / (v * v)).ceil().max(1.0) as u64;
                if want <= single.n {
                    break;
                }
                single = single.merge(&engine.draw(top as u32, false, single_next, want - single.n));
                single_next += want - single.n;
                m = finalize(&accs)?;
            }
            m
        } else {
            let mut m = finalize(&accs)?;
            for _ in 0..MAX_TOP_UPS {
                let drawn: Vec<u64> = accs.iter().map(|a| a.n).collect();
                let plan = plan_for(config.method, &m, v, &drawn, coarsest)?;
                coarsest = Some(plan.coarsest);
                let want: Vec<(usize, u64)> = plan
                    .n_samples
                    .iter()
                    .enumerate()
                    .filter(|(l, &n)| n > accs[*l].n)
                    .map(|(l, &n)| (l, n - accs[l].n))
                    .collect();
                if want.is_empty() {
                    break;
                }
                draw(&mut accs, &mut next, &want);
                m = finalize(&accs)?;
            }
            m
        };
        let (bias, _) = estimate_bias(&moments, top);
        if bias * bias <= bias_budget {
            break (true, bias);
        }
        if top as u32 >= config.max_level {
            break (false, bias);
        }
        top += 1;
        if config.method == Method::SingleLevel {
            single = MomentAccumulator::new();
            single_next = 0;
        }
    };
    let moments = finalize(&accs)?;
    let rates = fit_rates(&moments, top);
    let degenerate = moments.iter().all(|m| m.sigma_fine == 0.0 && m.variance_y() == 0.0);
    let mut total_cost: f64 = accs.iter().map(|a| a.cost).sum();
    let (value, variance, plan) = if config.method == Method::SingleLevel {
        let s = single.finalize().map_err(|source| DriverError::Stats { level: top, source })?;
        total_cost += single.cost;
        (s.mean_fine, s.sigma_fine.powi(2) / s.n as f64, None)
    } else {
        let drawn: Vec<u64> = accs.iter().map(|a| a.n).collect();
        let plan = plan_for(config.method, &moments, v, &drawn, coarsest)?;
        let mut value = 0.0;
        let mut variance = 0.0;
        for lp in plan.levels.iter().filter(|lp| lp.active) {
            let l = lp.level;
            let a = &accs[l];
            let (theta, big) = (lp.theta, plan.big_theta[l]);
            value += big * (a.mean_fine - theta * a.mean_coarse);
            let var_t = (a.m2_fine - 2.0 * theta * a.comoment + theta * theta * a.m2_coarse).max(0.0) / (a.n - 1) as f64;
            variance += big * big * var_t / a.n as f64;
        }
        (value, variance, Some(plan))
    };
    let levels = moments
        .iter()
        .enumerate()
        .map(|(l, m)| {
            let lp = plan.as_ref().map(|p| &p.levels[l]);
            let (theta, big_theta, delta, active) = match (lp, config.method) {
                (Some(lp), _) => (lp.theta, plan.as_ref().unwrap().big_theta[l], lp.delta, lp.active),
                (None, _) => (0.0, (l == top) as u8 as f64, m.sigma_fine, false),
            };
            LevelSummary {
                level: l,
                n_samples: m.n,
                rejected: m.rejected,
                theta,
                big_theta,
                delta,
                eta: m.eta,
                cost: accs[l].cost,
                mean_y: m.mean_y,
                var_y: m.variance_y(),
                rho: m.rho,
                active,
            }
        })
        .collect();
    Ok(EstimatorResult {
        method: config.method,
        value,
        variance,
        bias_estimate: bias,
        target_mse: config.target_mse,
        total_cost,
        alpha_hat: rates.alpha,
        beta_hat: rates.beta,
        gamma_hat: rates.gamma,
        final_level: top,
        coarsest: plan.as_ref().map_or(top, |p| p.coarsest),
        converged,
        degenerate,
        levels,
    })
}

/// Settings for a cost-versus-accuracy study from one shared moment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub scheme: SchemeSpec,
    pub payoff: PayoffSpec,
    pub samples_per_level: u64,
    pub max_level: u32,
    pub seed: u64,
    pub bias_fraction: f64,
    pub cost_model: CostModel,
}

/// Moments at levels 0..=max_level from `samples_per_level` coupled samples each.
pub fn moment_table(cfg: &SweepConfig) -> Result<Vec<LevelMoments>, DriverError> {
    cfg.model.validate()?;
    cfg.scheme.validate()?;
    cfg.payoff.validate()?;
    if cfg.max_level > cfg.scheme.max_supported_level() {
        return Err(DriverError::Config("max_level too large for the refinement factor".into()));
    }
    let engine = LevelEngine::new(cfg.model, cfg.scheme, cfg.payoff, cfg.cost_model, cfg.seed);
    let draws: Vec<Draw> = (0..=cfg.max_level)
        .map(|l| Draw { level: l, coupled: true, start: 0, count: cfg.samples_per_level })
        .collect();
    finalize(&engine.draw_many(&draws))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps2: f64,
    pub level: usize,
    pub bias_met: bool,
    pub cost_single: f64,
    pub cost_mlmc: f64,
    pub cost_wmlmc: f64,
    pub ratio: f64,
    pub coarsest_mlmc: usize,
    pub coarsest_wmlmc: usize,
}

/// Planned costs of single-level MC, MLMC and WMLMC in units of a level-0 sample.
///
/// The finest level for each target is the first whose bias estimate meets the budget.
pub fn sweep(
    moments: &[LevelMoments],
    scheme: &SchemeSpec,
    mse_grid: &[f64],
    bias_fraction: f64,
) -> Result<Vec<SweepRow>, DriverError> {
    let unit = moments[0].eta.powi(2);
    let top = moments.len() - 1;
    mse_grid
        .iter()
        .map(|&eps2| {
            let budget = bias_fraction * eps2;
            let found = (2.min(top)..=top).find(|&l| estimate_bias(moments, l).0.powi(2) <= budget);
            let level = found.unwrap_or(top);
            let v = (eps2 * (1.0 - bias_fraction)).sqrt();
            let ml = mlmc_plan(&moments[..=level], v)?;
            let wm = wmlmc_plan(&moments[..=level], v)?;
            let l32 = level as u32;
            let fine_share = scheme.fine_cost(l32) / scheme.coupled_cost(l32, true);
            let single = moments[level].sigma_fine.powi(2) * moments[level].eta.powi(2) * fine_share / (v * v);
            Ok(SweepRow {
                eps2,
                level,
                bias_met: found.is_some(),
                cost_single: single / unit,
                cost_mlmc: ml.planned_cost() / unit,
                cost_wmlmc: wm.planned_cost() / unit,
                ratio: ml.planned_cost() / wm.planned_cost(),
                coarsest_mlmc: ml.coarsest,
                coarsest_wmlmc: wm.coarsest,
            })
        })
        .collect()
}

/// Per-level comparison of both plans at a fixed finest level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    pub level: usize,
    pub rho: f64,
    pub sqrt_one_minus_rho2: f64,
    pub var_y: f64,
    pub mean_y: f64,
    pub theta_wmlmc: f64,
    pub big_theta_wmlmc: f64,
    pub n_mlmc: f64,
    pub n_wmlmc: f64,
    pub cost_mlmc: f64,
    pub cost_wmlmc: f64,
}

pub fn compare_levels(moments: &[LevelMoments], v: f64) -> Result<(WmlmcPlan, WmlmcPlan, Vec<LevelComparison>), DriverError> {
    let ml = mlmc_plan(moments, v)?;
    let wm = wmlmc_plan(moments, v)?;
    let unit = moments[0].eta.powi(2);
    let (nm, nw) = (ml.continuous_samples(), wm.continuous_samples());
    let rows = moments
        .iter()
        .enumerate()
        .map(|(l, m)| {
            let rho = m.rho.unwrap_or(0.0);
            LevelComparison {
                level: l,
                rho,
                sqrt_one_minus_rho2: (1.0 - rho * rho).max(0.0).sqrt(),
                var_y: m.variance_y(),
                mean_y: m.mean_y,
                theta_wmlmc: wm.levels[l].theta,
                big_theta_wmlmc: wm.big_theta[l],
                n_mlmc: nm[l],
                n_wmlmc: nw[l],
                cost_mlmc: nm[l] * m.eta.powi(2) / unit,
                cost_wmlmc: nw[l] * m.eta.powi(2) / unit,
            }
        })
        .collect();
    Ok((ml, wm, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStats {
    pub method: Method,
    pub values: Vec<f64>,
    pub costs: Vec<f64>,
    pub final_levels: Vec<usize>,
    pub mean_value: f64,
    pub mean_cost: f64,
    pub mse: f64,
    pub converged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub reference: f64,
    pub target_mse: f64,
    pub mlmc: ReplicationStats,
    pub wmlmc: ReplicationStats,
    pub cost_ratio: f64,
}

/// Independent adaptive runs of MLMC and WMLMC; replicate r uses seed `config.seed + r` for both.
pub fn replicate(config: &RunConfig, reps: usize, reference: f64) -> Result<Replication, DriverError> {
    let stats = |method: Method| -> Result<ReplicationStats, DriverError> {
        let mut values = Vec::with_capacity(reps);
        let mut costs = Vec::with_capacity(reps);
        let mut final_levels = Vec::with_capacity(reps);
        let mut converged = 0;
        for r in 0..reps {
            let cfg = RunConfig { method, seed: config.seed.wrapping_add(r as u64), ..config.clone() };
            let res = run(&cfg)?;
            values.push(res.value);
            costs.push(res.total_cost);
            final_levels.push(res.final_level);
            converged += res.converged as usize;
        }
        let n = reps as f64;
        Ok(ReplicationStats {
            method,
            mean_value: values.iter().sum::<f64>() / n,
            mean_cost: costs.iter().sum::<f64>() / n,
            mse: values.iter().map(|x| (x - reference).powi(2)).sum::<f64>() / n,
            values,
            costs,
            final_levels,
            converged,
        })
    };
    let mlmc = stats(Method::Mlmc)?;
    let wmlmc = stats(Method::Wmlmc)?;
    Ok(Replication {
        reference,
        target_mse: config.target_mse,
        cost_ratio: mlmc.mean_cost / wmlmc.mean_cost,
        mlmc,
        wmlmc,
    })
}
