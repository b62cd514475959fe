//! MLMC and optimally weighted MLMC planning from level moments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level_stats::LevelMoments;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no levels supplied")]
    Empty,
    #[error("target standard deviation must be positive and finite")]
    InvalidTarget,
    #[error("non-finite or negative moments at level {0}")]
    BadMoments(usize),
    #[error("correlation {rho} outside [-1, 1] at level {level}")]
    BadCorrelation { level: usize, rho: f64 },
    #[error("missing coarse moments at level {0}")]
    MissingCoarse(usize),
    #[error("weight vector has {got} entries, expected {expected}")]
    WeightCount { got: usize, expected: usize },
    #[error("missing average for active level {0}")]
    MissingLevel(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMethod {
    Mlmc,
    Wmlmc,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPlan {
    pub level: usize,
    pub theta: f64,
    pub delta: f64,
    pub e_cum: f64,
    pub alpha: f64,
    pub beta: f64,
    pub active: bool,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmlmcPlan {
    pub method: PlanMethod,
    pub v: f64,
    pub levels: Vec<LevelPlan>,
    pub big_theta: Vec<f64>,
    pub n_samples: Vec<u64>,
    pub coarsest: usize,
}

/// Result of one recursion step at level l > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub theta: f64,
    pub delta: f64,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Inputs of one recursion step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInput {
    pub sigma_prev: f64,
    pub sigma: f64,
    pub rho: f64,
    pub eta: f64,
    pub e_prev: f64,
    pub v: f64,
}

impl StepInput {
    /// Restart at this level: single-level estimator, no control variate.
    pub fn reset(&self) -> Step {
        Step {
            theta: 0.0,
            delta: self.sigma,
            e: self.sigma * self.eta / self.v,
            alpha: self.sigma * self.sigma / (self.v * self.v),
            beta: 0.0,
        }
    }

    /// Std. dev. of P_l - theta P^l_{l-1}.
    pub fn delta_theta(&self, theta: f64) -> f64 {
        let (s, sp) = (self.sigma, self.sigma_prev);
        (s * s - 2.0 * theta * self.rho * sp * s + theta * theta * sp * sp).max(0.0).sqrt()
    }

    /// Square-root cumulative cost with weight theta on the coarse term.
    pub fn cost_theta(&self, theta: f64) -> f64 {
        (self.delta_theta(theta) * self.eta + theta.abs() * self.e_prev * self.v) / self.v
    }

    /// Step with a prescribed weight; theta = 0 is a reset.
    pub fn fixed(&self, theta: f64) -> Step {
        if theta == 0.0 {
            return self.reset();
        }
        let delta = self.delta_theta(theta);
        let e = self.cost_theta(theta);
        Step {
            theta,
            delta,
            e,
            alpha: e * delta / (self.eta * self.v),
            beta: e * theta.abs() / self.e_prev,
        }
    }

    /// Threshold |rho| must exceed for a nonzero optimal weight.
    pub fn threshold(&self) -> f64 {
        self.v * self.e_prev / (self.sigma_prev * self.eta)
    }

    /// Closed-form optimal step.
    pub fn optimal(&self) -> Step {
        if !(self.sigma_prev > 0.0 && self.e_prev > 0.0) {
            return self.reset();
        }
        let q = self.threshold();
        if !(self.rho.abs() > q) {
            return self.reset();
        }
        let delta = self.sigma * (1.0 - self.rho * self.rho).max(0.0).sqrt() / (1.0 - q * q).sqrt();
        let theta = self.rho * self.sigma / self.sigma_prev - self.rho.signum() * delta * q / self.sigma_prev;
        let e = (delta * self.eta + theta.abs() * self.e_prev * self.v) / self.v;
        Step {
            theta,
            delta,
            e,
            alpha: e * delta / (self.eta * self.v),
            beta: e * theta.abs() / self.e_prev,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Inputs {
    sigma: f64,
    sigma_prev: f64,
    rho: f64,
    eta: f64,
}

fn check(moments: &[LevelMoments], v: f64) -> Result<Vec<Inputs>, PlanError> {
    if moments.is_empty() {
        return Err(PlanError::Empty);
    }
    if !(v > 0.0 && v.is_finite()) {
        return Err(PlanError::InvalidTarget);
    }
    let mut out = Vec::with_capacity(moments.len());
    for (l, m) in moments.iter().enumerate() {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(m.sigma_fine) || !(m.eta > 0.0 && m.eta.is_finite()) {
            return Err(PlanError::BadMoments(l));
        }
        let (sigma_prev, rho) = if l == 0 {
            (0.0, 0.0)
        } else {
            let sp = m.sigma_coarse.unwrap_or(moments[l - 1].sigma_fine);
            let rho = m.rho.ok_or(PlanError::MissingCoarse(l))?;
            if !ok(sp) || !rho.is_finite() {
                return Err(PlanError::BadMoments(l));
            }
            if rho.abs() > 1.0 {
                return Err(PlanError::BadCorrelation { level: l, rho });
            }
            (sp, rho)
        };
        out.push(Inputs { sigma: m.sigma_fine, sigma_prev, rho, eta: m.eta });
    }
    Ok(out)
}

fn base_step(inp: &Inputs, v: f64) -> Step {
    StepInput { sigma_prev: 0.0, sigma: inp.sigma, rho: 0.0, eta: inp.eta, e_prev: 0.0, v }.reset()
}

fn recurse(
    inputs: &[Inputs],
    v: f64,
    method: PlanMethod,
    mut choose: impl FnMut(usize, &StepInput) -> Step,
) -> WmlmcPlan {
    let mut steps = vec![base_step(&inputs[0], v)];
    for (l, inp) in inputs.iter().enumerate().skip(1) {
        let si = StepInput {
            sigma_prev: inp.sigma_prev,
            sigma: inp.sigma,
            rho: inp.rho,
            eta: inp.eta,
            e_prev: steps[l - 1].e,
            v,
        };
        steps.push(choose(l, &si));
    }
    finish(&steps, inputs, v, method)
}

fn finish(steps: &[Step], inputs: &[Inputs], v: f64, method: PlanMethod) -> WmlmcPlan {
    let top = steps.len() - 1;
    let coarsest = (0..=top).rev().find(|&l| steps[l].theta == 0.0).unwrap_or(0);
    let mut big_theta = vec![0.0; top + 1];
    big_theta[top] = 1.0;
    for l in (0..top).rev() {
        big_theta[l] = big_theta[l + 1] * steps[l + 1].theta;
    }
    let e_top = steps[top].e;
    let levels: Vec<LevelPlan> = steps
        .iter()
        .zip(inputs)
        .enumerate()
        .map(|(l, (s, inp))| LevelPlan {
            level: l,
            theta: s.theta,
            delta: s.delta,
            e_cum: s.e,
            alpha: s.alpha,
            beta: s.beta,
            active: l >= coarsest,
            eta: inp.eta,
        })
        .collect();
    let n_samples = levels
        .iter()
        .map(|lp| {
            if lp.active {
                let n = e_top * lp.delta * big_theta[lp.level].abs() / (v * lp.eta);
                (n.round() as u64).max(1)
            } else {
                0
            }
        })
        .collect();
    WmlmcPlan { method, v, levels, big_theta, n_samples, coarsest }
}

/// Optimally weighted plan by the closed-form recursion.
pub fn wmlmc_plan(moments: &[LevelMoments], v: f64) -> Result<WmlmcPlan, PlanError> {
    let inputs = check(moments, v)?;
    Ok(recurse(&inputs, v, PlanMethod::Wmlmc, |_, si| si.optimal()))
}

/// Plan with prescribed weights theta_1..theta_L; a zero weight restarts the estimator.
pub fn fixed_weight_plan(moments: &[LevelMoments], v: f64, thetas: &[f64]) -> Result<WmlmcPlan, PlanError> {
    let inputs = check(moments, v)?;
    if thetas.len() + 1 != inputs.len() {
        return Err(PlanError::WeightCount { got: thetas.len(), expected: inputs.len() - 1 });
    }
    Ok(recurse(&inputs, v, PlanMethod::Fixed, |l, si| si.fixed(thetas[l - 1])))
}

/// Unweighted MLMC plan starting at a given coarsest level.
pub fn mlmc_plan_from(moments: &[LevelMoments], v: f64, coarsest: usize) -> Result<WmlmcPlan, PlanError> {
    let inputs = check(moments, v)?;
    let coarsest = coarsest.min(inputs.len() - 1);
    Ok(recurse(&inputs, v, PlanMethod::Mlmc, |l, si| {
        if l <= coarsest {
            si.reset()
        } else {
            si.fixed(1.0)
        }
    }))
}

/// Unweighted MLMC plan with the cheapest coarsest level.
///
/// Level l becomes the coarsest whenever sigma_l eta_l does not exceed the best
/// cost through level l-1 plus Delta_l eta_l.
pub fn mlmc_plan(moments: &[LevelMoments], v: f64) -> Result<WmlmcPlan, PlanError> {
    let inputs = check(moments, v)?;
    let mut best = inputs[0].sigma * inputs[0].eta;
    let mut coarsest = 0;
    for (l, inp) in inputs.iter().enumerate().skip(1) {
        let si = StepInput { sigma_prev: inp.sigma_prev, sigma: inp.sigma, rho: inp.rho, eta: inp.eta, e_prev: 1.0, v: 1.0 };
        let single = inp.sigma * inp.eta;
        let kept = best + si.delta_theta(1.0) * inp.eta;
        if single <= kept {
            best = single;
            coarsest = l;
        } else {
            best = kept;
        }
    }
    mlmc_plan_from(moments, v, coarsest)
}

impl WmlmcPlan {
    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    /// Square-root planned cost E_L.
    pub fn e_total(&self) -> f64 {
        self.levels[self.finest()].e_cum
    }

    pub fn planned_cost(&self) -> f64 {
        self.e_total().powi(2)
    }

    /// Unrounded optimal sample counts.
    pub fn continuous_samples(&self) -> Vec<f64> {
        let e = self.e_total();
        self.levels
            .iter()
            .map(|lp| e * lp.delta * self.big_theta[lp.level].abs() / (self.v * lp.eta))
            .collect()
    }

    /// Sum of N_l eta_l^2 over the rounded counts.
    pub fn realized_cost(&self) -> f64 {
        self.levels.iter().zip(&self.n_samples).map(|(lp, &n)| n as f64 * lp.eta * lp.eta).sum()
    }

    /// Sum of (Theta_l Delta_l)^2 / N_l over active levels.
    pub fn predicted_variance(&self) -> f64 {
        self.levels
            .iter()
            .zip(&self.n_samples)
            .filter(|(lp, &n)| lp.active && n > 0)
            .map(|(lp, &n)| (self.big_theta[lp.level] * lp.delta).powi(2) / n as f64)
            .sum()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.levels.iter().map(|lp| lp.theta).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assembled {
    pub value: f64,
    pub cost: f64,
    pub variance: f64,
}

/// Theta-weighted sum of per-level averages of P_l - theta_l P^l_{l-1}.
pub fn assemble(plan: &WmlmcPlan, level_averages: &[Option<f64>]) -> Result<Assembled, PlanError> {
    let mut value = 0.0;
    for lp in plan.levels.iter().filter(|lp| lp.active) {
        let avg = level_averages
            .get(lp.level)
            .copied()
            .flatten()
            .ok_or(PlanError::MissingLevel(lp.level))?;
        value += plan.big_theta[lp.level] * avg;
    }
    Ok(Assembled { value, cost: plan.realized_cost(), variance: plan.predicted_variance() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCostSeq {
    pub deltas: Vec<f64>,
    pub mus: Vec<f64>,
}

/// Normalized WMLMC costs; `rhos[i]` and `mus[i]` belong to level i+1.
pub fn normalized_cost_wmlmc(rhos: &[f64], mus: &[f64]) -> NormalizedCostSeq {
    let mut deltas = vec![1.0];
    for (&rho, &mu) in rhos.iter().zip(mus) {
        let prev = *deltas.last().unwrap();
        let next = if rho.abs() > mu * prev {
            mu * rho.abs() * prev + (1.0 - rho * rho).max(0.0).sqrt() * (1.0 - mu * mu * prev * prev).max(0.0).sqrt()
        } else {
            1.0
        };
        deltas.push(next);
    }
    NormalizedCostSeq { deltas, mus: mus[..rhos.len().min(mus.len())].to_vec() }
}

/// Normalized MLMC costs; `sigma_ratios[i]` is sigma_{l-1}/sigma_l for level l = i+1.
pub fn normalized_cost_mlmc(rhos: &[f64], sigma_ratios: &[f64], mus: &[f64]) -> NormalizedCostSeq {
    let mut deltas = vec![1.0];
    for ((&rho, &s), &mu) in rhos.iter().zip(sigma_ratios).zip(mus) {
        let prev = *deltas.last().unwrap();
        let md = mu * prev;
        let next = if rho > md + 0.5 * s * (1.0 - md * md) {
            s * md + (1.0 - 2.0 * rho * s + s * s).max(0.0).sqrt()
        } else {
            1.0
        };
        deltas.push(next);
    }
    NormalizedCostSeq { deltas, mus: mus[..rhos.len().min(mus.len())].to_vec() }
}

/// Correlation above which level 0 lowers the two-level MLMC cost, for cost growth 2^gamma.
pub fn coarse_level_threshold(sigma_ratio: f64, gamma: f64) -> f64 {
    let g = 2f64.powf(gamma);
    sigma_ratio * (g - 1.0) / (2.0 * g) + 1.0 / g.sqrt()
}

/// Brute-force minimizer of the one-level cost; test oracle only.
///
/// Dense grid on [-b, b] with b = max(2, 2 sigma / sigma_prev), then bisection on the
/// sign of the derivative in the bracketing cell.
pub fn optimal_theta_oracle(sigma_prev: f64, sigma: f64, rho: f64, eta: f64, e_prev: f64, v: f64) -> (f64, f64) {
    let si = StepInput { sigma_prev, sigma, rho, eta, e_prev, v };
    const GRID: usize = 4000;
    let b = (2.0 * sigma / sigma_prev).max(2.0);
    let at = |i: usize| -b + 2.0 * b * i as f64 / GRID as f64;
    let best = (0..=GRID)
        .min_by(|&a, &b| si.cost_theta(at(a)).total_cmp(&si.cost_theta(at(b))))
        .unwrap();
    let smooth = |t: f64| {
        let d = si.delta_theta(t);
        let dd = if d > 0.0 { (t * sigma_prev * sigma_prev - rho * sigma_prev * sigma) / d } else { 0.0 };
        dd * eta / v
    };
    let kink = e_prev;
    let slope = |t: f64| smooth(t) + t.signum() * kink;
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(GRID)));
    if lo < 0.0 && hi > 0.0 && smooth(0.0).abs() <= kink {
        return (0.0, si.cost_theta(0.0));
    }
    if lo < 0.0 && hi > 0.0 {
        if smooth(0.0) > kink {
            hi = 0.0;
        } else {
            lo = 0.0;
        }
    }
    if slope(lo) > 0.0 || slope(hi) < 0.0 {
        let t = if slope(lo) > 0.0 { lo } else { hi };
        return (t, si.cost_theta(t));
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, si.cost_theta(t))
}
