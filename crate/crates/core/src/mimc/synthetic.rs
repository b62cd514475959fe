use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{CovBlock, CovarianceOracle, MimcError, MimcPlan, MultiIndex, TableOracle};
use crate::level_stats::MomentAccumulator;
use crate::rng::{GaussianStream, StreamFactory};

/// Coupled sampler of (P_lambda, P^lambda_nu over the backward box).
pub trait MultiIndexSampler: Sync {
    fn dim(&self) -> usize;
    /// Values ordered as [P_lambda, P_nu for nu in lambda.backward_box()], and the sample cost.
    fn sample(&self, lambda: &MultiIndex, rng: &mut GaussianStream) -> (Vec<f64>, f64);
}

/// Substream key for a multi-index with entries below 128 and d <= 3.
pub fn stream_key(lambda: &MultiIndex) -> u32 {
    assert!(lambda.dim() <= 3 && lambda.0.iter().all(|&x| x < 128));
    lambda.0.iter().enumerate().fold(1 << 23, |k, (i, &x)| k | ((x as u32) << (7 * i)))
}

/// Products of independent per-dimension random walks.
///
/// X_{i,k} = means[i][k] + sum_{j<=k} scales[i][j] Z_{i,j}, and P_lambda = prod_i X_{i,lambda_i}.
/// All P^lambda_nu of one sample share the same Z.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableModel {
    pub means: Vec<Vec<f64>>,
    pub scales: Vec<Vec<f64>>,
    /// eta_lambda = prod_i 2^{cost_rates[i] lambda_i / 2}
    pub cost_rates: Vec<f64>,
}

impl SeparableModel {
    /// Means converging geometrically, innovations decaying like 2^{-var_rate j / 2}.
    pub fn geometric(d: usize, depth: usize, var_rate: f64, cost_rate: f64) -> Self {
        let means = (0..d)
            .map(|i| (0..=depth).map(|k| 1.0 + 0.5 * (i as f64 + 1.0) * 0.5f64.powi(k as i32)).collect())
            .collect();
        let scales = (0..d)
            .map(|i| {
                (0..=depth)
                    .map(|j| if j == 0 { 0.6 + 0.2 * i as f64 } else { 0.4 * 2f64.powf(-var_rate * j as f64 / 2.0) })
                    .collect()
            })
            .collect();
        Self { means, scales, cost_rates: vec![cost_rate; d] }
    }

    fn depth_ok(&self, lambda: &MultiIndex) -> Result<(), MimcError> {
        if lambda.dim() != self.means.len() {
            return Err(MimcError::DimensionMismatch { expected: self.means.len(), got: lambda.dim() });
        }
        if lambda.0.iter().zip(&self.means).any(|(&l, m)| l >= m.len()) {
            return Err(MimcError::MissingNode(lambda.clone()));
        }
        Ok(())
    }

    pub fn mean(&self, lambda: &MultiIndex) -> f64 {
        lambda.0.iter().enumerate().map(|(i, &k)| self.means[i][k]).product()
    }

    pub fn cov(&self, a: &MultiIndex, b: &MultiIndex) -> f64 {
        let second: f64 = (0..a.dim())
            .map(|i| {
                let (x, y) = (a.0[i], b.0[i]);
                let shared: f64 = self.scales[i][..=x.min(y)].iter().map(|s| s * s).sum();
                shared + self.means[i][x] * self.means[i][y]
            })
            .product();
        second - self.mean(a) * self.mean(b)
    }

    pub fn eta(&self, lambda: &MultiIndex) -> f64 {
        lambda.0.iter().zip(&self.cost_rates).map(|(&l, g)| 2f64.powf(g * l as f64 / 2.0)).product()
    }
}

impl CovarianceOracle for SeparableModel {
    fn dim(&self) -> usize {
        self.means.len()
    }

    fn block(&self, lambda: &MultiIndex) -> Result<CovBlock, MimcError> {
        self.depth_ok(lambda)?;
        let nb = lambda.backward_box();
        Ok(CovBlock {
            sigma2: self.cov(lambda, lambda),
            c: nb.iter().map(|nu| self.cov(lambda, nu)).collect(),
            cmat: nb.iter().map(|a| nb.iter().map(|b| self.cov(a, b)).collect()).collect(),
            eta: self.eta(lambda),
        })
    }
}

impl MultiIndexSampler for SeparableModel {
    fn dim(&self) -> usize {
        self.means.len()
    }

    fn sample(&self, lambda: &MultiIndex, rng: &mut GaussianStream) -> (Vec<f64>, f64) {
        let walks: Vec<[f64; 2]> = lambda
            .0
            .iter()
            .enumerate()
            .map(|(i, &top)| {
                let mut x = 0.0;
                let mut prev = 0.0;
                for j in 0..=top {
                    prev = x;
                    x += self.scales[i][j] * rng.next_standard();
                }
                let below = if top > 0 { self.means[i][top - 1] + prev } else { f64::NAN };
                [self.means[i][top] + x, below]
            })
            .collect();
        let value = |nu: &MultiIndex| -> f64 {
            nu.0.iter().enumerate().map(|(i, &k)| walks[i][(k != lambda.0[i]) as usize]).product()
        };
        let mut out = vec![value(lambda)];
        out.extend(lambda.backward_box().iter().map(value));
        (out, self.eta(lambda).powi(2))
    }
}

/// Covariance blocks estimated from `pilot_n` coupled samples per node.
pub fn estimate_oracle(
    sampler: &dyn MultiIndexSampler,
    top: &MultiIndex,
    pilot_n: u64,
    seed: u64,
) -> Result<TableOracle, MimcError> {
    if pilot_n < 2 {
        return Err(MimcError::Unsupported("pilot count must be at least 2".into()));
    }
    let factory = StreamFactory::new(seed);
    let nodes = top
        .lower_set()
        .par_iter()
        .map(|lambda| {
            let k = lambda.backward_box().len() + 1;
            let mut mean = vec![0.0; k];
            let mut co = vec![vec![0.0; k]; k];
            let mut cost = 0.0;
            for i in 0..pilot_n {
                let (x, c) = sampler.sample(lambda, &mut factory.substream(stream_key(lambda), i));
                cost += c;
                let n = (i + 1) as f64;
                let d_old: Vec<f64> = x.iter().zip(&mean).map(|(a, m)| a - m).collect();
                for (m, d) in mean.iter_mut().zip(&d_old) {
                    *m += d / n;
                }
                for a in 0..k {
                    for b in 0..k {
                        co[a][b] += d_old[a] * (x[b] - mean[b]);
                    }
                }
            }
            let dof = (pilot_n - 1) as f64;
            let sym = |a: usize, b: usize| 0.5 * (co[a][b] + co[b][a]) / dof;
            let block = CovBlock {
                sigma2: sym(0, 0),
                c: (1..k).map(|j| sym(0, j)).collect(),
                cmat: (1..k).map(|a| (1..k).map(|b| sym(a, b)).collect()).collect(),
                eta: (cost / pilot_n as f64).sqrt(),
            };
            (lambda.clone(), block)
        })
        .collect::<BTreeMap<_, _>>();
    Ok(TableOracle { dim: sampler.dim(), nodes })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MimcEstimate {
    pub value: f64,
    pub cost: f64,
    pub averages: BTreeMap<MultiIndex, f64>,
}

/// Runs the planned estimator: sum over nu of Theta_nu times the mean of P_nu - t'P^nu.
pub fn run_plan(plan: &MimcPlan, sampler: &dyn MultiIndexSampler, factory: &StreamFactory) -> MimcEstimate {
    let mut value = 0.0;
    let mut cost = 0.0;
    let mut averages = BTreeMap::new();
    for (nu, &n) in plan.n_samples.iter().filter(|(_, &n)| n > 0) {
        let node = &plan.nodes[nu];
        let mut acc = MomentAccumulator::new();
        for i in 0..n {
            let (x, c) = sampler.sample(nu, &mut factory.substream(stream_key(nu), i));
            let y = x[0] - node.t.iter().zip(&x[1..]).map(|(t, p)| t * p).sum::<f64>();
            acc.update(y, None, c);
        }
        value += plan.big_theta[nu] * acc.mean_fine;
        cost += acc.cost;
        averages.insert(nu.clone(), acc.mean_fine);
    }
    MimcEstimate { value, cost, averages }
}
