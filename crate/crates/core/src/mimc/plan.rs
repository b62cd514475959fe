use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{epsilon_sign, CovBlock, CovarianceOracle, MimcError, MultiIndex};
use crate::optim::{minimize, NelderMeadOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weights minimizing each node's cost.
    Optimized,
    /// The unweighted alternating signs.
    EpsilonSigns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MimcNode {
    pub index: MultiIndex,
    pub neighbors: Vec<MultiIndex>,
    pub t: Vec<f64>,
    pub theta_table: BTreeMap<MultiIndex, f64>,
    pub delta: f64,
    pub delta_hat: f64,
    pub w: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub eta_hat: f64,
    /// No control variate: the node restarts the recursion like the origin.
    pub base: bool,
}

impl MimcNode {
    /// alpha / beta, the node's share of a common sample multiplier.
    pub fn ratio(&self) -> f64 {
        if self.base {
            1.0
        } else {
            self.alpha / self.beta
        }
    }

    pub fn theta(&self, nu: &MultiIndex) -> f64 {
        self.theta_table.get(nu).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MimcPlan {
    pub top: MultiIndex,
    pub v: f64,
    pub weighting: Weighting,
    pub nodes: BTreeMap<MultiIndex, MimcNode>,
    pub big_theta: BTreeMap<MultiIndex, f64>,
    pub n_samples: BTreeMap<MultiIndex, u64>,
}

/// v W for weights `t`: eta sqrt(sigma^2 - 2 c't + t'Ct) + eta_hat sqrt(t'Rt).
pub fn node_objective(t: &[f64], block: &CovBlock, r: &[Vec<f64>], eta: f64, eta_hat: f64) -> f64 {
    let (var, quad) = variances(t, block, r);
    eta * var.sqrt() + eta_hat * quad.sqrt()
}

fn quad_form(m: &[Vec<f64>], t: &[f64]) -> f64 {
    m.iter().zip(t).map(|(row, ti)| ti * row.iter().zip(t).map(|(a, b)| a * b).sum::<f64>()).sum()
}

fn variances(t: &[f64], block: &CovBlock, r: &[Vec<f64>]) -> (f64, f64) {
    let ct: f64 = block.c.iter().zip(t).map(|(a, b)| a * b).sum();
    let var = (block.sigma2 - 2.0 * ct + quad_form(&block.cmat, t)).max(0.0);
    let quad = quad_form(r, t).max(0.0);
    (var, quad)
}

/// R over the backward box of `lambda` and the composite coarse cost eta_hat.
///
/// Only nodes reachable with nonzero Theta from some neighbor contribute.
fn lower_terms(
    lambda: &MultiIndex,
    nodes: &BTreeMap<MultiIndex, MimcNode>,
) -> Result<(Vec<Vec<f64>>, f64), MimcError> {
    let nb = lambda.backward_box();
    let nbn: Vec<&MimcNode> = nb
        .iter()
        .map(|k| nodes.get(k).ok_or_else(|| MimcError::MissingNode(k.clone())))
        .collect::<Result<_, _>>()?;
    let k = nb.len();
    let mut r = vec![vec![0.0; k]; k];
    let mut eta_hat2 = 0.0;
    for nu in lambda.lower_set().iter().filter(|nu| *nu != lambda) {
        let node = nodes.get(nu).ok_or_else(|| MimcError::MissingNode(nu.clone()))?;
        let th: Vec<f64> = nbn.iter().map(|n| n.theta(nu)).collect();
        if th.iter().all(|&x| x == 0.0) {
            continue;
        }
        let ratio = node.ratio();
        eta_hat2 += ratio * node.eta * node.eta;
        let w = if node.delta > 0.0 { node.delta * node.delta / ratio } else { 0.0 };
        for a in 0..k {
            for b in 0..k {
                r[a][b] += th[a] * th[b] * w;
            }
        }
    }
    Ok((r, eta_hat2.sqrt()))
}

/// The R matrix of `lambda`; all nodes below it must be optimized.
pub fn build_r_matrix(
    lambda: &MultiIndex,
    nodes: &BTreeMap<MultiIndex, MimcNode>,
) -> Result<Vec<Vec<f64>>, MimcError> {
    lower_terms(lambda, nodes).map(|(r, _)| r)
}

/// Theta^lambda_nu for all nu <= lambda given the weights `t` on the backward box.
pub fn theta_table(
    lambda: &MultiIndex,
    t: &[f64],
    nodes: &BTreeMap<MultiIndex, MimcNode>,
) -> Result<BTreeMap<MultiIndex, f64>, MimcError> {
    let nb = lambda.backward_box();
    let nbn: Vec<&MimcNode> = nb
        .iter()
        .map(|k| nodes.get(k).ok_or_else(|| MimcError::MissingNode(k.clone())))
        .collect::<Result<_, _>>()?;
    Ok(lambda
        .lower_set()
        .into_iter()
        .map(|nu| {
            let th = if &nu == lambda {
                1.0
            } else {
                nbn.iter().zip(t).fold(0.0, |acc, (n, tk)| acc + tk * n.theta(&nu))
            };
            (nu, th)
        })
        .collect())
}

fn base_node(lambda: &MultiIndex, nb: Vec<MultiIndex>, block: &CovBlock, v: f64, eta_hat: f64) -> MimcNode {
    let delta = block.sigma2.max(0.0).sqrt();
    let alpha = delta * delta / (v * v);
    let mut theta_table: BTreeMap<MultiIndex, f64> = lambda.lower_set().into_iter().map(|nu| (nu, 0.0)).collect();
    theta_table.insert(lambda.clone(), 1.0);
    MimcNode {
        index: lambda.clone(),
        t: vec![0.0; nb.len()],
        neighbors: nb,
        theta_table,
        delta,
        delta_hat: 0.0,
        w: delta * block.eta / v,
        alpha,
        beta: alpha,
        eta: block.eta,
        eta_hat,
        base: true,
    }
}

/// Optimizes the weights of node `lambda` given all nodes below it.
pub fn optimize_node(
    lambda: &MultiIndex,
    oracle: &dyn CovarianceOracle,
    nodes: &BTreeMap<MultiIndex, MimcNode>,
    v: f64,
    weighting: Weighting,
    opts: &NelderMeadOptions,
) -> Result<MimcNode, MimcError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(MimcError::InvalidTarget);
    }
    let block = oracle.block(lambda)?;
    block.validate(lambda)?;
    let nb = lambda.backward_box();
    if nb.is_empty() {
        return Ok(base_node(lambda, nb, &block, v, 0.0));
    }
    let (r, eta_hat) = lower_terms(lambda, nodes)?;
    let eta = block.eta;
    let obj = |t: &[f64]| node_objective(t, &block, &r, eta, eta_hat);
    let eps: Vec<f64> = nb.iter().map(|nu| epsilon_sign(lambda, nu) as f64).collect();
    let zero = vec![0.0; nb.len()];
    let t = match weighting {
        Weighting::EpsilonSigns => eps,
        Weighting::Optimized => {
            let runs: Vec<_> = [&eps, &zero].iter().map(|x0| minimize(&obj, x0, opts)).collect();
            let best = runs
                .iter()
                .map(|r| match r {
                    Ok(m) | Err(m) => (m, r.is_ok()),
                })
                .min_by(|a, b| a.0.f.total_cmp(&b.0.f))
                .unwrap();
            if !best.1 {
                return Err(MimcError::NotConverged {
                    index: lambda.clone(),
                    point: best.0.x.clone(),
                    value: best.0.f,
                });
            }
            if obj(&zero) <= best.0.f {
                zero
            } else {
                best.0.x.clone()
            }
        }
    };
    let (var, quad) = variances(&t, &block, &r);
    if t.iter().all(|&x| x == 0.0) || quad <= 0.0 {
        return Ok(base_node(lambda, nb, &block, v, eta_hat));
    }
    let delta = var.sqrt();
    let delta_hat = quad.sqrt();
    let w = (eta * delta + eta_hat * delta_hat) / v;
    let theta_table = theta_table(lambda, &t, nodes)?;
    Ok(MimcNode {
        index: lambda.clone(),
        neighbors: nb,
        t,
        theta_table,
        delta,
        delta_hat,
        w,
        alpha: delta * w / (v * eta),
        beta: w * delta_hat / (v * eta_hat),
        eta,
        eta_hat,
        base: false,
    })
}

fn finish(top: &MultiIndex, v: f64, weighting: Weighting, nodes: BTreeMap<MultiIndex, MimcNode>) -> MimcPlan {
    let top_node = &nodes[top];
    let big_theta = top_node.theta_table.clone();
    let beta_top = top_node.beta;
    let n_samples = big_theta
        .iter()
        .map(|(nu, &th)| {
            let n = if th != 0.0 { ((nodes[nu].ratio() * beta_top).round() as u64).max(1) } else { 0 };
            (nu.clone(), n)
        })
        .collect();
    MimcPlan { top: top.clone(), v, weighting, nodes, big_theta, n_samples }
}

/// Plans every node of the box below `top`, layer by layer in |lambda|.
pub fn mimc_plan(
    top: &MultiIndex,
    oracle: &dyn CovarianceOracle,
    v: f64,
    weighting: Weighting,
) -> Result<MimcPlan, MimcError> {
    check_dim(top, oracle)?;
    let opts = NelderMeadOptions::default();
    let mut nodes = BTreeMap::new();
    let all = top.lower_set();
    for layer in 0..=top.norm1() {
        let here: Vec<&MultiIndex> = all.iter().filter(|l| l.norm1() == layer).collect();
        let done: Vec<MimcNode> = here
            .par_iter()
            .map(|l| optimize_node(l, oracle, &nodes, v, weighting, &opts))
            .collect::<Result<_, _>>()?;
        for n in done {
            nodes.insert(n.index.clone(), n);
        }
    }
    Ok(finish(top, v, weighting, nodes))
}

/// Plans nodes sequentially in the given order, which must extend the partial order.
pub fn mimc_plan_in_order(
    top: &MultiIndex,
    oracle: &dyn CovarianceOracle,
    v: f64,
    weighting: Weighting,
    order: &[MultiIndex],
) -> Result<MimcPlan, MimcError> {
    check_dim(top, oracle)?;
    let mut expected = top.lower_set();
    let mut given = order.to_vec();
    expected.sort();
    given.sort();
    if expected != given {
        return Err(MimcError::BadOrder("order must list every index below the top exactly once".into()));
    }
    let opts = NelderMeadOptions::default();
    let mut nodes = BTreeMap::new();
    for l in order {
        if let Some(missing) = l.lower_set().into_iter().find(|nu| nu != l && !nodes.contains_key(nu)) {
            return Err(MimcError::BadOrder(format!("{l} comes before {missing}")));
        }
        let n = optimize_node(l, oracle, &nodes, v, weighting, &opts)?;
        nodes.insert(l.clone(), n);
    }
    Ok(finish(top, v, weighting, nodes))
}

fn check_dim(top: &MultiIndex, oracle: &dyn CovarianceOracle) -> Result<(), MimcError> {
    if top.dim() != oracle.dim() {
        return Err(MimcError::DimensionMismatch { expected: oracle.dim(), got: top.dim() });
    }
    if top.dim() > 3 {
        return Err(MimcError::Unsupported("at most 3 dimensions are supported".into()));
    }
    Ok(())
}

impl MimcPlan {
    pub fn top_node(&self) -> &MimcNode {
        &self.nodes[&self.top]
    }

    pub fn w_total(&self) -> f64 {
        self.top_node().w
    }

    pub fn planned_cost(&self) -> f64 {
        self.w_total().powi(2)
    }

    /// Unrounded sample counts.
    pub fn continuous_samples(&self) -> BTreeMap<MultiIndex, f64> {
        let beta = self.top_node().beta;
        self.big_theta
            .iter()
            .map(|(nu, &th)| (nu.clone(), if th != 0.0 { self.nodes[nu].ratio() * beta } else { 0.0 }))
            .collect()
    }

    pub fn realized_cost(&self) -> f64 {
        self.n_samples.iter().map(|(nu, &n)| n as f64 * self.nodes[nu].eta.powi(2)).sum()
    }

    pub fn predicted_variance(&self) -> f64 {
        self.n_samples
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(nu, &n)| (self.big_theta[nu] * self.nodes[nu].delta).powi(2) / n as f64)
            .sum()
    }
}
