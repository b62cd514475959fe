//! Discounted payoff functionals on path summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sde::{eval_coefficients, AverageRule, ModelSpec, PathSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("strike must be positive and finite")]
    InvalidStrike,
    #[error("level 0 has no coarse path")]
    NoCoarseLevel,
    #[error("increment and node counts disagree")]
    ShapeMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Call,
    Asian,
    Digital,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    pub strike: f64,
}

impl PayoffSpec {
    pub fn new(kind: PayoffKind, strike: f64) -> Self {
        Self { kind, strike }
    }

    pub fn validate(&self) -> Result<(), PayoffError> {
        if self.strike > 0.0 && self.strike.is_finite() {
            Ok(())
        } else {
            Err(PayoffError::InvalidStrike)
        }
    }

    /// Averaging rule the sampler must use for this payoff.
    pub fn average_rule(&self) -> AverageRule {
        match self.kind {
            PayoffKind::Asian => AverageRule::Interpolated,
            _ => AverageRule::Trapezoid,
        }
    }
}

/// Discounted payoff. The digital pays the strike amount when S_T > K e^{rT}.
pub fn evaluate(payoff: &PayoffSpec, path: &PathSummary, model: &ModelSpec) -> f64 {
    let k = payoff.strike;
    let d = model.discount();
    match payoff.kind {
        PayoffKind::Call => d * (path.terminal - k).max(0.0),
        PayoffKind::Asian => d * (path.running_mean - k).max(0.0),
        PayoffKind::Digital => {
            if path.terminal > k * (model.rate * model.horizon).exp() {
                d * k
            } else {
                0.0
            }
        }
    }
}

/// Time average of a coarse path interpolated onto the fine grid.
///
/// `coarse_nodes` holds S_0..S_{J_c} and `fine_dw` the J_c * m fine increments.
/// Between coarse nodes the path is the linear interpolant plus
/// b(S_n) times the deviation of W from its linear interpolant; the average is
/// the trapezoidal rule over all fine times.
pub fn coarse_asian_mean(
    model: &ModelSpec,
    level: u32,
    m: usize,
    fine_dw: &[f64],
    coarse_nodes: &[f64],
) -> Result<f64, PayoffError> {
    if level == 0 {
        return Err(PayoffError::NoCoarseLevel);
    }
    let jc = coarse_nodes.len().saturating_sub(1);
    if jc == 0 || m < 2 || fine_dw.len() != jc * m {
        return Err(PayoffError::ShapeMismatch);
    }
    let mut grid = Vec::with_capacity(jc * m + 1);
    for (n, dw) in fine_dw.chunks_exact(m).enumerate() {
        let (s, next) = (coarse_nodes[n], coarse_nodes[n + 1]);
        let b = eval_coefficients(model, s).b;
        let total: f64 = dw.iter().sum();
        let mut w = 0.0;
        grid.push(s);
        for k in 1..m {
            w += dw[k - 1];
            let frac = k as f64 / m as f64;
            grid.push(s + frac * (next - s) + b * (w - frac * total));
        }
    }
    grid.push(coarse_nodes[jc]);
    let trap: f64 = grid.windows(2).map(|p| 0.5 * (p[0] + p[1])).sum();
    Ok(trap / (jc * m) as f64)
}
