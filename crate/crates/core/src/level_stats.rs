//! Streaming, mergeable per-level moments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 samples, have {0}")]
    InsufficientData(u64),
}

/// Online first and second moments of (P_l, P^l_{l-1}, Y_l) plus accumulated cost.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MomentAccumulator {
    pub n: u64,
    pub mean_fine: f64,
    pub m2_fine: f64,
    pub mean_coarse: f64,
    pub m2_coarse: f64,
    pub comoment: f64,
    pub mean_y: f64,
    pub m2_y: f64,
    pub cost: f64,
    pub has_coarse: bool,
    pub rejected: u64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, fine: f64, coarse: Option<f64>, cost: f64) {
        self.n += 1;
        let n = self.n as f64;
        let df = fine - self.mean_fine;
        self.mean_fine += df / n;
        self.m2_fine += df * (fine - self.mean_fine);
        let y = match coarse {
            Some(c) => {
                self.has_coarse = true;
                let dc = c - self.mean_coarse;
                self.mean_coarse += dc / n;
                self.m2_coarse += dc * (c - self.mean_coarse);
                self.comoment += df * (c - self.mean_coarse);
                fine - c
            }
            None => fine,
        };
        let dy = y - self.mean_y;
        self.mean_y += dy / n;
        self.m2_y += dy * (y - self.mean_y);
        self.cost += cost;
    }

    pub fn reject(&mut self) {
        self.rejected += 1;
    }

    /// Combination of two disjoint streams (Chan et al. pairwise update).
    pub fn merge(&self, other: &Self) -> Self {
        if other.n == 0 {
            let mut out = self.clone();
            out.rejected += other.rejected;
            out.cost += other.cost;
            return out;
        }
        if self.n == 0 {
            let mut out = other.clone();
            out.rejected += self.rejected;
            out.cost += self.cost;
            return out;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let w = na * nb / n;
        let d_f = other.mean_fine - self.mean_fine;
        let d_c = other.mean_coarse - self.mean_coarse;
        let d_y = other.mean_y - self.mean_y;
        Self {
            n: self.n + other.n,
            mean_fine: self.mean_fine + d_f * nb / n,
            m2_fine: self.m2_fine + other.m2_fine + d_f * d_f * w,
            mean_coarse: self.mean_coarse + d_c * nb / n,
            m2_coarse: self.m2_coarse + other.m2_coarse + d_c * d_c * w,
            comoment: self.comoment + other.comoment + d_f * d_c * w,
            mean_y: self.mean_y + d_y * nb / n,
            m2_y: self.m2_y + other.m2_y + d_y * d_y * w,
            cost: self.cost + other.cost,
            has_coarse: self.has_coarse || other.has_coarse,
            rejected: self.rejected + other.rejected,
        }
    }

    pub fn finalize(&self) -> Result<LevelMoments, StatsError> {
        if self.n < 2 {
            return Err(StatsError::InsufficientData(self.n));
        }
        let dof = (self.n - 1) as f64;
        let sigma_fine = (self.m2_fine.max(0.0) / dof).sqrt();
        let (sigma_coarse, rho, mean_coarse) = if self.has_coarse {
            let sc = (self.m2_coarse.max(0.0) / dof).sqrt();
            let denom = (self.m2_fine.max(0.0) * self.m2_coarse.max(0.0)).sqrt();
            let rho = if denom > 0.0 { (self.comoment / denom).clamp(-1.0, 1.0) } else { 0.0 };
            (Some(sc), Some(rho), Some(self.mean_coarse))
        } else {
            (None, None, None)
        };
        Ok(LevelMoments {
            n: self.n,
            mean_fine: self.mean_fine,
            sigma_fine,
            mean_coarse,
            sigma_coarse,
            rho,
            eta: (self.cost / self.n as f64).sqrt(),
            mean_y: self.mean_y,
            var_y: Some(self.m2_y.max(0.0) / dof),
            rejected: self.rejected,
        })
    }
}

/// Finalized moments of one level's coupled sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelMoments {
    #[serde(default)]
    pub n: u64,
    #[serde(default)]
    pub mean_fine: f64,
    pub sigma_fine: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_coarse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_coarse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub eta: f64,
    #[serde(default)]
    pub mean_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_y: Option<f64>,
    #[serde(default)]
    pub rejected: u64,
}

impl LevelMoments {
    /// Hand-set moments for planning experiments.
    pub fn synthetic(sigma_fine: f64, coarse: Option<(f64, f64)>, eta: f64) -> Self {
        Self {
            n: 0,
            mean_fine: 0.0,
            sigma_fine,
            mean_coarse: None,
            sigma_coarse: coarse.map(|c| c.0),
            rho: coarse.map(|c| c.1),
            eta,
            mean_y: 0.0,
            var_y: None,
            rejected: 0,
        }
    }

    /// Variance of Y_l, from the direct estimate when present.
    pub fn variance_y(&self) -> f64 {
        if let Some(v) = self.var_y {
            return v;
        }
        match (self.sigma_coarse, self.rho) {
            (Some(sc), Some(r)) => {
                (self.sigma_fine.powi(2) - 2.0 * r * sc * self.sigma_fine + sc * sc).max(0.0)
            }
            _ => self.sigma_fine.powi(2),
        }
    }
}

/// Finalizes a sequence of accumulators, one per level.
pub fn finalize_all(accs: &[MomentAccumulator]) -> Result<Vec<LevelMoments>, StatsError> {
    accs.iter().map(MomentAccumulator::finalize).collect()
}
