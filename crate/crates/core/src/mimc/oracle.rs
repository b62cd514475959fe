use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MimcError, MultiIndex};
use crate::level_stats::LevelMoments;

/// Covariances of (P^lambda_lambda, P^lambda_nu for nu in the backward box) at one node.
///
/// `c[i]` = Cov[P_lambda, P_nu_i] and `cmat[i][j]` = Cov[P_nu_i, P_nu_j], with the
/// neighbors ordered as in `MultiIndex::backward_box`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovBlock {
    pub sigma2: f64,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub cmat: Vec<Vec<f64>>,
    pub eta: f64,
}

impl CovBlock {
    pub fn validate(&self, lambda: &MultiIndex) -> Result<(), MimcError> {
        let k = lambda.backward_box().len();
        let bad = |why: &str| Err(MimcError::BadBlock { index: lambda.clone(), reason: why.to_string() });
        if self.c.len() != k || self.cmat.len() != k || self.cmat.iter().any(|r| r.len() != k) {
            return bad("block size does not match the backward neighborhood");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        let full = self.full();
        if full.iter().flatten().any(|x| !x.is_finite()) {
            return bad("non-finite entry");
        }
        let scale = (0..=k).map(|i| full[i][i].abs()).fold(0.0, f64::max);
        let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
        for i in 0..=k {
            for j in 0..i {
                if (full[i][j] - full[j][i]).abs() > tol {
                    return bad("block is not symmetric");
                }
            }
        }
        if !positive_semidefinite(&full, tol) {
            return bad("block is not positive semidefinite");
        }
        Ok(())
    }

    /// The full matrix [[sigma2, c'], [c, C]].
    pub fn full(&self) -> Vec<Vec<f64>> {
        let k = self.c.len();
        let mut m = vec![vec![0.0; k + 1]; k + 1];
        m[0][0] = self.sigma2;
        for i in 0..k {
            m[0][i + 1] = self.c[i];
            m[i + 1][0] = self.c[i];
            for j in 0..k {
                m[i + 1][j + 1] = self.cmat[i][j];
            }
        }
        m
    }
}

/// Cholesky of A + tol I succeeds.
pub fn positive_semidefinite(a: &[Vec<f64>], tol: f64) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j] + if i == j { tol } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

/// Source of per-node covariance blocks.
pub trait CovarianceOracle: Sync {
    fn dim(&self) -> usize;
    fn block(&self, lambda: &MultiIndex) -> Result<CovBlock, MimcError>;
}

/// Blocks read from a table, keyed by index strings such as "1,2".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableOracle {
    pub dim: usize,
    pub nodes: BTreeMap<MultiIndex, CovBlock>,
}

impl TableOracle {
    pub fn validate(&self) -> Result<(), MimcError> {
        for (k, b) in &self.nodes {
            if k.dim() != self.dim {
                return Err(MimcError::DimensionMismatch { expected: self.dim, got: k.dim() });
            }
            b.validate(k)?;
        }
        Ok(())
    }

    /// Tabulates every block of `oracle` below `top`.
    pub fn capture(oracle: &dyn CovarianceOracle, top: &MultiIndex) -> Result<Self, MimcError> {
        let nodes = top
            .lower_set()
            .into_iter()
            .map(|l| oracle.block(&l).map(|b| (l, b)))
            .collect::<Result<_, _>>()?;
        Ok(Self { dim: oracle.dim(), nodes })
    }
}

impl CovarianceOracle for TableOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn block(&self, lambda: &MultiIndex) -> Result<CovBlock, MimcError> {
        self.nodes.get(lambda).cloned().ok_or_else(|| MimcError::MissingNode(lambda.clone()))
    }
}

/// One-dimensional oracle built from single-index level moments.
#[derive(Clone, Debug)]
pub struct ChainOracle {
    pub moments: Vec<LevelMoments>,
}

impl CovarianceOracle for ChainOracle {
    fn dim(&self) -> usize {
        1
    }

    fn block(&self, lambda: &MultiIndex) -> Result<CovBlock, MimcError> {
        if lambda.dim() != 1 {
            return Err(MimcError::DimensionMismatch { expected: 1, got: lambda.dim() });
        }
        let l = lambda.0[0];
        let m = self.moments.get(l).ok_or_else(|| MimcError::MissingNode(lambda.clone()))?;
        if l == 0 {
            return Ok(CovBlock { sigma2: m.sigma_fine.powi(2), c: vec![], cmat: vec![], eta: m.eta });
        }
        let sc = m.sigma_coarse.unwrap_or(self.moments[l - 1].sigma_fine);
        let rho = m.rho.ok_or_else(|| MimcError::MissingNode(lambda.clone()))?;
        Ok(CovBlock {
            sigma2: m.sigma_fine.powi(2),
            c: vec![rho * sc * m.sigma_fine],
            cmat: vec![vec![sc * sc]],
            eta: m.eta,
        })
    }
}
