//! Scalar SDE test problems and coupled fine/coarse path sampling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::GaussianStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("non-finite path state at level {level}")]
    NonFinite { level: u32 },
}

/// Drift and volatility family with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// a = mu*S, b = sigma*S
    Gbm { mu: f64, sigma: f64 },
    /// a = kappa*(mean - S), b = sigma*S
    Igbm { kappa: f64, mean: f64, sigma: f64 },
    /// a = kappa*(mean - S), b = sigma*sqrt(S)
    Cir { kappa: f64, mean: f64, sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub s0: f64,
    pub horizon: f64,
    pub rate: f64,
}

impl ModelSpec {
    pub fn gbm() -> Self {
        Self::with_family(Family::Gbm { mu: 0.05, sigma: 0.2 })
    }

    pub fn igbm() -> Self {
        Self::with_family(Family::Igbm { kappa: 2.0, mean: 100.0, sigma: 0.2 })
    }

    pub fn cir() -> Self {
        Self::with_family(Family::Cir { kappa: 2.0, mean: 100.0, sigma: 0.2 })
    }

    fn with_family(family: Family) -> Self {
        Self { family, s0: 100.0, horizon: 1.0, rate: 0.05 }
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        let bad = |m: &str| Err(SdeError::InvalidModel(m.to_string()));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive and finite");
        }
        if !self.s0.is_finite() || !self.rate.is_finite() {
            return bad("s0 and rate must be finite");
        }
        let (params, sigma) = match self.family {
            Family::Gbm { mu, sigma } => (vec![mu, sigma], sigma),
            Family::Igbm { kappa, mean, sigma } => (vec![kappa, mean, sigma], sigma),
            Family::Cir { kappa, mean, sigma } => {
                if self.s0 <= 0.0 {
                    return bad("CIR requires s0 > 0");
                }
                (vec![kappa, mean, sigma], sigma)
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return bad("parameters must be finite");
        }
        if sigma < 0.0 {
            return bad("volatility coefficient must be nonnegative");
        }
        Ok(())
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.horizon).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub b_prime: f64,
}

/// Drift, volatility and volatility derivative at `s`. CIR uses full truncation.
pub fn eval_coefficients(model: &ModelSpec, s: f64) -> Coefficients {
    match model.family {
        Family::Gbm { mu, sigma } => Coefficients { a: mu * s, b: sigma * s, b_prime: sigma },
        Family::Igbm { kappa, mean, sigma } => Coefficients {
            a: kappa * (mean - s),
            b: sigma * s,
            b_prime: sigma,
        },
        Family::Cir { kappa, mean, sigma } => {
            let sp = s.max(0.0);
            let root = sp.sqrt();
            Coefficients {
                a: kappa * (mean - sp),
                b: sigma * root,
                b_prime: if sp > 0.0 { 0.5 * sigma / root } else { 0.0 },
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Euler,
    Milstein,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub refinement: u32,
    pub base_steps: u32,
    pub antithetic: bool,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind, refinement: u32) -> Self {
        Self { kind, refinement, base_steps: 1, antithetic: true }
    }

    pub fn validate(&self) -> Result<(), SdeError> {
        if self.refinement < 2 {
            return Err(SdeError::InvalidScheme("refinement M must be at least 2".into()));
        }
        if self.base_steps < 1 {
            return Err(SdeError::InvalidScheme("base steps J0 must be at least 1".into()));
        }
        Ok(())
    }

    /// J_l = J_0 M^l
    pub fn steps(&self, level: u32) -> usize {
        self.base_steps as usize * (self.refinement as usize).pow(level)
    }

    /// Largest level whose grid stays below 2^28 steps.
    pub fn max_supported_level(&self) -> u32 {
        let mut l = 0;
        while (self.steps(l + 1) as u64) < (1u64 << 28) {
            l += 1;
        }
        l
    }

    pub fn step_size(&self, model: &ModelSpec, level: u32) -> f64 {
        model.horizon / self.steps(level) as f64
    }

    /// Step-count cost of one coupled sample (fine + coarse, doubled under antithetic).
    pub fn coupled_cost(&self, level: u32, coupled: bool) -> f64 {
        let mut c = self.steps(level) as f64;
        if coupled && level > 0 {
            c += self.steps(level - 1) as f64;
        }
        if self.antithetic {
            c *= 2.0;
        }
        c
    }

    /// Step-count cost of the fine path alone.
    pub fn fine_cost(&self, level: u32) -> f64 {
        self.coupled_cost(level, false)
    }
}

/// How the time average of a path is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageRule {
    /// Trapezoidal rule over the path's own nodes, for fine and coarse paths alike.
    Trapezoid,
    /// Fine path as `Trapezoid`; the coarse path is first interpolated onto the fine grid.
    ///
    /// Inside coarse step n, at fine sub-node k of M,
    /// S = S_n + (k/M)(S_{n+1} - S_n) + b(S_n)(W_k - W_n - (k/M) dW_n).
    Interpolated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSummary {
    pub terminal: f64,
    pub running_mean: f64,
    pub steps: usize,
}

impl PathSummary {
    pub fn is_finite(&self) -> bool {
        self.terminal.is_finite() && self.running_mean.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPair {
    pub fine: PathSummary,
    pub coarse: Option<PathSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledSample {
    pub fine: PathSummary,
    pub coarse: Option<PathSummary>,
    /// Paths driven by the negated increments, when antithetic sampling is on.
    pub antithetic: Option<PathPair>,
    pub cost_units: f64,
}

#[inline(always)]
fn drive<C: Fn(f64) -> (f64, f64, f64)>(
    coef: C,
    milstein: bool,
    s0: f64,
    h: f64,
    dw: &[f64],
    fine: Option<(&[f64], usize)>,
    sign: f64,
) -> PathSummary {
    let mut s = s0;
    let mut sum = 0.0;
    match fine {
        None => {
            for &w in dw {
                let w = sign * w;
                let (a, b, bbp) = coef(s);
                let mut next = s + a * h + b * w;
                if milstein {
                    next += 0.5 * bbp * (w * w - h);
                }
                sum += 0.5 * (s + next);
                s = next;
            }
        }
        Some((fdw, m)) => {
            let mf = m as f64;
            for (&w, sub) in dw.iter().zip(fdw.chunks_exact(m)) {
                let w = sign * w;
                let (a, b, bbp) = coef(s);
                let mut next = s + a * h + b * w;
                if milstein {
                    next += 0.5 * bbp * (w * w - h);
                }
                let mut inner = 0.0;
                let mut wk = 0.0;
                for (k, &x) in sub[..m - 1].iter().enumerate() {
                    let frac = (k + 1) as f64 / mf;
                    wk += sign * x;
                    inner += s + frac * (next - s) + b * (wk - frac * w);
                }
                sum += (0.5 * (s + next) + inner) / mf;
                s = next;
            }
        }
    }
    PathSummary {
        terminal: s,
        running_mean: sum / dw.len() as f64,
        steps: dw.len(),
    }
}

/// Advances one path over the increments `dw` (scaled by `sign`).
///
/// With `fine` = (fine increments, M) the running mean is taken over the
/// interpolated fine grid, otherwise by the trapezoidal rule on the nodes.
pub fn integrate_path(
    model: &ModelSpec,
    kind: SchemeKind,
    h: f64,
    dw: &[f64],
    fine: Option<(&[f64], usize)>,
    sign: f64,
) -> PathSummary {
    let mil = kind == SchemeKind::Milstein;
    let s0 = model.s0;
    match model.family {
        Family::Gbm { mu, sigma } => {
            drive(|s| (mu * s, sigma * s, sigma * sigma * s), mil, s0, h, dw, fine, sign)
        }
        Family::Igbm { kappa, mean, sigma } => drive(
            |s| (kappa * (mean - s), sigma * s, sigma * sigma * s),
            mil,
            s0,
            h,
            dw,
            fine,
            sign,
        ),
        Family::Cir { kappa, mean, sigma } => drive(
            |s| {
                let sp = s.max(0.0);
                let bbp = if sp > 0.0 { 0.5 * sigma * sigma } else { 0.0 };
                (kappa * (mean - sp), sigma * sp.sqrt(), bbp)
            },
            mil,
            s0,
            h,
            dw,
            fine,
            sign,
        ),
    }
}

/// Block sums of fine increments: the coarse Brownian increments.
pub fn coarse_increments(fine_dw: &[f64], m: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(fine_dw.chunks_exact(m).map(|c| c.iter().fold(0.0, |acc, w| acc + w)));
}

/// Reusable coupled sampler holding its increment buffers.
#[derive(Clone, Debug)]
pub struct CoupledSampler {
    model: ModelSpec,
    scheme: SchemeSpec,
    rule: AverageRule,
    dw: Vec<f64>,
    dw_coarse: Vec<f64>,
}

impl CoupledSampler {
    pub fn new(model: ModelSpec, scheme: SchemeSpec, rule: AverageRule) -> Self {
        Self { model, scheme, rule, dw: Vec::new(), dw_coarse: Vec::new() }
    }

    /// Draws one sample at `level`; the coarse path is produced when `coupled` and level > 0.
    pub fn sample(
        &mut self,
        level: u32,
        coupled: bool,
        rng: &mut GaussianStream,
    ) -> Result<CoupledSample, SdeError> {
        let j = self.scheme.steps(level);
        let h = self.scheme.step_size(&self.model, level);
        let m = self.scheme.refinement as usize;
        self.dw.resize(j, 0.0);
        rng.fill_standard(&mut self.dw, h.sqrt());
        let with_coarse = coupled && level > 0;
        if with_coarse {
            coarse_increments(&self.dw, m, &mut self.dw_coarse);
        }
        let interp = (self.rule == AverageRule::Interpolated).then_some((self.dw.as_slice(), m));
        let h_coarse = h * m as f64;
        let pair = |sign: f64| -> PathPair {
            let fine = integrate_path(&self.model, self.scheme.kind, h, &self.dw, None, sign);
            let coarse = with_coarse
                .then(|| integrate_path(&self.model, self.scheme.kind, h_coarse, &self.dw_coarse, interp, sign));
            PathPair { fine, coarse }
        };
        let primary = pair(1.0);
        let antithetic = self.scheme.antithetic.then(|| pair(-1.0));
        let finite = |p: &PathPair| p.fine.is_finite() && p.coarse.is_none_or(|c| c.is_finite());
        if !finite(&primary) || antithetic.as_ref().is_some_and(|p| !finite(p)) {
            return Err(SdeError::NonFinite { level });
        }
        Ok(CoupledSample {
            fine: primary.fine,
            coarse: primary.coarse,
            antithetic,
            cost_units: self.scheme.coupled_cost(level, with_coarse),
        })
    }
}

/// One coupled sample at `level` from a fresh sampler.
pub fn simulate_coupled(
    model: &ModelSpec,
    scheme: &SchemeSpec,
    rule: AverageRule,
    level: u32,
    rng: &mut GaussianStream,
) -> Result<CoupledSample, SdeError> {
    CoupledSampler::new(*model, *scheme, rule).sample(level, true, rng)
}
