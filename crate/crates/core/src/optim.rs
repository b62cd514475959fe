//! Deterministic Nelder-Mead minimization for low-dimensional problems.

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub ftol_rel: f64,
    pub xtol: f64,
    pub max_evals: usize,
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.1, ftol_rel: 1e-10, xtol: 1e-10, max_evals: 20_000, max_restarts: 12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn diameter(simplex: &[Vec<f64>]) -> f64 {
    let best = &simplex[0];
    simplex[1..]
        .iter()
        .map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// One Nelder-Mead run from `x0` with an axis-aligned initial simplex.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    if n == 0 {
        return Minimum { x: vec![], f: f(&[]), evals: 1, converged: true };
    }
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        let h = if x0[i] != 0.0 { step * x0[i].abs().max(1.0) } else { step };
        p[i] += h;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut converged = false;
    let centroid = |pts: &[Vec<f64>]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        for p in &pts[..n] {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / n as f64;
            }
        }
        c
    };
    let along = |c: &[f64], p: &[f64], k: f64| -> Vec<f64> { c.iter().zip(p).map(|(ci, pi)| ci + k * (pi - ci)).collect() };
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        if spread <= opts.ftol_rel * vals[0].abs() + f64::MIN_POSITIVE && diameter(&pts) <= opts.xtol {
            converged = true;
            break;
        }
        let c = centroid(&pts);
        let xr = along(&c, &pts[n], -1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(&c, &pts[n], -2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(&c, &pts[n], -0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(&c, &pts[n], 0.5);
                let v = f(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    pts[i] = along(&pts[0], &pts[i], 0.5);
                    vals[i] = f(&pts[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b))).unwrap();
    Minimum { x: pts[best].clone(), f: vals[best], evals, converged }
}

/// Restarts Nelder-Mead at its own optimum until a restart no longer improves.
///
/// Returns `Err` with the best point found if the restart budget is exhausted.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum, Minimum> {
    let mut best = nelder_mead(f, x0, opts.initial_step, opts);
    let mut total = best.evals;
    for r in 0..opts.max_restarts {
        let step = opts.initial_step * 0.5f64.powi(r as i32 + 1);
        let next = nelder_mead(f, &best.x, step, opts);
        total += next.evals;
        let improved = best.f - next.f > opts.ftol_rel * best.f.abs();
        let stable = next.converged && !improved;
        if next.f < best.f {
            best = Minimum { x: next.x, f: next.f, evals: total, converged: next.converged };
        }
        if stable {
            best.evals = total;
            best.converged = true;
            return Ok(best);
        }
    }
    best.evals = total;
    best.converged = false;
    Err(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(&f, &[-1.2, 1.0], &NelderMeadOptions::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn one_dimensional_precision() {
        let f = |x: &[f64]| (x[0] - 0.123456789).powi(2) + 3.0;
        let m = minimize(&f, &[1.0], &NelderMeadOptions::default()).unwrap();
        assert!((m.x[0] - 0.123456789).abs() < 1e-7);
    }

    #[test]
    fn nonsmooth_kink() {
        let f = |x: &[f64]| (x[0] - 0.3).abs() + 2.0 * x[1].abs() + (x[0] + x[1]).powi(2);
        let m = minimize(&f, &[1.0, 1.0], &NelderMeadOptions::default()).unwrap();
        assert!(m.f <= f(&[0.3, 0.0]) + 1e-9);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(4) + (x[1] + x[0]).powi(2) + x[2].abs();
        let o = NelderMeadOptions::default();
        assert_eq!(minimize(&f, &[0.0, 0.0, 1.0], &o), minimize(&f, &[0.0, 0.0, 1.0], &o));
    }
}
