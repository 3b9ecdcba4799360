//! Two scalar inequalities used in the bulk argument, checked on grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SLACK_TOL: f64 = 1e-12;

/// `((q-1)/ln(1/beta)) ln((q-1)/((q-1)-(1-beta)))`, with its limits at
/// `beta = 1` (value 1) and `beta = 0` (1 for `q = 2`, else 0).
pub fn weird_lhs(q: usize, beta: f64) -> f64 {
    let k = q as f64 - 1.0;
    if beta >= 1.0 {
        return 1.0;
    }
    if beta <= 0.0 {
        return if q == 2 { 1.0 } else { 0.0 };
    }
    // ln((q-1)/((q-1)-(1-beta))) = -ln(1 - (1-beta)/(q-1))
    let num = -(-(1.0 - beta) / k).ln_1p();
    k * num / -beta.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeirdPoint {
    pub q: usize,
    pub beta: f64,
    pub lhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeirdReport {
    pub points: Vec<WeirdPoint>,
    pub min_slack: f64,
    pub pass: bool,
}

pub fn default_weird_grid() -> (Vec<usize>, Vec<f64>) {
    ((2..=10).collect(), (1..=99).map(|i| i as f64 / 100.0).collect())
}

/// `lhs - sqrt(beta) >= -1e-12` at every grid point.
pub fn check_claim_weird(qs: &[usize], betas: &[f64]) -> Result<WeirdReport> {
    if qs.iter().any(|&q| q < 2) {
        return Err(Error::validation("q", "must be at least 2"));
    }
    if betas.iter().any(|&b| !(0.0..=1.0).contains(&b)) {
        return Err(Error::validation("beta", "must lie in [0, 1]"));
    }
    let points: Vec<WeirdPoint> = qs
        .iter()
        .flat_map(|&q| {
            betas.iter().map(move |&beta| {
                let lhs = weird_lhs(q, beta);
                WeirdPoint {
                    q,
                    beta,
                    lhs,
                    slack: lhs - beta.sqrt(),
                }
            })
        })
        .collect();
    let min_slack = points.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min);
    Ok(WeirdReport {
        pass: min_slack >= -SLACK_TOL,
        points,
        min_slack,
    })
}

/// `Xi_{d,q,eps}(beta) = (q-1) f / g` with
/// `f = (1/d) ln(eps beta^{-d/(10q)} + 1 - eps) - ln(eps beta^{1/(10q(q-1))} + 1 - eps)`
/// and `g = ln(1/beta)`.
pub fn xi(d: usize, q: usize, eps: f64, beta: f64) -> f64 {
    let (df, qf) = (d as f64, q as f64);
    let f = (eps * beta.powf(-df / (10.0 * qf)) - eps).ln_1p() / df
        - (eps * beta.powf(1.0 / (10.0 * qf * (qf - 1.0))) - eps).ln_1p();
    (qf - 1.0) * f / -beta.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsaneReport {
    pub d: usize,
    pub q: usize,
    pub eps: f64,
    pub grid: Vec<(f64, f64)>,
    pub endpoint: f64,
    pub monotone: bool,
    pub pass: bool,
}

pub const INSANE_GRID: usize = 200;

/// `Xi` on `points` equally spaced values in `[1 - q/(d+1), 1)`: nonincreasing
/// within `1e-12` and at most `eps + 1e-12` at the left end.
pub fn check_claim_insane(d: usize, q: usize, eps: f64, points: usize) -> Result<InsaneReport> {
    if q < 2 || d < 2 * q {
        return Err(Error::Precondition("requires q >= 2 and d >= 2q".into()));
    }
    if !(0.0..=0.25).contains(&eps) {
        return Err(Error::Precondition("requires 0 <= eps <= 1/4".into()));
    }
    if points < 2 {
        return Err(Error::validation("points", "need at least two grid points"));
    }
    let lo = 1.0 - q as f64 / (d as f64 + 1.0);
    let grid: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let beta = lo + (1.0 - lo) * i as f64 / points as f64;
            (beta, xi(d, q, eps, beta))
        })
        .collect();
    let monotone = grid.windows(2).all(|w| w[1].1 <= w[0].1 + SLACK_TOL);
    let endpoint = grid[0].1;
    Ok(InsaneReport {
        d,
        q,
        eps,
        pass: monotone && endpoint <= eps + SLACK_TOL,
        grid,
        endpoint,
        monotone,
    })
}
