//! Product-measure solvability for interactions of the form `A = vv^T - D`.
//!
//! With `y = D / v^2`, an i.i.d. measure `p^{⊗d}` with `F(p^{⊗d}) = F(mu)`
//! exists iff `A^{-1} G(mu)^{1/d}` is entrywise nonnegative, which after a
//! rank-one inverse update reads as an inequality between expectations over
//! the colour-count distribution of `mu`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bp::{bp, bp_product, gibbs, marginalize, unnormalized_message, Budget};
use crate::error::{Error, Result};
use crate::graphs::random_rooted_graph;
use crate::model::{color_counts, InteractionMatrix, JointDistribution, ProductMeasure};
use crate::numeric::{linf_distance, NeumaierSum};
use crate::par;
use crate::rng::{dirichlet, stream};

pub mod claims;

pub const DECOMPOSITION_TOL: f64 = 1e-10;
pub const CRITERION_TOL: f64 = 1e-12;
pub const DUST: f64 = 1e-12;
pub const MIN_RCOND: f64 = 1e-10;
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneMinusDiag {
    pub v: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub y: Vec<f64>,
}

impl RankOneMinusDiag {
    /// Checks `v > 0`, `0 <= D <= v^2` and `vv^T - diag(D) = A` within `tol`.
    pub fn from_parts(v: Vec<f64>, d: Vec<f64>, a: &InteractionMatrix, tol: f64) -> Result<Self> {
        let q = a.q();
        if v.len() != q || d.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "v and D must have length {q}"
            )));
        }
        for c in 0..q {
            if !(v[c] > 0.0) || !v[c].is_finite() {
                return Err(Error::validation(format!("v[{c}]"), "must be positive"));
            }
        }
        let mut residual = 0.0f64;
        for b in 0..q {
            for c in 0..q {
                let r = v[b] * v[c] - if b == c { d[c] } else { 0.0 };
                residual = residual.max((r - a.get(b, c)).abs());
            }
        }
        if residual > tol {
            return Err(Error::Precondition(format!(
                "not of rank-one-minus-diagonal form (residual {residual:e})"
            )));
        }
        for c in 0..q {
            if d[c] < 0.0 || d[c] > v[c] * v[c] * (1.0 + tol) {
                return Err(Error::validation(format!("D[{c}]"), "must lie in [0, v^2]"));
            }
        }
        let y = (0..q).map(|c| (d[c] / (v[c] * v[c])).clamp(0.0, 1.0)).collect();
        Ok(RankOneMinusDiag { v, d, y })
    }

    pub fn q(&self) -> usize {
        self.v.len()
    }
}

/// Recovers `v` from off-diagonal entries: `v[b]^2 = A[b][c] A[b][c'] / A[c][c']`.
/// Needs `q >= 3`; two spins leave a one-parameter family and must be given
/// explicitly through [`RankOneMinusDiag::from_parts`].
pub fn decompose_rank_one_minus_diag(a: &InteractionMatrix, tol: f64) -> Result<RankOneMinusDiag> {
    let q = a.q();
    if q < 3 {
        return Err(Error::Precondition(
            "two-spin decomposition is not unique; supply v and D explicitly".into(),
        ));
    }
    for b in 0..q {
        for c in 0..q {
            if b != c && !(a.get(b, c) > 0.0) {
                return Err(Error::Precondition(format!(
                    "off-diagonal entry [{b}][{c}] is zero; v is unrecoverable"
                )));
            }
        }
    }
    let v: Vec<f64> = (0..q)
        .map(|b| {
            let c = (b + 1) % q;
            let c2 = (b + 2) % q;
            (a.get(b, c) * a.get(b, c2) / a.get(c, c2)).sqrt()
        })
        .collect();
    let d: Vec<f64> = (0..q)
        .map(|c| {
            let x = v[c] * v[c] - a.get(c, c);
            // absorb rounding at D = 0
            if x < 0.0 && x > -tol {
                0.0
            } else {
                x
            }
        })
        .collect();
    RankOneMinusDiag::from_parts(v, d, a, tol)
}

/// Distribution over colour-count vectors, keyed by the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionDistribution {
    pub q: usize,
    pub d: usize,
    pub weights: BTreeMap<Vec<usize>, f64>,
}

impl CompositionDistribution {
    pub fn expectation(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        self.weights
            .iter()
            .map(|(a, &w)| w * f(a))
            .collect::<NeumaierSum>()
            .value()
    }
}

/// `xi(alpha) ∝ prod_b v[b]^alpha[b] mu(sgn = alpha)`.
pub fn signature_distribution(mu: &JointDistribution, v: &[f64]) -> Result<CompositionDistribution> {
    let (q, d) = (mu.q(), mu.d());
    if v.len() != q {
        return Err(Error::DimensionMismatch(format!("v has length {}, expected {q}", v.len())));
    }
    let mut acc: BTreeMap<Vec<usize>, NeumaierSum> = BTreeMap::new();
    for (tau, w) in mu.support() {
        let alpha = color_counts(&tau, q);
        let tilt: f64 = alpha.iter().zip(v).map(|(&k, x)| x.powi(k as i32)).product();
        acc.entry(alpha).or_default().add(w * tilt);
    }
    let total: f64 = acc.values().map(NeumaierSum::value).sum();
    if !(total > 0.0) {
        return Err(Error::Infeasible("signature distribution has zero mass".into()));
    }
    Ok(CompositionDistribution {
        q,
        d,
        weights: acc.into_iter().map(|(k, s)| (k, s.value() / total)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub holds: bool,
    pub slack: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `E_xi[(1 - y_c)^alpha_c]^{1/d}`.
    pub m: Vec<f64>,
}

fn criterion_moments(dec: &RankOneMinusDiag, mu: &JointDistribution) -> Result<Vec<f64>> {
    let xi = signature_distribution(mu, &dec.v)?;
    let d = mu.d() as f64;
    Ok((0..dec.q())
        .map(|c| {
            xi.expectation(|alpha| (1.0 - dec.y[c]).powi(alpha[c] as i32))
                .powf(1.0 / d)
        })
        .collect())
}

/// `sum_c m_c / y_c >= (-1 + sum_c 1/y_c) max_c m_c`.
pub fn iid_criterion(dec: &RankOneMinusDiag, mu: &JointDistribution) -> Result<CriterionReport> {
    if mu.q() != dec.q() {
        return Err(Error::DimensionMismatch("decomposition and distribution differ in q".into()));
    }
    if dec.y.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Precondition(
            "criterion undefined; use solve_product directly".into(),
        ));
    }
    let m = criterion_moments(dec, mu)?;
    let inv_sum: f64 = dec.y.iter().map(|y| 1.0 / y).sum();
    let lhs: f64 = m.iter().zip(&dec.y).map(|(m, y)| m / y).sum();
    let max = m.iter().copied().fold(0.0, f64::max);
    let rhs = (inv_sum - 1.0) * max;
    let slack = lhs - rhs;
    Ok(CriterionReport {
        holds: slack >= -CRITERION_TOL,
        slack,
        lhs,
        rhs,
        m,
    })
}

/// Slack of the Potts form `sum_c m_c - (q - (1 - beta)) max_c m_c` with
/// `m_c = E[beta^alpha_c]^{1/d}`.
pub fn potts_criterion_slack(q: usize, beta: f64, mu: &JointDistribution) -> Result<f64> {
    let xi = signature_distribution(mu, &vec![1.0; q])?;
    let d = mu.d() as f64;
    let m: Vec<f64> = (0..q)
        .map(|c| xi.expectation(|a| beta.powi(a[c] as i32)).powf(1.0 / d))
        .collect();
    let max = m.iter().copied().fold(0.0, f64::max);
    Ok(m.iter().sum::<f64>() - (q as f64 - (1.0 - beta)) * max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub found: bool,
    pub x: Vec<f64>,
    pub p: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub rcond: f64,
}

impl SolveReport {
    pub fn product(&self, d: usize) -> Option<ProductMeasure> {
        self.p.as_ref().map(|p| ProductMeasure::iid(p, d).expect("normalized"))
    }
}

fn inverse_with_rcond(a: &InteractionMatrix) -> Result<(DMatrix<f64>, f64)> {
    let m = a.to_dmatrix();
    let singular = || Error::Singular("interaction matrix not invertible; criterion path unavailable".into());
    let inv = m.clone().try_inverse().ok_or_else(singular)?;
    let norm1 = |x: &DMatrix<f64>| {
        x.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let rcond = 1.0 / (norm1(&m) * norm1(&inv));
    if !(rcond >= MIN_RCOND) {
        return Err(singular());
    }
    Ok((inv, rcond))
}

/// `x = A^{-1} G(mu)^{1/d}`; returns `p = x / |x|_1` when `x >= 0` up to
/// dust `1e-12 |x|_inf`.
pub fn solve_product(a: &InteractionMatrix, mu: &JointDistribution) -> Result<SolveReport> {
    let (inv, rcond) = inverse_with_rcond(a)?;
    let g = unnormalized_message(a, mu)?;
    let d = mu.d() as f64;
    let root = DVector::from_iterator(g.len(), g.iter().map(|&x| if x > 0.0 { x.powf(1.0 / d) } else { 0.0 }));
    let x: Vec<f64> = (&inv * root).iter().copied().collect();
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || x.iter().any(|&v| v < -DUST * scale) {
        return Ok(SolveReport {
            found: false,
            x,
            p: None,
            residual: None,
            rcond,
        });
    }
    let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let p: Vec<f64> = clamped.iter().map(|v| v / total).collect();
    let nu = ProductMeasure::iid(&p, mu.d())?;
    let residual = linf_distance(&bp(a, mu)?, &bp_product(a, &nu)?);
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::CheckFailed(format!(
            "solved product measure misses F(mu) by {residual:e}"
        )));
    }
    Ok(SolveReport {
        found: true,
        x,
        p: Some(p),
        residual: Some(residual),
        rcond,
    })
}

/// The closed form `Z^{1/d} diag(v)^{-1} M m` of `A^{-1} G(mu)^{1/d}`, where
/// `M = -diag(1/y) - diag(1/y) 11^T diag(1/y) / (1 - sum 1/y)` and
/// `Z = E_mu[prod_i v(tau_i)]`.
pub fn sherman_morrison_solution(dec: &RankOneMinusDiag, mu: &JointDistribution) -> Result<Vec<f64>> {
    if dec.y.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Precondition("closed form needs y > 0".into()));
    }
    let q = dec.q();
    let m = criterion_moments(dec, mu)?;
    let z: f64 = mu
        .support()
        .map(|(tau, w)| w * tau.iter().map(|&t| dec.v[t]).product::<f64>())
        .collect::<NeumaierSum>()
        .value();
    let inv_y: Vec<f64> = dec.y.iter().map(|y| 1.0 / y).collect();
    let s: f64 = inv_y.iter().sum();
    let weighted: f64 = inv_y.iter().zip(&m).map(|(a, b)| a * b).sum();
    let zd = z.powf(1.0 / mu.d() as f64);
    Ok((0..q)
        .map(|c| {
            let mm = -inv_y[c] * m[c] - inv_y[c] * weighted / (1.0 - s);
            zd * mm / dec.v[c]
        })
        .collect())
}

pub fn gamma_star(beta: f64, eps: f64) -> f64 {
    (1.0 - beta.sqrt() + eps).min(0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub gamma_star: f64,
    pub threshold: f64,
    /// `Pr[alpha_c <= threshold]` per colour.
    pub lower_tail: Vec<f64>,
    pub pass: bool,
}

/// `Pr[#{i : tau_i = c} <= gamma* d / q] <= eps` for every colour.
pub fn tail_bound_check(mu: &JointDistribution, beta: f64, eps: f64) -> Result<TailReport> {
    let (q, d) = (mu.q(), mu.d());
    let xi = signature_distribution(mu, &vec![1.0; q])?;
    let gs = gamma_star(beta, eps);
    let threshold = gs * d as f64 / q as f64;
    let lower_tail: Vec<f64> = (0..q)
        .map(|c| xi.expectation(|a| if (a[c] as f64) <= threshold { 1.0 } else { 0.0 }))
        .collect();
    let pass = lower_tail.iter().all(|&p| p <= eps);
    Ok(TailReport {
        gamma_star: gs,
        threshold,
        lower_tail,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkParams {
    pub q: usize,
    pub d: usize,
    pub beta: f64,
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    /// Runs outside the proven parameter range. Not backed by theory.
    pub unsupported_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkExperimentReport {
    pub parameters: BulkParams,
    pub successes: usize,
    pub failures: usize,
    pub failure_exemplars: Vec<String>,
    pub max_f_residual: f64,
    pub candidates_drawn: usize,
    pub dirichlet_samples: usize,
    pub gibbs_samples: usize,
    /// Candidates excluded by the tail check; still solved.
    pub tail_rejected: usize,
    pub tail_rejected_solved: usize,
}

/// Lower end of the proven range, `max(0, 1 - q/(d+1))`.
pub fn uniqueness_lower(q: usize, d: usize) -> f64 {
    (1.0 - q as f64 / (d as f64 + 1.0)).max(0.0)
}

enum Family {
    Dirichlet,
    Gibbs,
}

fn draw_candidate(p: &BulkParams, a: &InteractionMatrix, k: usize, budget: Budget) -> Result<(Family, JointDistribution)> {
    let (q, d) = (p.q, p.d);
    let mut rng = stream(p.seed, k as u64);
    if k % 2 == 0 {
        let n = q.pow(d as u32);
        let mu = JointDistribution::from_unnormalized(q, d, dirichlet(&mut rng, n, 1.0))?;
        return Ok((Family::Dirichlet, mu));
    }
    // neighbourhood law of a root of degree d, kept within budget
    let mut extra = 3usize;
    while extra > 0 && budget.check(q, d + extra).is_err() {
        extra -= 1;
    }
    let extra = rand::Rng::random_range(&mut rng, 0..=extra);
    let g = random_rooted_graph(&mut rng, d, d, extra);
    let (rest, relabel) = g.remove_vertex(0);
    let mu_rest = gibbs(&rest, a, None, budget)?.distribution;
    let sites: Vec<usize> = g.neighbors(0).iter().map(|&u| relabel[u].expect("kept")).collect();
    Ok((Family::Gibbs, marginalize(&mu_rest, &sites)?))
}

/// Samples neighbourhood laws, keeps the first `samples` that pass the tail
/// check, and solves for an i.i.d. product measure on each.
pub fn bulk_experiment(p: BulkParams, budget: Budget) -> Result<BulkExperimentReport> {
    if p.samples == 0 {
        return Err(Error::validation("n", "must be positive"));
    }
    if !(p.beta > 0.0 && p.beta <= 1.0) || !(p.eps > 0.0 && p.eps <= 0.25) {
        return Err(Error::validation("beta, eps", "need 0 < beta <= 1 and 0 < eps <= 1/4"));
    }
    if !p.unsupported_range && (p.d < 2 * p.q || p.beta < uniqueness_lower(p.q, p.d)) {
        return Err(Error::Precondition(format!(
            "parameters outside the proven range (d >= 2q, beta >= {})",
            uniqueness_lower(p.q, p.d)
        )));
    }
    budget.check(p.q, p.d)?;
    let a = InteractionMatrix::potts(p.q, p.beta)?;
    let batch = 64usize;
    let cap = 100 * p.samples;
    let mut report = BulkExperimentReport {
        parameters: p,
        successes: 0,
        failures: 0,
        failure_exemplars: Vec::new(),
        max_f_residual: 0.0,
        candidates_drawn: 0,
        dirichlet_samples: 0,
        gibbs_samples: 0,
        tail_rejected: 0,
        tail_rejected_solved: 0,
    };
    let mut start = 0usize;
    while report.successes + report.failures < p.samples {
        if start >= cap {
            return Err(Error::Budget {
                states: start as u128,
                budget: cap as u64,
            });
        }
        let outcomes = par::map_range(batch, |j| -> Result<_> {
            let (family, mu) = draw_candidate(&p, &a, start + j, budget)?;
            let tail = tail_bound_check(&mu, p.beta, p.eps)?;
            let solved = solve_product(&a, &mu);
            Ok((family, mu, tail.pass, solved))
        });
        for out in outcomes {
            if report.successes + report.failures == p.samples {
                break;
            }
            let (family, mu, pass, solved) = out?;
            report.candidates_drawn += 1;
            let solved = match solved {
                Ok(s) => Some(s),
                Err(Error::CheckFailed(_)) => None,
                Err(e) => return Err(e),
            };
            let found = solved.as_ref().is_some_and(|s| s.found);
            if !pass {
                report.tail_rejected += 1;
                report.tail_rejected_solved += found as usize;
                continue;
            }
            match family {
                Family::Dirichlet => report.dirichlet_samples += 1,
                Family::Gibbs => report.gibbs_samples += 1,
            }
            if found {
                report.successes += 1;
                let r = solved.and_then(|s| s.residual).unwrap_or(0.0);
                report.max_f_residual = report.max_f_residual.max(r);
            } else {
                report.failures += 1;
                if report.failure_exemplars.len() < 10 {
                    report.failure_exemplars.push(crate::digest_json(&mu));
                }
            }
        }
        start += batch;
    }
    Ok(report)
}
