//! Geometry of the BP image.
//!
//! The image of all neighbourhood laws is the convex hull of the vertex
//! images `F(delta_tau)`; a law `mu` maps to the mixture of vertex images with
//! weights `xi_mu`. The image of product measures is not convex in general and
//! is probed here by multistart projected gradient.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bp::{bp, product_message, Budget};
use crate::error::{Error, Result};
use crate::model::{config_unindex, next_config, InteractionMatrix, JointDistribution, ProductMeasure};
use crate::numeric::{linf_distance, project_to_simplex, NeumaierSum};
use crate::par;
use crate::rng::{dirichlet, stream};

pub const DEFAULT_HULL_TOL: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 64;
pub const DEFAULT_ITERATIONS: usize = 200;

/// `F(delta_tau)` for every configuration, in index order.
#[derive(Debug, Clone, Serialize)]
pub struct VertexImages {
    pub q: usize,
    pub d: usize,
    /// `None` where the message vanishes.
    pub images: Vec<Option<Vec<f64>>>,
    /// Indices of configurations with an all-zero message.
    pub infeasible: Vec<usize>,
}

impl VertexImages {
    pub fn feasible(&self) -> impl Iterator<Item = (usize, &Vec<f64>)> {
        self.images
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
    }
}

fn vertex_message(a: &InteractionMatrix, tau: &[usize]) -> Vec<f64> {
    (0..a.q())
        .map(|c| tau.iter().map(|&t| a.get(c, t)).product())
        .collect()
}

pub fn vertex_images(a: &InteractionMatrix, d: usize, budget: Budget) -> Result<VertexImages> {
    let q = a.q();
    let n = budget.check(q, d)?;
    let images: Vec<Option<Vec<f64>>> = par::map_range(n, |i| {
        let g = vertex_message(a, &config_unindex(i, q, d));
        let s: f64 = g.iter().sum();
        (s > 0.0).then(|| g.iter().map(|x| x / s).collect())
    });
    let infeasible = images
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_none())
        .map(|(i, _)| i)
        .collect();
    Ok(VertexImages {
        q,
        d,
        images,
        infeasible,
    })
}

/// `xi_mu(tau) ∝ mu(tau) sum_c prod_i A[c][tau_i]`.
pub fn mixture_weights(a: &InteractionMatrix, mu: &JointDistribution) -> Result<JointDistribution> {
    if a.q() != mu.q() {
        return Err(Error::DimensionMismatch(format!(
            "interaction matrix has q = {}, distribution has q = {}",
            a.q(),
            mu.q()
        )));
    }
    let (q, d) = (mu.q(), mu.d());
    let mut tau = vec![0usize; d];
    let mut weights = Vec::with_capacity(mu.weights().len());
    for &w in mu.weights() {
        let s = if w > 0.0 {
            w * vertex_message(a, &tau).iter().sum::<f64>()
        } else {
            0.0
        };
        weights.push(s);
        next_config(&mut tau, q);
    }
    if !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::Infeasible(
            "mixture weights vanish: mu is supported on zero-message configurations".into(),
        ));
    }
    JointDistribution::from_unnormalized(q, d, weights)
}

/// `sum_tau xi(tau) F(delta_tau)`.
pub fn mixture_point(a: &InteractionMatrix, xi: &JointDistribution) -> Vec<f64> {
    let q = a.q();
    let mut acc = vec![NeumaierSum::new(); q];
    for (tau, w) in xi.support() {
        let g = vertex_message(a, &tau);
        let s: f64 = g.iter().sum();
        if s > 0.0 {
            for (slot, x) in acc.iter_mut().zip(&g) {
                slot.add(w * x / s);
            }
        }
    }
    acc.iter().map(NeumaierSum::value).collect()
}

/// `|| sum_tau xi_mu(tau) F(delta_tau) - F(mu) ||_inf`.
pub fn reconstruction_residual(a: &InteractionMatrix, mu: &JointDistribution) -> Result<f64> {
    let xi = mixture_weights(a, mu)?;
    Ok(linf_distance(&mixture_point(a, &xi), &bp(a, mu)?))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HullWeight {
    pub config: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HullMembershipReport {
    pub point: Vec<f64>,
    pub is_member: bool,
    /// Convex coefficients on vertex images; present when the point is a member.
    pub weights: Option<Vec<HullWeight>>,
    /// Achieved `|| sum w F(delta_tau) - point ||_inf`.
    pub max_violation: f64,
    pub tol: f64,
}

fn combine(cols: &[&Vec<f64>], w: &[f64], q: usize) -> Vec<f64> {
    let mut acc = vec![NeumaierSum::new(); q];
    for (col, &wi) in cols.iter().zip(w) {
        for (slot, x) in acc.iter_mut().zip(col.iter()) {
            slot.add(wi * x);
        }
    }
    acc.iter().map(NeumaierSum::value).collect()
}

/// Re-solves `[M; 1^T] w = [p; 1]` by least squares on the given support.
fn polish(cols: &[&Vec<f64>], p: &[f64]) -> Option<Vec<f64>> {
    let q = p.len();
    let k = cols.len();
    let m = DMatrix::from_fn(q + 1, k, |r, c| if r < q { cols[c][r] } else { 1.0 });
    let rhs = DVector::from_fn(q + 1, |r, _| if r < q { p[r] } else { 1.0 });
    let w = m.svd(true, true).solve(&rhs, 1e-14).ok()?;
    if w.iter().any(|&x| x < -1e-14 || !x.is_finite()) {
        return None;
    }
    let w: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    (s > 0.0).then(|| w.iter().map(|x| x / s).collect())
}

/// Minimizes `t` subject to `|sum w F(delta_tau) - point|_inf <= t` over the
/// weight simplex; member iff the achieved violation is at most `tol`.
pub fn hull_membership(
    point: &[f64],
    a: &InteractionMatrix,
    d: usize,
    tol: f64,
    budget: Budget,
) -> Result<HullMembershipReport> {
    let q = a.q();
    if point.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, expected {q}",
            point.len()
        )));
    }
    if point.iter().any(|&x| x < 0.0 || !x.is_finite())
        || (point.iter().sum::<f64>() - 1.0).abs() > crate::model::NORMALIZATION_TOL
    {
        return Err(Error::validation("point", "not a probability vector"));
    }
    let images = vertex_images(a, d, budget)?;
    hull_membership_in(point, &images, tol)
}

/// As [`hull_membership`] against precomputed vertex images.
pub fn hull_membership_in(
    point: &[f64],
    images: &VertexImages,
    tol: f64,
) -> Result<HullMembershipReport> {
    let q = images.q;
    let verts: Vec<(usize, &Vec<f64>)> = images.feasible().collect();
    if verts.is_empty() {
        return Err(Error::Infeasible("no feasible vertex images".into()));
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let w: Vec<_> = verts.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    lp.add_constraint(w.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for c in 0..q {
        let mut upper: Vec<_> = verts.iter().zip(&w).map(|((_, f), &v)| (v, f[c])).collect();
        let mut lower = upper.clone();
        upper.push((t, -1.0));
        lower.push((t, 1.0));
        lp.add_constraint(upper, ComparisonOp::Le, point[c]);
        lp.add_constraint(lower, ComparisonOp::Ge, point[c]);
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    let raw: Vec<f64> = w.iter().map(|&v| sol[v].max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let cols: Vec<&Vec<f64>> = verts.iter().map(|(_, f)| *f).collect();
    let mut violation = linf_distance(&combine(&cols, &weights, q), point);

    let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 1e-13).collect();
    let sub: Vec<&Vec<f64>> = support.iter().map(|&i| cols[i]).collect();
    if let Some(pw) = polish(&sub, point) {
        let v = linf_distance(&combine(&sub, &pw, q), point);
        if v < violation {
            violation = v;
            weights = vec![0.0; weights.len()];
            for (&i, x) in support.iter().zip(pw) {
                weights[i] = x;
            }
        }
    }
    let is_member = violation <= tol;
    let weights = is_member.then(|| {
        verts
            .iter()
            .zip(&weights)
            .filter(|(_, &x)| x > 0.0)
            .map(|((i, _), &x)| HullWeight {
                config: config_unindex(*i, q, images.d),
                weight: x,
            })
            .collect()
    });
    Ok(HullMembershipReport {
        point: point.to_vec(),
        is_member,
        weights,
        max_violation: violation,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Endpoint {
    pub start: String,
    pub value: f64,
    pub nu: ProductMeasure,
}

/// Outcome of the multistart search. `value` is the best objective found;
/// it bounds the true optimum from one side only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtremumReport {
    pub kind: String,
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub d: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub value: f64,
    pub argopt: ProductMeasure,
    pub endpoints: Vec<Endpoint>,
}

impl ExtremumReport {
    /// Endpoints whose value is within `slack` of the best.
    pub fn optimizers(&self, slack: f64) -> Vec<&Endpoint> {
        self.endpoints
            .iter()
            .filter(|e| match self.sense {
                Sense::Minimize => e.value <= self.value + slack,
                Sense::Maximize => e.value >= self.value - slack,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExtremumOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ExtremumOptions {
    fn default() -> Self {
        ExtremumOptions {
            restarts: DEFAULT_RESTARTS,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

/// `<o, F(nu)>` and its gradient with respect to every `nu_i(b)`.
/// Returns `None` when the message vanishes.
fn value_and_gradient(
    a: &InteractionMatrix,
    o: &[f64],
    nu: &[Vec<f64>],
) -> Option<(f64, Vec<Vec<f64>>)> {
    let q = a.q();
    let d = nu.len();
    // h[i][c] = (A nu_i)_c
    let h: Vec<Vec<f64>> = nu
        .iter()
        .map(|m| (0..q).map(|c| a.row(c).iter().zip(m).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let mut prefix = vec![vec![1.0; q]; d + 1];
    for i in 0..d {
        for c in 0..q {
            prefix[i + 1][c] = prefix[i][c] * h[i][c];
        }
    }
    let mut suffix = vec![vec![1.0; q]; d + 1];
    for i in (0..d).rev() {
        for c in 0..q {
            suffix[i][c] = suffix[i + 1][c] * h[i][c];
        }
    }
    let g = &prefix[d];
    let s: f64 = g.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    let f: f64 = g.iter().zip(o).map(|(x, y)| x * y).sum::<f64>() / s;
    let grad = (0..d)
        .map(|i| {
            (0..q)
                .map(|b| {
                    (0..q)
                        .map(|c| a.get(c, b) * prefix[i][c] * suffix[i + 1][c] * (o[c] - f))
                        .sum::<f64>()
                        / s
                })
                .collect()
        })
        .collect();
    Some((f, grad))
}

fn objective_value(a: &InteractionMatrix, o: &[f64], nu: &[Vec<f64>]) -> Option<f64> {
    let g = product_message(a, nu);
    let s: f64 = g.iter().sum();
    (s > 0.0).then(|| g.iter().zip(o).map(|(x, y)| x * y).sum::<f64>() / s)
}

/// Projected gradient descent on `<o, F(nu)>` from one start.
fn descend(a: &InteractionMatrix, o: &[f64], start: Vec<Vec<f64>>, iterations: usize) -> (f64, Vec<Vec<f64>>) {
    let mut nu = start;
    let Some((mut f, mut grad)) = value_and_gradient(a, o, &nu) else {
        return (f64::INFINITY, nu);
    };
    // No upper cap on the step: on flat objectives the gradient can be many
    // orders of magnitude below the distance still to travel.
    let mut step = 1.0;
    for _ in 0..iterations {
        let cand: Vec<Vec<f64>> = nu
            .iter()
            .zip(&grad)
            .map(|(m, g)| {
                let moved: Vec<f64> = m.iter().zip(g).map(|(x, y)| x - step * y).collect();
                project_to_simplex(&moved)
            })
            .collect();
        match objective_value(a, o, &cand) {
            Some(fc) if fc < f => {
                nu = cand;
                let (fv, gv) = value_and_gradient(a, o, &nu).expect("feasible after improvement");
                f = fv;
                grad = gv;
                step = (step * 2.0).min(1e300);
            }
            _ => {
                step *= 0.5;
                if step < 1e-18 {
                    break;
                }
            }
        }
    }
    (f, nu)
}

fn start_point(k: usize, q: usize, d: usize, seed: u64) -> (String, Vec<Vec<f64>>) {
    if k == 0 {
        ("uniform".into(), vec![vec![1.0 / q as f64; q]; d])
    } else if k <= q {
        let b = k - 1;
        let mut e = vec![0.0; q];
        e[b] = 1.0;
        (format!("vertex {b}"), vec![e; d])
    } else {
        let mut rng = stream(seed, k as u64);
        (
            format!("dirichlet {k}"),
            (0..d).map(|_| dirichlet(&mut rng, q, 1.0)).collect(),
        )
    }
}

fn lex_cmp(x: &[Vec<f64>], y: &[Vec<f64>]) -> std::cmp::Ordering {
    x.iter()
        .flatten()
        .zip(y.iter().flatten())
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Multistart search over product measures for the extremum of
/// `<objective, F(nu)>`. Starts are, in order: uniform, the `q` monochromatic
/// vertices, then Dirichlet draws. The incumbent is kept, so more restarts
/// never give a worse value.
pub fn product_image_extremum(
    a: &InteractionMatrix,
    d: usize,
    objective: &[f64],
    sense: Sense,
    opts: ExtremumOptions,
) -> Result<ExtremumReport> {
    let q = a.q();
    if opts.restarts == 0 || opts.iterations == 0 {
        return Err(Error::validation("restarts", "search budget must be positive"));
    }
    if d == 0 {
        return Err(Error::validation("d", "must be at least 1"));
    }
    if objective.len() != q || objective.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(
            "objective",
            format!("expected {q} finite coefficients"),
        ));
    }
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let o: Vec<f64> = objective.iter().map(|x| sign * x).collect();
    let runs = par::map_range(opts.restarts, |k| {
        let (label, start) = start_point(k, q, d, opts.seed);
        let (f, nu) = descend(a, &o, start, opts.iterations);
        (label, f, nu)
    });
    let mut best: Option<usize> = None;
    for (k, (_, f, nu)) in runs.iter().enumerate() {
        if !f.is_finite() {
            continue;
        }
        best = match best {
            None => Some(k),
            Some(j) => {
                let (_, fb, nb) = &runs[j];
                if f < fb || (f == fb && lex_cmp(nu, nb).is_lt()) {
                    Some(k)
                } else {
                    Some(j)
                }
            }
        };
    }
    let best = best.ok_or_else(|| Error::Infeasible("no start has a nonzero message".into()))?;
    let endpoints = runs
        .iter()
        .filter(|(_, f, _)| f.is_finite())
        .map(|(label, f, nu)| {
            Ok(Endpoint {
                start: label.clone(),
                value: sign * f,
                nu: ProductMeasure::new(nu.clone())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtremumReport {
        kind: "stochastic multistart estimate, not a certificate".into(),
        sense,
        objective: objective.to_vec(),
        d,
        restarts: opts.restarts,
        iterations: opts.iterations,
        seed: opts.seed,
        value: sign * runs[best].1,
        argopt: ProductMeasure::new(runs[best].2.clone())?,
        endpoints,
    })
}
