//! The extended matrix `B(beta, A)` and the nonconvexity witness.
//!
//! `B` appends a special spin (index 0 here) that interacts with itself with
//! weight `beta` and with every other spin with weight 1. When the maximizer
//! set of `A` has two spins whose columns differ, the smallest possible
//! special-spin coordinate over product measures is attained only at
//! monochromatic point masses, while mixtures of those point masses attain it
//! too. Their images are therefore not images of any product measure.

use serde::{Deserialize, Serialize};

use crate::bp::{bp, bp_product, Budget};
use crate::error::{Error, Result};
use crate::image::{
    hull_membership, product_image_extremum, ExtremumOptions, ExtremumReport, HullMembershipReport,
    Sense,
};
use crate::model::{InteractionMatrix, JointDistribution, ProductMeasure};
use crate::numeric::linf_distance;
use crate::par;
use crate::rng::{dirichlet, stream};

/// Index of the special spin in `B`.
pub const SPECIAL: usize = 0;
pub const MAXIMIZER_TOL: f64 = 1e-10;
pub const VALUE_TOL: f64 = 1e-12;
pub const GAP_TOL: f64 = 1e-6;
pub const OPTIMIZER_SLACK: f64 = 1e-9;
pub const VERTEX_RADIUS: f64 = 1e-4;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const RANDOM_ZETAS: usize = 8;

pub fn build_b(beta: f64, a: &InteractionMatrix) -> Result<InteractionMatrix> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::validation("beta", format!("must be >= 1, got {beta}")));
    }
    InteractionMatrix::from_fn(a.q() + 1, |x, y| match (x, y) {
        (0, 0) => beta,
        (0, _) | (_, 0) => 1.0,
        _ => a.get(x - 1, y - 1),
    })
}

/// `sum_c A[c][b]^d` for every `b`.
pub fn column_power_sums(a: &InteractionMatrix, d: usize) -> Vec<f64> {
    (0..a.q())
        .map(|b| (0..a.q()).map(|c| a.get(c, b).powi(d as i32)).sum())
        .collect()
}

/// Spins whose column power sum is within relative `tol` of the maximum.
pub fn maximizer_set(a: &InteractionMatrix, d: usize, tol: f64) -> Vec<usize> {
    let sums = column_power_sums(a, d);
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..a.q())
        .filter(|&b| max - sums[b] <= tol * max.abs())
        .collect()
}

pub fn extremal_value(a: &InteractionMatrix, d: usize) -> f64 {
    let max = column_power_sums(a, d)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    1.0 / (1.0 + max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinctPair {
    pub a1: usize,
    pub a2: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnicalConditions {
    pub condition_a: bool,
    pub condition_b: bool,
    pub maximizer_set: Vec<usize>,
    /// First `(a1 < a2, c)` in lexicographic order with `A[c][a1] != A[c][a2]`,
    /// in `A` labels.
    pub pair: Option<DistinctPair>,
    pub reasons: Vec<String>,
}

impl TechnicalConditions {
    pub fn pass(&self) -> bool {
        self.condition_a && self.condition_b
    }
}

pub fn check_technical_conditions(a: &InteractionMatrix, d: usize) -> TechnicalConditions {
    let q = a.q();
    let mut reasons = Vec::new();
    let mut below = None;
    let mut strict = false;
    for b in 0..q {
        for c in 0..q {
            let x = a.get(b, c);
            if x < 1.0 && below.is_none() {
                below = Some((b, c, x));
            }
            strict |= x > 1.0;
        }
    }
    if let Some((b, c, x)) = below {
        reasons.push(format!("(a) entry [{b}][{c}] = {x} is below 1"));
    }
    if !strict {
        reasons.push("(a) no entry exceeds 1".into());
    }
    let condition_a = below.is_none() && strict;

    let m = maximizer_set(a, d, MAXIMIZER_TOL);
    let mut pair = None;
    'search: for (i, &a1) in m.iter().enumerate() {
        for &a2 in &m[i + 1..] {
            for c in 0..q {
                if a.get(c, a1) != a.get(c, a2) {
                    pair = Some(DistinctPair { a1, a2, c });
                    break 'search;
                }
            }
        }
    }
    if m.len() < 2 {
        reasons.push(format!("(b) maximizer set {m:?} has fewer than two spins"));
    } else if pair.is_none() {
        reasons.push("(b) all maximizer columns are identical".into());
    }
    let condition_b = pair.is_some();
    TechnicalConditions {
        condition_a,
        condition_b,
        maximizer_set: m,
        pair,
        reasons,
    }
}

/// `(1 - F_*(nu)) / F_*(nu)` for the special coordinate of `B`.
pub fn tilde_ratio(b: &InteractionMatrix, nu: &ProductMeasure) -> Result<f64> {
    let f = bp_product(b, nu)?[SPECIAL];
    if !(f > 0.0) {
        return Err(Error::Infeasible("special-spin coordinate is zero".into()));
    }
    Ok((1.0 - f) / f)
}

/// The same ratio from the product formula
/// `sum_c prod_i (nu_i(*) + sum_b A[c][b] nu_i(b)) / (1 + (beta - 1) nu_i(*))`.
pub fn tilde_ratio_formula(beta: f64, a: &InteractionMatrix, nu: &ProductMeasure) -> f64 {
    let q = a.q();
    (0..q)
        .map(|c| {
            nu.marginals()
                .iter()
                .map(|m| {
                    let s = m[SPECIAL];
                    let num = s + (0..q).map(|b| a.get(c, b) * m[b + 1]).sum::<f64>();
                    num / (1.0 + (beta - 1.0) * s)
                })
                .product::<f64>()
        })
        .sum()
}

/// `delta_a^{⊗d}` in `B` labels.
pub fn monochromatic(q_b: usize, d: usize, spin: usize) -> Result<JointDistribution> {
    JointDistribution::point_mass(q_b, &vec![spin; d])
}

/// `sum_a zeta(a) delta_a^{⊗d}` over the `(q+1)`-spin space. `zeta` is
/// indexed by `A` labels and must vanish off `maximizers`.
pub fn zeta_mixture(zeta: &[f64], maximizers: &[usize], d: usize) -> Result<JointDistribution> {
    let q_b = zeta.len() + 1;
    for (a, &z) in zeta.iter().enumerate() {
        if z < 0.0 {
            return Err(Error::validation(format!("zeta[{a}]"), "negative weight"));
        }
        if z > 0.0 && !maximizers.contains(&a) {
            return Err(Error::validation(
                format!("zeta[{a}]"),
                "support outside the maximizer set",
            ));
        }
    }
    let n = crate::model::num_states(q_b, d)?;
    let mut weights = vec![0.0; n];
    for (a, &z) in zeta.iter().enumerate() {
        if z > 0.0 {
            let idx = crate::model::config_index(&vec![a + 1; d], q_b, d)?;
            weights[idx] += z;
        }
    }
    JointDistribution::from_unnormalized(q_b, d, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            seed: 0,
            restarts: crate::image::DEFAULT_RESTARTS,
            iterations: crate::image::DEFAULT_ITERATIONS,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexValue {
    /// Spin in `B` labels.
    pub spin: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    /// Spins in `B` labels.
    pub a1: usize,
    pub a2: usize,
    /// Coordinate of `F_B` with the largest gap.
    pub c: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSweep {
    pub samples: usize,
    pub min_value: f64,
    /// Samples within `1e-9` of the bound that are not near a monochromatic
    /// maximizer point mass.
    pub near_bound_far_from_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerEvidence {
    pub label: String,
    pub best_value: f64,
    pub optimizer_count: usize,
    pub max_optimizer_distance: f64,
    pub report: ExtremumReport,
}

/// Everything needed to re-check the nonconvexity claim. Spin indices are in
/// `B` labels; spin 0 is the special spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvexityWitness {
    pub beta: f64,
    pub a: InteractionMatrix,
    pub b: InteractionMatrix,
    pub d: usize,
    pub options: CertifyOptions,
    pub maximizer_set: Vec<usize>,
    pub extremal_value: f64,
    pub vertex_values: Vec<VertexValue>,
    pub distinct_pair: WitnessPair,
    pub linearity_residual: f64,
    pub mixture_point: Vec<f64>,
    pub mixture_membership: HullMembershipReport,
    pub product_sweep: ProductSweep,
    pub optimizer_report: OptimizerEvidence,
}

fn distance_to_monochromatic(nu: &ProductMeasure, spins: &[usize]) -> f64 {
    spins
        .iter()
        .map(|&s| {
            nu.marginals()
                .iter()
                .flat_map(|m| {
                    m.iter()
                        .enumerate()
                        .map(move |(c, &x)| (x - if c == s { 1.0 } else { 0.0 }).abs())
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn certify_nonconvexity(
    beta: f64,
    a: &InteractionMatrix,
    d: usize,
    opts: CertifyOptions,
    budget: Budget,
) -> Result<NonconvexityWitness> {
    if d == 0 {
        return Err(Error::validation("d", "must be at least 1"));
    }
    let b = build_b(beta, a)?;
    let cond = check_technical_conditions(a, d);
    if !cond.pass() {
        return Err(Error::CheckFailed(format!(
            "technical conditions: {}",
            cond.reasons.join("; ")
        )));
    }
    let q_b = b.q();
    let ext = extremal_value(a, d);
    let spins: Vec<usize> = cond.maximizer_set.iter().map(|&x| x + 1).collect();

    // (i) monochromatic maximizers attain the bound
    let images: Vec<Vec<f64>> = spins
        .iter()
        .map(|&s| bp(&b, &monochromatic(q_b, d, s)?))
        .collect::<Result<_>>()?;
    let vertex_values: Vec<VertexValue> = spins
        .iter()
        .zip(&images)
        .map(|(&spin, img)| VertexValue {
            spin,
            value: img[SPECIAL],
        })
        .collect();
    if let Some(v) = vertex_values
        .iter()
        .find(|v| (v.value - ext).abs() > VALUE_TOL)
    {
        return Err(Error::CheckFailed(format!(
            "(i) spin {} has special coordinate {} instead of {ext}",
            v.spin, v.value
        )));
    }

    // (iii) the pair from condition (b) has distinct images
    let pair = cond.pair.expect("condition (b) holds");
    let (a1, a2) = (pair.a1 + 1, pair.a2 + 1);
    let f1 = bp(&b, &monochromatic(q_b, d, a1)?)?;
    let f2 = bp(&b, &monochromatic(q_b, d, a2)?)?;
    let (c, gap) = f1
        .iter()
        .zip(&f2)
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (c, g)| if g > best.1 { (c, g) } else { best });
    if !(gap > GAP_TOL) {
        return Err(Error::CheckFailed(format!(
            "(iii) images of spins {a1} and {a2} differ by only {gap}"
        )));
    }

    // (ii) linearity on mixtures of monochromatic point masses
    let q = a.q();
    let mut zetas = Vec::with_capacity(RANDOM_ZETAS + 1);
    let mut pair_zeta = vec![0.0; q];
    pair_zeta[pair.a1] = 0.5;
    pair_zeta[pair.a2] = 0.5;
    zetas.push(pair_zeta.clone());
    for j in 0..RANDOM_ZETAS {
        let mut rng = stream(opts.seed, 1_000_000 + j as u64);
        let w = dirichlet(&mut rng, cond.maximizer_set.len(), 1.0);
        let mut z = vec![0.0; q];
        for (&m, x) in cond.maximizer_set.iter().zip(w) {
            z[m] = x;
        }
        zetas.push(z);
    }
    let mut linearity_residual = 0.0f64;
    let mut mixture_point = Vec::new();
    for (j, z) in zetas.iter().enumerate() {
        let mu = zeta_mixture(z, &cond.maximizer_set, d)?;
        let direct = bp(&b, &mu)?;
        let mut combo = vec![0.0; q_b];
        for (&m, img) in cond.maximizer_set.iter().zip(&images) {
            for (x, y) in combo.iter_mut().zip(img) {
                *x += z[m] * y;
            }
        }
        linearity_residual = linearity_residual.max(linf_distance(&direct, &combo));
        if j == 0 {
            mixture_point = direct;
        }
    }
    if linearity_residual > VALUE_TOL {
        return Err(Error::CheckFailed(format!(
            "(ii) linearity residual {linearity_residual}"
        )));
    }
    if (mixture_point[SPECIAL] - ext).abs() > VALUE_TOL {
        return Err(Error::CheckFailed(format!(
            "mixture point has special coordinate {} instead of {ext}",
            mixture_point[SPECIAL]
        )));
    }
    let mixture_membership =
        hull_membership(&mixture_point, &b, d, crate::image::DEFAULT_HULL_TOL, budget)?;
    if !mixture_membership.is_member {
        return Err(Error::CheckFailed(
            "mixture point is not in the convex hull of vertex images".into(),
        ));
    }

    // random product measures never beat the bound
    let values = par::map_range(opts.samples, |k| {
        let mut rng = stream(opts.seed, k as u64);
        let nu = ProductMeasure::new((0..d).map(|_| dirichlet(&mut rng, q_b, 1.0)).collect())
            .expect("dirichlet marginals");
        let v = bp_product(&b, &nu).map(|f| f[SPECIAL]).unwrap_or(f64::INFINITY);
        let far = v <= ext + OPTIMIZER_SLACK && distance_to_monochromatic(&nu, &spins) > VERTEX_RADIUS;
        (v, far)
    });
    let min_value = values.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let near_bound_far_from_vertices = values.iter().filter(|x| x.1).count();
    if min_value < ext - VALUE_TOL {
        return Err(Error::CheckFailed(format!(
            "product sweep found special coordinate {min_value} below {ext}"
        )));
    }
    if near_bound_far_from_vertices > 0 {
        return Err(Error::CheckFailed(format!(
            "{near_bound_far_from_vertices} sampled product measures reach the bound away from monochromatic point masses"
        )));
    }

    // (iv) stochastic search for a better product measure
    let mut objective = vec![0.0; q_b];
    objective[SPECIAL] = 1.0;
    let report = product_image_extremum(
        &b,
        d,
        &objective,
        Sense::Minimize,
        ExtremumOptions {
            restarts: opts.restarts,
            iterations: opts.iterations,
            seed: opts.seed,
        },
    )?;
    if report.value < ext - OPTIMIZER_SLACK {
        return Err(Error::CheckFailed(format!(
            "(iv) optimizer found {} below {ext}",
            report.value
        )));
    }
    let optimizers = report.optimizers(OPTIMIZER_SLACK);
    let max_optimizer_distance = optimizers
        .iter()
        .map(|e| distance_to_monochromatic(&e.nu, &spins))
        .fold(0.0, f64::max);
    if max_optimizer_distance > VERTEX_RADIUS {
        return Err(Error::CheckFailed(format!(
            "(iv) an optimizer lies {max_optimizer_distance} from every monochromatic maximizer"
        )));
    }
    let optimizer_report = OptimizerEvidence {
        label: "stochastic evidence: multistart search, not part of the proof".into(),
        best_value: report.value,
        optimizer_count: optimizers.len(),
        max_optimizer_distance,
        report,
    };

    Ok(NonconvexityWitness {
        beta,
        a: a.clone(),
        b,
        d,
        options: opts,
        maximizer_set: spins,
        extremal_value: ext,
        vertex_values,
        distinct_pair: WitnessPair { a1, a2, c, gap },
        linearity_residual,
        mixture_point,
        mixture_membership,
        product_sweep: ProductSweep {
            samples: opts.samples,
            min_value,
            near_bound_far_from_vertices,
        },
        optimizer_report,
    })
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= VALUE_TOL || (x.is_infinite() && x == y)
}

fn close_vec(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| close(*a, *b))
}

/// Recomputes the witness from `(beta, A, d)` and its options and compares
/// every recorded field. Returns the list of mismatching fields on failure.
pub fn verify_witness(w: &NonconvexityWitness, budget: Budget) -> Result<()> {
    let fresh = certify_nonconvexity(w.beta, &w.a, w.d, w.options, budget)?;
    let mut bad = Vec::new();
    if fresh.b != w.b {
        bad.push("b");
    }
    if fresh.maximizer_set != w.maximizer_set {
        bad.push("maximizer_set");
    }
    if !close(fresh.extremal_value, w.extremal_value) {
        bad.push("extremal_value");
    }
    if fresh.vertex_values.len() != w.vertex_values.len()
        || fresh
            .vertex_values
            .iter()
            .zip(&w.vertex_values)
            .any(|(x, y)| x.spin != y.spin || !close(x.value, y.value))
    {
        bad.push("vertex_values");
    }
    let (p, r) = (&fresh.distinct_pair, &w.distinct_pair);
    if p.a1 != r.a1 || p.a2 != r.a2 || p.c != r.c || !close(p.gap, r.gap) {
        bad.push("distinct_pair");
    }
    if !close(fresh.linearity_residual, w.linearity_residual) {
        bad.push("linearity_residual");
    }
    if !close_vec(&fresh.mixture_point, &w.mixture_point) {
        bad.push("mixture_point");
    }
    if fresh.mixture_membership.is_member != w.mixture_membership.is_member {
        bad.push("mixture_membership");
    }
    let (s, t) = (&fresh.product_sweep, &w.product_sweep);
    if s.samples != t.samples
        || !close(s.min_value, t.min_value)
        || s.near_bound_far_from_vertices != t.near_bound_far_from_vertices
    {
        bad.push("product_sweep");
    }
    let (o, u) = (&fresh.optimizer_report, &w.optimizer_report);
    if !close(o.best_value, u.best_value)
        || o.optimizer_count != u.optimizer_count
        || !close(o.max_optimizer_distance, u.max_optimizer_distance)
    {
        bad.push("optimizer_report");
    }
    if w.extremal_value != extremal_value(&w.a, w.d) && !close(w.extremal_value, extremal_value(&w.a, w.d)) {
        bad.push("extremal_value formula");
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(format!(
            "witness fields do not recompute: {}",
            bad.join(", ")
        )))
    }
}
