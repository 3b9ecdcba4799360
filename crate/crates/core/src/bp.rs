//! The belief-propagation functional and exact Gibbs distributions.
//!
//! For an interaction matrix `A` and a distribution `mu` over neighbourhood
//! configurations `[q]^d`, the unnormalized message is
//! `G_c(mu) = E_{tau ~ mu}[ prod_i A[c][tau_i] ]` and the functional is its
//! normalization `F(mu) = G(mu) / sum_b G_b(mu)`. On product measures the
//! expectation factorizes into `prod_i (A nu_i)_c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    config_unindex, next_config, ExternalField, Graph, InteractionMatrix, JointDistribution,
    ProductMeasure,
};
use crate::numeric::{linf_distance, normalized, NeumaierSum};
use crate::par;

/// Maximum number of states an exhaustive enumeration may visit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_states: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: 1 << 24,
        }
    }
}

impl Budget {
    pub fn new(max_states: u64) -> Self {
        Budget { max_states }
    }

    /// `q^n` if it fits in the budget.
    pub fn check(&self, q: usize, n: usize) -> Result<usize> {
        let states = (q as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if states > self.max_states as u128 {
            return Err(Error::Budget {
                states,
                budget: self.max_states,
            });
        }
        Ok(states as usize)
    }
}

fn check_q(a: &InteractionMatrix, q: usize) -> Result<()> {
    if a.q() != q {
        return Err(Error::DimensionMismatch(format!(
            "interaction matrix has q = {}, distribution has q = {q}",
            a.q()
        )));
    }
    Ok(())
}

/// `G(mu)`: one pass over the support of `mu`.
pub fn unnormalized_message(a: &InteractionMatrix, mu: &JointDistribution) -> Result<Vec<f64>> {
    check_q(a, mu.q())?;
    let q = a.q();
    let mut acc = vec![NeumaierSum::new(); q];
    for (tau, w) in mu.support() {
        for (c, slot) in acc.iter_mut().enumerate() {
            let row = a.row(c);
            let prod: f64 = tau.iter().map(|&t| row[t]).product();
            slot.add(w * prod);
        }
    }
    Ok(acc.iter().map(NeumaierSum::value).collect())
}

fn normalize_message(g: Vec<f64>) -> Result<Vec<f64>> {
    normalized(&g).ok_or_else(|| {
        Error::Infeasible(
            "all message components vanish (distribution supported on zero-weight configurations)"
                .into(),
        )
    })
}

/// `F(mu)`.
pub fn bp(a: &InteractionMatrix, mu: &JointDistribution) -> Result<Vec<f64>> {
    normalize_message(unnormalized_message(a, mu)?)
}

/// `prod_i (A m_i)_c` for arbitrary nonnegative site vectors `m_i`.
///
/// The vectors need not be normalized; the normalized output is invariant
/// under rescaling any of them.
pub fn product_message<V: AsRef<[f64]>>(a: &InteractionMatrix, sites: &[V]) -> Vec<f64> {
    let q = a.q();
    (0..q)
        .map(|c| {
            let row = a.row(c);
            sites
                .iter()
                .map(|m| row.iter().zip(m.as_ref()).map(|(x, y)| x * y).sum::<f64>())
                .product()
        })
        .collect()
}

/// `F` on a product measure via the factorized form.
pub fn bp_product(a: &InteractionMatrix, nu: &ProductMeasure) -> Result<Vec<f64>> {
    check_q(a, nu.q())?;
    normalize_message(product_message(a, nu.marginals()))
}

/// `(lambda * mu)(tau) ∝ mu(tau) prod_i lambda[i][tau_i]`.
pub fn tilt(field: &ExternalField, mu: &JointDistribution) -> Result<JointDistribution> {
    if field.d() != mu.d() || field.q() != mu.q() {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, distribution is over [{}]^{}",
            field.d(),
            field.q(),
            mu.q(),
            mu.d()
        )));
    }
    let (q, d) = (mu.q(), mu.d());
    let mut weights = Vec::with_capacity(mu.weights().len());
    let mut tau = vec![0usize; d];
    for &w in mu.weights() {
        let tilt: f64 = if w > 0.0 {
            tau.iter()
                .enumerate()
                .map(|(i, &c)| field.row(i)[c])
                .product()
        } else {
            0.0
        };
        weights.push(w * tilt);
        next_config(&mut tau, q);
    }
    if weights.iter().all(|&x| x == 0.0) {
        return Err(Error::Infeasible("field annihilates distribution".into()));
    }
    JointDistribution::from_unnormalized(q, d, weights)
}

/// Marginal law of the sites in `sites`, in the given order.
pub fn marginalize(mu: &JointDistribution, sites: &[usize]) -> Result<JointDistribution> {
    if sites.is_empty() {
        return Err(Error::Precondition("empty site subset".into()));
    }
    let (q, d) = (mu.q(), mu.d());
    let mut seen = vec![false; d];
    for &s in sites {
        if s >= d {
            return Err(Error::validation(
                "sites",
                format!("site {s} out of range for d = {d}"),
            ));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::validation("sites", format!("site {s} repeated")));
        }
    }
    let k = sites.len();
    let mut out = vec![0.0; q.pow(k as u32)];
    let strides: Vec<usize> = sites.iter().map(|&s| q.pow(s as u32)).collect();
    for (i, &w) in mu.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut j = 0usize;
        for &stride in strides.iter().rev() {
            j = j * q + (i / stride) % q;
        }
        out[j] += w;
    }
    JointDistribution::from_unnormalized(q, k, out)
}

/// Exact Gibbs distribution together with its partition function.
#[derive(Debug, Clone)]
pub struct Gibbs {
    pub distribution: JointDistribution,
    pub partition_function: f64,
}

impl Gibbs {
    pub fn vertex_marginal(&self, v: usize) -> Vec<f64> {
        self.distribution.site_marginal(v)
    }

    pub fn log_partition_function(&self) -> f64 {
        self.partition_function.ln()
    }
}

const GIBBS_CHUNK: usize = 1 << 12;

/// Exhaustive Gibbs distribution `mu(sigma) ∝ prod_{uv} A[s_u][s_v] prod_v lambda[v][s_v]`.
///
/// Configurations are enumerated in mixed-radix order in fixed chunks; each
/// chunk is summed with compensation and the chunk sums are combined in order,
/// so `Z` is bit-identical whatever the thread count.
pub fn gibbs(
    graph: &Graph,
    a: &InteractionMatrix,
    fields: Option<&ExternalField>,
    budget: Budget,
) -> Result<Gibbs> {
    let (q, n) = (a.q(), graph.n());
    if n == 0 {
        return Err(Error::Precondition("graph has no vertices".into()));
    }
    if let Some(f) = fields {
        if f.d() != n || f.q() != q {
            return Err(Error::DimensionMismatch(format!(
                "fields are {}x{}, expected {n}x{q}",
                f.d(),
                f.q()
            )));
        }
    }
    let states = budget.check(q, n)?;
    let edges = graph.edges();
    let mut weights = vec![0.0f64; states];
    let chunk_sums = par::fill_chunks(&mut weights, GIBBS_CHUNK, |chunk, start| {
        let mut sigma = config_unindex(start, q, n);
        let mut acc = NeumaierSum::new();
        for slot in chunk.iter_mut() {
            let mut w: f64 = edges.iter().map(|&(u, v)| a.get(sigma[u], sigma[v])).product();
            if let Some(f) = fields {
                if w != 0.0 {
                    w *= sigma
                        .iter()
                        .enumerate()
                        .map(|(v, &c)| f.row(v)[c])
                        .product::<f64>();
                }
            }
            *slot = w;
            acc.add(w);
            next_config(&mut sigma, q);
        }
        acc.value()
    });
    let z = chunk_sums.into_iter().collect::<NeumaierSum>().value();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Infeasible("no feasible configuration (Z = 0)".into()));
    }
    for w in &mut weights {
        *w /= z;
    }
    Ok(Gibbs {
        distribution: JointDistribution::new(q, n, weights)?,
        partition_function: z,
    })
}

/// `|| mu_{G,v} - F(mu_{G-v, N(v)}) ||_inf`, from two independent enumerations.
///
/// With vertex fields the right-hand side also carries `v`'s own field:
/// `mu_{G,v}(c) ∝ lambda[v][c] G_c(mu_{G-v,N(v)})`.
pub fn check_vertex_recursion(
    graph: &Graph,
    a: &InteractionMatrix,
    v: usize,
    fields: Option<&ExternalField>,
    budget: Budget,
) -> Result<f64> {
    if v >= graph.n() {
        return Err(Error::validation("vertex", format!("{v} out of range")));
    }
    if graph.degree(v) == 0 {
        return Err(Error::Precondition(format!("vertex {v} is isolated")));
    }
    let full = gibbs(graph, a, fields, budget)?;
    let lhs = full.vertex_marginal(v);

    let (reduced, relabel) = graph.remove_vertex(v);
    let reduced_fields = match fields {
        Some(f) => Some(ExternalField::new(
            (0..graph.n())
                .filter(|&u| u != v)
                .map(|u| f.row(u).to_vec())
                .collect(),
        )?),
        None => None,
    };
    let rest = gibbs(&reduced, a, reduced_fields.as_ref(), budget)?;
    let sites: Vec<usize> = graph
        .neighbors(v)
        .iter()
        .map(|&u| relabel[u].expect("neighbour survives removal"))
        .collect();
    let neighbourhood = marginalize(&rest.distribution, &sites)?;
    let mut message = unnormalized_message(a, &neighbourhood)?;
    if let Some(f) = fields {
        for (m, &l) in message.iter_mut().zip(f.row(v)) {
            *m *= l;
        }
    }
    let rhs = normalize_message(message)?;
    Ok(linf_distance(&lhs, &rhs))
}
