//! Domain types: interaction matrices, joint and product distributions over
//! neighbourhood configurations, external fields, graphs and pinnings.
//!
//! Colours are 0-based. A configuration `tau` of `d` sites over `q` colours is
//! indexed in mixed radix with site 0 as the least significant digit:
//! `index(tau) = sum_i tau[i] * q^i`.
//!
//! Every type validates its invariants on construction and on
//! deserialization, so a value that exists is a valid value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Absolute tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Largest state space a dense [`JointDistribution`] may have.
pub const MAX_JOINT_STATES: usize = 10_000_000;

/// Number of states `q^d`, or a budget error if it does not fit.
pub fn num_states(q: usize, d: usize) -> Result<usize> {
    let states = (q as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if states > MAX_JOINT_STATES as u128 {
        return Err(Error::Budget {
            states,
            budget: MAX_JOINT_STATES as u64,
        });
    }
    Ok(states as usize)
}

/// Mixed-radix index of `tau` (site 0 least significant).
pub fn config_index(tau: &[usize], q: usize, d: usize) -> Result<usize> {
    if tau.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} sites, expected {d}",
            tau.len()
        )));
    }
    let mut index = 0usize;
    for (i, &c) in tau.iter().enumerate().rev() {
        if c >= q {
            return Err(Error::validation(
                format!("sites[{i}]"),
                format!("color {c} out of range for q = {q}"),
            ));
        }
        index = index * q + c;
    }
    Ok(index)
}

/// Inverse of [`config_index`].
pub fn config_unindex(mut index: usize, q: usize, d: usize) -> Vec<usize> {
    let mut tau = Vec::with_capacity(d);
    for _ in 0..d {
        tau.push(index % q);
        index /= q;
    }
    tau
}

/// Advances `tau` to the next configuration in mixed-radix order.
/// Returns `false` after wrapping around from the last configuration.
pub fn next_config(tau: &mut [usize], q: usize) -> bool {
    for c in tau.iter_mut() {
        *c += 1;
        if *c < q {
            return true;
        }
        *c = 0;
    }
    false
}

/// Colour-count vector of a configuration.
pub fn color_counts(tau: &[usize], q: usize) -> Vec<usize> {
    let mut counts = vec![0; q];
    for &c in tau {
        counts[c] += 1;
    }
    counts
}

fn check_finite_nonneg(x: f64, path: impl FnOnce() -> String) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::validation(path(), "non-finite weight"));
    }
    if x < 0.0 {
        return Err(Error::validation(path(), "negative weight"));
    }
    Ok(())
}

fn check_probability_vector(p: &[f64], path: &str) -> Result<()> {
    for (c, &x) in p.iter().enumerate() {
        check_finite_nonneg(x, || format!("{path}[{c}]"))?;
    }
    let s = compensated_sum(p);
    if s == 0.0 {
        return Err(Error::validation(path, "zero total mass"));
    }
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::validation(
            path,
            format!("not normalized (sum = {s})"),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// Symmetric nonnegative `q x q` matrix of pairwise spin weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInteractionMatrix", into = "RawInteractionMatrix")]
pub struct InteractionMatrix {
    q: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInteractionMatrix {
    q: usize,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawInteractionMatrix> for InteractionMatrix {
    type Error = Error;

    fn try_from(raw: RawInteractionMatrix) -> Result<Self> {
        if raw.entries.len() != raw.q {
            return Err(Error::validation(
                "entries",
                format!("{} rows, expected q = {}", raw.entries.len(), raw.q),
            ));
        }
        InteractionMatrix::new(raw.entries)
    }
}

impl From<InteractionMatrix> for RawInteractionMatrix {
    fn from(a: InteractionMatrix) -> Self {
        RawInteractionMatrix {
            q: a.q,
            entries: a.rows(),
        }
    }
}

impl InteractionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let q = rows.len();
        if q < 2 {
            return Err(Error::validation("q", "at least two spins are required"));
        }
        let mut entries = Vec::with_capacity(q * q);
        for (b, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::validation(
                    format!("entries[{b}]"),
                    format!("row has {} entries, expected {q}", row.len()),
                ));
            }
            for (c, &x) in row.iter().enumerate() {
                check_finite_nonneg(x, || format!("entries[{b}][{c}]"))?;
            }
            entries.extend_from_slice(row);
        }
        let a = InteractionMatrix { q, entries };
        a.validate()?;
        Ok(a)
    }

    pub fn from_fn(q: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(
            (0..q)
                .map(|b| (0..q).map(|c| f(b, c)).collect())
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::validation("q", "at least two spins are required"));
        }
        for b in 0..self.q {
            for c in 0..self.q {
                let x = self.get(b, c);
                check_finite_nonneg(x, || format!("entries[{b}][{c}]"))?;
                if x != self.get(c, b) {
                    return Err(Error::validation(
                        format!("entries[{b}][{c}]"),
                        format!("not symmetric ({x} vs {})", self.get(c, b)),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `1 1^T + (beta - 1) I`: ferromagnetic for `beta > 1`, antiferromagnetic
    /// for `beta < 1`.
    pub fn potts(q: usize, beta: f64) -> Result<Self> {
        Self::from_fn(q, |b, c| if b == c { beta } else { 1.0 })
    }

    pub fn all_ones(q: usize) -> Result<Self> {
        Self::from_fn(q, |_, _| 1.0)
    }

    /// `1 1^T - I`: uniform proper colourings.
    pub fn proper_coloring(q: usize) -> Result<Self> {
        Self::potts(q, 0.0)
    }

    /// Hardcore interaction with spin 0 = occupied; extra spins beyond two
    /// behave like the unoccupied spin.
    pub fn hardcore_padded(q: usize) -> Result<Self> {
        Self::from_fn(q, |b, c| if b == 0 && c == 0 { 0.0 } else { 1.0 })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, b: usize, c: usize) -> f64 {
        self.entries[b * self.q + c]
    }

    #[inline]
    pub fn row(&self, b: usize) -> &[f64] {
        &self.entries[b * self.q..(b + 1) * self.q]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.q).map(|b| self.row(b).to_vec()).collect()
    }

    pub fn is_all_ones(&self) -> bool {
        self.entries.iter().all(|&x| x == 1.0)
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.q, self.q, &self.entries)
    }
}

// ---------------------------------------------------------------------------

/// Dense probability vector over `[q]^d`, indexed in mixed radix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointDistribution {
    q: usize,
    d: usize,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawJoint {
    q: usize,
    d: usize,
    weights: Vec<f64>,
}

impl TryFrom<RawJoint> for JointDistribution {
    type Error = Error;

    fn try_from(raw: RawJoint) -> Result<Self> {
        JointDistribution::new(raw.q, raw.d, raw.weights)
    }
}

impl JointDistribution {
    /// Validates an already normalized weight vector.
    pub fn new(q: usize, d: usize, weights: Vec<f64>) -> Result<Self> {
        let mu = JointDistribution { q, d, weights };
        mu.validate()?;
        Ok(mu)
    }

    /// Normalizes nonnegative weights. Zero total mass is rejected.
    pub fn from_unnormalized(q: usize, d: usize, weights: Vec<f64>) -> Result<Self> {
        for (i, &x) in weights.iter().enumerate() {
            check_finite_nonneg(x, || format!("weights[{i}]"))?;
        }
        let s = compensated_sum(&weights);
        if s <= 0.0 {
            return Err(Error::validation("weights", "zero total mass"));
        }
        Self::new(q, d, weights.into_iter().map(|x| x / s).collect())
    }

    pub fn uniform(q: usize, d: usize) -> Result<Self> {
        let n = num_states(q, d)?;
        Self::new(q, d, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(q: usize, tau: &[usize]) -> Result<Self> {
        let d = tau.len();
        let n = num_states(q, d)?;
        let mut weights = vec![0.0; n];
        weights[config_index(tau, q, d)?] = 1.0;
        Self::new(q, d, weights)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 1 {
            return Err(Error::validation("q", "must be positive"));
        }
        if self.d < 1 {
            return Err(Error::validation("d", "must be positive"));
        }
        let n = num_states(self.q, self.d)?;
        if self.weights.len() != n {
            return Err(Error::validation(
                "weights",
                format!("length {} != q^d = {n}", self.weights.len()),
            ));
        }
        check_probability_vector(&self.weights, "weights")
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, tau: &[usize]) -> Result<f64> {
        Ok(self.weights[config_index(tau, self.q, self.d)?])
    }

    /// Configurations with positive weight, in index order.
    pub fn support(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (config_unindex(i, self.q, self.d), w))
    }

    /// Single-site marginal.
    pub fn site_marginal(&self, site: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.q];
        let stride = self.q.pow(site as u32);
        for (i, &w) in self.weights.iter().enumerate() {
            out[(i / stride) % self.q] += w;
        }
        out
    }
}

// ---------------------------------------------------------------------------

/// `d` marginal distributions on `[q]`, one per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProduct")]
pub struct ProductMeasure {
    marginals: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawProduct {
    marginals: Vec<Vec<f64>>,
}

impl TryFrom<RawProduct> for ProductMeasure {
    type Error = Error;

    fn try_from(raw: RawProduct) -> Result<Self> {
        ProductMeasure::new(raw.marginals)
    }
}

impl ProductMeasure {
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        let nu = ProductMeasure { marginals };
        nu.validate()?;
        Ok(nu)
    }

    pub fn iid(p: &[f64], d: usize) -> Result<Self> {
        Self::new(vec![p.to_vec(); d])
    }

    pub fn uniform(q: usize, d: usize) -> Result<Self> {
        Self::iid(&vec![1.0 / q as f64; q], d)
    }

    pub fn point_masses(tau: &[usize], q: usize) -> Result<Self> {
        Self::new(
            tau.iter()
                .map(|&c| {
                    let mut p = vec![0.0; q];
                    if c < q {
                        p[c] = 1.0;
                    }
                    p
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.marginals.is_empty() {
            return Err(Error::validation("marginals", "at least one site is required"));
        }
        let q = self.marginals[0].len();
        if q == 0 {
            return Err(Error::validation("marginals[0]", "empty marginal"));
        }
        for (i, p) in self.marginals.iter().enumerate() {
            if p.len() != q {
                return Err(Error::validation(
                    format!("marginals[{i}]"),
                    format!("length {} differs from {q}", p.len()),
                ));
            }
            check_probability_vector(p, &format!("marginals[{i}]"))?;
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        self.marginals[0].len()
    }

    pub fn d(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.marginals[i]
    }
}

/// Dense joint law of a product measure.
pub fn product_to_joint(nu: &ProductMeasure) -> Result<JointDistribution> {
    let (q, d) = (nu.q(), nu.d());
    let n = num_states(q, d)?;
    let mut weights = Vec::with_capacity(n);
    let mut tau = vec![0usize; d];
    loop {
        let w: f64 = tau
            .iter()
            .enumerate()
            .map(|(i, &c)| nu.marginal(i)[c])
            .product();
        weights.push(w);
        if !next_config(&mut tau, q) {
            break;
        }
    }
    JointDistribution::from_unnormalized(q, d, weights)
}

// ---------------------------------------------------------------------------

/// Per-site, per-colour nonnegative tilt weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct ExternalField {
    weights: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawField {
    weights: Vec<Vec<f64>>,
}

impl TryFrom<RawField> for ExternalField {
    type Error = Error;

    fn try_from(raw: RawField) -> Result<Self> {
        ExternalField::new(raw.weights)
    }
}

impl ExternalField {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let f = ExternalField { weights };
        f.validate()?;
        Ok(f)
    }

    pub fn ones(d: usize, q: usize) -> Self {
        ExternalField {
            weights: vec![vec![1.0; q]; d],
        }
    }

    /// Field that pins each listed site to one colour and leaves the rest free.
    pub fn pinning(d: usize, q: usize, pins: &Pinning) -> Result<Self> {
        let mut weights = vec![vec![1.0; q]; d];
        for (&v, &c) in pins.assignments() {
            if v >= d || c >= q {
                return Err(Error::validation(
                    "assignments",
                    format!("pin {v} <- {c} out of range (n = {d}, q = {q})"),
                ));
            }
            weights[v] = vec![0.0; q];
            weights[v][c] = 1.0;
        }
        Ok(ExternalField { weights })
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::validation("weights", "at least one site is required"));
        }
        let q = self.weights[0].len();
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != q {
                return Err(Error::validation(
                    format!("weights[{i}]"),
                    format!("length {} differs from {q}", row.len()),
                ));
            }
            for (c, &x) in row.iter().enumerate() {
                check_finite_nonneg(x, || format!("weights[{i}][{c}]"))?;
            }
            if !row.iter().any(|&x| x > 0.0) {
                return Err(Error::validation(
                    format!("weights[{i}]"),
                    "every color has zero weight",
                ));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn q(&self) -> usize {
        self.weights[0].len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Entrywise product of two fields of the same shape.
    pub fn hadamard(&self, other: &ExternalField) -> Result<ExternalField> {
        if self.d() != other.d() || self.q() != other.q() {
            return Err(Error::DimensionMismatch("field shapes differ".into()));
        }
        ExternalField::new(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------

/// Simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for Graph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        Graph::new(raw.n, raw.edges.into_iter().map(|[u, v]| (u, v)).collect())
    }
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        RawGraph {
            n: g.n,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    /// Edges are stored as sorted `(min, max)` pairs; duplicates are merged.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, (u, v)) in edges.into_iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::validation(
                    format!("edges[{i}]"),
                    format!("vertex out of range for n = {n}"),
                ));
            }
            if u == v {
                return Err(Error::validation(format!("edges[{i}]"), "self-loop"));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: normalized,
            adjacency,
        })
    }

    pub fn empty(n: usize) -> Self {
        Graph::new(n, Vec::new()).expect("edgeless graph is valid")
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|i| (i - 1, i)).collect()).expect("valid path")
    }

    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Graph::new(n, edges).expect("valid cycle")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Graph::new(n, edges).expect("valid complete graph")
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i)).collect()).expect("valid star")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `G - v`, with the remaining vertices relabelled in increasing order.
    /// Returns the graph and the map from old labels to new ones.
    pub fn remove_vertex(&self, v: usize) -> (Graph, Vec<Option<usize>>) {
        let mut relabel = vec![None; self.n];
        let mut next = 0;
        for (u, slot) in relabel.iter_mut().enumerate() {
            if u != v {
                *slot = Some(next);
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| a != v && b != v)
            .map(|&(a, b)| (relabel[a].unwrap(), relabel[b].unwrap()))
            .collect();
        (
            Graph::new(self.n - 1, edges).expect("subgraph of a valid graph"),
            relabel,
        )
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &self.adjacency[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        crate::digest_json(self)
    }
}

// ---------------------------------------------------------------------------

/// Partial assignment vertex -> colour.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPinning", into = "RawPinning")]
pub struct Pinning {
    assignments: BTreeMap<usize, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawPinning {
    assignments: Vec<[usize; 2]>,
}

impl TryFrom<RawPinning> for Pinning {
    type Error = Error;

    fn try_from(raw: RawPinning) -> Result<Self> {
        Pinning::new(raw.assignments.into_iter().map(|[v, c]| (v, c)).collect())
    }
}

impl From<Pinning> for RawPinning {
    fn from(p: Pinning) -> Self {
        RawPinning {
            assignments: p.assignments.into_iter().map(|(v, c)| [v, c]).collect(),
        }
    }
}

impl Pinning {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for (i, (v, c)) in pairs.into_iter().enumerate() {
            if assignments.insert(v, c).is_some() {
                return Err(Error::validation(
                    format!("assignments[{i}]"),
                    format!("vertex {v} pinned twice"),
                ));
            }
        }
        Ok(Pinning { assignments })
    }

    pub fn empty() -> Self {
        Pinning::default()
    }

    pub fn assignments(&self) -> &BTreeMap<usize, usize> {
        &self.assignments
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.assignments.get(&v).copied()
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.assignments.contains_key(&v)
    }

    pub fn with(&self, v: usize, c: usize) -> Result<Pinning> {
        let mut p = self.clone();
        if p.assignments.insert(v, c).is_some() {
            return Err(Error::validation(
                "assignments",
                format!("vertex {v} pinned twice"),
            ));
        }
        Ok(p)
    }
}
