//! Influence matrices of small Gibbs distributions and sampled Jacobian norms
//! of the potential-transformed BP map.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::bp::{gibbs, product_message, Budget};
use crate::error::{Error, Result};
use crate::model::{config_unindex, ExternalField, Graph, InteractionMatrix, Pinning};
use crate::numeric::{eigenvalues, NeumaierSum};
use crate::par;
use crate::rng::{dirichlet, stream};

pub const REAL_SPECTRUM_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-6;
pub const DEFAULT_FLOOR: f64 = 1e-3;

/// Induced norm `||.||_K -> ||.||_{inf,K}` on block rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockNorm {
    /// Exact for `l1` and `linf`; a value attained by some unit vector for `l2`.
    pub lower: f64,
    /// Equal to `lower` except for `l2`, where it is `sum ||B_u||_2`.
    pub upper: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `sup { ||sum_u B_u x_u||_K : ||x_u||_K <= 1 }` for one block row.
pub fn block_row_norm(blocks: &[DMatrix<f64>], kind: NormKind) -> BlockNorm {
    let q = blocks.first().map_or(0, |b| b.nrows());
    match kind {
        NormKind::Linf => {
            let v = (0..q)
                .map(|r| blocks.iter().map(|b| b.row(r).abs().sum()).sum::<f64>())
                .fold(0.0, f64::max);
            BlockNorm { lower: v, upper: v }
        }
        NormKind::L1 => {
            // dual: max over sign vectors s of sum_u ||B_u^T s||_inf
            let mut best = 0.0f64;
            for mask in 0u32..(1 << q) {
                let s: Vec<f64> = (0..q).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                let total: f64 = blocks
                    .iter()
                    .map(|b| {
                        (0..b.ncols())
                            .map(|c| (0..q).map(|r| s[r] * b[(r, c)]).sum::<f64>().abs())
                            .fold(0.0, f64::max)
                    })
                    .sum();
                best = best.max(total);
            }
            BlockNorm { lower: best, upper: best }
        }
        NormKind::L2 => {
            let upper: f64 = blocks.iter().map(spectral_norm).sum();
            let value = |s: &[f64]| -> f64 {
                blocks
                    .iter()
                    .map(|b| {
                        (0..b.ncols())
                            .map(|c| (0..q).map(|r| s[r] * b[(r, c)]).sum::<f64>().powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .sum()
            };
            // fixed-point iteration s <- sum_u B_u B_u^T s / ||B_u^T s||, from
            // every coordinate direction and the all-ones direction
            let mut best = 0.0f64;
            let mut starts: Vec<Vec<f64>> = (0..q)
                .map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            starts.push(vec![1.0 / (q as f64).sqrt(); q]);
            for mut s in starts {
                for _ in 0..200 {
                    best = best.max(value(&s));
                    let mut next = vec![0.0; q];
                    for b in blocks {
                        let bt_s: Vec<f64> =
                            (0..b.ncols()).map(|c| (0..q).map(|r| s[r] * b[(r, c)]).sum()).collect();
                        let n = bt_s.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if n > 0.0 {
                            for r in 0..q {
                                next[r] += (0..b.ncols()).map(|c| b[(r, c)] * bt_s[c]).sum::<f64>() / n;
                            }
                        }
                    }
                    let n = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if !(n > 0.0) {
                        break;
                    }
                    next.iter_mut().for_each(|x| *x /= n);
                    let moved: f64 = next.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum();
                    s = next;
                    if moved < 1e-15 {
                        break;
                    }
                }
                best = best.max(value(&s));
            }
            BlockNorm { lower: best, upper: upper.max(best) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceNorms {
    pub l1: f64,
    pub l2_lower: f64,
    pub l2_upper: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub graph_digest: String,
    pub pinning: Pinning,
    pub q: usize,
    /// Unpinned vertices; block `i` of `psi` belongs to `vertices[i]`.
    pub vertices: Vec<usize>,
    pub marginals: Vec<Vec<f64>>,
    /// Row `(r, b)`, column `(v, c)` at `i*q + b`, `j*q + c`.
    pub psi: Vec<Vec<f64>>,
    pub lambda_max: f64,
    pub max_imaginary: f64,
    pub real_spectrum: bool,
    pub norms: InfluenceNorms,
}

impl InfluenceReport {
    /// `Psi^{r -> v}` by position in `vertices`.
    pub fn block(&self, i: usize, j: usize) -> Vec<Vec<f64>> {
        let q = self.q;
        (0..q)
            .map(|b| self.psi[i * q + b][j * q..(j + 1) * q].to_vec())
            .collect()
    }

    /// Largest `|sum_c Psi(b, c)|` over all rows.
    pub fn max_row_sum(&self) -> f64 {
        let q = self.q;
        self.psi
            .iter()
            .flat_map(|row| row.chunks(q).map(|c| c.iter().sum::<f64>().abs()))
            .fold(0.0, f64::max)
    }
}

/// Pairwise marginals `P(s_r = b, s_v = c)` from one enumeration.
struct Pairwise {
    q: usize,
    n: usize,
    table: Vec<f64>,
}

impl Pairwise {
    fn get(&self, r: usize, b: usize, v: usize, c: usize) -> f64 {
        let q = self.q;
        self.table[((r * self.n + v) * q + b) * q + c]
    }
}

fn pairwise(graph: &Graph, a: &InteractionMatrix, pinning: &Pinning, budget: Budget) -> Result<Pairwise> {
    let (q, n) = (a.q(), graph.n());
    if let Some((&v, &c)) = pinning.assignments().iter().find(|(&v, &c)| v >= n || c >= q) {
        return Err(Error::validation("pinning", format!("vertex {v} / colour {c} out of range")));
    }
    let field = ExternalField::pinning(n, q, pinning)?;
    let mu = gibbs(graph, a, Some(&field), budget).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("pinning has zero probability".into()),
        other => other,
    })?;
    let mut acc = vec![NeumaierSum::new(); n * n * q * q];
    for (i, &w) in mu.distribution.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let s = config_unindex(i, q, n);
        for r in 0..n {
            for v in 0..n {
                acc[((r * n + v) * q + s[r]) * q + s[v]].add(w);
            }
        }
    }
    Ok(Pairwise {
        q,
        n,
        table: acc.iter().map(NeumaierSum::value).collect(),
    })
}

fn submatrix(pw: &Pairwise, r: usize, v: usize) -> Vec<Vec<f64>> {
    let q = pw.q;
    let mu_v: Vec<f64> = (0..q).map(|c| pw.get(v, c, v, c)).collect();
    (0..q)
        .map(|b| {
            let p_rb = pw.get(r, b, r, b);
            if !(p_rb > 0.0) {
                return vec![0.0; q];
            }
            (0..q).map(|c| pw.get(r, b, v, c) / p_rb - mu_v[c]).collect()
        })
        .collect()
}

/// `Psi^{r -> v}(b, c) = mu^{r <- b}_v(c) - mu_v(c)`, zero rows for
/// infeasible `b`.
pub fn influence_submatrix(
    graph: &Graph,
    a: &InteractionMatrix,
    pinning: &Pinning,
    r: usize,
    v: usize,
    budget: Budget,
) -> Result<Vec<Vec<f64>>> {
    for x in [r, v] {
        if x >= graph.n() {
            return Err(Error::validation("vertex", format!("{x} out of range")));
        }
        if pinning.is_pinned(x) {
            return Err(Error::Precondition(format!("vertex {x} is pinned")));
        }
    }
    let pw = pairwise(graph, a, pinning, budget)?;
    Ok(submatrix(&pw, r, v))
}

pub fn influence_matrix(
    graph: &Graph,
    a: &InteractionMatrix,
    pinning: &Pinning,
    budget: Budget,
) -> Result<InfluenceReport> {
    let q = a.q();
    let pw = pairwise(graph, a, pinning, budget)?;
    let vertices: Vec<usize> = (0..graph.n()).filter(|&v| !pinning.is_pinned(v)).collect();
    let m = vertices.len();
    let mut psi = vec![vec![0.0; m * q]; m * q];
    for (i, &r) in vertices.iter().enumerate() {
        for (j, &v) in vertices.iter().enumerate() {
            for (b, row) in submatrix(&pw, r, v).into_iter().enumerate() {
                psi[i * q + b][j * q..(j + 1) * q].copy_from_slice(&row);
            }
        }
    }
    let marginals = vertices
        .iter()
        .map(|&v| (0..q).map(|c| pw.get(v, c, v, c)).collect())
        .collect();
    let (lambda_max, max_imaginary, norms) = if m == 0 {
        (0.0, 0.0, InfluenceNorms { l1: 0.0, l2_lower: 0.0, l2_upper: 0.0, linf: 0.0 })
    } else {
        let mat = DMatrix::from_fn(m * q, m * q, |x, y| psi[x][y]);
        let eig = eigenvalues(&mat)
            .ok_or_else(|| Error::CheckFailed("eigenvalue iteration did not converge".into()))?;
        let lambda_max = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let max_imaginary = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let block_rows: Vec<Vec<DMatrix<f64>>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| mat.view((i * q, j * q), (q, q)).into_owned())
                    .collect()
            })
            .collect();
        let worst = |kind| {
            block_rows
                .iter()
                .map(|row| block_row_norm(row, kind))
                .fold(BlockNorm { lower: 0.0, upper: 0.0 }, |acc, x| BlockNorm {
                    lower: acc.lower.max(x.lower),
                    upper: acc.upper.max(x.upper),
                })
        };
        let l2 = worst(NormKind::L2);
        (
            lambda_max,
            max_imaginary,
            InfluenceNorms {
                l1: worst(NormKind::L1).lower,
                l2_lower: l2.lower,
                l2_upper: l2.upper,
                linf: worst(NormKind::Linf).lower,
            },
        )
    };
    Ok(InfluenceReport {
        graph_digest: graph.digest(),
        pinning: pinning.clone(),
        q,
        vertices,
        marginals,
        psi,
        lambda_max,
        max_imaginary,
        real_spectrum: max_imaginary <= REAL_SPECTRUM_TOL,
        norms,
    })
}

/// Whether a self-influence block has eigenvalue 1 with multiplicity
/// `|feasible| - 1` and 0 otherwise, each within `tol`.
pub fn self_influence_spectrum_ok(block: &[Vec<f64>], marginal: &[f64], tol: f64) -> bool {
    let q = block.len();
    let feasible = marginal.iter().filter(|&&p| p > 0.0).count();
    let m = DMatrix::from_fn(q, q, |b, c| block[b][c]);
    let Some(eig) = eigenvalues(&m) else {
        return false;
    };
    let ones = eig.iter().filter(|z| (z.re - 1.0).abs() <= tol && z.im.abs() <= tol).count();
    let zeros = eig.iter().filter(|z| z.re.abs() <= tol && z.im.abs() <= tol).count();
    ones == feasible.saturating_sub(1) && zeros == q - ones
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Identity,
    Log,
    Sqrt,
}

/// Strictly monotone reparametrization of marginals on `[floor, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub floor: f64,
    /// `sup |phi|` on `[floor, 1]`.
    pub l: f64,
    /// `inf |phi'|` on `[floor, 1]`.
    pub l_prime: f64,
}

impl Potential {
    pub fn new(kind: PotentialKind, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::validation("floor", "must lie in (0, 1)"));
        }
        let (l, l_prime) = match kind {
            PotentialKind::Identity => (1.0, 1.0),
            PotentialKind::Log => (-floor.ln(), 1.0),
            PotentialKind::Sqrt => (1.0, 0.5),
        };
        Ok(Potential { kind, floor, l, l_prime })
    }

    pub fn apply(&self, p: f64) -> f64 {
        match self.kind {
            PotentialKind::Identity => p,
            PotentialKind::Log => p.ln(),
            PotentialKind::Sqrt => p.sqrt(),
        }
    }

    pub fn inverse(&self, m: f64) -> f64 {
        match self.kind {
            PotentialKind::Identity => m,
            PotentialKind::Log => m.exp(),
            PotentialKind::Sqrt => m * m,
        }
    }
}

/// `phi(F(⊗ phi^{-1}(m_i)))`; `None` if undefined.
pub fn transformed_bp(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<f64>]) -> Option<Vec<f64>> {
    let sites: Vec<Vec<f64>> = messages
        .iter()
        .map(|m| m.iter().map(|&x| phi.inverse(x)).collect())
        .collect();
    if sites.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
        return None;
    }
    let g = product_message(a, &sites);
    let s: f64 = g.iter().sum();
    if !(s > 0.0) {
        return None;
    }
    // ratio form: bitwise-equal components map to exactly 1/q
    let out: Vec<f64> = g
        .iter()
        .map(|&gc| {
            let f = if gc > 0.0 { 1.0 / g.iter().map(|gb| gb / gc).sum::<f64>() } else { 0.0 };
            phi.apply(f)
        })
        .collect();
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Central-difference Jacobian, `q x dq`.
pub fn fd_jacobian(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<f64>], h: f64) -> Option<DMatrix<f64>> {
    let q = a.q();
    let d = messages.len();
    let mut j = DMatrix::zeros(q, d * q);
    for i in 0..d {
        for b in 0..q {
            let mut up = messages.to_vec();
            up[i][b] += h;
            let mut dn = messages.to_vec();
            dn[i][b] -= h;
            let fu = transformed_bp(a, phi, &up)?;
            let fd = transformed_bp(a, phi, &dn)?;
            for c in 0..q {
                j[(c, i * q + b)] = (fu[c] - fd[c]) / (2.0 * h);
            }
        }
    }
    Some(j)
}

/// `(4 J(h/2) - J(h)) / 3`.
pub fn richardson_jacobian(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<f64>], h: f64) -> Option<DMatrix<f64>> {
    let coarse = fd_jacobian(a, phi, messages, h)?;
    let fine = fd_jacobian(a, phi, messages, h / 2.0)?;
    Some((fine * 4.0 - coarse) / 3.0)
}

const COMPLEX_STEP: f64 = 1e-20;

/// `transformed_bp` on complex messages, for the complex-step derivative.
fn transformed_bp_complex(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<Complex<f64>>]) -> Vec<Complex<f64>> {
    let q = a.q();
    let inverse = |z: Complex<f64>| match phi.kind {
        PotentialKind::Identity => z,
        PotentialKind::Log => z.exp(),
        PotentialKind::Sqrt => z * z,
    };
    let apply = |z: Complex<f64>| match phi.kind {
        PotentialKind::Identity => z,
        PotentialKind::Log => z.ln(),
        PotentialKind::Sqrt => z.sqrt(),
    };
    let sites: Vec<Vec<Complex<f64>>> = messages
        .iter()
        .map(|m| m.iter().map(|&z| inverse(z)).collect())
        .collect();
    let g: Vec<Complex<f64>> = (0..q)
        .map(|c| {
            sites
                .iter()
                .map(|s| (0..q).map(|b| s[b] * a.get(c, b)).sum::<Complex<f64>>())
                .product()
        })
        .collect();
    g.iter()
        .map(|&gc| apply(Complex::new(1.0, 0.0) / g.iter().map(|&gb| gb / gc).sum::<Complex<f64>>()))
        .collect()
}

/// Jacobian by the complex step `Im f(m + i h e_j) / h`. No subtractive
/// cancellation, so it is accurate to rounding; needs every message entry
/// component of the message strictly positive.
pub fn complex_step_jacobian(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let q = a.q();
    let d = messages.len();
    transformed_bp(a, phi, messages)?;
    let base: Vec<Vec<Complex<f64>>> = messages
        .iter()
        .map(|m| m.iter().map(|&x| Complex::new(x, 0.0)).collect())
        .collect();
    let mut j = DMatrix::zeros(q, d * q);
    for i in 0..d {
        for b in 0..q {
            let mut z = base.clone();
            z[i][b].im = COMPLEX_STEP;
            for (c, f) in transformed_bp_complex(a, phi, &z).into_iter().enumerate() {
                j[(c, i * q + b)] = f.im / COMPLEX_STEP;
            }
        }
    }
    j.iter().all(|x| x.is_finite()).then_some(j)
}

/// `max |J_fd - J_cs| / max |J_cs|` against the complex-step Jacobian (0 when
/// both vanish).
pub fn fd_relative_discrepancy(a: &InteractionMatrix, phi: &Potential, messages: &[Vec<f64>]) -> Option<f64> {
    let j = fd_jacobian(a, phi, messages, FD_STEP)?;
    let r = complex_step_jacobian(a, phi, messages)?;
    let diff = (&j - &r).amax();
    let scale = r.amax();
    Some(if scale > 0.0 { diff / scale } else { diff })
}

/// Induced norm `||.||_K -> ||.||_K` of `J` with the hybrid norm on its domain.
pub fn jacobian_norm(j: &DMatrix<f64>, kind: NormKind) -> BlockNorm {
    let q = j.nrows();
    let blocks: Vec<DMatrix<f64>> = (0..j.ncols() / q)
        .map(|i| j.view((0, i * q), (q, q)).into_owned())
        .collect();
    block_row_norm(&blocks, kind)
}

/// Messages `phi(p_i)` with `p_i = floor + (1 - q floor) Dirichlet(1)`.
pub fn sample_messages(rng: &mut crate::rng::StreamRng, q: usize, d: usize, phi: &Potential) -> Vec<Vec<f64>> {
    let spare = 1.0 - q as f64 * phi.floor;
    (0..d)
        .map(|_| {
            dirichlet(rng, q, 1.0)
                .into_iter()
                .map(|x| phi.apply(phi.floor + spare * x))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeEstimate {
    pub d: usize,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub kind: String,
    pub a_digest: String,
    pub delta: usize,
    pub potential: Potential,
    pub norm: NormKind,
    pub samples_per_degree: usize,
    pub seed: u64,
    pub fd_step: f64,
    pub per_degree: Vec<DegreeEstimate>,
    /// Largest sampled induced norm, i.e. the largest observed `1 - delta`.
    pub estimate: f64,
}

/// Sampled maximum of the Jacobian norm over `d = 1, ..., delta - 1`.
pub fn contraction_estimate(
    a: &InteractionMatrix,
    delta: usize,
    phi: Potential,
    norm: NormKind,
    samples: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let q = a.q();
    if delta < 2 {
        return Err(Error::validation("delta", "must be at least 2"));
    }
    if samples == 0 {
        return Err(Error::validation("n", "must be positive"));
    }
    if q as f64 * phi.floor >= 1.0 || phi.floor <= 10.0 * FD_STEP {
        return Err(Error::validation(
            "floor",
            format!("must lie in ({}, 1/q)", 10.0 * FD_STEP),
        ));
    }
    let mut per_degree = Vec::with_capacity(delta - 1);
    for d in 1..delta {
        let norms = par::map_range(samples, |k| -> Result<f64> {
            let mut rng = stream(seed, ((d as u64) << 40) + k as u64);
            for _ in 0..100 {
                let m = sample_messages(&mut rng, q, d, &phi);
                if let Some(j) = fd_jacobian(a, &phi, &m, FD_STEP) {
                    return Ok(jacobian_norm(&j, norm).lower);
                }
            }
            Err(Error::Infeasible("potential undefined at every resampled point".into()))
        });
        let max_norm = norms
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        per_degree.push(DegreeEstimate { d, max_norm });
    }
    let estimate = per_degree.iter().map(|x| x.max_norm).fold(0.0, f64::max);
    Ok(ContractionReport {
        kind: "sampled lower bound on the supremum, not a certificate".into(),
        a_digest: crate::digest_json(a),
        delta,
        potential: phi,
        norm,
        samples_per_degree: samples,
        seed,
        fd_step: FD_STEP,
        per_degree,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_influence_and_row_sums() {
        let a = InteractionMatrix::potts(3, 0.5).unwrap();
        let rep = influence_matrix(&Graph::path(3), &a, &Pinning::empty(), Budget::default()).unwrap();
        assert!(rep.max_row_sum() <= 1e-12);
        for i in 0..3 {
            let blk = rep.block(i, i);
            let p = &rep.marginals[i];
            for b in 0..3 {
                for c in 0..3 {
                    let expected = if b == c { 1.0 } else { 0.0 } - p[c];
                    assert!((blk[b][c] - expected).abs() < 1e-15);
                }
            }
            assert!(self_influence_spectrum_ok(&blk, p, 1e-12));
        }
        assert!(rep.real_spectrum);
        assert!(rep.lambda_max <= rep.norms.linf + 1e-12);
        assert!(rep.lambda_max <= rep.norms.l1 + 1e-12);
        assert!(rep.lambda_max <= rep.norms.l2_upper + 1e-12);
    }

    #[test]
    fn disconnected_vertices_do_not_influence() {
        let a = InteractionMatrix::potts(2, 2.0).unwrap();
        let g = Graph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let blk = influence_submatrix(&g, &a, &Pinning::empty(), 0, 2, Budget::default()).unwrap();
        assert!(blk.iter().flatten().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn edge_influence_matches_conditionals() {
        // K2 with A = [[2,1],[1,2]]: P(s_v = c | s_r = b) = A[b][c]/3
        let a = InteractionMatrix::potts(2, 2.0).unwrap();
        let blk = influence_submatrix(&Graph::complete(2), &a, &Pinning::empty(), 0, 1, Budget::default()).unwrap();
        let expected = [[2.0 / 3.0 - 0.5, 1.0 / 3.0 - 0.5], [1.0 / 3.0 - 0.5, 2.0 / 3.0 - 0.5]];
        for b in 0..2 {
            for c in 0..2 {
                assert!((blk[b][c] - expected[b][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn infeasible_rows_are_zero_and_pins_are_excluded() {
        let a = InteractionMatrix::proper_coloring(3).unwrap();
        let pin = Pinning::new(vec![(0, 0)]).unwrap();
        let rep = influence_matrix(&Graph::path(3), &a, &pin, Budget::default()).unwrap();
        assert_eq!(rep.vertices, vec![1, 2]);
        // vertex 1 cannot take colour 0
        let blk = rep.block(0, 1);
        assert!(blk[0].iter().all(|&x| x == 0.0));
        assert!(self_influence_spectrum_ok(&rep.block(0, 0), &rep.marginals[0], 1e-12));
        assert!(rep.max_row_sum() <= 1e-12);
        let bad = Pinning::new(vec![(0, 0), (1, 0)]).unwrap();
        assert!(matches!(
            influence_matrix(&Graph::path(3), &a, &bad, Budget::default()),
            Err(Error::Infeasible(_))
        ));
        assert!(influence_submatrix(&Graph::path(3), &a, &pin, 0, 1, Budget::default()).is_err());
    }

    #[test]
    fn complete_graph_colourings() {
        let a = InteractionMatrix::proper_coloring(5).unwrap();
        let g = Graph::complete(4);
        let r0 = influence_matrix(&g, &a, &Pinning::empty(), Budget::default()).unwrap();
        let r1 = influence_matrix(&g, &a, &Pinning::new(vec![(3, 4)]).unwrap(), Budget::default()).unwrap();
        assert!(r0.real_spectrum && r1.real_spectrum);
        assert!(r0.lambda_max.is_finite() && r1.lambda_max.is_finite());
    }

    #[test]
    fn block_norms_against_brute_force() {
        let b1 = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.25]);
        let b2 = DMatrix::from_row_slice(2, 2, &[-0.3, 0.1, 0.7, 1.1]);
        let blocks = vec![b1.clone(), b2.clone()];
        // l_inf: row sums
        let linf = block_row_norm(&blocks, NormKind::Linf).lower;
        assert!((linf - (1.0 + 2.0 + 0.3 + 0.1)).abs() < 1e-15);
        // l1 and l2 against dense sampling of the unit balls
        let mut rng = stream(77, 0);
        let mut best1 = 0.0f64;
        let mut best2 = 0.0f64;
        for _ in 0..20000 {
            let mut x = vec![];
            for _ in 0..2 {
                let t = crate::rng::uniform(&mut rng, 0.0, std::f64::consts::TAU);
                let s = crate::rng::uniform(&mut rng, -1.0, 1.0);
                x.push((t, s));
            }
            let y1: Vec<nalgebra::DVector<f64>> = x
                .iter()
                .map(|&(_, s)| nalgebra::DVector::from_vec(vec![s, (1.0 - s.abs()) * if s > 0.0 { 1.0 } else { -1.0 }]))
                .collect();
            let z = &b1 * &y1[0] + &b2 * &y1[1];
            best1 = best1.max(z.iter().map(|v| v.abs()).sum());
            let y2: Vec<nalgebra::DVector<f64>> = x
                .iter()
                .map(|&(t, _)| nalgebra::DVector::from_vec(vec![t.cos(), t.sin()]))
                .collect();
            let z = &b1 * &y2[0] + &b2 * &y2[1];
            best2 = best2.max(z.norm());
        }
        let l1 = block_row_norm(&blocks, NormKind::L1).lower;
        assert!(best1 <= l1 + 1e-12 && l1 - best1 < 0.05, "{best1} {l1}");
        let l2 = block_row_norm(&blocks, NormKind::L2);
        assert!(best2 <= l2.upper + 1e-12 && l2.lower - best2 > -1e-12 || (l2.lower - best2).abs() < 1e-3, "{best2} {l2:?}");
        assert!(l2.lower <= l2.upper + 1e-15);
    }

    #[test]
    fn jacobian_oracles() {
        let a = InteractionMatrix::potts(3, 0.8).unwrap();
        let phi = Potential::new(PotentialKind::Identity, 0.01).unwrap();
        let mut rng = stream(5, 5);
        let m = sample_messages(&mut rng, 3, 2, &phi);
        // analytic Jacobian of F in the identity potential
        let j = fd_jacobian(&a, &phi, &m, FD_STEP).unwrap();
        let cs = complex_step_jacobian(&a, &phi, &m).unwrap();
        let rich = richardson_jacobian(&a, &phi, &m, FD_STEP).unwrap();
        let g = product_message(&a, &m);
        let s: f64 = g.iter().sum();
        for i in 0..2 {
            for b in 0..3 {
                let dg: Vec<f64> = (0..3)
                    .map(|c| {
                        let other: f64 = (0..2)
                            .filter(|&k| k != i)
                            .map(|k| (0..3).map(|x| a.get(c, x) * m[k][x]).sum::<f64>())
                            .product();
                        a.get(c, b) * other
                    })
                    .collect();
                let ds: f64 = dg.iter().sum();
                for c in 0..3 {
                    let exact = dg[c] / s - g[c] * ds / (s * s);
                    assert!((j[(c, i * 3 + b)] - exact).abs() < 1e-8);
                    assert!((cs[(c, i * 3 + b)] - exact).abs() < 1e-14);
                    assert!((rich[(c, i * 3 + b)] - exact).abs() < 1e-8);
                }
            }
        }
        for kind in [PotentialKind::Identity, PotentialKind::Log, PotentialKind::Sqrt] {
            let phi = Potential::new(kind, 0.01).unwrap();
            let m = sample_messages(&mut rng, 3, 3, &phi);
            assert!(fd_relative_discrepancy(&a, &phi, &m).unwrap() < 1e-6);
        }
    }

    #[test]
    fn contraction_examples() {
        let ones = InteractionMatrix::all_ones(3).unwrap();
        let phi = Potential::new(PotentialKind::Identity, DEFAULT_FLOOR).unwrap();
        let r = contraction_estimate(&ones, 4, phi, NormKind::Linf, 50, 1).unwrap();
        assert_eq!(r.estimate, 0.0);
        let ising = InteractionMatrix::potts(2, 1.2).unwrap();
        let r = contraction_estimate(&ising, 3, phi, NormKind::Linf, 500, 2).unwrap();
        assert!(r.estimate < 1.0);
        assert_eq!(r.per_degree.len(), 2);
        let log = Potential::new(PotentialKind::Log, 0.01).unwrap();
        let r = contraction_estimate(&InteractionMatrix::potts(3, 0.8).unwrap(), 4, log, NormKind::L2, 100, 3).unwrap();
        assert!(r.estimate.is_finite() && r.estimate > 0.0);
    }
}
