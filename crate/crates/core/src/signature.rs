//! Interaction matrices whose extended matrix has a prescribed number of
//! positive eigenvalues, and eigenvalue sign counting.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::counterexample::{build_b, column_power_sums};
use crate::error::{Error, Result};
use crate::model::InteractionMatrix;
use crate::par;

pub const DEFAULT_GAMMA: f64 = 0.999;
pub const DEFAULT_EIGEN_TOL: f64 = 1e-9;
pub const MAX_GAMMA_PUSHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSignature {
    pub n_pos: usize,
    pub n_zero: usize,
    pub n_neg: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub tol: f64,
    /// `tol` times the spectral radius.
    pub threshold: f64,
}

impl EigenSignature {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_pos, self.n_zero, self.n_neg)
    }
}

pub fn eigen_signature(m: &DMatrix<f64>, tol: f64) -> Result<EigenSignature> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::validation(
                    format!("entries[{i}][{j}]"),
                    "matrix is not symmetric",
                ));
            }
        }
    }
    let mut eigenvalues: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let radius = eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let threshold = tol * radius;
    let n_pos = eigenvalues.iter().filter(|&&x| x > threshold).count();
    let n_neg = eigenvalues.iter().filter(|&&x| x < -threshold).count();
    Ok(EigenSignature {
        n_pos,
        n_zero: n - n_pos - n_neg,
        n_neg,
        eigenvalues,
        tol,
        threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureInstance {
    pub q: usize,
    pub d: usize,
    pub beta: f64,
    pub k: usize,
    pub gamma_requested: f64,
    pub gamma: f64,
    pub gamma_pushes: usize,
    pub t: f64,
    pub a: InteractionMatrix,
}

/// `(q-k)(k+1)(beta-1) - t(beta-1)(beta+k)(q-k-1+gamma)`.
pub fn constant_term(q: usize, k: usize, beta: f64, t: f64, gamma: f64) -> f64 {
    let (q, k) = (q as f64, k as f64);
    (q - k) * (k + 1.0) * (beta - 1.0) - t * (beta - 1.0) * (beta + k) * (q - k - 1.0 + gamma)
}

fn t_for(q: usize, d: usize, beta: f64, k: usize, gamma: f64) -> f64 {
    let rest = (q - k - 1) as f64;
    ((beta.powi(d as i32) + rest) / (gamma.powi(d as i32) + rest)).powf(1.0 / d as f64)
}

/// Block matrix with a `k x k` block `11^T + (beta-1)I`, an all-ones
/// off-diagonal part and a `(q-k) x (q-k)` block `t(11^T + (gamma-1)I)`,
/// where `t` equalizes all column power sums.
///
/// If `t gamma <= 1` (or the cubic's constant term is not negative), `gamma`
/// is moved halfway to 1, at most 20 times.
pub fn construct_signature_instance(
    q: usize,
    d: usize,
    beta: f64,
    k: usize,
    gamma: f64,
) -> Result<SignatureInstance> {
    if q < 2 || d < 2 {
        return Err(Error::validation("q, d", "both must be at least 2"));
    }
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::validation("beta", "must exceed 1"));
    }
    if k >= q {
        return Err(Error::validation("k", format!("must be below q = {q}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation("gamma", "must lie in (0, 1)"));
    }
    let mut g = gamma;
    let mut pushes = 0;
    let mut t = t_for(q, d, beta, k, g);
    while t * g <= 1.0 || constant_term(q, k, beta, t, g) >= 0.0 {
        if pushes == MAX_GAMMA_PUSHES {
            return Err(Error::Precondition(
                "γ too small for this (β, d); increase γ toward 1".into(),
            ));
        }
        g = (1.0 + g) / 2.0;
        pushes += 1;
        t = t_for(q, d, beta, k, g);
    }
    let a = InteractionMatrix::from_fn(q, |x, y| match (x < k, y < k) {
        (true, true) => {
            if x == y {
                beta
            } else {
                1.0
            }
        }
        (false, false) => {
            if x == y {
                t * g
            } else {
                t
            }
        }
        _ => 1.0,
    })?;
    Ok(SignatureInstance {
        q,
        d,
        beta,
        k,
        gamma_requested: gamma,
        gamma: g,
        gamma_pushes: pushes,
        t,
        a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPositiveReport {
    pub n_pos: usize,
    /// Gram matrix of `B` on the special spin and the indicator of the rest.
    pub gram: [[f64; 2]; 2],
    pub gram_positive_definite: bool,
    pub pass: bool,
}

/// At least two positive eigenvalues of `B(beta, A)`, with the explicit
/// two-dimensional subspace on which `B` is positive definite.
pub fn check_two_positive(beta: f64, a: &InteractionMatrix, tol: f64) -> Result<TwoPositiveReport> {
    let q = a.q();
    let dominates = (0..q).all(|x| (0..q).all(|y| a.get(x, y) >= 1.0));
    if beta < 1.0 || !dominates || a.is_all_ones() {
        return Err(Error::Precondition(
            "requires beta >= 1 and A >= 11^T with A != 11^T".into(),
        ));
    }
    let b = build_b(beta, a)?;
    let sig = eigen_signature(&b.to_dmatrix(), tol)?;
    let total: f64 = (0..q).flat_map(|x| (0..q).map(move |y| (x, y))).map(|(x, y)| a.get(x, y)).sum();
    let gram = [[beta, q as f64], [q as f64, total]];
    let gram_positive_definite = gram[0][0] > 0.0 && gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0] > 0.0;
    Ok(TwoPositiveReport {
        n_pos: sig.n_pos,
        gram,
        gram_positive_definite,
        pass: sig.n_pos >= 2 && gram_positive_definite,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    pub instance: SignatureInstance,
    pub signature: EigenSignature,
    pub expected: (usize, usize, usize),
    pub constant_term: f64,
    /// `max - min` of the column power sums, relative to the max.
    pub column_sum_spread: f64,
    pub two_positive: TwoPositiveReport,
    pub pass: bool,
    pub failures: Vec<String>,
}

pub fn verify_prop_signature(
    q: usize,
    d: usize,
    beta: f64,
    k: usize,
    gamma: f64,
    tol: f64,
) -> Result<SignatureReport> {
    let instance = construct_signature_instance(q, d, beta, k, gamma)?;
    let b = build_b(beta, &instance.a)?;
    let signature = eigen_signature(&b.to_dmatrix(), tol)?;
    let expected = (k + 2, 0, q - k - 1);
    let ct = constant_term(q, k, beta, instance.t, instance.gamma);
    let sums = column_power_sums(&instance.a, d);
    let max = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let column_sum_spread = (max - min) / max;
    let two_positive = check_two_positive(beta, &instance.a, tol)?;
    let mut failures = Vec::new();
    if signature.counts() != expected {
        failures.push(format!(
            "signature {:?} differs from expected {expected:?}",
            signature.counts()
        ));
    }
    if !(ct < 0.0) {
        failures.push(format!("constant term {ct} is not negative"));
    }
    if column_sum_spread > crate::counterexample::MAXIMIZER_TOL {
        failures.push(format!("column power sums spread {column_sum_spread}"));
    }
    if !two_positive.pass {
        failures.push("two-positive check failed".into());
    }
    Ok(SignatureReport {
        instance,
        signature,
        expected,
        constant_term: ct,
        column_sum_spread,
        two_positive,
        pass: failures.is_empty(),
        failures,
    })
}

/// All `k` in `0..q`.
pub fn scan(q: usize, d: usize, beta: f64, gamma: f64, tol: f64) -> Result<Vec<SignatureReport>> {
    par::map_range(q, |k| verify_prop_signature(q, d, beta, k, gamma, tol))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_signature_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(eigen_signature(&id, DEFAULT_EIGEN_TOL).unwrap().counts(), (3, 0, 0));
        let ones = DMatrix::from_element(3, 3, 1.0);
        assert_eq!(eigen_signature(&ones, DEFAULT_EIGEN_TOL).unwrap().counts(), (1, 2, 0));
        let b = build_b(2.0, &InteractionMatrix::potts(3, 2.0).unwrap()).unwrap();
        assert!(eigen_signature(&b.to_dmatrix(), DEFAULT_EIGEN_TOL).unwrap().n_pos >= 2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(eigen_signature(&asym, DEFAULT_EIGEN_TOL).is_err());
    }

    #[test]
    fn instance_examples() {
        let inst = construct_signature_instance(3, 2, 2.0, 1, 0.99).unwrap();
        let t = ((4.0 + 1.0) / (0.9801 + 1.0f64)).sqrt();
        assert!((inst.t - t).abs() < 1e-15);
        assert_eq!(inst.a.get(0, 0), 2.0);
        assert_eq!(inst.a.get(0, 1), 1.0);
        assert_eq!(inst.a.get(1, 2), inst.t);
        assert!((inst.a.get(1, 1) - inst.t * 0.99).abs() < 1e-15);

        let inst = construct_signature_instance(4, 3, 2.0, 3, 0.999).unwrap();
        assert!((inst.t - 2.0 / 0.999).abs() < 1e-12);

        for k in 0..4 {
            let inst = construct_signature_instance(4, 3, 1.5, k, 0.999).unwrap();
            let sums = column_power_sums(&inst.a, 3);
            for s in &sums {
                assert!((s - sums[0]).abs() < 1e-12 * sums[0]);
            }
            assert_eq!(
                crate::counterexample::maximizer_set(&inst.a, 3, 1e-10),
                vec![0, 1, 2, 3]
            );
        }
    }

    #[test]
    fn gamma_is_pushed_when_too_small() {
        // t is barely above 1 at beta close to 1, so gamma = 0.5 fails
        let inst = construct_signature_instance(3, 2, 1.01, 0, 0.5).unwrap();
        assert!(inst.gamma_pushes > 0);
        assert!(inst.t * inst.gamma > 1.0);
    }

    #[test]
    fn prop_signatures() {
        for (q, d, beta, k, expected) in [
            (3, 2, 2.0, 1, (3, 0, 1)),
            (3, 2, 2.0, 2, (4, 0, 0)),
            (4, 3, 1.5, 0, (2, 0, 3)),
        ] {
            let r = verify_prop_signature(q, d, beta, k, DEFAULT_GAMMA, DEFAULT_EIGEN_TOL).unwrap();
            assert_eq!(r.signature.counts(), expected);
            assert!(r.pass, "{:?}", r.failures);
        }
    }

    #[test]
    fn two_positive_precondition() {
        let ones = InteractionMatrix::all_ones(3).unwrap();
        assert!(matches!(
            check_two_positive(1.0, &ones, DEFAULT_EIGEN_TOL),
            Err(Error::Precondition(_))
        ));
        let r = check_two_positive(2.0, &InteractionMatrix::potts(3, 2.0).unwrap(), DEFAULT_EIGEN_TOL).unwrap();
        assert!(r.pass);
    }
}
