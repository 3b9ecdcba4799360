//! Small numeric helpers shared across modules.

use nalgebra::{Complex, DMatrix, Schur};
use rand_distr::{Distribution, StandardNormal};

use crate::rng::stream;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<NeumaierSum>().value()
}

/// Max-norm distance between two equally long vectors.
pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Divides by the sum. Returns `None` when the sum is not strictly positive.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let s = compensated_sum(v);
    if s > 0.0 && s.is_finite() {
        Some(v.iter().map(|x| x / s).collect())
    } else {
        None
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    // exact renormalization; the threshold step is only accurate to rounding
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|x| *x /= s);
    }
    out
}

/// Eigenvalues of a real square matrix through a bounded Schur iteration.
///
/// The unbounded iteration can cycle forever on some highly structured
/// inputs, so a failed attempt is retried on `Q^T M Q` for a few fixed random
/// orthogonal `Q`. `None` if every attempt fails.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = m.nrows();
    let max_iter = 1000 * n.max(1);
    if let Some(s) = Schur::try_new(m.clone(), f64::EPSILON, max_iter) {
        return Some(s.complex_eigenvalues().iter().copied().collect());
    }
    for k in 0..8 {
        let mut rng = stream(0x5c4u64, k);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        let rotated = q.transpose() * m * &q;
        if let Some(s) = Schur::try_new(rotated, f64::EPSILON, max_iter) {
            return Some(s.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(&xs) - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn projection_fixes_simplex_points() {
        let p = [0.2, 0.3, 0.5];
        let proj = project_to_simplex(&p);
        assert!(linf_distance(&p, &proj) < 1e-15);
    }

    #[test]
    fn projection_clips_to_vertex() {
        let proj = project_to_simplex(&[5.0, -1.0, 0.0]);
        assert_eq!(proj, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn eigenvalues_of_rotation_and_triangular() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut ev = eigenvalues(&r).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0].im + 1.0).abs() < 1e-12 && (ev[1].im - 1.0).abs() < 1e-12);
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 1.0]);
        let mut re: Vec<f64> = eigenvalues(&t).unwrap().iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!(linf_distance(&re, &[0.0, 1.0, 1.0]) < 1e-12);
    }

    #[test]
    fn projection_of_uniform_shift() {
        let proj = project_to_simplex(&[1.0, 1.0, 1.0, 1.0]);
        for x in proj {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }
}
