//! Universal external fields for two-spin systems.
//!
//! For `q = 2` the functional on an arbitrary neighbourhood law factors
//! through a product measure whose `i`-th marginal is the `i`-th marginal of
//! `mu` tilted by a field that depends only on `A`: sites before `i` are
//! weighted by row 0 of `A`, sites after `i` by row 1.

use serde::Serialize;

use crate::bp::{bp, bp_product};
use crate::error::{Error, Result};
use crate::model::{ExternalField, InteractionMatrix, JointDistribution, ProductMeasure};
use crate::numeric::linf_distance;

pub const DEFAULT_TOL: f64 = 1e-10;

fn require_two_spins(a: &InteractionMatrix) -> Result<()> {
    if a.q() != 2 {
        return Err(Error::Precondition(format!(
            "Weitz construction requires two spins (got q = {})",
            a.q()
        )));
    }
    Ok(())
}

/// The `d` fields `lambda^(0), ..., lambda^(d-1)`.
pub fn weitz_fields(a: &InteractionMatrix, d: usize) -> Result<Vec<ExternalField>> {
    require_two_spins(a)?;
    if d == 0 {
        return Err(Error::validation("d", "must be at least 1"));
    }
    (0..d)
        .map(|i| {
            let rows = (0..d)
                .map(|j| match j.cmp(&i) {
                    std::cmp::Ordering::Less => a.row(0).to_vec(),
                    std::cmp::Ordering::Equal => vec![1.0, 1.0],
                    std::cmp::Ordering::Greater => a.row(1).to_vec(),
                })
                .collect();
            ExternalField::new(rows)
        })
        .collect()
}

/// Tilted site marginals `((lambda^(i) * mu)_i)_i`.
pub fn tilted_marginals(a: &InteractionMatrix, mu: &JointDistribution) -> Result<ProductMeasure> {
    require_two_spins(a)?;
    if mu.q() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "distribution has q = {}, expected 2",
            mu.q()
        )));
    }
    let d = mu.d();
    let fields = weitz_fields(a, d)?;
    let mut marginals = Vec::with_capacity(d);
    for (i, field) in fields.iter().enumerate() {
        let mut m = [0.0f64; 2];
        for (tau, w) in mu.support() {
            let t: f64 = tau
                .iter()
                .enumerate()
                .map(|(j, &c)| field.row(j)[c])
                .product();
            m[tau[i]] += w * t;
        }
        let total = m[0] + m[1];
        if !(total > 0.0) {
            return Err(Error::Degenerate(format!(
                "tilted mass vanishes at prefix index {i}"
            )));
        }
        marginals.push(vec![m[0] / total, m[1] / total]);
    }
    ProductMeasure::new(marginals)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeitzReport {
    pub direct: Vec<f64>,
    pub via_product: Vec<f64>,
    pub product: ProductMeasure,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares `F(mu)` against `F` of the tilted product measure.
pub fn weitz_check(a: &InteractionMatrix, mu: &JointDistribution, tol: f64) -> Result<WeitzReport> {
    let product = tilted_marginals(a, mu)?;
    let direct = bp(a, mu)?;
    let via_product = bp_product(a, &product)?;
    let residual = linf_distance(&direct, &via_product);
    Ok(WeitzReport {
        direct,
        via_product,
        product,
        residual,
        tol,
        pass: residual <= tol,
    })
}
