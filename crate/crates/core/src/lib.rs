//! Belief propagation for q-spin systems and structural checks on its image.
//!
//! The crate is organised bottom-up: [`model`] holds the shared types,
//! [`bp`] the functional itself and exact Gibbs enumeration, and the remaining
//! modules build checks and constructions on top of those two.

pub mod antiferro;
pub mod bp;
pub mod counterexample;
pub mod error;
pub mod graphs;
pub mod image;
pub mod influence;
pub mod model;
pub mod numeric;
pub mod par;
pub mod rng;
pub mod signature;
pub mod weitz;

pub use bp::{Budget, Gibbs};
pub use error::{Error, Result};
pub use model::{
    ExternalField, Graph, InteractionMatrix, JointDistribution, Pinning, ProductMeasure,
};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 of the compact JSON serialization, hex encoded.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(&bytes))
}
