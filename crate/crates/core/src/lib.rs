//! Quantum-kernel k-means clustering.
//!
//! Classical data is embedded into quantum states through parameterized
//! feature maps, pairwise similarity is the state fidelity `|⟨ψ(x)|ψ(y)⟩|²`
//! (computed exactly or estimated from shot-sampled overlap circuits), and a
//! k-means loop clusters on that similarity. Results are scored against
//! held-out ground truth with majority voting, accuracy, ARI, and AMI.

pub mod clustering;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod feature_maps;
pub mod fingerprint;
pub mod kernel;
pub mod plot;
pub mod statevector;

pub use error::{Error, Result};
