//! Exact computations with compactified moduli spaces of marked vertical
//! lines in the complex plane: stratification posets (stable trees and
//! tree-pairs), toric local models, gluing charts, and virtual Poincaré
//! polynomials.

pub mod charts;
pub mod error;
pub mod exact_poly;
pub mod local_models;
pub mod tree_pairs;
pub mod trees;
pub mod vpp;

pub use error::{Error, Result};
