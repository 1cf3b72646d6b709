//! Walrasian equilibrium for markets of indivisible goods.
//!
//! Two families of solvers live here: cutting-plane minimization of the market
//! potential followed by exact rounding, and an incremental shortest-path
//! algorithm for gross-substitutes buyers. Every result can be re-checked by the
//! brute-force oracles in [`verify`].

pub mod combinatorial;
pub mod cutting_plane;
pub mod error;
pub mod fixtures;
pub mod market;
pub mod potential;
pub mod robust;
pub mod scalar;
pub mod valuation;
pub mod verify;

pub use error::{Error, Result};
pub use market::{Allocation, Bundle, Certificate, MarketInstance, PriceVector, Rational, Validity, Witness};
pub use valuation::{Matroid, OracleCounter, ValuationSpec};
