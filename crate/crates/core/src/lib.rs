//! Portfolio choice under mutually exciting jump contagion.
//!
//! Asset prices follow jump-diffusions whose jump intensities form a
//! multivariate exponential Hawkes system. The crate simulates these markets,
//! solves the log-utility investor's problem in closed form or numerically,
//! evaluates value functions by Feynman-Kac Monte Carlo, computes the affine
//! characteristic function of the intensity system, and filters intensities
//! from return data.

pub mod charfn;
pub mod error;
pub mod filter;
pub mod hawkes;
pub mod market;
pub mod policy;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod utility;
pub mod value;

pub use error::{Error, Result};
pub use hawkes::{HawkesParams, IntensityState, StationarityReport};
pub use market::MarketParams;
pub use policy::PolicyResult;
pub use simulate::{JumpLaw, SimPath};
pub use utility::UtilitySpec;
