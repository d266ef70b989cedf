//! Event-driven simulation of the intensity system and of the market it drives.

mod ergodic;
mod law;
mod market_path;
mod thinning;

pub use ergodic::{ergodic_average, ErgodicReport};
pub use law::JumpLaw;
pub use market_path::{
    fmt, simulate_market, simulate_market_ensemble, ConstantPolicy, Decision, MarketSimSpec, Policy, Scheme, SimPath,
};
pub use thinning::{
    relax, relaxation_integral, simulate_hawkes, simulate_hawkes_ensemble, simulate_hawkes_path, Event, HawkesPath,
    Thinning,
};
