//! Markov-chain views of the actuator.
//!
//! * [`SystemChain`]: the three-state (cache, battery) chain.
//! * [`TruncatedChain`]: the (A, C, B) and (AI, I, B) chains, cut at a level
//!   cap and solved by sparse power iteration.
//! * [`aoa_series`]: the level-by-level recursion of the (A, C, B) chain,
//!   seeded from the closed-form level-one probabilities.

mod series;
mod stationary;
mod system;
mod truncated;

pub use series::{aoa_series, aoa_series_mean, SeriesMean};
pub use stationary::{stationary, MarkovChain, SolveMethod, StationaryDist, DEFAULT_MAX_ITERATIONS, DEFAULT_TOL};
pub use system::{build_system_chain, SystemChain};
pub use truncated::{
    build_aoa_chain, build_aoai_chain, choose_cap, mean_age, mean_information_age, ChainKind, ChainState, MeanAge,
    TruncatedChain, MAX_CAP, MAX_TAIL_MASS,
};
