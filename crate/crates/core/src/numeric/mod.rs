//! Self-contained numeric kernel: dense simplex LP, derivative-free pattern
//! search, and splittable deterministic PRNG streams.

mod lp;
mod optimize;
mod rng;

pub use lp::{solve_lp, LinearProgram, LpOutcome, Sense};
pub use optimize::minimize_free;
pub use rng::RngStream;
