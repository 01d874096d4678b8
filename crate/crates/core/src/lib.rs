//! Interacting urn models with strong reinforcement.
//!
//! Discrete-time simulators, a continuous-time embedding with delayed rate
//! refreshes, the mean-field gradient system and seeded Monte Carlo ensembles.

pub mod ctime;
pub mod error;
pub mod io;
pub mod mc;
pub mod meanfield;
pub mod reinforcement;
pub mod rng;
pub mod stats;
pub mod urn_sim;

pub use error::{Result, UrnError};
pub use reinforcement::ReinforcementSeq;
