//! Charged-particle pattern recognition as a QUBO over hit triplets.
//!
//! Hits are paired into doublets, doublets chained into triplets, and each
//! triplet becomes a binary variable. Compatible triplets attract, conflicting
//! ones repel, and the minimum-energy assignment selects the track segments.

pub mod error;
pub mod events;
pub mod pipeline;
pub mod postmetrics;
pub mod qubo;
pub mod seeding;
pub mod solver;
pub mod triplets;

pub use error::{Error, Result};
