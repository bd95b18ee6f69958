//! Diffusion adaptive filtering over agent networks.
//!
//! Agents sit on an undirected connected graph, each receiving its own
//! stream of (input, desired response) pairs. Every time slot each agent
//! takes a local stochastic-gradient step on its filter and exchanges
//! parameters with its one-hop neighbors according to a cooperation
//! protocol:
//!
//! * non-cooperative — no exchange, a baseline of independent filters;
//! * ATC (adapt-then-combine) — local step, then convex combination of
//!   neighbor estimates through a left-stochastic mixing matrix;
//! * CTA for spline filters — combination first, restricted to the four
//!   active spline control points;
//! * multitask — no combination step, the local update carries a pairwise
//!   penalty pulling each agent toward its neighbors' estimates.
//!
//! Filters: LMS, regularized logistic regression, kernel LMS over a shared
//! dictionary, and Catmull-Rom spline adaptive filters. Explicit random
//! feature maps (RVFL sigmoids, random Fourier features) are provided for
//! running linear filters in a randomized feature space.
//!
//! The [`diffusion`] module hosts the slot-synchronous engine and Monte
//! Carlo driver; [`config`] holds the experiment presets used by the CLI.

pub mod config;
pub mod datagen;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod filters;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod topology;

pub use error::DiffnetError;
