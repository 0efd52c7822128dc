//! Tree augmentation: given a rooted tree and a set of candidate links
//! (extra edges), pick few links so that every tree edge lies on the tree
//! path of some picked link — equivalently, the tree plus the picks is
//! 2-edge-connected.
//!
//! The crate provides:
//! - a solver with a proven 3/2 size guarantee against the optimum,
//!   instrumented with in-execution structural assertions,
//! - an exact optimum oracle for small instances (edge-mask DP),
//! - a simple 2-approximation baseline,
//! - an LP relaxation exporter and rational feasibility checker,
//! - deterministic random instance generation and a text format.

pub mod anatomy;
pub mod contract;
pub mod credits;
pub mod deficient;
pub mod error;
pub mod greedy;
pub mod instance;
pub mod matching;
pub mod oracle;
pub mod preprocess;
pub mod semiclosed;
pub mod solver;

pub use error::TapError;
pub use instance::{
    expand_to_input, format_instance, format_solution, generate_random, parse_instance,
    parse_solution, shadow_close, validate_feasible, verify_cover, Link, LinkId, LinkOrigin,
    NodeId, RootedTree, TapInstance,
};
