//! Safety filtering for multi-agent kinematic systems under relative-pose
//! constraints.
//!
//! The library encodes field-of-view, range, collision-avoidance, and
//! line-of-sight requirements as scalar barrier functions, composes them
//! through Boolean min/max/negation trees, and enforces the composite
//! barrier with a quadratic program that minimally modifies a nominal
//! controller. Distance-based constraints get their derivative information
//! from the dual multipliers of polytope minimum-distance programs.

pub mod composition;
pub mod constraints;
pub mod distance;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod qp;
pub mod scenario;
