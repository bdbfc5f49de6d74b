//! Error types for the library.

use thiserror::Error;

/// Errors from the geometry layer (rotations, polytopes, templates).
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    /// Pitch too close to +-pi/2: 1/cos(theta) is not finite.
    #[error("pitch angle {theta} rad is outside the open domain (-pi/2, pi/2)")]
    PitchSingularity { theta: f64 },

    /// Half-space system has no feasible point.
    #[error("polytope is empty (infeasible half-space system)")]
    EmptyPolytope,

    /// Half-space system does not bound a finite body.
    #[error("polytope is unbounded in direction index {direction}")]
    Unbounded { direction: usize },

    /// Interior ball radius below tolerance; violates the nonempty-interior requirement.
    #[error("polytope interior is degenerate (chebyshev radius {radius})")]
    DegenerateInterior { radius: f64 },

    /// A vertex has more active hyperplanes than the ambient dimension allows,
    /// so the active normals cannot be linearly independent.
    #[error("vertex {index} has {active} active hyperplanes; active sets must be linearly independent")]
    DegenerateVertex { index: usize, active: usize },

    #[error("matrix dimensions inconsistent: {0}")]
    Dimension(String),
}

/// Errors from the embedded QP/LP solver.
#[derive(Debug, Clone, Error)]
pub enum QpError {
    #[error("problem is primal infeasible")]
    Infeasible,

    #[error("problem is unbounded below")]
    Unbounded,

    #[error("solver failed with status {status}")]
    Numerical { status: String },

    #[error("bad problem data: {0}")]
    BadProblem(String),
}

/// Errors from the polytope distance machinery.
#[derive(Debug, Clone, Error)]
pub enum DistanceError {
    #[error("distance solve failed: {source}")]
    Solve {
        #[from]
        source: QpError,
    },

    #[error("geometry error in distance setup: {source}")]
    Geometry {
        #[from]
        source: GeometryError,
    },
}

/// Errors from constraint encoders.
#[derive(Debug, Clone, Error)]
pub enum ConstraintError {
    /// Two agents coincide; relative-pose encoders have no defined value.
    #[error("agent separation {separation} below 1e-9; relative pose is degenerate")]
    DegenerateSeparation { separation: f64 },

    /// Horizontal separation vanished; the sight-corridor frame is undefined.
    #[error("horizontal separation squared {rho_sq} too small; corridor frame undefined")]
    Regularity { rho_sq: f64 },

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Errors during barrier-tree construction or evaluation.
#[derive(Debug, Clone, Error)]
pub enum CompositionError {
    #[error("barrier tree is empty")]
    EmptyTree,

    #[error("leaf id {0} is not registered")]
    UnknownLeaf(usize),

    /// Distance-backed leaves may not appear under an odd number of negations:
    /// maximizing a distance decrease has no well-posed filter constraint.
    #[error("distance leaf {0} appears under negation")]
    NegatedDistanceLeaf(usize),
}

/// Errors from the safety-filter QP.
#[derive(Debug, Clone, Error)]
pub enum FilterError {
    /// Distance results handed to the assembler were produced for a different step.
    #[error("stale distance cache: cache step {cache_step}, current step {current_step}")]
    StaleCache { cache_step: u64, current_step: u64 },

    /// The filter QP was infeasible; carries the step at which it happened.
    /// Possible only off the safe set or from numerical failure.
    #[error("safety fault at t={time}: filter QP infeasible")]
    SafetyFault { time: f64 },

    #[error("filter QP solver failure: {source}")]
    Solver {
        #[from]
        source: QpError,
    },

    #[error("weight matrix is not positive definite")]
    IndefiniteWeight,

    #[error(transparent)]
    Composition(#[from] CompositionError),
}

/// Errors from the dynamics layer.
#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors from scenario loading, validation, and execution.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),

    /// The initial state violates h_g >= 0; lists the offending leaves.
    #[error("initial state unsafe: h_g(0) = {h_g}; negative leaves: {leaves:?}")]
    InitialStateUnsafe { h_g: f64, leaves: Vec<String> },

    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Constraint(#[from] ConstraintError),

    #[error(transparent)]
    Composition(#[from] CompositionError),

    #[error(transparent)]
    Filter(#[from] FilterError),

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
