use thiserror::Error;

/// Errors raised by the geometry, guidance, tuning and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("altitude {h} outside the profile band [{lo}, {hi}]")]
    BandViolation { h: f64, lo: f64, hi: f64 },

    /// The robot is on the surface or on the wrong side of it.
    #[error("point is not on the scan side of the surface (signed offset {offset})")]
    SideViolation { offset: f64 },

    #[error("nearest boundary point is not unique (axis distance {axis_distance})")]
    NonuniqueProjection { axis_distance: f64 },

    #[error("surface normal is vertical at altitude {h} (sin theta = {sin_theta})")]
    VerticalNormal { h: f64, sin_theta: f64 },

    #[error("vector is not tangent to the surface (normal component {residual})")]
    NotTangent { residual: f64 },

    #[error("heading is vertical at t = {t} (sin alpha = {sin_alpha})")]
    VerticalHeading { t: f64, sin_alpha: f64 },

    #[error("necessary condition violated: worst point h = {h}, d = {d}, margin {margin}")]
    Infeasible { h: f64, d: f64, margin: f64 },

    #[error("tuning failed: no feasible point for {constraint}")]
    TuningFailure { constraint: String },

    #[error("precondition '{name}' violated: {lhs} must exceed {rhs}")]
    Precondition { name: String, lhs: f64, rhs: f64 },

    #[error("initial disks leave the operational zone (worst violation {violation})")]
    InitialDisks { violation: f64 },

    #[error("run contains {legs} scan legs, at least 2 are required")]
    InsufficientRun { legs: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
