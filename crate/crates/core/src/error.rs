use thiserror::Error;

/// Errors raised by the geometric and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies outside the cone")]
    OutsideCone,
    #[error("point {radius:e} from the vertex is singular for degree {degree}")]
    VertexSingular { radius: f64, degree: f64 },
    #[error("point is {distance:e} rad from the boundary, finite differences need {required:e}")]
    BoundaryTooClose { distance: f64, required: f64 },
    #[error("density has degree zero")]
    DegreeZero,
    #[error("operation requires a radial density")]
    NonRadialDensity,
    #[error("degree k = -(n+1) = {degree} is critical for the oriented volume")]
    CriticalDegree { degree: f64 },
    #[error("degree {degree} outside the admissible range (k < -n or k > 0)")]
    WrongDegreeRange { degree: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("density weight is not finite at sample {sample}")]
    SingularMass { sample: usize },
    #[error("constant vector is null for the mass matrix")]
    ProjectionDegenerate,
    #[error("deformed sample {sample} leaves the cone")]
    StencilExitsCone { sample: usize },
    #[error("no closed-form spectral reference for this region")]
    NoSpectralReference,
    #[error("{dofs} degrees of freedom exceed the dense solver limit {limit}")]
    TooManyDofs { dofs: usize, limit: usize },
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("singular linear system")]
    SingularSystem,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("density is not positive at the point")]
    NonPositiveDensity,
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
