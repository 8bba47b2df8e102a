use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A run configuration or system parameter set failed validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical parameter is outside the domain of a formula.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The integrated state became non-finite.
    #[error("integration blew up after t = {last_valid_time}")]
    Blowup { last_valid_time: f64 },

    /// Singular values too close to define foliation directions.
    #[error("degenerate foliation at ({x}, {y})")]
    DegenerateFoliation { x: f64, y: f64 },

    /// A finite-difference stencil touched a degenerate point.
    #[error("splitting partials unavailable at ({x}, {y})")]
    PartialsUnavailable { x: f64, y: f64 },

    /// Seed refinement did not reach the requested tolerance.
    #[error("seed refinement failed: {0}")]
    Refinement(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("arc lengths differ by more than 1% ({0} vs {1})")]
    LengthMismatch(f64, f64),

    #[error("rasterized set is empty")]
    EmptySet,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file format error: {0}")]
    Format(String),
}

impl Error {
    /// Whether the error stems from user input rather than from the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parameter(_) | Error::Format(_) | Error::Json(_) | Error::Csv(_))
    }
}
