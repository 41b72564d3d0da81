use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported Lebedev rule size {requested} (nearest supported sizes: {})", format_neighbours(*.below, *.above))]
    UnsupportedRuleSize { requested: usize, below: Option<usize>, above: Option<usize> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature of degree {available} cannot resolve l_max = {l_max} (degree {required} required)")]
    InsufficientQuadrature { l_max: usize, available: usize, required: usize },

    #[error("Riccati-Bessel recurrence lost all significance at degree l = {l}")]
    MieOverflow { l: usize },

    #[error("zero contrast: relative permittivity 1 produces no scatterer")]
    ZeroContrast,

    #[error("degenerate extent {0:?}: the lattice holds no dipoles")]
    DegenerateExtent([usize; 3]),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("impedance matrix is singular: {0}")]
    SingularImpedance(String),

    #[error("modal significance {significance:e} is below the floor {floor:e}")]
    BelowSignificanceThreshold { significance: f64, floor: f64 },

    #[error("scattering matrix is already weighted")]
    AlreadyWeighted,

    #[error("scattering matrix must be weighted before decomposition")]
    NotWeighted,

    #[error("rule is not closed under inversion: no antipode for point {point}")]
    RuleNotInversionSymmetric { point: usize },

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("mode set at step {step} uses a different quadrature rule")]
    RuleMismatch { step: usize },

    #[error("backend failed on excitation {excitation}: {source}")]
    Backend {
        excitation: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("wavenumber {k} outside the backend's supported range")]
    UnsupportedWavenumber { k: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },

    #[error("rule points match no embedded Lebedev table and weights sum to {weight_sum} instead of 4π")]
    UnknownRule { weight_sum: f64 },

    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_neighbours(below: Option<usize>, above: Option<usize>) -> String {
    match (below, above) {
        (Some(b), Some(a)) => format!("{b} and {a}"),
        (Some(b), None) => b.to_string(),
        (None, Some(a)) => a.to_string(),
        (None, None) => "none".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
