use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mark measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite state at t = {time}{}", path.map(|p| format!(" on path {p}")).unwrap_or_default())]
    NonFinite { path: Option<usize>, time: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("CFL violation: dt = {dt} but stability requires dt <= {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("test function support {support:?} is closer than {margin} to the domain boundary {domain:?}")]
    SupportMargin {
        support: (f64, f64),
        domain: (f64, f64),
        margin: f64,
    },

    #[error("density has leaked mass {leaked}, above the allowed {limit}")]
    ExcessLeak { leaked: f64, limit: f64 },

    #[error("mollified diffusion is negative ({value}) at x = {x:?}")]
    NegativeDiffusion { value: f64, x: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
