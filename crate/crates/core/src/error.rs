use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("window does not cover the required range: {0}")]
    Window(String),

    #[error("fourth cosh-moment of {0} is infinite")]
    InfiniteMoment(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
