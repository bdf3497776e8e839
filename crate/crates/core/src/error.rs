use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("path derivative vanishes at parameter {param}")]
    DegeneratePoint { param: f64 },

    #[error("auxiliary state phi = {phi} is outside the open interval (-1, 1)")]
    PhiOutOfRange { phi: f64 },

    #[error("non-finite rate encountered{}", fmt_time(*.t))]
    NonFiniteRate { t: Option<f64> },

    #[error(
        "collocation did not converge: defect max norm {defect_norm:e}, gradient norm {gradient_norm:e}"
    )]
    NotConverged {
        defect_norm: f64,
        gradient_norm: f64,
    },

    #[error("scenarios do not match: {0}")]
    MismatchedScenario(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn fmt_time(t: Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t} s"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
