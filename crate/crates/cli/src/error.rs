use thiserror::Error;

/// Exit codes: 2 validation, 3 numeric failure, 4 non-convergence, 5 i/o.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("run did not converge within {0} iterations (trace written)")]
    NonConvergence(usize),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(e: impl std::fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<axcal_core::datagen::DatagenError> for CliError {
    fn from(e: axcal_core::datagen::DatagenError) -> Self {
        use axcal_core::datagen::DatagenError as D;
        match &e {
            D::InvalidDimensions(_) => CliError::Validation(e.to_string()),
            D::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(format!("bad problem file: {e}")),
        }
    }
}

impl From<axcal_core::stefcal::StefcalError> for CliError {
    fn from(e: axcal_core::stefcal::StefcalError) -> Self {
        use axcal_core::stefcal::StefcalError as S;
        match &e {
            S::Io(_) => CliError::Io(e.to_string()),
            S::SingularDenominator { .. } | S::NumericFailure { .. } => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<axcal_core::accel::AccelError> for CliError {
    fn from(e: axcal_core::accel::AccelError) -> Self {
        use axcal_core::accel::AccelError as A;
        match &e {
            A::Stefcal(inner) => CliError::from_stefcal_ref(inner, e.to_string()),
            A::FixedPoint(_) => CliError::Validation(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl CliError {
    fn from_stefcal_ref(e: &axcal_core::stefcal::StefcalError, text: String) -> Self {
        use axcal_core::stefcal::StefcalError as S;
        match e {
            S::Io(_) => CliError::Io(text),
            S::SingularDenominator { .. } | S::NumericFailure { .. } => CliError::Numeric(text),
            _ => CliError::Validation(text),
        }
    }
}

impl From<axcal_core::errormodel::ErrorModelError> for CliError {
    fn from(e: axcal_core::errormodel::ErrorModelError) -> Self {
        use axcal_core::errormodel::ErrorModelError as E;
        match &e {
            E::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<axcal_core::resilience::SweepError> for CliError {
    fn from(e: axcal_core::resilience::SweepError) -> Self {
        use axcal_core::resilience::SweepError as W;
        match &e {
            W::Io(_) => CliError::Io(e.to_string()),
            W::ReferenceDidNotConverge(n) => CliError::NonConvergence(*n),
            W::Reference(inner) => CliError::from_stefcal_ref(inner, e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
