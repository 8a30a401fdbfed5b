use glvortex_core::applied::DriveError;
use glvortex_core::elliptic::EllipticError;
use glvortex_core::reduced::ReducedError;
use glvortex_core::tdgl::TdglError;

use crate::config::{ConfigError, Issue};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::VerifyFailed(_) => 4,
            HarnessError::Io(_) => 1,
        }
    }

    fn config(key: &str, msg: String) -> Self {
        HarnessError::Config(ConfigError {
            issues: vec![Issue {
                keys: vec![key.to_string()],
                message: msg,
            }],
        })
    }
}

impl From<TdglError> for HarnessError {
    fn from(e: TdglError) -> Self {
        let msg = e.to_string();
        match e {
            TdglError::Cfl { .. } | TdglError::BadDtFactor(_) => Self::config("time.dt_factor", msg),
            TdglError::BadEpsilon(_) => Self::config("gl.epsilon", msg),
            TdglError::CoreResolution { .. } => HarnessError::Config(ConfigError {
                issues: vec![Issue {
                    keys: vec!["gl.epsilon".into(), "grid.nx".into()],
                    message: msg,
                }],
            }),
            TdglError::NearBoundary { .. } | TdglError::TooClose { .. } | TdglError::BadDegree { .. } => Self::config("init.vortices", msg),
            TdglError::NonFinite { .. } | TdglError::ImplicitSolve { .. } | TdglError::Elliptic(_) => HarnessError::Numerical(msg),
        }
    }
}

impl From<DriveError> for HarnessError {
    fn from(e: DriveError) -> Self {
        match e {
            DriveError::Elliptic(_) => HarnessError::Numerical(e.to_string()),
            DriveError::BadEpsilon(_) => Self::config("gl.epsilon", e.to_string()),
            DriveError::BadRegime(_) => Self::config("drive.regime_override", e.to_string()),
            _ => Self::config("drive", e.to_string()),
        }
    }
}

impl From<EllipticError> for HarnessError {
    fn from(e: EllipticError) -> Self {
        HarnessError::Numerical(e.to_string())
    }
}

impl From<ReducedError> for HarnessError {
    fn from(e: ReducedError) -> Self {
        match e {
            ReducedError::Elliptic(_) => HarnessError::Numerical(e.to_string()),
            _ => Self::config("init.vortices", e.to_string()),
        }
    }
}
