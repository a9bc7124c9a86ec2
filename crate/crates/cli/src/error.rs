use std::fmt;

use stablepose::cluster::ClusterError;
use stablepose::meshgeo::MeshError;
use stablepose::metrics::MetricsError;
use stablepose::placements::PlacementError;
use stablepose::regrasp::RegraspError;
use stablepose::rotgeo::RotationError;

/// Failure class, which fixes the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    DegenerateMesh,
    DegenerateDiversity,
    FitFailed,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::DegenerateMesh => 3,
            ErrorKind::DegenerateDiversity => 4,
            ErrorKind::FitFailed => 5,
            ErrorKind::Other => 1,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<&'static str>,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, stage: None, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Other, message)
    }

    pub fn in_stage(mut self, stage: &'static str) -> Self {
        self.stage.get_or_insert(stage);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "{stage}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        let kind = if e.is_parse_error() { ErrorKind::Usage } else { ErrorKind::DegenerateMesh };
        CliError::new(kind, e.to_string())
    }
}

impl From<PlacementError> for CliError {
    fn from(e: PlacementError) -> Self {
        match e {
            PlacementError::Mesh(m) => m.into(),
            other => CliError::other(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let kind = match e {
            MetricsError::DegenerateDiversity(_) => ErrorKind::DegenerateDiversity,
            MetricsError::InvalidThresholds | MetricsError::InitialTypeOutOfRange { .. } => ErrorKind::Usage,
            MetricsError::NoPredictions => ErrorKind::Other,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<RotationError> for CliError {
    fn from(e: RotationError) -> Self {
        let kind = match e {
            RotationError::FitFailed => ErrorKind::FitFailed,
            _ => ErrorKind::Usage,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<RegraspError> for CliError {
    fn from(e: RegraspError) -> Self {
        let kind = match e {
            RegraspError::NoPlanExists { .. } => ErrorKind::Other,
            _ => ErrorKind::Usage,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::usage(format!("invalid JSON: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
