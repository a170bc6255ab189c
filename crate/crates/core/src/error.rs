use thiserror::Error;

/// Errors raised by the geometry, energy, alignment and optimizer routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fields do not share the surface grid ({expected_u}x{expected_v} vs {found_u}x{found_v})")]
    ShapeMismatch {
        expected_u: usize,
        expected_v: usize,
        found_u: usize,
        found_v: usize,
    },

    #[error("frame {frame} does not share the grid of frame 0")]
    NonUniformGrid { frame: usize },

    #[error("degenerate metric (EG - F^2 = {det:e}) at row {row}, column {col}{}", frame_suffix(*.frame))]
    DegenerateMetric {
        frame: Option<usize>,
        row: usize,
        col: usize,
        det: f64,
    },

    #[error("singular polynomial fit at row {row}, column {col} (condition number {condition:e})")]
    SingularFit { row: usize, col: usize, condition: f64 },

    #[error("inscribed volume {volume:e} is too close to zero")]
    ZeroVolume { volume: f64 },

    #[error("moment tensor is not triaxial (relative eigenvalue gaps {gaps:?})")]
    NotTriaxial { gaps: [f64; 2] },

    #[error("basis element {index} is linearly dependent on its predecessors (pivot norm {norm:e})")]
    RankDeficient { index: usize, norm: f64 },

    #[error("path left the space of immersions: {0}")]
    ImmersionLost(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn frame_suffix(frame: Option<usize>) -> String {
    match frame {
        Some(k) => format!(" in frame {k}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a frame index to a metric degeneracy raised while processing a path.
    pub fn in_frame(self, k: usize) -> Self {
        match self {
            Error::DegenerateMetric { row, col, det, .. } => Error::DegenerateMetric {
                frame: Some(k),
                row,
                col,
                det,
            },
            other => other,
        }
    }

    /// True for malformed input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSurface(_)
                | Error::InvalidConfig(_)
                | Error::ShapeMismatch { .. }
                | Error::NonUniformGrid { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
