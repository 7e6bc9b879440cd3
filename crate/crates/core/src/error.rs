use thiserror::Error;

/// Errors raised across the guidance toolkit.
#[derive(Debug, Error)]
pub enum AtaError {
    /// Shapes, spans or dimensions do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Non-finite or otherwise unusable numeric input.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A caller-side precondition was violated.
    #[error("contract error: {0}")]
    Contract(String),

    /// The point lands at or behind the camera plane.
    #[error("point is behind the camera (camera-frame depth {depth:.6e})")]
    BehindCamera { depth: f64 },

    /// The projected tool direction collapsed to (almost) zero length.
    #[error("degenerate ray: projected direction has length {length:.3e}")]
    DegenerateRay { length: f64 },

    /// Malformed binary or text input.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// Bad configuration file.
    #[error("config error: {0}")]
    Config(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AtaError>;

impl AtaError {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Self::Structural(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Self::Numeric(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Self::Contract(msg.into())
    }
}
