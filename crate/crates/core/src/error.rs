use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrpdError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("elements are not composable: {0}")]
    Composability(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("no transversal route: {0}")]
    Transversality(String),
    #[error("cone condition fails: {0}")]
    ConeCondition(String),
    #[error("fiber order {0} exceeds the cap of 4")]
    OrderCap(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GrpdError>;
