use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("need T > K, got T={t}, K={k}")]
    TooFewPeriods { t: usize, k: usize },
    #[error("singular design ({context}){}", unit_suffix(*.unit))]
    Singular { context: &'static str, unit: Option<usize> },
    #[error("half-sample length {t_half} must exceed K={k}")]
    HalfSampleTooShort { t_half: usize, k: usize },
    #[error("{0} requires at least one regressor besides the intercept")]
    NoRegressors(&'static str),
    #[error("degenerate heterogeneity: all unit estimates coincide")]
    DegenerateHeterogeneity,
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("misaligned records: {0}")]
    Misaligned(String),
    #[error("unbalanced panel, offending units: {}", .0.join(", "))]
    Unbalanced(Vec<String>),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Experiment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn unit_suffix(unit: Option<usize>) -> String {
    match unit {
        Some(i) => format!(" in unit {i}"),
        None => String::new(),
    }
}
