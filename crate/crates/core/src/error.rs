use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid map dimensions: {0}")]
    Dimensions(String),
    #[error("map is not connected: {0}")]
    Disconnected(String),
    #[error("map parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("vertex {0} is not on the map")]
    OffMap(u32),
    #[error("agent has an empty goal sequence")]
    NoGoals,
    #[error("window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("bad event record at line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("event log is truncated: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
