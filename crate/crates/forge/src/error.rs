use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("domain source is empty")]
    EmptyDomain,
    #[error("response contains no fenced code block")]
    NoCodeBlock,
    #[error("build toolchain not found: {0}")]
    ToolchainMissing(String),
    #[error("cannot start planner: {0}")]
    Spawn(String),
    #[error("endpoint error after {attempts} attempt(s): {message}")]
    Endpoint { attempts: u32, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
