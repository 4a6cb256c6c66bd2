use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hopnet::Error),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for bad arguments or unparsable files, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Core(hopnet::Error::Format(_)) => 2,
            _ => 1,
        }
    }

    pub fn file(path: &Path, source: std::io::Error) -> Self {
        Self::File { path: path.display().to_string(), source }
    }
}
