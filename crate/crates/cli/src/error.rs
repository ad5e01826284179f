use std::fmt;

use sogtok_core::corpus::CorpusError;
use sogtok_core::ingest::IngestError;
use sogtok_core::metrics::MetricError;
use sogtok_core::model::ModelError;
use sogtok_core::prompt::PromptError;
use sogtok_core::token::TokenError;
use sogtok_core::TrainError;

/// Failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Config,
    Numeric,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Io,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Io => 1,
            Kind::Config => 2,
            Kind::Numeric => 3,
        }
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Self::io(e.to_string())
        } else {
            Self::config(e.to_string())
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match &e {
            ModelError::Io(_) => Kind::Io,
            ModelError::NonFiniteLoss(_) => Kind::Numeric,
            _ => Kind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::NonFiniteLoss { .. } => Self {
                kind: Kind::Numeric,
                message: e.to_string(),
            },
            other => Self::config(other.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(io) => io.into(),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<TokenError> for CliError {
    fn from(e: TokenError) -> Self {
        Self::config(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(io) => io.into(),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Io(io) => io.into(),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Io(io) => io.into(),
            MetricError::Train(t) => t.into(),
            other => Self::config(other.to_string()),
        }
    }
}
