use derender_core::datagen::DatagenError;
use derender_core::eval::EvalError;
use derender_core::toynet::ToynetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Divergence,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn config(msg: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: Kind::Config,
            source: msg.into(),
        }
    }

    pub fn data(msg: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: Kind::Data,
            source: msg.into(),
        }
    }

    pub fn code(&self) -> u8 {
        match self.kind {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Divergence => 4,
        }
    }

    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        Self {
            kind: self.kind,
            source: anyhow::anyhow!("{ctx}: {:#}", self.source),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e)
    }
}

impl From<DatagenError> for CliError {
    fn from(e: DatagenError) -> Self {
        match e {
            DatagenError::InvalidConfig(_) | DatagenError::EmptyRegion(_) => CliError::config(e),
            _ => CliError::data(e),
        }
    }
}

impl From<ToynetError> for CliError {
    fn from(e: ToynetError) -> Self {
        match e {
            ToynetError::DivergenceDetected { .. } => Self {
                kind: Kind::Divergence,
                source: e.into(),
            },
            ToynetError::InvalidConfig(_) | ToynetError::ContextOverflow { .. } => CliError::config(e),
            _ => CliError::data(e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::data(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e)
    }
}
