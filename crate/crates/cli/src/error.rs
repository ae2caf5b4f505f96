use std::fmt;

/// Command failure. `Display` gives the one-line `category: message` form
/// printed on stderr.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Format(String),
    Data(String),
    OneClass(String),
    NonFinite(String),
    Checkpoint(String),
    Mismatch(String),
    Degenerate(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Format(_) => "format",
            CliError::Data(_) => "data",
            CliError::OneClass(_) => "one-class",
            CliError::NonFinite(_) => "non-finite",
            CliError::Checkpoint(_) => "checkpoint",
            CliError::Mismatch(_) => "mismatch",
            CliError::Degenerate(_) => "degenerate",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Io(m)
            | CliError::Format(m)
            | CliError::Data(m)
            | CliError::OneClass(m)
            | CliError::NonFinite(m)
            | CliError::Checkpoint(m)
            | CliError::Mismatch(m)
            | CliError::Degenerate(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Format(_) | CliError::Data(_) | CliError::Mismatch(_) => 4,
            CliError::Checkpoint(_) => 5,
            CliError::OneClass(_) => 6,
            CliError::NonFinite(_) | CliError::Degenerate(_) => 7,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep it on one line whatever the source message holds
        let msg = self.message().replace(['\n', '\r'], " ");
        write!(f, "{}: {}", self.category(), msg)
    }
}

impl std::error::Error for CliError {}

impl From<ocad_core::Error> for CliError {
    fn from(e: ocad_core::Error) -> Self {
        use ocad_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } => CliError::Io(msg),
            E::Format { .. } => CliError::Format(msg),
            E::InvalidConfig(_) => CliError::Config(msg),
            E::OneClass(_) => CliError::OneClass(msg),
            E::NonFinite(_) => CliError::NonFinite(msg),
            E::Degenerate(_) => CliError::Degenerate(msg),
            E::Shape { .. } | E::InvalidLayer { .. } | E::InvalidTensor(_) | E::InvalidData(_) => CliError::Data(msg),
        }
    }
}

pub fn io_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
