use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Io,
}

impl ErrorKind {
    /// Process exit status for this failure class.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
            ErrorKind::Io => 5,
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
            ErrorKind::Io => "io",
        })
    }
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{kind} error: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, message)
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numeric, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Multi-line `key: value` report for stderr.
    pub fn report(&self) -> String {
        format!(
            "status: error\nkind: {}\nexit_code: {}\nmessage: {}\n",
            self.kind,
            self.exit_code(),
            self.message
        )
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches a failure class to library errors. I/O failures keep their own
/// class whatever the stage.
pub(crate) trait Classify<T> {
    fn or_kind(self, kind: ErrorKind) -> Result<T>;
}

impl<T> Classify<T> for distreg_core::Result<T> {
    fn or_kind(self, kind: ErrorKind) -> Result<T> {
        self.map_err(|e| match e {
            distreg_core::Error::Io(io) => CliError::io(io.to_string()),
            other => CliError::new(kind, other.to_string()),
        })
    }
}

impl<T> Classify<T> for std::io::Result<T> {
    fn or_kind(self, _: ErrorKind) -> Result<T> {
        self.map_err(|e| CliError::io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_and_nonzero() {
        let kinds = [ErrorKind::Config, ErrorKind::Data, ErrorKind::Numeric, ErrorKind::Io];
        let codes: Vec<i32> = kinds.iter().map(|k| k.exit_code()).collect();
        assert_eq!(codes, vec![2, 3, 4, 5]);
    }

    #[test]
    fn io_failures_keep_their_class() {
        let io: distreg_core::Result<()> = Err(std::io::Error::other("disk").into());
        assert_eq!(io.or_kind(ErrorKind::Numeric).unwrap_err().kind, ErrorKind::Io);
        let num: distreg_core::Result<()> = Err(distreg_core::Error::Numerical("nan".into()));
        assert_eq!(num.or_kind(ErrorKind::Numeric).unwrap_err().kind, ErrorKind::Numeric);
        assert!(CliError::data("x").report().contains("exit_code: 3"));
    }
}
