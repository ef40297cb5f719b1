use std::fmt;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MODEL: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(gamilt::Error),
    /// A verification ran and found a violation.
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gamilt::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Check(_) => EXIT_NUMERICAL,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) => EXIT_USAGE,
                E::Io { .. } | E::Parse { .. } | E::NonFinite { .. } | E::MissingColumn(_) | E::InvalidData(_) => {
                    EXIT_DATA
                }
                E::ModelFormat(_) | E::UnsupportedVersion { .. } => EXIT_MODEL,
                E::Singular(_) | E::Numerical(_) => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<gamilt::Error> for CliError {
    fn from(e: gamilt::Error) -> Self {
        CliError::Core(e)
    }
}

pub fn io_error(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Core(gamilt::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(gamilt::Error::InvalidData(e.to_string()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
