use shortcut_forge::Error;
use thiserror::Error as ThisError;

/// Exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit code for a comparison whose differences exceed tolerance.
pub const EXIT_MISMATCH: i32 = 1;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure in {module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: Error,
    },

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical { .. } => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Maps a library error raised while running a stage to a numerical failure,
/// naming the library module that detected it.
pub fn numerical(stage: &'static str) -> impl Fn(Error) -> CliError {
    move |e| {
        let module = match &e {
            Error::Degeneracy { .. } | Error::GridTooCoarse { .. } => "shortcut_forge::spectral",
            Error::Overflow { .. } | Error::PrecisionExhausted { .. } => "shortcut_forge::agp",
            Error::IllConditioned { .. } => "shortcut_forge::grid",
            Error::InconsistentSystem { .. } | Error::GaugeDiscontinuity { .. } => {
                "shortcut_forge::invariant"
            }
            Error::SpanningFailure { .. } | Error::NotOrthonormal { .. } => {
                "shortcut_forge::operator"
            }
            _ => stage,
        };
        CliError::Numerical { module, source: e }
    }
}

/// Maps a library error raised while building a scenario from its config.
pub fn setup(e: Error) -> CliError {
    CliError::Config(e.to_string())
}
