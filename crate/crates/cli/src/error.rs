use std::fmt;
use std::process::ExitCode;

/// Failure of a command, split by who has to fix it.
#[derive(Debug)]
pub enum CliError {
    /// The invocation itself is wrong: bad flag values, empty names,
    /// impossible trial counts. Exit code 2.
    Usage(String),
    /// The invocation is fine but the work failed: unknown ALO, parse or
    /// validation failure, backend or I/O error. Exit code 1.
    Domain(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        CliError::Domain(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Domain(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! domain_from {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::domain(e)
            }
        })*
    };
}

domain_from!(
    std::io::Error,
    serde_json::Error,
    alo_core::model::RegistryError,
    alo_core::gateway::GatewayError,
    alo_core::script::ScriptError,
    alo_core::sim::SimError,
    alo_core::codegen::CodegenError,
    alo_core::variability::VariabilityError,
);

impl From<alo_core::prompt::PromptError> for CliError {
    fn from(e: alo_core::prompt::PromptError) -> Self {
        match e {
            alo_core::prompt::PromptError::EmptyInput => CliError::usage("name must not be empty"),
            other => CliError::domain(other),
        }
    }
}
