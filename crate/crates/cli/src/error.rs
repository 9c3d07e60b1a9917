use nskrig::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] nskrig::Error),
}

impl CliError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CliError::Config(_) => ErrorClass::Input,
            CliError::Core(e) => e.class(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "E_CONFIG",
            CliError::Core(e) => e.code(),
        }
    }

    /// 2 for input errors, 3 for conditioning failures, 4 for convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Input => 2,
            ErrorClass::Conditioning => 3,
            ErrorClass::Convergence => 4,
        }
    }

    /// One line: `error code=E_X exit=N message="..."`.
    pub fn report_line(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("error code={} exit={} message=\"{msg}\"", self.code(), self.exit_code())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}
