//! Pipeline orchestration for pulmocal: run configuration, artifact
//! bookkeeping and the individual stages behind the command-line tool.

pub mod artifacts;
pub mod config;
pub mod io;
pub mod preprocess;
pub mod stages;

use std::fmt;

/// Bad command-line usage (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

/// Invalid or missing data, config or artifacts (exit code 2).
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for DataError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<pulmocal::Error>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA };
        }
    }
    EXIT_DATA
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let usage = anyhow::Error::new(UsageError("bad flag".into()));
        assert_eq!(exit_code(&usage), EXIT_USAGE);
        let num: anyhow::Result<()> = Err(pulmocal::Error::Unstable("cfl".into())).context("simulate");
        assert_eq!(exit_code(&num.unwrap_err()), EXIT_NUMERICAL);
        let data: anyhow::Result<()> = Err(pulmocal::Error::InvalidInput("x".into())).context("load");
        assert_eq!(exit_code(&data.unwrap_err()), EXIT_DATA);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), EXIT_DATA);
    }
}
