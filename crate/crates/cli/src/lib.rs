//! The `bvd` command-line tool: builds diagrams, triangulations, rasters and
//! samplings from point files and writes JSON, SVG and PPM output.

pub mod commands;
pub mod io;
pub mod selftest;

use std::path::{Path, PathBuf};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// `line` is 1-based; 0 means the file as a whole.
    #[error("{}line {line}: {message}", file.as_ref().map(|f| format!("{}: ", f.display())).unwrap_or_default())]
    Parse { file: Option<PathBuf>, line: usize, message: String },

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] bvd_core::Error),
}

impl CliError {
    pub fn parse(line: usize, message: String) -> Self {
        CliError::Parse { file: None, line, message }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Parse { line, message, .. } => CliError::Parse { file: Some(path.to_path_buf()), line, message },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Sizes rayon's global pool from `BVD_THREADS` (0 or unset = automatic).
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BVD_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("BVD_THREADS must be a non-negative integer, got `{v}`")))?;
    // The pool can only be built once per process; later calls keep the first size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match commands::Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match configure_threads().and_then(|()| commands::execute(cli, command_line)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bvd: {e}");
            e.exit_code()
        }
    }
}
