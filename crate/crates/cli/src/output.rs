use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Value};

use abundanza::{Error, RealBall};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Significant digits of printed ball midpoints.
pub const MID_DIGITS: usize = 15;

#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Input(String),
    Io(String),
    /// A certified violation the inequality was not expected to have.
    Violations(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(Error::Precision { .. }) => 3,
            CliError::Lib(Error::Resource(_)) => 4,
            CliError::Lib(_) | CliError::Input(_) => 2,
            CliError::Io(_) | CliError::Violations(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e @ Error::TieDetected { .. }) => write!(f, "{e} (rerun with --allow-ties)"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Input(m) | CliError::Io(m) | CliError::Violations(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// stdout, or `path` (appending when asked).
pub fn open(path: Option<&Path>, append: bool) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(BufWriter::new(io::stdout().lock())),
        Some(p) => {
            let f = if append {
                OpenOptions::new().create(true).append(true).open(p)
            } else {
                File::create(p)
            }
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
    })
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

pub fn mid(b: &RealBall) -> String {
    b.fmt_mid(MID_DIGITS)
}

pub fn rad(b: &RealBall) -> String {
    b.fmt_rad()
}

pub fn ball_json(b: &RealBall) -> Value {
    json!({ "midpoint": mid(b), "radius": rad(b) })
}

pub fn write_json(w: &mut dyn Write, v: &Value) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}
