//! Output files: every file starts with a provenance line naming the tool version, a hash of the
//! resolved configuration and the seed, so a run can be repeated exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "gscreen";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    /// First 16 hex digits of the SHA-256 of the resolved configuration as JSON.
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new<T: Serialize>(config: &T, seed: u64) -> Result<Self, CliError> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            config_hash: config_hash(config)?,
            seed,
        })
    }

    /// `# gscreen <version> config=<hash> seed=<seed>`
    pub fn comment_line(&self) -> String {
        format!(
            "# {} {} config={} seed={}",
            self.tool, self.version, self.config_hash, self.seed
        )
    }
}

pub fn config_hash<T: Serialize>(config: &T) -> Result<String, CliError> {
    let json = serde_json::to_vec(config)?;
    Ok(hex16(&Sha256::digest(&json)))
}

/// SHA-256 of a file's bytes, so results are tied to the exact input they came from.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex16(&Sha256::digest(&bytes)))
}

fn hex16(digest: &[u8]) -> String {
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Where tabular output goes: a file in the output directory, or standard output.
pub enum Sink {
    File(PathBuf),
    Stdout,
}

impl Sink {
    pub fn in_dir(dir: Option<&Path>, name: &str) -> Self {
        match dir {
            Some(d) => Self::File(d.join(name)),
            None => Self::Stdout,
        }
    }

    fn open(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match self {
            Self::File(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
                CliError::Output {
                    path: path.clone(),
                    source,
                }
            })?)),
            Self::Stdout => Box::new(std::io::stdout().lock()),
        })
    }

    fn path(&self) -> PathBuf {
        match self {
            Self::File(p) => p.clone(),
            Self::Stdout => PathBuf::from("<stdout>"),
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes the header line, then the rows through a CSV writer.
pub fn write_csv<F>(sink: &Sink, header: &Header, rows: F) -> Result<(), CliError>
where
    F: FnOnce(&mut csv::Writer<&mut dyn Write>) -> Result<(), CliError>,
{
    let mut out = sink.open()?;
    let io_err = |source| CliError::Output {
        path: sink.path(),
        source,
    };
    writeln!(out, "{}", header.comment_line()).map_err(io_err)?;
    {
        let mut w = csv::Writer::from_writer(&mut *out as &mut dyn Write);
        rows(&mut w)?;
        w.flush().map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// JSON documents carry the header as their `header` field.
#[derive(Serialize)]
struct WithHeader<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &WithHeader { header, body })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
