//! Output directory handling: atomic writes, checksummed CSV headers and the
//! run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
    /// First line of every CSV.
    header: String,
}

impl OutDir {
    pub fn create(root: &Path, config_sha256: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            header: format!("# config_sha256={config_sha256} polarlattice={}\n", env!("CARGO_PKG_VERSION")),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` to a temporary file in the target directory and renames
    /// it into place, so readers never see a partial file.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let dir = path.parent().unwrap_or(&self.root);
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        Ok(())
    }

    /// CSV with the checksum header line prepended.
    pub fn write_csv(
        &self,
        rel: &str,
        body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = self.header.clone().into_bytes();
        body(&mut buf).map_err(|e| CliError::io(self.root.join(rel), e))?;
        self.write(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(self.root.join(rel), e.into()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Wall-clock timings of the pipeline stages.
#[derive(Debug)]
pub struct Timer {
    start: Instant,
    last: Instant,
    pub stages: Vec<Stage>,
}

impl Timer {
    pub fn start() -> Self {
        let now = Instant::now();
        Self { start: now, last: now, stages: Vec::new() }
    }

    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(Stage { name: name.into(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }

    pub fn total(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub wall_seconds: f64,
    pub stages: Vec<Stage>,
    /// Command-specific extras, e.g. sweep points.
    pub details: serde_json::Value,
    pub files: Vec<FileRecord>,
}

/// Every regular file under `root` except the manifest, sorted by path.
pub fn checksum_tree(root: &Path) -> Result<Vec<FileRecord>, CliError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<FileRecord>) -> Result<(), CliError> {
        let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
                continue;
            }
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            if rel == MANIFEST {
                continue;
            }
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            out.push(FileRecord { path: rel, sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 });
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

pub fn write_manifest(out: &OutDir, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
    manifest.files = checksum_tree(out.root())?;
    out.write_json(MANIFEST, &manifest)?;
    Ok(manifest)
}

pub fn plot_stub(csv: &str, x: &str, ys: &[&str], xlabel: &str) -> String {
    let ys = ys.iter().map(|y| format!("{y:?}")).collect::<Vec<_>>().join(", ");
    format!(
        "# Plotting stub; requires numpy and matplotlib.\n\
import numpy as np\n\
import matplotlib.pyplot as plt\n\
\n\
data = np.genfromtxt({csv:?}, delimiter=\",\", names=True, comments=\"#\")\n\
for col in [{ys}]:\n    plt.plot(data[{x:?}], data[col], label=col)\n\
plt.xlabel({xlabel:?})\n\
plt.legend()\n\
plt.savefig({png:?}, dpi=150)\n",
        png = csv.replace(".csv", ".png"),
    )
}
