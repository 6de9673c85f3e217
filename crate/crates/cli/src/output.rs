//! Atomic file output, checksums and run manifests.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

pub const TMPDIR_ENV: &str = "KGCONCEPT_TMPDIR";

/// Writes `path` through a temp file that is renamed into place once
/// `fill` succeeds, so readers never see a partial file. The temp file
/// lives in `$KGCONCEPT_TMPDIR` when set, else next to `path`.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let staging = std::env::var_os(TMPDIR_ENV).map(PathBuf::from).unwrap_or_else(|| parent.clone());
    let mut tmp = NamedTempFile::new_in(&staging)
        .with_context(|| format!("cannot create a temp file in {}", staging.display()))?;
    {
        let mut writer = BufWriter::new(tmp.as_file_mut());
        fill(&mut writer).with_context(|| format!("writing {}", path.display()))?;
        writer.flush()?;
    }
    tmp.as_file().sync_all()?;
    match tmp.persist(path) {
        Ok(_) => Ok(()),
        // Renames cannot cross filesystems; restage next to the target.
        Err(e) => {
            let local = NamedTempFile::new_in(&parent)
                .with_context(|| format!("cannot create a temp file in {}", parent.display()))?;
            std::fs::copy(e.file.path(), local.path())?;
            local
                .persist(path)
                .map_err(|e| e.error)
                .with_context(|| format!("cannot move output into {}", path.display()))?;
            Ok(())
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// `<path><suffix>`, e.g. `data.jsonl` → `data.jsonl.stats.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Everything needed to rerun a stage. Deliberately has no timestamps:
/// two runs with equal manifests produce identical outputs.
#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn write_manifest<C: Serialize>(
    path: &Path,
    command: &'static str,
    config: C,
    inputs: &[&Path],
    outputs: &[&Path],
) -> anyhow::Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        inputs: inputs.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<_>>()?,
        outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<_>>()?,
    };
    write_json(path, &manifest)
}
