//! CSV artifact writing.
//!
//! Every artifact starts with `#`-prefixed header lines recording the tool
//! version, the wall-clock time of generation, the seed, and the fully
//! resolved experiment description, so a result file is self-describing and
//! re-runnable. All lines except `generated_at_unix_s` are deterministic
//! functions of the experiment description: re-running reproduces the file
//! byte-for-byte modulo that one line.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

/// Header block common to every artifact.
pub struct Header {
    /// Seed recorded for reproduction.
    pub seed: u64,
    /// Single-line JSON of the resolved experiment spec.
    pub config_json: String,
    /// Additional `#` lines (grid descriptions, caveats).
    pub extra: Vec<String>,
}

impl Header {
    fn render(&self) -> String {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = format!(
            "# cachecast {}\n# generated_at_unix_s: {now}\n# seed: {}\n# config: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_json,
        );
        for line in &self.extra {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

/// Writes `header` plus `body` to `path` atomically: the content lands in a
/// temporary file in the same directory and is renamed into place, so a
/// crash or concurrent reader never observes a half-written artifact.
pub fn write_csv(path: &Path, header: &Header, body: &str) -> Result<()> {
    write_atomic(path, &format!("{}{body}", header.render()))
}

/// Atomic plain-text write (same mechanism, no CSV header block).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)
            .with_context(|| format!("creating temporary file {}", tmp.display()))?;
        f.write_all(content.as_bytes())
            .and_then(|_| f.sync_all())
            .with_context(|| format!("writing {}", tmp.display()))?;
    }
    fs::rename(&tmp, path)
        .with_context(|| format!("moving {} into place as {}", tmp.display(), path.display()))
}
