//! Output directory bookkeeping. Every file goes through [`Artifacts::write`]
//! so the MANIFEST can list it with its checksum.

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "MANIFEST";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Artifacts {
    dir: PathBuf,
    command: String,
    config_sha: String,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn create(dir: &Path, command: &str, config_text: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_sha: sha256_hex(config_text.as_bytes()),
            files: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let bytes = contents.as_ref();
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    /// Writes the MANIFEST. `incomplete` carries the reason when the run
    /// stopped before producing everything it was asked for.
    pub fn finish(self, incomplete: Option<&str>) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        out.push_str(&format!("config-sha256: {}\n", self.config_sha));
        match incomplete {
            None => out.push_str("status: complete\n"),
            Some(why) => out.push_str(&format!("status: incomplete ({})\n", why.replace('\n', " "))),
        }
        for (name, sum) in &self.files {
            out.push_str(&format!("{sum}  {name}\n"));
        }
        let path = self.dir.join(MANIFEST);
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))
    }
}
