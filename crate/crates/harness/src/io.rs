//! Output directory handling: CSV tables, artifact manifest, calibration file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Collects the artifacts written into one output directory.
#[derive(Debug)]
pub struct OutDir {
    pub root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn subdir(&self, name: &str) -> io::Result<PathBuf> {
        let p = self.root.join(name);
        fs::create_dir_all(&p)?;
        Ok(p)
    }

    pub fn register(&mut self, p: impl Into<PathBuf>) {
        self.files.push(p.into());
    }

    pub fn register_all(&mut self, ps: impl IntoIterator<Item = PathBuf>) {
        self.files.extend(ps);
    }

    /// Writes a CSV table with a header row.
    pub fn write_csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> io::Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.as_ref())?;
        }
        w.flush()?;
        self.register(p);
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<()> {
        let p = self.path(name);
        fs::write(&p, text)?;
        self.register(p);
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        self.write_text(name, &(text + "\n"))
    }

    /// Writes `manifest` (`<sha256>  <relative path>` per artifact, sorted).
    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.files.sort();
        self.files.dedup();
        let mut out = String::new();
        for f in &self.files {
            let rel = f.strip_prefix(&self.root).unwrap_or(f);
            out.push_str(&format!("{}  {}\n", file_hash(f)?, rel.display()));
        }
        let p = self.path("manifest");
        fs::write(&p, out)?;
        Ok(p)
    }
}

pub fn file_hash(p: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(p)?)))
}

/// Re-hashes every manifest entry; returns the entries that do not match.
pub fn check_manifest(root: &Path) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(root.join("manifest"))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let Some((hash, rel)) = line.split_once("  ") else {
            bad.push(line.to_string());
            continue;
        };
        match file_hash(&root.join(rel)) {
            Ok(h) if h == hash => {}
            _ => bad.push(rel.to_string()),
        }
    }
    Ok(bad)
}

/// Shortest round-trip decimal representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Fitted constants, stored as UTF-8 `key:value` lines.
pub const CALIBRATION: &str = include_str!("../calibration.txt");

pub fn parse_key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn calibration_value(key: &str) -> Option<f64> {
    parse_key_values(CALIBRATION).get(key).and_then(|v| v.parse().ok())
}
