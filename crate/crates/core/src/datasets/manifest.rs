use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::weathergen::{AdversityTier, Condition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Clear,
    Fog,
    Rain,
    Snow,
}

impl Variant {
    pub fn condition(self) -> Condition {
        match self {
            Variant::Clear => Condition::None,
            Variant::Fog => Condition::Fog,
            Variant::Rain => Condition::Rain,
            Variant::Snow => Condition::Snow,
        }
    }

    pub fn from_condition(c: Condition) -> Self {
        match c {
            Condition::None => Variant::Clear,
            Condition::Fog => Variant::Fog,
            Condition::Rain => Variant::Rain,
            Condition::Snow => Variant::Snow,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Clear => "clear",
            other => other.condition().name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Val => "val",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "val" => Ok(Split::Val),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// One manifest line. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub image_path: PathBuf,
    pub variant: Variant,
    pub intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<AdversityTier>,
    pub clear_ref: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    pub split: Split,
}

impl SampleRecord {
    /// A clear record: its own ground truth.
    pub fn clear(id: impl Into<String>, image_path: impl Into<PathBuf>, labels_path: Option<PathBuf>, split: Split) -> Self {
        let image_path = image_path.into();
        Self {
            id: id.into(),
            clear_ref: image_path.clone(),
            image_path,
            variant: Variant::Clear,
            intensity: 0.0,
            tier: None,
            labels_path,
            split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Clear && (self.intensity != 0.0 || self.clear_ref != self.image_path) {
            return Err(Error::Data(format!(
                "record {}: clear records need intensity 0 and clear_ref == image_path",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::Data(format!("record {}: intensity {} outside [0, 1]", self.id, self.intensity)));
        }
        Ok(())
    }
}

/// A manifest's records plus the directory their paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base: PathBuf,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        resolve(&self.base, p)
    }

    pub fn image(&self, r: &SampleRecord) -> PathBuf {
        self.resolve(&r.image_path)
    }

    pub fn clear_ref(&self, r: &SampleRecord) -> PathBuf {
        self.resolve(&r.clear_ref)
    }

    pub fn labels(&self, r: &SampleRecord) -> Option<PathBuf> {
        r.labels_path.as_deref().map(|p| self.resolve(p))
    }
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn base_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: SampleRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        r.validate()?;
        out.push(r);
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(Manifest {
        base: base_of(path),
        records: parse_manifest(&text, path)?,
    })
}

pub fn emit_manifest(records: &[SampleRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(emit_manifest(records)?.as_bytes()).map_err(|e| Error::io(path, e))
}
