use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate utterance id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("missing files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),
    #[error("labels outside the configured class set: {}", .0.join(", "))]
    UnknownLabels(Vec<String>),
    #[error("manifest is empty")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(format!("unknown split `{other}` (train|dev|test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    /// As written in the file; resolve against the manifest directory.
    pub path: String,
    pub label: String,
    pub transcript: Option<String>,
    pub fold: Option<usize>,
    pub snr_db: Option<f64>,
    pub split: Option<Split>,
}

impl ManifestRow {
    pub fn new(id: impl Into<String>, path: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            path: path.into(),
            label: label.into(),
            transcript: None,
            fold: None,
            snr_db: None,
            split: None,
        }
    }

    fn to_line(&self) -> String {
        let mut fields = vec![self.id.clone(), self.path.clone(), self.label.clone()];
        let optional = [
            self.transcript.clone(),
            self.fold.map(|f| f.to_string()),
            self.snr_db.map(|s| s.to_string()),
            self.split.map(|s| s.to_string()),
        ];
        let last = optional.iter().rposition(Option::is_some);
        if let Some(last) = last {
            for field in &optional[..=last] {
                fields.push(field.clone().unwrap_or_default());
            }
        }
        fields.join("\t")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
    base_dir: PathBuf,
}

fn optional(field: Option<&&str>) -> Option<String> {
    field.filter(|f| !f.is_empty()).map(|f| f.to_string())
}

impl Manifest {
    /// Builds a manifest from rows, rejecting duplicate ids.
    pub fn from_rows(rows: Vec<ManifestRow>, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if !seen.insert(row.id.as_str()) {
                return Err(ManifestError::DuplicateId {
                    id: row.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            rows,
            base_dir: base_dir.into(),
        })
    }

    /// Parses manifest text without touching the filesystem.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            let err = |reason: String| ManifestError::Parse { line, reason };
            if fields.len() < 3 || fields.len() > 7 {
                return Err(err(format!("expected 3 to 7 tab-separated fields, found {}", fields.len())));
            }
            let (id, path, label) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if id.is_empty() || path.is_empty() || label.is_empty() {
                return Err(err("id, path and label must be nonempty".into()));
            }
            let fold = optional(fields.get(4))
                .map(|f| f.trim().parse::<usize>().map_err(|e| err(format!("bad fold `{f}`: {e}"))))
                .transpose()?;
            let snr_db = optional(fields.get(5))
                .map(|f| match f.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(format!("bad snr_db `{f}`"))),
                })
                .transpose()?;
            let split = optional(fields.get(6)).map(|f| f.trim().parse::<Split>().map_err(err)).transpose()?;
            if !seen.insert(id.to_string()) {
                return Err(ManifestError::DuplicateId { id: id.into(), line });
            }
            rows.push(ManifestRow {
                id: id.into(),
                path: path.into(),
                label: label.into(),
                transcript: optional(fields.get(3)),
                fold,
                snr_db,
                split,
            });
        }
        Ok(Self {
            rows,
            base_dir: base_dir.into(),
        })
    }

    /// Reads a manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::parse(&text, base)?;
        manifest.check_files()?;
        Ok(manifest)
    }

    pub fn check_files(&self) -> Result<(), ManifestError> {
        let missing: Vec<String> = self
            .rows
            .iter()
            .map(|r| self.resolve(r))
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(ManifestError::MissingFiles(missing))
        }
    }

    pub fn check_labels(&self, classes: &[String]) -> Result<(), ManifestError> {
        let unknown: BTreeSet<&str> = self
            .rows
            .iter()
            .filter(|r| !classes.contains(&r.label))
            .map(|r| r.label.as_str())
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ManifestError::UnknownLabels(unknown.into_iter().map(String::from).collect()))
        }
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        let p = Path::new(&row.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Sorted distinct labels.
    pub fn class_names(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.label.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    /// Distinct snr_db values in ascending order.
    pub fn snr_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = self.rows.iter().filter_map(|r| r.snr_db).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# id\tpath\tlabel\ttranscript\tfold\tsnr_db\tsplit\n");
        for row in &self.rows {
            out.push_str(&row.to_line());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
