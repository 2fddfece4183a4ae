use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{Label, ManifestEntry, Subset};

pub const TSV_HEADER: &str = "image_id\tpath\tlabel\tpatient_id\tsource\tsubset";

/// Input format accepted by `load_manifest`.
///
/// The plain-text adapter maps space-separated records positionally as
/// `patient_id filename class source`; since those files carry no subset
/// column, the variant declares which subset the whole file belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestFormat {
    Tsv,
    CovidxTxt { subset: Subset },
}

/// A validated set of manifest entries plus the directory image paths are
/// resolved against.
#[derive(Debug, Clone)]
pub struct Manifest {
    base_dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Validates invariants (unique ids, no train/test patient overlap).
    pub fn new(base_dir: PathBuf, entries: Vec<ManifestEntry>) -> Result<Self> {
        validate_entries(&entries)?;
        Ok(Manifest { base_dir, entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Absolute location of an entry's image file.
    pub fn resolve_path(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn subset_entries(&self, subset: Subset) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.subset == subset)
    }

    pub fn entry_by_id(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.image_id == id)
    }
}

/// Rejects duplicate image ids and any patient id that appears in both the
/// train and test subsets.
pub fn validate_entries(entries: &[ManifestEntry]) -> Result<()> {
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.image_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate image_id \"{}\" in manifest",
                e.image_id
            )));
        }
    }
    let mut patient_subsets: HashMap<&str, (bool, bool)> = HashMap::new();
    for e in entries {
        if let Some(p) = &e.patient_id {
            let flags = patient_subsets.entry(p.as_str()).or_insert((false, false));
            match e.subset {
                Subset::Train => flags.0 = true,
                Subset::Test => flags.1 = true,
            }
        }
    }
    for (patient, (in_train, in_test)) in patient_subsets {
        if in_train && in_test {
            return Err(Error::Validation(format!(
                "patient_id \"{patient}\" appears in both train and test subsets"
            )));
        }
    }
    Ok(())
}

pub fn load_manifest(path: &Path, format: ManifestFormat) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let entries = match format {
        ManifestFormat::Tsv => parse_tsv(path, &text)?,
        ManifestFormat::CovidxTxt { subset } => parse_covidx(path, &text, subset)?,
    };
    Manifest::new(base_dir, entries)
}

fn parse_tsv(path: &Path, text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty manifest".into(),
    })?;
    if header.trim_end_matches(['\r', ' ']) != TSV_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("bad header; expected \"{TSV_HEADER}\""),
        });
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("expected 6 tab-separated fields, found {}", fields.len()),
            });
        }
        let patient_id = if fields[3].is_empty() {
            None
        } else {
            Some(fields[3].to_string())
        };
        entries.push(ManifestEntry {
            image_id: fields[0].to_string(),
            path: fields[1].to_string(),
            label: Label::parse(fields[2])?,
            patient_id,
            source: fields[4].to_string(),
            subset: Subset::parse(fields[5])?,
        });
    }
    Ok(entries)
}

fn parse_covidx(path: &Path, text: &str, subset: Subset) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!(
                    "expected 4 space-separated fields (patient_id filename class source), found {}",
                    fields.len()
                ),
            });
        }
        entries.push(ManifestEntry {
            image_id: fields[1].to_string(),
            path: fields[1].to_string(),
            label: Label::parse(fields[2])?,
            patient_id: Some(fields[0].to_string()),
            source: fields[3].to_string(),
            subset,
        });
    }
    Ok(entries)
}

/// Serializes entries to the canonical TSV layout. Fields may not contain
/// tabs or newlines.
pub fn write_manifest_tsv(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for e in entries {
        for field in [
            e.image_id.as_str(),
            e.path.as_str(),
            e.patient_id.as_deref().unwrap_or(""),
            e.source.as_str(),
        ] {
            if field.contains('\t') || field.contains('\n') {
                return Err(Error::Validation(format!(
                    "manifest field contains a tab or newline: {field:?}"
                )));
            }
        }
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            e.image_id,
            e.path,
            e.label,
            e.patient_id.as_deref().unwrap_or(""),
            e.source,
            e.subset
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
