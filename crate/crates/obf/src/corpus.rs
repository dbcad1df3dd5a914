//! Dataset directories. A corpus path is either one dataset directory
//! (holding `manifest.txt`) or a directory whose immediate subdirectories
//! are datasets, one per source.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use obf_core::gaze::{self, Discarded};
use obf_core::{RawRecording, Scanpath};
use rayon::prelude::*;

use crate::error::{ObfError, Result};
use crate::manifest::{DataFormat, FileEntry, Manifest, MANIFEST_NAME};
use crate::recording::{self, RowIssue};

#[derive(Debug, Clone, PartialEq)]
pub struct FileReport {
    pub path: PathBuf,
    pub total_rows: usize,
    pub parsed_rows: usize,
    pub issues: Vec<RowIssue>,
}

impl FileReport {
    pub fn skipped(&self) -> bool {
        !self.issues.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recordings {
    Raw(Vec<RawRecording>),
    Canonical(Vec<Scanpath>),
}

/// Recordings parsed from one dataset directory. `entries[i]` is the
/// manifest line of the i-th recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub recordings: Recordings,
    pub entries: Vec<FileEntry>,
    /// One per manifest file, in manifest order.
    pub reports: Vec<FileReport>,
    pub labels: Option<BTreeMap<String, bool>>,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ObfError::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(ObfError::Data(format!(
            "{}: no {MANIFEST_NAME}",
            dir.display()
        )));
    }
    let m = Manifest::parse(&read_text(&path)?).map_err(|e| ObfError::kv(&path, e))?;
    m.geometry
        .validate()
        .map_err(|e| ObfError::Data(format!("{}: {e}", path.display())))?;
    if !(m.native_hz > 0.0 && m.native_hz.is_finite()) {
        return Err(ObfError::Data(format!(
            "{}: `native_hz` must be positive",
            path.display()
        )));
    }
    Ok(m)
}

/// `participant_id,label` rows with label 0 or 1.
pub fn parse_labels(text: &str) -> std::result::Result<BTreeMap<String, bool>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if !header.iter().eq(["participant_id", "label"]) {
        return Err("expected header `participant_id,label`".into());
    }
    let mut out = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let label = match &rec[1] {
            "1" => true,
            "0" => false,
            other => return Err(format!("line {line}: label must be 0 or 1, got `{other}`")),
        };
        if out.insert(rec[0].to_string(), label).is_some() {
            return Err(format!(
                "line {line}: participant `{}` listed twice",
                &rec[0]
            ));
        }
    }
    Ok(out)
}

pub fn write_labels(labels: &BTreeMap<String, bool>) -> String {
    let mut s = String::from("participant_id,label\n");
    for (p, &l) in labels {
        s.push_str(&format!("{p},{}\n", u8::from(l)));
    }
    s
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    for f in &manifest.files {
        let p = dir.join(&f.path);
        if !p.is_file() {
            return Err(ObfError::Data(format!(
                "{}: roster file missing",
                p.display()
            )));
        }
    }
    let labels = match &manifest.labels {
        Some(name) => {
            let path = dir.join(name);
            let parsed = parse_labels(&read_text(&path)?)
                .map_err(|e| ObfError::Data(format!("{}: {e}", path.display())))?;
            Some(parsed)
        }
        None => None,
    };
    let texts = manifest
        .files
        .par_iter()
        .map(|f| read_text(&dir.join(&f.path)))
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity(texts.len());
    let mut entries = Vec::new();
    let recordings = match manifest.format {
        DataFormat::Raw => {
            let parsed: Vec<_> = texts.par_iter().map(|t| recording::parse_raw(t)).collect();
            let mut out = Vec::new();
            for (f, p) in manifest.files.iter().zip(parsed) {
                reports.push(report(dir, f, &p));
                if p.is_clean() {
                    entries.push(f.clone());
                    out.push(RawRecording {
                        samples: p.rows,
                        geometry: manifest.geometry,
                        source_tag: manifest.source_tag.clone(),
                        participant_id: f.participant_id.clone(),
                        stimulus_id: f.stimulus_id.clone(),
                        native_hz: manifest.native_hz,
                    });
                }
            }
            Recordings::Raw(out)
        }
        DataFormat::Canonical => {
            let parsed: Vec<_> = texts
                .par_iter()
                .map(|t| recording::parse_canonical(t))
                .collect();
            let halfextent = manifest.geometry.halfextent_deg();
            let mut out = Vec::new();
            for (f, p) in manifest.files.iter().zip(parsed) {
                reports.push(report(dir, f, &p));
                if p.is_clean() {
                    entries.push(f.clone());
                    out.push(Scanpath {
                        points: p.rows,
                        source_tag: manifest.source_tag.clone(),
                        participant_id: f.participant_id.clone(),
                        stimulus_id: f.stimulus_id.clone(),
                        screen_halfextent_deg: halfextent,
                    });
                }
            }
            Recordings::Canonical(out)
        }
    };
    Ok(Dataset {
        dir: dir.to_path_buf(),
        manifest,
        recordings,
        entries,
        reports,
        labels,
    })
}

fn report<T>(dir: &Path, f: &FileEntry, p: &recording::Parsed<T>) -> FileReport {
    FileReport {
        path: dir.join(&f.path),
        total_rows: p.total_rows,
        parsed_rows: p.rows.len(),
        issues: p.issues.clone(),
    }
}

/// Dataset directories under `path`, sorted.
pub fn dataset_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if Manifest::has_manifest(path) {
        return Ok(vec![path.to_path_buf()]);
    }
    let read = fs::read_dir(path).map_err(|e| ObfError::io(path, e))?;
    let mut dirs = Vec::new();
    for entry in read {
        let p = entry.map_err(|e| ObfError::io(path, e))?.path();
        if p.is_dir() && Manifest::has_manifest(&p) {
            dirs.push(p);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(ObfError::Data(format!(
            "{}: no {MANIFEST_NAME} here or in any subdirectory",
            path.display()
        )));
    }
    Ok(dirs)
}

/// Every dataset of a corpus; source tags must be unique.
pub fn load_corpus(path: &Path) -> Result<Vec<Dataset>> {
    let sets = dataset_dirs(path)?
        .iter()
        .map(|d| load_dataset(d))
        .collect::<Result<Vec<_>>>()?;
    let mut tags = BTreeSet::new();
    for d in &sets {
        if !tags.insert(d.manifest.source_tag.as_str()) {
            return Err(ObfError::Data(format!(
                "source tag `{}` used by more than one dataset",
                d.manifest.source_tag
            )));
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discard {
    pub path: PathBuf,
    pub participant_id: String,
    pub stimulus_id: String,
    pub reason: String,
}

/// Canonical scanpaths of a corpus with the reason for every recording
/// that did not make it (unreadable rows or preprocessing discards), plus
/// the merged participant labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Canonical {
    pub scanpaths: Vec<Scanpath>,
    pub discards: Vec<Discard>,
    pub labels: BTreeMap<String, bool>,
    pub has_labels: bool,
    /// Participants labeled differently by two datasets.
    pub label_conflicts: Vec<String>,
}

pub fn canonical_scanpaths(datasets: &[Dataset]) -> Result<Canonical> {
    let mut out = Canonical::default();
    for d in datasets {
        for (r, f) in d.reports.iter().zip(&d.manifest.files) {
            if let Some(first) = r.issues.first() {
                out.discards.push(Discard {
                    path: r.path.clone(),
                    participant_id: f.participant_id.clone(),
                    stimulus_id: f.stimulus_id.clone(),
                    reason: format!(
                        "{} bad row(s), first at line {}: {}",
                        r.issues.len(),
                        first.line,
                        first.message
                    ),
                });
            }
        }
        match &d.recordings {
            Recordings::Canonical(sps) => out.scanpaths.extend(sps.iter().cloned()),
            Recordings::Raw(raws) => {
                let results: Vec<std::result::Result<Scanpath, Discarded>> =
                    raws.par_iter().map(gaze::preprocess).collect();
                for ((res, raw), f) in results.into_iter().zip(raws).zip(&d.entries) {
                    match res {
                        Ok(sp) => out.scanpaths.push(sp),
                        Err(why) => out.discards.push(Discard {
                            path: d.dir.join(&f.path),
                            participant_id: raw.participant_id.clone(),
                            stimulus_id: raw.stimulus_id.clone(),
                            reason: why.to_string(),
                        }),
                    }
                }
            }
        }
        if let Some(l) = &d.labels {
            out.has_labels = true;
            for (p, &v) in l {
                if out
                    .labels
                    .insert(p.clone(), v)
                    .is_some_and(|prev| prev != v)
                {
                    out.label_conflicts.push(p.clone());
                }
            }
        }
    }
    Ok(out)
}

/// Loads and canonicalizes in one go.
pub fn load_scanpaths(path: &Path) -> Result<Canonical> {
    canonical_scanpaths(&load_corpus(path)?)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| ObfError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ObfError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| ObfError::io(path, e))?;
    tmp.persist(path).map_err(|e| ObfError::io(path, e.error))?;
    Ok(())
}
