//! Per-dataset `manifest.txt`:
//!
//! ```text
//! format = raw                 # or canonical
//! source_tag = msu
//! native_hz = 500
//! width_px = 1920
//! height_px = 1080
//! width_mm = 531
//! height_mm = 299
//! viewing_distance_mm = 650
//! labels = labels.csv          # optional participant_id,label file
//! file = p01_s001.csv, p01, s001
//! file = p01_s002.csv, p01, s002
//! ```
//!
//! Raw files hold `t_ms,lx,ly,rx,ry,valid` rows; canonical files hold
//! `x_deg,y_deg` rows at 60 Hz.

use std::fmt;
use std::path::Path;

use obf_core::gaze::ScreenGeometry;

use crate::kv::{push_line, KvError, KvFile};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Raw,
    Canonical,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Canonical => "canonical",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileEntry {
    /// Relative to the dataset directory.
    pub path: String,
    pub participant_id: String,
    pub stimulus_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub format: DataFormat,
    pub source_tag: String,
    pub native_hz: f64,
    pub geometry: ScreenGeometry,
    pub labels: Option<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let kv = KvFile::parse(text)?;
        let format = match kv.require_str("format")? {
            "raw" => DataFormat::Raw,
            "canonical" => DataFormat::Canonical,
            other => {
                return Err(KvError::Type {
                    key: "format".into(),
                    line: kv.all("format")[0].line,
                    expected: "raw or canonical",
                    value: other.into(),
                })
            }
        };
        let number = |key: &str| -> Result<f64, KvError> {
            kv.get::<f64>(key, "a number")?
                .ok_or_else(|| KvError::Missing(key.into()))
        };
        let pixels = |key: &str| -> Result<u32, KvError> {
            kv.get::<u32>(key, "a pixel count")?
                .ok_or_else(|| KvError::Missing(key.into()))
        };
        let geometry = ScreenGeometry {
            width_px: pixels("width_px")?,
            height_px: pixels("height_px")?,
            width_mm: number("width_mm")?,
            height_mm: number("height_mm")?,
            viewing_distance_mm: number("viewing_distance_mm")?,
        };
        let native_hz = number("native_hz")?;
        let source_tag = kv.require_str("source_tag")?.to_string();
        let labels = kv.get_str("labels")?.map(str::to_string);
        let mut files = Vec::new();
        for e in kv.all("file") {
            let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [path, p, s] if !path.is_empty() && !p.is_empty() && !s.is_empty() => {
                    files.push(FileEntry {
                        path: path.to_string(),
                        participant_id: p.to_string(),
                        stimulus_id: s.to_string(),
                    })
                }
                _ => {
                    return Err(KvError::Type {
                        key: "file".into(),
                        line: e.line,
                        expected: "`path, participant_id, stimulus_id`",
                        value: e.value.clone(),
                    })
                }
            }
        }
        kv.finish()?;
        Ok(Self {
            format,
            source_tag,
            native_hz,
            geometry,
            labels,
            files,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        push_line(&mut s, "format", self.format);
        push_line(&mut s, "source_tag", &self.source_tag);
        push_line(&mut s, "native_hz", self.native_hz);
        let g = &self.geometry;
        push_line(&mut s, "width_px", g.width_px);
        push_line(&mut s, "height_px", g.height_px);
        push_line(&mut s, "width_mm", g.width_mm);
        push_line(&mut s, "height_mm", g.height_mm);
        push_line(&mut s, "viewing_distance_mm", g.viewing_distance_mm);
        if let Some(l) = &self.labels {
            push_line(&mut s, "labels", l);
        }
        for f in &self.files {
            push_line(
                &mut s,
                "file",
                format_args!("{}, {}, {}", f.path, f.participant_id, f.stimulus_id),
            );
        }
        s
    }

    pub fn has_manifest(dir: &Path) -> bool {
        dir.join(MANIFEST_NAME).is_file()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            format: DataFormat::Raw,
            source_tag: "msu".into(),
            native_hz: 500.0,
            geometry: ScreenGeometry {
                width_px: 1920,
                height_px: 1080,
                width_mm: 531.0,
                height_mm: 298.5,
                viewing_distance_mm: 650.0,
            },
            labels: Some("labels.csv".into()),
            files: vec![FileEntry {
                path: "a.csv".into(),
                participant_id: "p1".into(),
                stimulus_id: "s1".into(),
            }],
        }
    }

    #[test]
    fn text_round_trips() {
        let m = sample();
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn missing_geometry_is_an_error() {
        let text = sample().to_text().replace("width_mm = 531\n", "");
        assert_eq!(
            Manifest::parse(&text),
            Err(KvError::Missing("width_mm".into()))
        );
    }

    #[test]
    fn malformed_file_line_is_an_error() {
        let text = sample().to_text() + "file = only_path.csv\n";
        assert!(matches!(Manifest::parse(&text), Err(KvError::Type { .. })));
    }
}
