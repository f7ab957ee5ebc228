//! JSON-lines dataset manifest: one [`SampleEntry`] per line.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::png_io;
use crate::error::{Error, Result};
use crate::types::{ClassSet, InputImage, LabelMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub image_rgb: PathBuf,
    pub image_nir: PathBuf,
    pub label: PathBuf,
    /// Valid-pixel count per class.
    pub counts: Vec<u64>,
}

impl SampleEntry {
    pub fn valid_pixels(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleManifest {
    entries: Vec<SampleEntry>,
    class_set: ClassSet,
    /// Directory relative entry paths are resolved against.
    root: PathBuf,
}

/// Parses a single manifest line.
pub fn parse_line(line: &str, num_classes: usize) -> Result<SampleEntry> {
    let entry: SampleEntry = serde_json::from_str(line)?;
    if entry.counts.len() != num_classes {
        return Err(Error::Format(format!(
            "entry {:?} has {} counts, expected {num_classes}",
            entry.id,
            entry.counts.len()
        )));
    }
    if entry.id.is_empty() {
        return Err(Error::Format("entry with empty id".into()));
    }
    Ok(entry)
}

impl SampleManifest {
    pub fn new(entries: Vec<SampleEntry>, class_set: ClassSet, root: impl Into<PathBuf>) -> Result<Self> {
        let c = class_set.num_classes();
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Format(format!("duplicate entry id {:?}", e.id)));
            }
            if e.counts.len() != c {
                return Err(Error::Format(format!(
                    "entry {:?} has {} counts, expected {c}",
                    e.id,
                    e.counts.len()
                )));
            }
        }
        Ok(Self {
            entries,
            class_set,
            root: root.into(),
        })
    }

    pub fn parse(text: &str, class_set: ClassSet, root: impl Into<PathBuf>) -> Result<Self> {
        let c = class_set.num_classes();
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                parse_line(l, c).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, class_set, root)
    }

    /// Loads a manifest file and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>, class_set: ClassSet) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self::parse(&text, class_set, root)?;
        manifest.validate_files()?;
        Ok(manifest)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn validate_files(&self) -> Result<()> {
        for e in &self.entries {
            for p in [&e.image_rgb, &e.image_nir, &e.label] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::io(
                        full,
                        std::io::Error::new(std::io::ErrorKind::NotFound, format!("referenced by entry {:?}", e.id)),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[SampleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_set(&self) -> &ClassSet {
        &self.class_set
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }

    pub fn load_image(&self, idx: usize) -> Result<InputImage> {
        let e = &self.entries[idx];
        png_io::read_image(self.resolve(&e.image_rgb), self.resolve(&e.image_nir))
    }

    pub fn load_label(&self, idx: usize) -> Result<LabelMap> {
        png_io::read_label_map(self.resolve(&self.entries[idx].label), self.class_set.num_classes())
    }

    /// Re-decodes every label file and returns a copy with fresh counts.
    pub fn recount(&self) -> Result<Self> {
        let c = self.class_set.num_classes();
        let entries = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let label = self.load_label(i)?;
                Ok(SampleEntry {
                    counts: label.class_counts(c),
                    ..self.entries[i].clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            entries,
            class_set: self.class_set.clone(),
            root: self.root.clone(),
        })
    }
}

fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for item in rd {
        let item = item.map_err(|e| Error::io(dir, e))?;
        let path = item.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Pairs `image_dir/rgb/*.png`, `image_dir/nir/*.png` and `label_dir/*.png`
/// by basename and counts classes from each label map.
pub fn build_manifest(image_dir: impl AsRef<Path>, label_dir: impl AsRef<Path>, class_set: ClassSet) -> Result<SampleManifest> {
    let image_dir = image_dir.as_ref();
    let rgb = png_stems(&image_dir.join("rgb"))?;
    let nir = png_stems(&image_dir.join("nir"))?;
    let labels = png_stems(label_dir.as_ref())?;
    for (stem, path) in &labels {
        if !rgb.contains_key(stem) || !nir.contains_key(stem) {
            return Err(Error::Orphan(format!("label {} has no image pair", path.display())));
        }
    }
    for (stem, path) in rgb.iter().chain(&nir) {
        if !labels.contains_key(stem) {
            return Err(Error::Orphan(format!("image {} has no label", path.display())));
        }
    }
    for stem in rgb.keys() {
        if !nir.contains_key(stem) {
            return Err(Error::Orphan(format!("image {stem} has RGB but no NIR")));
        }
    }
    let c = class_set.num_classes();
    let entries = labels
        .par_iter()
        .map(|(stem, label_path)| {
            let label = png_io::read_label_map(label_path, c)?;
            Ok(SampleEntry {
                id: stem.clone(),
                image_rgb: rgb[stem].clone(),
                image_nir: nir[stem].clone(),
                label: label_path.clone(),
                counts: label.class_counts(c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SampleManifest::new(entries, class_set, PathBuf::new())
}
