//! Dataset manifests, per-image attributes and dataset statistics.

pub mod attributes;
pub mod naming;
pub mod stats;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use attributes::{compute_attributes, Attribute, AttributeSet, Provenance};
pub use stats::{dataset_stats, DatasetStats};

use crate::error::{EvalError, Result};

const IMAGE_DIRS: [&str; 3] = ["Imgs", "Image", "images"];
const MASK_DIRS: [&str; 3] = ["GT", "GT_Object", "masks"];
const IMAGE_EXTS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];
/// Optional `stem,attributes` file next to the image and mask folders.
pub const ANNOTATION_FILE: &str = "attributes.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub stem: String,
    pub image: Option<PathBuf>,
    pub mask: PathBuf,
    pub super_class: String,
    pub sub_class: String,
    /// Attributes listed by an annotation source, if any.
    pub annotated: Option<Vec<Attribute>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<Record>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    image: Option<String>,
    mask: String,
    super_class: Option<String>,
    sub_class: Option<String>,
    attributes: Option<String>,
}

#[derive(Deserialize)]
struct RawManifest {
    name: Option<String>,
    records: Vec<RawRecord>,
}

fn stem_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| EvalError::Manifest(format!("{} has no usable file name", path.display())))
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| EvalError::io(dir, e))? {
        let path = entry.map_err(|e| EvalError::io(dir, e))?.path();
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn parse_attribute_list(text: &str) -> Result<Vec<Attribute>> {
    text.split([';', ' ', '|'])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(EvalError::Manifest))
        .collect()
}

fn read_annotations(path: &Path) -> Result<HashMap<String, Vec<Attribute>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
        let stem = row.get(0).unwrap_or_default().to_string();
        out.insert(stem, parse_attribute_list(row.get(1).unwrap_or_default())?);
    }
    Ok(out)
}

/// Checks that an image and its mask have equal dimensions.
fn check_record(rec: &Record) -> Result<()> {
    let dims = |p: &Path| image::image_dimensions(p).map_err(|e| EvalError::image(p, e));
    let (mw, mh) = dims(&rec.mask)?;
    if let Some(img) = &rec.image {
        let (iw, ih) = dims(img)?;
        if (iw, ih) != (mw, mh) {
            return Err(EvalError::Dimension {
                what: format!("mask of {}", rec.stem),
                expected: (ih as usize, iw as usize),
                got: (mh as usize, mw as usize),
            });
        }
    }
    Ok(())
}

fn from_layout(root: &Path) -> Result<DatasetManifest> {
    let name = root.file_name().and_then(|n| n.to_str()).unwrap_or("dataset").to_string();
    let find = |cands: &[&str]| cands.iter().map(|c| root.join(c)).find(|p| p.is_dir());
    let Some(mask_dir) = find(&MASK_DIRS) else {
        let empty = fs::read_dir(root).map_err(|e| EvalError::io(root, e))?.next().is_none();
        if empty {
            return Ok(DatasetManifest {
                name,
                records: Vec::new(),
                warnings: vec![format!("{} is empty", root.display())],
            });
        }
        return Err(EvalError::Manifest(format!(
            "{} has no mask folder (one of {})",
            root.display(),
            MASK_DIRS.join(", ")
        )));
    };
    let mut images: HashMap<String, PathBuf> = HashMap::new();
    if let Some(dir) = find(&IMAGE_DIRS) {
        for p in list_files(&dir)?.into_iter().filter(|p| has_ext(p, &IMAGE_EXTS)) {
            images.insert(stem_of(&p)?, p);
        }
    }
    let annotations = match root.join(ANNOTATION_FILE) {
        p if p.is_file() => read_annotations(&p)?,
        _ => HashMap::new(),
    };
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    for mask in list_files(&mask_dir)?.into_iter().filter(|p| has_ext(p, &["png"])) {
        let stem = stem_of(&mask)?;
        let (super_class, sub_class) = naming::classes_of(&stem);
        records.push(Record {
            image: images.remove(&stem),
            annotated: annotations.get(&stem).cloned(),
            stem,
            mask,
            super_class,
            sub_class,
        });
    }
    if records.is_empty() {
        warnings.push(format!("{} contains no masks", mask_dir.display()));
    }
    Ok(DatasetManifest { name, records, warnings })
}

fn from_raw(path: &Path, raw: Vec<RawRecord>, name: String) -> Result<DatasetManifest> {
    let base = path.parent().unwrap_or(Path::new("."));
    let records = raw
        .into_iter()
        .map(|r| {
            let mask = base.join(&r.mask);
            let stem = stem_of(&mask)?;
            let (sup, sub) = naming::classes_of(&stem);
            Ok(Record {
                image: r.image.filter(|s| !s.is_empty()).map(|s| base.join(s)),
                super_class: r.super_class.filter(|s| !s.is_empty()).unwrap_or(sup),
                sub_class: r.sub_class.filter(|s| !s.is_empty()).unwrap_or(sub),
                annotated: r.attributes.as_deref().map(parse_attribute_list).transpose()?,
                stem,
                mask,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetManifest {
        name,
        records,
        warnings: Vec::new(),
    })
}

/// Reads a manifest from a dataset folder (image and mask sub-folders), or
/// from a CSV (`image,mask,super_class,sub_class,attributes`) or JSON
/// (`{"name", "records": [...]}`) file whose paths are relative to the file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let manifest = if path.is_dir() {
        from_layout(path)?
    } else {
        let default_name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => {
                let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
                let raw: RawManifest =
                    serde_json::from_str(&text).map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
                from_raw(path, raw.records, raw.name.unwrap_or(default_name))?
            }
            Some(e) if e.eq_ignore_ascii_case("csv") => {
                let mut reader =
                    csv::Reader::from_path(path).map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
                let raw = reader
                    .deserialize()
                    .collect::<std::result::Result<Vec<RawRecord>, _>>()
                    .map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
                from_raw(path, raw, default_name)?
            }
            _ => {
                return Err(EvalError::Manifest(format!(
                    "{} is neither a folder nor a .csv/.json manifest",
                    path.display()
                )))
            }
        }
    };
    for rec in &manifest.records {
        check_record(rec)?;
    }
    Ok(manifest)
}
