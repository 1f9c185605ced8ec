//! Dataset ingestion and egress.
//!
//! Two on-disk layouts are supported:
//!
//! * VOC: `Annotations/<id>.xml`, images under `JPEGImages/`, and an optional
//!   `classes.txt` (one name per line; the 20 VOC classes when absent).
//! * COCO: `annotations.json` with images under `images/`.
//!
//! Written datasets always get a `manifest.json` listing every file with its
//! SHA-256.

pub mod coco;
pub mod image;
pub mod voc;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elephant::CleanObject;
use crate::error::{Error, Result};
use crate::eval::{DetectionRecord, GroundTruthRecord};
use crate::geom::BBox;
use crate::raster::ImageBuffer;
use crate::sample::{ObjectLabel, Sample};

pub use self::image::{load_image, save_image};
pub use coco::{parse_coco_json, write_coco_json};
pub use voc::{parse_voc_xml, write_voc_xml, VocAnnotation, VOC_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Voc,
    Coco,
}

impl std::str::FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voc" => Ok(SourceFormat::Voc),
            "coco" => Ok(SourceFormat::Coco),
            other => Err(Error::domain(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleEntry {
    pub image_id: String,
    /// Image file name relative to the dataset's image directory.
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<ObjectLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetIndex {
    /// Position in this list is the dense class id.
    pub classes: Vec<String>,
    /// Original COCO category id per class; empty for VOC sources.
    pub category_ids: Vec<u64>,
    pub samples: Vec<SampleEntry>,
    pub format: SourceFormat,
}

impl DatasetIndex {
    pub fn new(
        classes: Vec<String>,
        category_ids: Vec<u64>,
        samples: Vec<SampleEntry>,
        format: SourceFormat,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::domain(format!("class name {dup:?} listed twice")));
        }
        if !category_ids.is_empty() && category_ids.len() != classes.len() {
            return Err(Error::domain("category id mapping does not cover every class"));
        }
        for s in &samples {
            if let Some(l) = s.labels.iter().find(|l| l.class_id >= classes.len()) {
                return Err(Error::domain(format!(
                    "sample {} has class id {} outside the {}-class vocabulary",
                    s.image_id,
                    l.class_id,
                    classes.len()
                )));
            }
        }
        Ok(Self {
            classes,
            category_ids,
            samples,
            format,
        })
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthRecord> {
        self.samples
            .iter()
            .flat_map(|s| {
                s.labels.iter().map(|l| GroundTruthRecord {
                    image_id: s.image_id.clone(),
                    bbox: l.bbox,
                    class_id: l.class_id,
                    difficult: l.difficult,
                })
            })
            .collect()
    }
}

/// A dataset on disk: its index plus the directory holding its images.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub index: DatasetIndex,
    pub image_dir: PathBuf,
}

impl Dataset {
    pub fn image_path(&self, entry: &SampleEntry) -> PathBuf {
        self.image_dir.join(&entry.file_name)
    }

    /// Loads the image for entry `i` and checks its size against the
    /// annotation.
    pub fn load_sample(&self, i: usize) -> Result<Sample> {
        let entry = &self.index.samples[i];
        let path = self.image_path(entry);
        let image = load_image(&path)?;
        if image.width() != entry.width || image.height() != entry.height {
            return Err(Error::Codec {
                path,
                message: format!(
                    "image is {}x{} but annotation says {}x{}",
                    image.height(),
                    image.width(),
                    entry.height,
                    entry.width
                ),
            });
        }
        Sample::new(image, entry.labels.clone())
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_classes_file(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Detects the layout of `path` (VOC directory, COCO directory, or COCO JSON
/// file) and reads its index.
pub fn read_dataset(path: &Path, strict: bool) -> Result<Dataset> {
    if path.is_file() {
        let root = path.parent().unwrap_or(Path::new("."));
        let index = parse_coco_json(&read_text(path)?, strict)?;
        return Ok(Dataset {
            index,
            image_dir: root.join("images"),
        });
    }
    let coco = path.join("annotations.json");
    if coco.is_file() {
        return read_dataset(&coco, strict);
    }
    let ann_dir = path.join("Annotations");
    if ann_dir.is_dir() {
        return read_voc_dir(path, strict);
    }
    Err(Error::parse(
        path.display().to_string(),
        "not a dataset: expected annotations.json or an Annotations/ directory",
    ))
}

fn read_voc_dir(root: &Path, strict: bool) -> Result<Dataset> {
    let classes_file = root.join("classes.txt");
    let classes = if classes_file.is_file() {
        read_classes_file(&classes_file)?
    } else {
        VOC_CLASSES.iter().map(|s| s.to_string()).collect()
    };
    let ann_dir = root.join("Annotations");
    let mut xmls: Vec<PathBuf> = std::fs::read_dir(&ann_dir)
        .map_err(|e| Error::io(&ann_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "xml"))
        .collect();
    xmls.sort();
    let samples = xmls
        .par_iter()
        .map(|p| {
            let doc = read_text(p)?;
            let ann = parse_voc_xml(&doc, &classes, strict).map_err(|e| match e {
                Error::Parse { location, message } => Error::Parse {
                    location: format!("{}: {location}", p.display()),
                    message,
                },
                other => other,
            })?;
            let image_id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let file_name = if ann.filename.is_empty() {
                format!("{image_id}.jpg")
            } else {
                ann.filename
            };
            Ok(SampleEntry {
                image_id,
                file_name,
                width: ann.width,
                height: ann.height,
                labels: ann.labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        index: DatasetIndex::new(classes, Vec::new(), samples, SourceFormat::Voc)?,
        image_dir: root.join("JPEGImages"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn collect_files(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(&path, root, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
        }
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hashes every file under `dir` (except the manifest itself) and writes
/// `manifest.json`. Paths use `/` separators and are sorted.
pub fn write_manifest(dir: &Path) -> Result<Manifest> {
    let mut rel = Vec::new();
    collect_files(dir, dir, &mut rel)?;
    let mut files: Vec<ManifestEntry> = rel
        .into_iter()
        .filter(|p| p != Path::new(MANIFEST_FILE))
        .map(|p| {
            let full = dir.join(&p);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            Ok(ManifestEntry {
                path: p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<_>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        toolkit_version: crate::VERSION.to_string(),
        files,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// An output sample with the stem its files are named after.
#[derive(Debug, Clone)]
pub struct NamedSample {
    pub name: String,
    pub sample: Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteOptions {
    /// Write JPEG instead of PNG. Blended pixels will not survive exactly.
    pub lossy: bool,
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Incremental dataset output: images are written as they are produced and
/// the annotations plus manifest once all entries are known.
#[derive(Debug, Clone)]
pub struct DatasetWriter {
    out: PathBuf,
    image_dir: PathBuf,
    format: SourceFormat,
    ext: &'static str,
}

impl DatasetWriter {
    pub fn create(out: &Path, format: SourceFormat, opts: WriteOptions) -> Result<Self> {
        let image_dir = out.join(match format {
            SourceFormat::Voc => "JPEGImages",
            SourceFormat::Coco => "images",
        });
        create_dir(&image_dir)?;
        Ok(Self {
            out: out.to_path_buf(),
            image_dir,
            format,
            ext: if opts.lossy { "jpg" } else { "png" },
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Saves one image and returns its index entry. Safe to call from
    /// several threads for distinct names.
    pub fn write_sample(&self, s: &NamedSample) -> Result<SampleEntry> {
        let entry = SampleEntry {
            image_id: s.name.clone(),
            file_name: format!("{}.{}", s.name, self.ext),
            width: s.sample.width(),
            height: s.sample.height(),
            labels: s.sample.labels.clone(),
        };
        save_image(&s.sample.image, &self.image_dir.join(&entry.file_name))?;
        Ok(entry)
    }

    /// Writes annotations for `entries` (in the given order) and the manifest.
    /// The returned index is the one a reader of `out` will see.
    pub fn finish(
        self,
        classes: &[String],
        category_ids: &[u64],
        entries: Vec<SampleEntry>,
    ) -> Result<(DatasetIndex, Manifest)> {
        let mut index = DatasetIndex::new(classes.to_vec(), category_ids.to_vec(), entries, self.format)?;
        match self.format {
            SourceFormat::Voc => {
                let ann_dir = self.out.join("Annotations");
                create_dir(&ann_dir)?;
                let mut names = classes.join("\n");
                names.push('\n');
                let classes_path = self.out.join("classes.txt");
                std::fs::write(&classes_path, names).map_err(|e| Error::io(&classes_path, e))?;
                for e in &index.samples {
                    let xml = write_voc_xml(
                        &VocAnnotation {
                            filename: e.file_name.clone(),
                            width: e.width,
                            height: e.height,
                            labels: e.labels.clone(),
                        },
                        classes,
                    )?;
                    let path = ann_dir.join(format!("{}.xml", e.image_id));
                    std::fs::write(&path, xml).map_err(|err| Error::io(&path, err))?;
                }
            }
            SourceFormat::Coco => {
                let path = self.out.join("annotations.json");
                let doc = write_coco_json(&index)?;
                std::fs::write(&path, &doc).map_err(|e| Error::io(&path, e))?;
                // COCO needs numeric image and category ids; report them as written
                index = parse_coco_json(&doc, true)?;
            }
        }
        let manifest = write_manifest(&self.out)?;
        Ok((index, manifest))
    }
}

/// Writes images and annotations for `samples`, then the manifest.
pub fn write_dataset(
    out: &Path,
    classes: &[String],
    category_ids: &[u64],
    samples: &[NamedSample],
    format: SourceFormat,
    opts: WriteOptions,
) -> Result<(DatasetIndex, Manifest)> {
    if let Some(s) = samples.iter().flat_map(|s| &s.sample.labels).find(|l| l.class_id >= classes.len()) {
        return Err(Error::domain(format!(
            "class id {} outside the {}-class vocabulary",
            s.class_id,
            classes.len()
        )));
    }
    let writer = DatasetWriter::create(out, format, opts)?;
    let entries = samples
        .par_iter()
        .map(|s| writer.write_sample(s))
        .collect::<Result<Vec<_>>>()?;
    writer.finish(classes, category_ids, entries)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ImageId {
    Text(String),
    Number(u64),
}

#[derive(Deserialize)]
struct DetectionLine {
    image_id: ImageId,
    class_id: usize,
    bbox: [f64; 4],
    score: f64,
}

/// Parses detections in JSON-lines form:
/// `{"image_id": .., "class_id": .., "bbox": [xmin, ymin, xmax, ymax], "score": ..}`.
/// Blank lines are ignored.
pub fn parse_detections_jsonl(doc: &str) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (i, line) in doc.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("line {}", i + 1);
        let raw: DetectionLine =
            serde_json::from_str(line).map_err(|e| Error::parse(loc(), e.to_string()))?;
        let image_id = match raw.image_id {
            ImageId::Text(s) => s,
            ImageId::Number(n) => n.to_string(),
        };
        let bbox = BBox::try_from(raw.bbox).map_err(|e| Error::parse(loc(), e.to_string()))?;
        out.push(
            DetectionRecord::new(image_id, bbox, raw.class_id, raw.score)
                .map_err(|e| Error::parse(loc(), e.to_string()))?,
        );
    }
    Ok(out)
}

pub fn detections_to_jsonl(dets: &[DetectionRecord]) -> String {
    let mut s = String::new();
    for d in dets {
        s.push_str(&serde_json::to_string(d).expect("detections serialize"));
        s.push('\n');
    }
    s
}

/// Reads clean-scene objects, one JSON object per line with `class_id` and
/// `bbox`; other keys (such as `score`) are ignored.
pub fn parse_clean_objects_jsonl(doc: &str) -> Result<Vec<CleanObject>> {
    doc.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(format!("line {}", i + 1), e.to_string()))
        })
        .collect()
}

/// Converts an image and its labels into a [`NamedSample`].
pub fn named(name: impl Into<String>, image: ImageBuffer, labels: Vec<ObjectLabel>) -> Result<NamedSample> {
    Ok(NamedSample {
        name: name.into(),
        sample: Sample::new(image, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_lines() {
        let doc = r#"{"image_id": "000001", "class_id": 2, "bbox": [1, 2, 3, 4], "score": 0.5}

{"image_id": 17, "class_id": 0, "bbox": [0, 0, 1, 1], "score": 1.0}
"#;
        let dets = parse_detections_jsonl(doc).unwrap();
        assert_eq!(dets.len(), 2);
        assert_eq!(dets[1].image_id, "17");
        assert_eq!(parse_detections_jsonl(&detections_to_jsonl(&dets)).unwrap(), dets);
    }

    #[test]
    fn bad_detection_lines() {
        let bad_score = r#"{"image_id": "a", "class_id": 2, "bbox": [1, 2, 3, 4], "score": 1.5}"#;
        match parse_detections_jsonl(bad_score) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 1"),
            other => panic!("{other:?}"),
        }
        let bad_box = "\n{\"image_id\": \"a\", \"class_id\": 2, \"bbox\": [3, 2, 1, 4], \"score\": 0.5}";
        match parse_detections_jsonl(bad_box) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn clean_objects() {
        let objs = parse_clean_objects_jsonl("{\"class_id\": 3, \"bbox\": [0,0,2,2], \"score\": 0.9}\n").unwrap();
        assert_eq!(objs[0].class_id, 3);
    }

    #[test]
    fn duplicate_class_names_rejected() {
        let r = DatasetIndex::new(vec!["a".into(), "a".into()], vec![], vec![], SourceFormat::Voc);
        assert!(r.is_err());
    }
}
