//! COCO JSON annotations.
//!
//! Boxes are `[x, y, w, h]` and become `(x, y, x + w, y + h)`. Category ids are
//! remapped to dense 0-based class ids in ascending id order; the original
//! ids are kept so that writing restores them. `iscrowd` maps to the
//! `difficult` flag, and an optional `"weight"` key carries the mixup weight.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::io::{DatasetIndex, SampleEntry, SourceFormat};
use crate::sample::ObjectLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoFile {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// Parses a COCO document into a dataset index.
///
/// Annotations with non-positive width or height are skipped with a warning,
/// or rejected when `strict` is set.
pub fn parse_coco_json(doc: &str, strict: bool) -> Result<DatasetIndex> {
    let file: CocoFile = serde_json::from_str(doc).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;

    let mut cats: Vec<&CocoCategory> = file.categories.iter().collect();
    cats.sort_by_key(|c| c.id);
    if cats.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::parse("categories", "duplicate category id"));
    }
    let dense: HashMap<u64, usize> = cats.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let classes: Vec<String> = cats.iter().map(|c| c.name.clone()).collect();
    let category_ids: Vec<u64> = cats.iter().map(|c| c.id).collect();

    let mut by_image: BTreeMap<u64, Vec<ObjectLabel>> = BTreeMap::new();
    for (i, ann) in file.annotations.iter().enumerate() {
        let path = format!("annotations[{i}]");
        let class_id = *dense.get(&ann.category_id).ok_or_else(|| Error::UnknownClass {
            name: ann.category_id.to_string(),
            vocabulary: classes.clone(),
        })?;
        let [x, y, w, h] = ann.bbox;
        if !(w > 0.0 && h > 0.0) {
            if strict {
                return Err(Error::parse(path, format!("box [{x}, {y}, {w}, {h}] has no area")));
            }
            log::warn!("skipping {path}: box [{x}, {y}, {w}, {h}] has no area");
            continue;
        }
        let bbox = BBox::from_xywh(x, y, w, h).map_err(|e| Error::parse(&path, e.to_string()))?;
        let label = ObjectLabel::new(bbox, class_id)
            .with_difficult(ann.iscrowd != 0)
            .with_weight(ann.weight.unwrap_or(1.0))
            .map_err(|e| Error::parse(&path, e.to_string()))?;
        by_image.entry(ann.image_id).or_default().push(label);
    }

    let mut samples = Vec::with_capacity(file.images.len());
    for img in &file.images {
        samples.push(SampleEntry {
            image_id: img.id.to_string(),
            file_name: img.file_name.clone(),
            width: img.width,
            height: img.height,
            labels: by_image.remove(&img.id).unwrap_or_default(),
        });
    }
    if let Some(orphan) = by_image.keys().next() {
        return Err(Error::parse("annotations", format!("image_id {orphan} has no image entry")));
    }
    DatasetIndex::new(classes, category_ids, samples, SourceFormat::Coco)
}

/// Renders an index as a COCO document. Image ids are the sample
/// `image_id`s when they are integers, otherwise 1-based positions.
pub fn write_coco_json(index: &DatasetIndex) -> Result<String> {
    let category_ids: Vec<u64> = if index.category_ids.len() == index.classes.len() {
        index.category_ids.clone()
    } else {
        (1..=index.classes.len() as u64).collect()
    };
    let categories = index
        .classes
        .iter()
        .zip(&category_ids)
        .map(|(name, &id)| CocoCategory {
            id,
            name: name.clone(),
            supercategory: None,
        })
        .collect();
    let numeric = index.samples.iter().all(|s| s.image_id.parse::<u64>().is_ok());
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, s) in index.samples.iter().enumerate() {
        let id = if numeric {
            s.image_id.parse().expect("checked numeric")
        } else {
            i as u64 + 1
        };
        images.push(CocoImage {
            id,
            file_name: s.file_name.clone(),
            width: s.width,
            height: s.height,
        });
        for l in &s.labels {
            let b = l.bbox;
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id: id,
                category_id: category_ids[l.class_id],
                bbox: [b.xmin(), b.ymin(), b.width(), b.height()],
                area: b.area(),
                iscrowd: u8::from(l.difficult),
                weight: (l.weight != 1.0).then_some(l.weight),
            });
        }
    }
    let file = CocoFile {
        images,
        annotations,
        categories,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("plain data serializes");
    s.push('\n');
    Ok(s)
}
