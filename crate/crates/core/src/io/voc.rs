//! Pascal VOC XML annotations.
//!
//! VOC stores 1-based inclusive pixel indices. They are converted to the
//! continuous convention as `(xmin - 1, ymin - 1, xmax, ymax)` on read and back
//! on write. A non-standard `<weight>` child carries the mixup loss weight;
//! it is only written when the weight differs from 1.

use roxmltree::{Document, Node};

use crate::error::{Error, Result};
use crate::eval::GroundTruthRecord;
use crate::geom::BBox;
use crate::sample::ObjectLabel;

/// The 20 Pascal VOC classes in devkit order.
pub const VOC_CLASSES: [&str; 20] = [
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa", "train",
    "tvmonitor",
];

#[derive(Debug, Clone, PartialEq)]
pub struct VocAnnotation {
    pub filename: String,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<ObjectLabel>,
}

impl VocAnnotation {
    pub fn ground_truth(&self, image_id: &str) -> Vec<GroundTruthRecord> {
        self.labels
            .iter()
            .map(|l| GroundTruthRecord {
                image_id: image_id.to_string(),
                bbox: l.bbox,
                class_id: l.class_id,
                difficult: l.difficult,
            })
            .collect()
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn text_of(node: Node, name: &str, path: &str) -> Result<String> {
    let c = child(node, name).ok_or_else(|| Error::parse(path, format!("missing <{name}>")))?;
    Ok(c.text().unwrap_or("").trim().to_string())
}

fn number(node: Node, name: &str, path: &str) -> Result<f64> {
    let raw = text_of(node, name, path)?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(format!("{path}/{name}"), format!("not a number: {raw:?}")))
}

/// Parses one annotation document against the class vocabulary.
///
/// With `strict = false`, objects whose box is degenerate after conversion
/// are skipped with a warning instead of failing the document.
pub fn parse_voc_xml(doc: &str, classes: &[String], strict: bool) -> Result<VocAnnotation> {
    let xml = Document::parse(doc).map_err(|e| Error::parse("annotation", e.to_string()))?;
    let root = xml.root_element();
    if !root.has_tag_name("annotation") {
        return Err(Error::parse(
            root.tag_name().name(),
            "root element must be <annotation>",
        ));
    }
    let filename = child(root, "filename")
        .and_then(|n| n.text())
        .unwrap_or("")
        .trim()
        .to_string();
    let size = child(root, "size").ok_or_else(|| Error::parse("annotation", "missing <size>"))?;
    let width = number(size, "width", "annotation/size")?;
    let height = number(size, "height", "annotation/size")?;
    if width < 1.0 || height < 1.0 || width.fract() != 0.0 || height.fract() != 0.0 {
        return Err(Error::parse(
            "annotation/size",
            format!("invalid image size {width}x{height}"),
        ));
    }

    let mut labels = Vec::new();
    for (i, obj) in root.children().filter(|c| c.has_tag_name("object")).enumerate() {
        let path = format!("annotation/object[{}]", i + 1);
        let name = text_of(obj, "name", &path)?;
        let class_id = classes
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::UnknownClass {
                name: name.clone(),
                vocabulary: classes.to_vec(),
            })?;
        let difficult = match child(obj, "difficult").and_then(|n| n.text()).map(str::trim) {
            None | Some("") | Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(Error::parse(
                    format!("{path}/difficult"),
                    format!("expected 0 or 1, got {other:?}"),
                ))
            }
        };
        let bndbox = child(obj, "bndbox")
            .ok_or_else(|| Error::parse(&path, "missing <bndbox>"))?;
        let bpath = format!("{path}/bndbox");
        let coords = [
            number(bndbox, "xmin", &bpath)? - 1.0,
            number(bndbox, "ymin", &bpath)? - 1.0,
            number(bndbox, "xmax", &bpath)?,
            number(bndbox, "ymax", &bpath)?,
        ];
        let bbox = match BBox::try_from(coords) {
            Ok(b) => b,
            Err(e) if strict => return Err(Error::parse(bpath, e.to_string())),
            Err(e) => {
                log::warn!("skipping {bpath}: {e}");
                continue;
            }
        };
        let weight = match child(obj, "weight") {
            Some(_) => number(obj, "weight", &path)?,
            None => 1.0,
        };
        let label = ObjectLabel::new(bbox, class_id)
            .with_difficult(difficult)
            .with_weight(weight)
            .map_err(|e| Error::parse(format!("{path}/weight"), e.to_string()))?;
        labels.push(label);
    }
    Ok(VocAnnotation {
        filename,
        width: width as usize,
        height: height as usize,
        labels,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn write_voc_xml(ann: &VocAnnotation, classes: &[String]) -> Result<String> {
    let mut s = String::new();
    s.push_str("<annotation>\n");
    s.push_str("\t<folder>JPEGImages</folder>\n");
    s.push_str(&format!("\t<filename>{}</filename>\n", escape(&ann.filename)));
    s.push_str(&format!(
        "\t<size>\n\t\t<width>{}</width>\n\t\t<height>{}</height>\n\t\t<depth>3</depth>\n\t</size>\n",
        ann.width, ann.height
    ));
    s.push_str("\t<segmented>0</segmented>\n");
    for l in &ann.labels {
        let name = classes.get(l.class_id).ok_or_else(|| {
            Error::domain(format!("class id {} outside vocabulary of {}", l.class_id, classes.len()))
        })?;
        let b = l.bbox;
        s.push_str("\t<object>\n");
        s.push_str(&format!("\t\t<name>{}</name>\n", escape(name)));
        s.push_str("\t\t<pose>Unspecified</pose>\n\t\t<truncated>0</truncated>\n");
        s.push_str(&format!("\t\t<difficult>{}</difficult>\n", u8::from(l.difficult)));
        s.push_str(&format!(
            "\t\t<bndbox>\n\t\t\t<xmin>{}</xmin>\n\t\t\t<ymin>{}</ymin>\n\t\t\t<xmax>{}</xmax>\n\t\t\t<ymax>{}</ymax>\n\t\t</bndbox>\n",
            b.xmin() + 1.0,
            b.ymin() + 1.0,
            b.xmax(),
            b.ymax()
        ));
        if l.weight != 1.0 {
            s.push_str(&format!("\t\t<weight>{}</weight>\n", l.weight));
        }
        s.push_str("\t</object>\n");
    }
    s.push_str("</annotation>\n");
    Ok(s)
}
