use std::collections::HashSet;
use std::io::IsTerminal;

use freebies::eval::{coco_map, deltas_to_csv, mean_ap, per_class_delta, ApMode, EvalConfig};
use freebies::io::{parse_detections_jsonl, read_dataset, write_json};
use freebies::{Error, Result};
use serde::Serialize;

use super::{domain, print_json, print_text, read_text, report};
use crate::args::{ApModeArg, EvalDeltaArgs, EvalMapArgs, TableFormat};

#[derive(Serialize)]
struct ClassRow {
    class: String,
    class_id: usize,
    ap: Option<f64>,
    num_gt: usize,
    num_detections: usize,
    true_positives: usize,
    false_positives: usize,
}

#[derive(Serialize)]
struct MapSummary {
    map: f64,
    coco_map: Option<f64>,
    iou_threshold: f64,
    ap_mode: ApMode,
    images: usize,
    detections: usize,
    per_class: Vec<ClassRow>,
}

fn per_class_csv(rows: &[ClassRow]) -> String {
    let mut s = String::from("class,ap,num_gt,num_detections,true_positives,false_positives\n");
    for r in rows {
        let ap = r.ap.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{ap},{},{},{},{}\n",
            r.class, r.num_gt, r.num_detections, r.true_positives, r.false_positives
        ));
    }
    s
}

fn table(summary: &MapSummary) -> String {
    let width = summary.per_class.iter().map(|r| r.class.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$}  {:>8}  {:>6}  {:>6}\n", "class", "AP", "gt", "dets");
    for r in &summary.per_class {
        let ap = r.ap.map(|v| format!("{:.4}", v)).unwrap_or_else(|| "-".into());
        s.push_str(&format!("{:<width$}  {ap:>8}  {:>6}  {:>6}\n", r.class, r.num_gt, r.num_detections));
    }
    s.push_str(&format!("{:<width$}  {:>8.4}\n", "mAP", summary.map));
    if let Some(c) = summary.coco_map {
        s.push_str(&format!("{:<width$}  {:>8.4}\n", "mAP@[.5:.95]", c));
    }
    s
}

pub fn map(args: &EvalMapArgs) -> Result<()> {
    let ds = read_dataset(&args.gt, args.strict)?;
    let dets = parse_detections_jsonl(&read_text(&args.dets)?)?;
    let known: HashSet<&str> = ds.index.samples.iter().map(|s| s.image_id.as_str()).collect();
    let stray = dets.iter().filter(|d| !known.contains(d.image_id.as_str())).count();
    if stray > 0 {
        log::warn!("{stray} detections refer to images missing from the ground truth; they count as false positives");
    }
    let mode = match args.ap_mode {
        ApModeArg::Voc07 => ApMode::Voc07ElevenPoint,
        ApModeArg::All => ApMode::VocAllPoints,
    };
    let cfg = EvalConfig::new(args.iou, mode)?;
    let gts = ds.index.ground_truth();
    let classes = &ds.index.classes;
    let r = mean_ap(&dets, &gts, classes.len(), &cfg)?;
    let coco = if args.coco_range {
        Some(coco_map(&dets, &gts, classes.len(), mode)?)
    } else {
        None
    };
    let summary = MapSummary {
        map: r.map,
        coco_map: coco,
        iou_threshold: r.iou_threshold,
        ap_mode: r.ap_mode,
        images: ds.index.samples.len(),
        detections: dets.len(),
        per_class: r
            .per_class
            .iter()
            .map(|c| ClassRow {
                class: classes[c.class_id].clone(),
                class_id: c.class_id,
                ap: c.ap,
                num_gt: c.num_gt,
                num_detections: c.num_detections,
                true_positives: c.true_positives,
                false_positives: c.false_positives,
            })
            .collect(),
    };
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
        let csv_path = out.join("per_class.csv");
        std::fs::write(&csv_path, per_class_csv(&summary.per_class)).map_err(|e| Error::Io {
            path: csv_path,
            source: e,
        })?;
        write_json(&out.join("summary.json"), &report("eval map", args, &summary))?;
    }
    if std::io::stdout().is_terminal() {
        print_text(&table(&summary))
    } else {
        print_json(&report("eval map", args, &summary))
    }
}

/// Reads `class` and `ap` columns; rows with an empty AP are skipped.
fn read_ap_table(doc: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = doc.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| domain("AP table is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| Error::Parse {
            location: "line 1".into(),
            message: format!("missing {name:?} column"),
        })
    };
    let (ci, ai) = (find("class")?, find("ap")?);
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |message: String| Error::Parse {
            location: format!("line {}", i + 1),
            message,
        };
        let (Some(class), Some(ap)) = (fields.get(ci), fields.get(ai)) else {
            return Err(err(format!("expected {} columns", cols.len())));
        };
        if ap.is_empty() {
            continue;
        }
        let ap: f64 = ap.parse().map_err(|e| err(format!("ap {ap:?}: {e}")))?;
        out.push((class.to_string(), ap));
    }
    Ok(out)
}

pub fn delta(args: &EvalDeltaArgs) -> Result<()> {
    let a = read_ap_table(&read_text(&args.a)?)?;
    let b = read_ap_table(&read_text(&args.b)?)?;
    let deltas = per_class_delta(&a, &b)?;
    match args.format {
        TableFormat::Csv => print_text(&deltas_to_csv(&deltas)),
        TableFormat::Json => {
            #[derive(Serialize)]
            struct Body<T> {
                deltas: T,
            }
            print_json(&report("eval delta", args, Body { deltas }))
        }
    }
}
