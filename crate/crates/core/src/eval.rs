//! Detection evaluation: greedy IoU matching, VOC-style average precision,
//! mean AP over classes, and per-class AP comparison.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{iou, BBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub bbox: BBox,
    pub class_id: usize,
    pub score: f64,
}

impl DetectionRecord {
    pub fn new(image_id: impl Into<String>, bbox: BBox, class_id: usize, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::domain(format!("detection score {score} outside [0, 1]")));
        }
        Ok(Self {
            image_id: image_id.into(),
            bbox,
            class_id,
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub bbox: BBox,
    pub class_id: usize,
    #[serde(default)]
    pub difficult: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Mean of the interpolated precision at recall 0, 0.1, ..., 1.0.
    #[default]
    Voc07ElevenPoint,
    /// Area under the monotone (interpolated) precision/recall curve.
    VocAllPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            ap_mode: ApMode::default(),
        }
    }
}

impl EvalConfig {
    pub fn new(iou_threshold: f64, ap_mode: ApMode) -> Result<Self> {
        if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
            return Err(Error::domain(format!("IoU threshold {iou_threshold} outside (0, 1)")));
        }
        Ok(Self {
            iou_threshold,
            ap_mode,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchFlag {
    TruePositive,
    FalsePositive,
    /// Overlaps only a `difficult` ground truth; excluded from both counts.
    Ignored,
}

/// Indices of `dets` by descending score; ties keep input order.
fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy one-to-one matching in descending score order.
///
/// A detection becomes a true positive when, among the still unmatched,
/// non-difficult ground truths of its image and class, the one with highest
/// IoU reaches `iou_threshold`. Detections that instead reach the threshold
/// on a difficult ground truth are [`MatchFlag::Ignored`]. The returned flags
/// are parallel to `dets`.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_threshold: f64,
) -> Vec<MatchFlag> {
    let mut groups: HashMap<(&str, usize), Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        groups.entry((g.image_id.as_str(), g.class_id)).or_default().push(i);
    }
    let mut matched = vec![false; gts.len()];
    let mut flags = vec![MatchFlag::FalsePositive; dets.len()];
    for di in score_order(dets.iter().map(|d| d.score)) {
        let det = &dets[di];
        let Some(candidates) = groups.get(&(det.image_id.as_str(), det.class_id)) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        let mut hits_difficult = false;
        for &gi in candidates {
            let g = &gts[gi];
            let overlap = iou(&det.bbox, &g.bbox);
            if g.difficult {
                hits_difficult |= overlap >= iou_threshold;
                continue;
            }
            if matched[gi] {
                continue;
            }
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        flags[di] = match best {
            Some((gi, overlap)) if overlap >= iou_threshold => {
                matched[gi] = true;
                MatchFlag::TruePositive
            }
            _ if hits_difficult => MatchFlag::Ignored,
            _ => MatchFlag::FalsePositive,
        };
    }
    flags
}

/// Average precision of scored hits against `num_gt` ground truths.
///
/// `scored` holds `(score, is_true_positive)`; ranking is by descending score
/// with ties broken by input order. Returns 0 when `num_gt` is 0.
pub fn average_precision(scored: &[(f64, bool)], num_gt: usize, mode: ApMode) -> f64 {
    if num_gt == 0 || scored.is_empty() {
        return 0.0;
    }
    let order = score_order(scored.iter().map(|s| s.0));
    let mut tp_counts = Vec::with_capacity(order.len());
    let mut precisions = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if scored[i].1 {
            tp += 1;
        }
        tp_counts.push(tp);
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // best precision achievable at this rank or any later one
    let mut envelope = precisions.clone();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    match mode {
        ApMode::Voc07ElevenPoint => {
            let mut total = 0.0;
            for level in 0..=10usize {
                // recall >= level/10  <=>  10 * tp >= level * num_gt
                let first = tp_counts.iter().position(|&t| 10 * t >= level * num_gt);
                total += first.map_or(0.0, |k| envelope[k]);
            }
            total / 11.0
        }
        ApMode::VocAllPoints => {
            let n = num_gt as f64;
            let mut area = 0.0;
            let mut seen = 0usize;
            for (k, &t) in tp_counts.iter().enumerate() {
                if t > seen {
                    seen = t;
                    area += envelope[k] / n;
                }
            }
            area
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub class_id: usize,
    /// `None` when the class has no non-difficult ground truth.
    pub ap: Option<f64>,
    pub num_gt: usize,
    pub num_detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    pub map: f64,
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    pub per_class: Vec<ClassAp>,
}

pub fn mean_ap(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    num_classes: usize,
    cfg: &EvalConfig,
) -> Result<MapReport> {
    if let Some(d) = dets.iter().find(|d| d.class_id >= num_classes) {
        return Err(Error::domain(format!(
            "detection class {} outside the {num_classes}-class vocabulary",
            d.class_id
        )));
    }
    if let Some(g) = gts.iter().find(|g| g.class_id >= num_classes) {
        return Err(Error::domain(format!(
            "ground-truth class {} outside the {num_classes}-class vocabulary",
            g.class_id
        )));
    }
    let per_class: Vec<ClassAp> = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let class_dets: Vec<DetectionRecord> =
                dets.iter().filter(|d| d.class_id == c).cloned().collect();
            let class_gts: Vec<GroundTruthRecord> =
                gts.iter().filter(|g| g.class_id == c).cloned().collect();
            let num_gt = class_gts.iter().filter(|g| !g.difficult).count();
            let flags = match_detections(&class_dets, &class_gts, cfg.iou_threshold);
            let scored: Vec<(f64, bool)> = class_dets
                .iter()
                .zip(&flags)
                .filter(|(_, f)| **f != MatchFlag::Ignored)
                .map(|(d, f)| (d.score, *f == MatchFlag::TruePositive))
                .collect();
            let true_positives = scored.iter().filter(|s| s.1).count();
            ClassAp {
                class_id: c,
                ap: (num_gt > 0).then(|| average_precision(&scored, num_gt, cfg.ap_mode)),
                num_gt,
                num_detections: class_dets.len(),
                true_positives,
                false_positives: scored.len() - true_positives,
            }
        })
        .collect();
    let aps: Vec<f64> = per_class.iter().filter_map(|c| c.ap).collect();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    Ok(MapReport {
        map,
        iou_threshold: cfg.iou_threshold,
        ap_mode: cfg.ap_mode,
        per_class,
    })
}

/// COCO-style mAP: the mean of [`mean_ap`] over IoU thresholds 0.50:0.05:0.95.
pub fn coco_map(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    num_classes: usize,
    ap_mode: ApMode,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..10 {
        let thr = 0.5 + 0.05 * i as f64;
        let cfg = EvalConfig {
            iou_threshold: thr,
            ap_mode,
        };
        total += mean_ap(dets, gts, num_classes, &cfg)?.map;
    }
    Ok(total / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDelta {
    pub class: String,
    pub ap_a: f64,
    pub ap_b: f64,
    /// `ap_b - ap_a`
    pub delta: f64,
}

/// Signed per-class AP change from table `a` to table `b`, largest gain first.
pub fn per_class_delta(a: &[(String, f64)], b: &[(String, f64)]) -> Result<Vec<ClassDelta>> {
    let names_a: BTreeSet<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let names_b: BTreeSet<&str> = b.iter().map(|(n, _)| n.as_str()).collect();
    if names_a.len() != a.len() || names_b.len() != b.len() {
        return Err(Error::domain("AP table lists a class more than once"));
    }
    if names_a != names_b {
        let only_a: Vec<_> = names_a.difference(&names_b).collect();
        let only_b: Vec<_> = names_b.difference(&names_a).collect();
        return Err(Error::domain(format!(
            "class sets differ: only in first {only_a:?}, only in second {only_b:?}"
        )));
    }
    let lookup: HashMap<&str, f64> = b.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let mut out: Vec<ClassDelta> = a
        .iter()
        .map(|(name, ap_a)| {
            let ap_b = lookup[name.as_str()];
            ClassDelta {
                class: name.clone(),
                ap_a: *ap_a,
                ap_b,
                delta: ap_b - ap_a,
            }
        })
        .collect();
    out.sort_by(|x, y| y.delta.total_cmp(&x.delta).then_with(|| x.class.cmp(&y.class)));
    Ok(out)
}

pub fn deltas_to_csv(deltas: &[ClassDelta]) -> String {
    let mut s = String::from("class,ap_a,ap_b,delta\n");
    for d in deltas {
        s.push_str(&format!("{},{},{},{}\n", d.class, d.ap_a, d.ap_b, d.delta));
    }
    s
}
