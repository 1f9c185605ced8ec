//! Sample-level data augmentation: constrained random crop, random
//! expansion, random resize with random interpolation, color jitter and
//! horizontal flip, composed by an [`AugmentPolicy`].
//!
//! Single-stage detectors get the full geometric suite. Multi-stage detectors
//! only get resizing and flipping; crop and expansion are rejected for them
//! when the policy is built.

mod color;
mod crop;
mod expand;
mod resize;

pub use color::{apply_jitter, color_jitter, hsv_to_rgb, rgb_to_hsv, ColorJitterConfig, JitterParams, LUMA};
pub use crop::{crop_sample, random_crop, CropConstraint, CropRect};
pub use expand::{expand_placement, expand_with, random_expand, ExpandPlacement};
pub use resize::{
    random_resize, resize_image, resize_sample, short_side_size, InterpChoice, Interpolation,
};
pub(crate) use resize::resample_plane;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::sample::{hflip, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    SingleStage,
    MultiStage,
}

/// IoU floors the single-stage crop picks from on each call; `None` means
/// unconstrained.
pub const CROP_MIN_IOU_CHOICES: [Option<f64>; 6] =
    [None, Some(0.1), Some(0.3), Some(0.5), Some(0.7), Some(0.9)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    ColorJitter(ColorJitterConfig),
    Expand {
        max_ratio: f64,
        fill: [f64; 3],
    },
    Crop {
        constraint: CropConstraint,
        /// When non-empty, each call replaces `constraint.min_iou` with a
        /// uniform pick from this list.
        min_iou_choices: Vec<Option<f64>>,
    },
    Resize {
        height: usize,
        width: usize,
        interp: InterpChoice,
    },
    ResizeShortSide {
        short: usize,
        long_cap: usize,
        interp: InterpChoice,
    },
    HFlip,
}

impl Transform {
    fn is_geometric_sampling(&self) -> bool {
        matches!(self, Transform::Crop { .. } | Transform::Expand { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Transform::ColorJitter(c) => c.validate(),
            Transform::Expand { max_ratio, fill } => {
                if !(*max_ratio >= 1.0 && max_ratio.is_finite()) {
                    return Err(Error::domain(format!("expansion ratio {max_ratio} must be >= 1")));
                }
                if fill.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::domain(format!("expansion fill {fill:?} outside [0, 1]")));
                }
                Ok(())
            }
            Transform::Crop {
                constraint,
                min_iou_choices,
            } => {
                constraint.validate()?;
                for choice in min_iou_choices {
                    CropConstraint {
                        min_iou: *choice,
                        ..*constraint
                    }
                    .validate()?;
                }
                Ok(())
            }
            Transform::Resize { height, width, .. } => {
                if *height == 0 || *width == 0 {
                    return Err(Error::domain("resize target must be at least 1x1"));
                }
                Ok(())
            }
            Transform::ResizeShortSide { short, long_cap, .. } => {
                if *short == 0 || long_cap < short {
                    return Err(Error::domain(format!(
                        "short side {short} / long cap {long_cap} are inconsistent"
                    )));
                }
                Ok(())
            }
            Transform::HFlip => Ok(()),
        }
    }

    pub fn apply(&self, s: &Sample, rng: &mut RngState) -> Result<Sample> {
        match self {
            Transform::ColorJitter(c) => Ok(Sample {
                image: color_jitter(&s.image, c, rng)?,
                labels: s.labels.clone(),
            }),
            Transform::Expand { max_ratio, fill } => random_expand(s, *max_ratio, *fill, rng),
            Transform::Crop {
                constraint,
                min_iou_choices,
            } => {
                let mut c = *constraint;
                if !min_iou_choices.is_empty() {
                    c.min_iou = min_iou_choices[rng.below(min_iou_choices.len())];
                }
                random_crop(s, &c, rng)
            }
            Transform::Resize {
                height,
                width,
                interp,
            } => random_resize(s, *height, *width, *interp, rng),
            Transform::ResizeShortSide {
                short,
                long_cap,
                interp,
            } => {
                let (th, tw) = short_side_size(s.height(), s.width(), *short, *long_cap);
                random_resize(s, th, tw, *interp, rng)
            }
            Transform::HFlip => Ok(hflip(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStep {
    pub transform: Transform,
    pub probability: f64,
}

impl PolicyStep {
    pub fn always(transform: Transform) -> Self {
        Self {
            transform,
            probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentPolicy {
    kind: PipelineKind,
    steps: Vec<PolicyStep>,
}

impl AugmentPolicy {
    pub fn new(kind: PipelineKind, steps: Vec<PolicyStep>) -> Result<Self> {
        for (i, step) in steps.iter().enumerate() {
            if !(0.0..=1.0).contains(&step.probability) {
                return Err(Error::domain(format!(
                    "step {i} probability {} outside [0, 1]",
                    step.probability
                )));
            }
            if kind == PipelineKind::MultiStage && step.transform.is_geometric_sampling() {
                return Err(Error::domain(format!(
                    "multi-stage policies cannot include {:?}",
                    step.transform
                )));
            }
            step.transform.validate()?;
        }
        Ok(Self { kind, steps })
    }

    /// Jitter, expansion, constrained crop, resize to `input_size` with a
    /// random kernel, flip with probability 0.5.
    pub fn single_stage(input_size: usize, expand_fill: [f64; 3]) -> Result<Self> {
        Self::new(
            PipelineKind::SingleStage,
            vec![
                PolicyStep::always(Transform::ColorJitter(ColorJitterConfig::default())),
                PolicyStep {
                    transform: Transform::Expand {
                        max_ratio: 4.0,
                        fill: expand_fill,
                    },
                    probability: 0.5,
                },
                PolicyStep::always(Transform::Crop {
                    constraint: CropConstraint::default(),
                    min_iou_choices: CROP_MIN_IOU_CHOICES.to_vec(),
                }),
                PolicyStep::always(Transform::Resize {
                    height: input_size,
                    width: input_size,
                    interp: InterpChoice::Random,
                }),
                PolicyStep {
                    transform: Transform::HFlip,
                    probability: 0.5,
                },
            ],
        )
    }

    /// Short side to 600 with the long side capped at 1000, flip with
    /// probability 0.5.
    pub fn multi_stage() -> Result<Self> {
        Self::new(
            PipelineKind::MultiStage,
            vec![
                PolicyStep::always(Transform::ResizeShortSide {
                    short: 600,
                    long_cap: 1000,
                    interp: InterpChoice::Fixed(Interpolation::Bilinear),
                }),
                PolicyStep {
                    transform: Transform::HFlip,
                    probability: 0.5,
                },
            ],
        )
    }

    pub fn kind(&self) -> PipelineKind {
        self.kind
    }

    pub fn steps(&self) -> &[PolicyStep] {
        &self.steps
    }
}

/// Runs each step in order, gated by its probability. Every gate consumes
/// exactly one draw, so the stream layout does not depend on outcomes.
pub fn apply_policy(s: &Sample, p: &AugmentPolicy, rng: &mut RngState) -> Result<Sample> {
    let mut out = s.clone();
    for step in &p.steps {
        if rng.chance(step.probability) {
            out = step.transform.apply(&out, rng)?;
        }
    }
    Ok(out)
}
