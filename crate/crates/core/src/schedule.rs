//! Learning-rate schedules with optional linear warmup, and random-shape
//! planning for multi-scale training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    Step,
    Cosine,
    Constant,
}

/// An iteration-indexed learning-rate schedule.
///
/// During the first `warmup_iters` iterations the rate ramps linearly from 0
/// to `base_lr`. Cosine decay is measured over the post-warmup interval only,
/// so the two phases meet without a jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    base_lr: f64,
    total_iters: u64,
    warmup_iters: u64,
    mode: LrMode,
    step_milestones: Vec<u64>,
    step_factor: f64,
}

pub const DEFAULT_WARMUP_ITERS: u64 = 1000;

impl LrSchedule {
    pub fn new(
        mode: LrMode,
        base_lr: f64,
        total_iters: u64,
        warmup_iters: u64,
        step_milestones: Vec<u64>,
        step_factor: f64,
    ) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::domain(format!("base learning rate {base_lr} must be positive")));
        }
        if total_iters < 1 {
            return Err(Error::domain("total iterations must be at least 1"));
        }
        if warmup_iters >= total_iters {
            return Err(Error::domain(format!(
                "warmup ({warmup_iters}) must be shorter than training ({total_iters})"
            )));
        }
        if !(step_factor > 0.0 && step_factor < 1.0) {
            return Err(Error::domain(format!("step factor {step_factor} outside (0, 1)")));
        }
        if mode == LrMode::Step {
            if step_milestones.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain(format!(
                    "milestones {step_milestones:?} are not strictly increasing"
                )));
            }
            if let Some(m) = step_milestones
                .iter()
                .find(|&&m| m < warmup_iters || m >= total_iters)
            {
                return Err(Error::domain(format!(
                    "milestone {m} outside [{warmup_iters}, {total_iters})"
                )));
            }
        }
        Ok(Self {
            base_lr,
            total_iters,
            warmup_iters,
            mode,
            step_milestones,
            step_factor,
        })
    }

    pub fn cosine(base_lr: f64, total_iters: u64, warmup_iters: u64) -> Result<Self> {
        Self::new(LrMode::Cosine, base_lr, total_iters, warmup_iters, Vec::new(), 0.1)
    }

    pub fn step(
        base_lr: f64,
        total_iters: u64,
        warmup_iters: u64,
        milestones: Vec<u64>,
        factor: f64,
    ) -> Result<Self> {
        Self::new(LrMode::Step, base_lr, total_iters, warmup_iters, milestones, factor)
    }

    pub fn constant(base_lr: f64, total_iters: u64, warmup_iters: u64) -> Result<Self> {
        Self::new(LrMode::Constant, base_lr, total_iters, warmup_iters, Vec::new(), 0.1)
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    pub fn total_iters(&self) -> u64 {
        self.total_iters
    }

    pub fn warmup_iters(&self) -> u64 {
        self.warmup_iters
    }

    pub fn mode(&self) -> LrMode {
        self.mode
    }

    pub fn milestones(&self) -> &[u64] {
        &self.step_milestones
    }

    pub fn lr_at(&self, t: u64) -> Result<f64> {
        if t > self.total_iters {
            return Err(Error::domain(format!(
                "iteration {t} beyond the schedule end {}",
                self.total_iters
            )));
        }
        let (w, total) = (self.warmup_iters, self.total_iters);
        if t < w {
            return Ok(self.base_lr * t as f64 / w as f64);
        }
        let lr = match self.mode {
            LrMode::Constant => self.base_lr,
            LrMode::Cosine => {
                let progress = (t - w) as f64 / (total - w) as f64;
                self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
            LrMode::Step => {
                let passed = self.step_milestones.iter().filter(|&&m| m <= t).count();
                self.base_lr * self.step_factor.powi(passed as i32)
            }
        };
        Ok(lr.max(0.0))
    }

    /// Rows `(t, lr_at(t))` for `t = 0, every, 2*every, ...`, always ending
    /// with `t = total_iters`.
    pub fn table(&self, every: u64) -> Result<Vec<(u64, f64)>> {
        if every < 1 {
            return Err(Error::domain("table spacing must be at least 1"));
        }
        let mut rows = Vec::new();
        let mut t = 0;
        while t <= self.total_iters {
            rows.push((t, self.lr_at(t)?));
            t += every;
        }
        if rows.last().map(|r| r.0) != Some(self.total_iters) {
            rows.push((self.total_iters, self.lr_at(self.total_iters)?));
        }
        Ok(rows)
    }
}

/// Per-batch square input sizes for random-shape training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapePlan {
    pub stride: u32,
    pub min_size: u32,
    pub max_size: u32,
    /// `sizes[i]` is the side length used for batch `i`.
    pub sizes: Vec<u32>,
}

impl ShapePlan {
    pub fn candidates(&self) -> Vec<u32> {
        shape_candidates(self.stride, self.min_size, self.max_size).unwrap_or_default()
    }
}

/// Every multiple of `stride` in `[min_size, max_size]`.
pub fn shape_candidates(stride: u32, min_size: u32, max_size: u32) -> Result<Vec<u32>> {
    if stride == 0 {
        return Err(Error::domain("stride must be positive"));
    }
    if min_size == 0 || !min_size.is_multiple_of(stride) || !max_size.is_multiple_of(stride) {
        return Err(Error::domain(format!(
            "size range {min_size}..={max_size} must be positive multiples of stride {stride}"
        )));
    }
    if min_size > max_size {
        return Err(Error::domain(format!("min size {min_size} exceeds max size {max_size}")));
    }
    Ok((min_size..=max_size).step_by(stride as usize).collect())
}

pub fn plan_shapes(
    stride: u32,
    min_size: u32,
    max_size: u32,
    num_batches: usize,
    rng: &mut RngState,
) -> Result<ShapePlan> {
    let candidates = shape_candidates(stride, min_size, max_size)?;
    let sizes = (0..num_batches)
        .map(|_| candidates[rng.below(candidates.len())])
        .collect();
    Ok(ShapePlan {
        stride,
        min_size,
        max_size,
        sizes,
    })
}
