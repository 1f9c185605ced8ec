//! Classification targets: softmax, cross-entropy, and label smoothing for
//! softmax and sigmoid heads. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability vector over `K` classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("distribution over zero classes"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        let total = neumaier_sum(&probs);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(y: usize, num_classes: usize) -> Result<Self> {
        if y >= num_classes {
            return Err(Error::domain(format!(
                "class index {y} out of range for {num_classes} classes"
            )));
        }
        let mut probs = vec![0.0; num_classes];
        probs[y] = 1.0;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    epsilon: f64,
    num_classes: usize,
}

impl SmoothingConfig {
    pub fn new(epsilon: f64, num_classes: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::domain(format!("smoothing epsilon {epsilon} outside [0, 1)")));
        }
        if num_classes < 2 {
            return Err(Error::domain(format!(
                "label smoothing needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(Self {
            epsilon,
            num_classes,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// How the negative side of sigmoid targets is smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Each sigmoid output is its own two-class problem: `0 -> epsilon`.
    #[default]
    Epsilon,
    /// Spread epsilon over the other classes of the vector: `0 -> epsilon / (K - 1)`.
    EpsilonOverKMinus1,
}

pub fn softmax(logits: &[f64]) -> Result<ClassDistribution> {
    if logits.is_empty() {
        return Err(Error::domain("softmax of an empty logit vector"));
    }
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::domain(format!("non-finite logit {z}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ClassDistribution {
        probs: exps.into_iter().map(|e| e / total).collect(),
    })
}

/// `-sum_i q_i ln p_i`.
pub fn cross_entropy(p: &ClassDistribution, q: &ClassDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::domain(format!(
            "distribution sizes differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut loss = 0.0;
    for (i, (&pi, &qi)) in p.probs.iter().zip(&q.probs).enumerate() {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Err(Error::domain(format!(
                "infinite loss: target mass {qi} on class {i} where prediction is 0"
            )));
        }
        loss -= qi * pi.ln();
    }
    Ok(loss.max(0.0))
}

/// Gradient of `cross_entropy(softmax(logits), q)` with respect to the logits.
pub fn cross_entropy_grad(logits: &[f64], q: &ClassDistribution) -> Result<Vec<f64>> {
    let p = softmax(logits)?;
    if p.len() != q.len() {
        return Err(Error::domain("logit and target sizes differ"));
    }
    Ok(p.probs.iter().zip(&q.probs).map(|(pi, qi)| pi - qi).collect())
}

/// Smoothed one-hot target: `1 - eps` on `y`, `eps / (K - 1)` elsewhere.
pub fn smooth_onehot(y: usize, cfg: &SmoothingConfig) -> Result<ClassDistribution> {
    let k = cfg.num_classes;
    if y >= k {
        return Err(Error::domain(format!("class index {y} out of range for {k} classes")));
    }
    let off = cfg.epsilon / (k - 1) as f64;
    let mut probs = vec![off; k];
    probs[y] = 1.0 - cfg.epsilon;
    Ok(ClassDistribution { probs })
}

/// Smooths binary sigmoid targets: `1 -> 1 - eps`, `0 -> eps` (or
/// `eps / (K - 1)` with [`NegativeMode::EpsilonOverKMinus1`], `K` being the
/// vector length).
pub fn smooth_sigmoid_targets(targets: &[f64], epsilon: f64, mode: NegativeMode) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::domain(format!("smoothing epsilon {epsilon} outside [0, 1)")));
    }
    let negative = match mode {
        NegativeMode::Epsilon => epsilon,
        NegativeMode::EpsilonOverKMinus1 => {
            if targets.len() < 2 {
                return Err(Error::domain("epsilon/(K-1) smoothing needs at least 2 outputs"));
            }
            epsilon / (targets.len() - 1) as f64
        }
    };
    targets
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if t == 1.0 {
                Ok(1.0 - epsilon)
            } else if t == 0.0 {
                Ok(negative)
            } else {
                Err(Error::domain(format!("sigmoid target {i} is {t}, expected 0 or 1")))
            }
        })
        .collect()
}

/// Spread between the largest and smallest logit; 0 for fewer than two logits.
pub fn confidence_gap(logits: &[f64]) -> f64 {
    if logits.len() < 2 {
        return 0.0;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = logits.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}
