//! Batch-normalization statistics across device shards.
//!
//! Each device only sees its own slice of the batch. Aggregating per-device
//! sums and sums of squares recovers the whole-batch moments exactly, while
//! averaging per-device moments does not.
//!
//! Sums are kept in double-double precision and squares are formed with an
//! error-free product, so `sum(x^2)/n - mean^2` stays accurate even for
//! large offsets with tiny spread (e.g. values near 1e8 with variance 1e-4).

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceShard {
    pub device_id: String,
    pub values: Vec<f64>,
}

impl DeviceShard {
    pub fn new(device_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let device_id = device_id.into();
        if values.is_empty() {
            return Err(Error::domain(format!("shard {device_id:?} is empty")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("shard {device_id:?} holds non-finite value {v}")));
        }
        Ok(Self { device_id, values })
    }
}

/// Population moments of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BnStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Unevaluated `hi + lo` pair.
#[derive(Debug, Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    fn add(self, other: DoubleDouble) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        Self::from_parts(s, e)
    }

    fn add_f64(self, v: f64) -> Self {
        let (s, e) = two_sum(self.hi, v);
        Self::from_parts(s, e + self.lo)
    }

    fn mul(self, other: DoubleDouble) -> Self {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        Self::from_parts(p, e)
    }

    fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let (p, pe) = two_prod(q1, d);
        let rem = ((self.hi - p) - pe) + self.lo;
        Self::from_parts(q1, rem / d)
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Mergeable running moments: count, sum, sum of squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: usize,
    sum: DoubleDouble,
    sum_sq: DoubleDouble,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum = self.sum.add_f64(x);
        let (p, e) = two_prod(x, x);
        self.sum_sq = self.sum_sq.add(DoubleDouble::from_parts(p, e));
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum = self.sum.add(other.sum);
        self.sum_sq = self.sum_sq.add(other.sum_sq);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn stats(&self) -> Result<BnStats> {
        if self.count == 0 {
            return Err(Error::domain("no values to compute statistics over"));
        }
        let n = self.count as f64;
        let mean = self.sum.div_f64(n);
        let var = self.sum_sq.div_f64(n).add(mean.mul(mean).neg());
        Ok(BnStats {
            count: self.count,
            mean: mean.value(),
            variance: var.value().max(0.0),
        })
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Statistics one device would compute on its own.
pub fn local_stats(shard: &DeviceShard) -> Result<BnStats> {
    if shard.values.is_empty() {
        return Err(Error::domain(format!("shard {:?} is empty", shard.device_id)));
    }
    shard.values.iter().copied().collect::<Moments>().stats()
}

/// Whole-batch statistics from per-shard sums, reduced in shard order.
pub fn sync_stats(shards: &[DeviceShard]) -> Result<BnStats> {
    let mut total = Moments::default();
    for shard in shards {
        let local: Moments = shard.values.iter().copied().collect();
        total.merge(&local);
    }
    if total.count == 0 {
        return Err(Error::domain("all shards are empty"));
    }
    total.stats()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceGap {
    pub device_id: String,
    pub local: BnStats,
    pub mean_gap: f64,
    pub variance_gap: f64,
    /// `None` when the synchronized value is zero.
    pub mean_gap_relative: Option<f64>,
    pub variance_gap_relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub sync: BnStats,
    /// Average of the per-device variances, i.e. what unsynchronized BN
    /// effectively normalizes with.
    pub naive_mean_of_variances: f64,
    pub devices: Vec<DeviceGap>,
    pub max_mean_gap: f64,
    pub max_variance_gap: f64,
    pub max_gap_device: Option<String>,
}

fn relative(gap: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| gap / reference.abs())
}

pub fn divergence_report(shards: &[DeviceShard]) -> Result<DivergenceReport> {
    let sync = sync_stats(shards)?;
    let mut devices = Vec::with_capacity(shards.len());
    for shard in shards {
        let local = local_stats(shard)?;
        let mean_gap = (local.mean - sync.mean).abs();
        let variance_gap = (local.variance - sync.variance).abs();
        devices.push(DeviceGap {
            device_id: shard.device_id.clone(),
            local,
            mean_gap,
            variance_gap,
            mean_gap_relative: relative(mean_gap, sync.mean),
            variance_gap_relative: relative(variance_gap, sync.variance),
        });
    }
    let naive_mean_of_variances =
        devices.iter().map(|d| d.local.variance).sum::<f64>() / devices.len() as f64;
    let max_mean_gap = devices.iter().map(|d| d.mean_gap).fold(0.0, f64::max);
    let max_variance_gap = devices.iter().map(|d| d.variance_gap).fold(0.0, f64::max);
    let max_gap_device = devices
        .iter()
        .max_by(|a, b| {
            (a.variance_gap, a.mean_gap)
                .partial_cmp(&(b.variance_gap, b.mean_gap))
                .expect("finite gaps")
        })
        .filter(|d| d.variance_gap > 0.0 || d.mean_gap > 0.0)
        .map(|d| d.device_id.clone());
    Ok(DivergenceReport {
        sync,
        naive_mean_of_variances,
        devices,
        max_mean_gap,
        max_variance_gap,
        max_gap_device,
    })
}

/// Groups `(device_id, value)` rows into shards, in order of first appearance.
pub fn shards_from_rows<I, S>(rows: I) -> Result<Vec<DeviceShard>>
where
    I: IntoIterator<Item = (S, f64)>,
    S: Into<String>,
{
    let mut order: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (id, v) in rows {
        let id = id.into();
        match order.iter().position(|d| *d == id) {
            Some(i) => values[i].push(v),
            None => {
                order.push(id);
                values.push(vec![v]);
            }
        }
    }
    order
        .into_iter()
        .zip(values)
        .map(|(id, vals)| DeviceShard::new(id, vals))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shard(id: &str, v: &[f64]) -> DeviceShard {
        DeviceShard::new(id, v.to_vec()).unwrap()
    }

    #[test]
    fn local_examples() {
        let s = local_stats(&shard("a", &[1.0, 2.0])).unwrap();
        assert_eq!((s.mean, s.variance), (1.5, 0.25));
        assert_eq!(local_stats(&shard("a", &[3.0])).unwrap().variance, 0.0);
        assert_eq!(local_stats(&shard("a", &[7.25; 9])).unwrap().variance, 0.0);
        assert!(DeviceShard::new("e", vec![]).is_err());
    }

    #[test]
    fn sync_examples() {
        let shards = [shard("0", &[1.0, 2.0]), shard("1", &[3.0, 4.0])];
        let s = sync_stats(&shards).unwrap();
        assert_eq!((s.mean, s.variance, s.count), (2.5, 1.25, 4));
        let r = divergence_report(&shards).unwrap();
        assert_eq!(r.naive_mean_of_variances, 0.25);
        let one = [shard("x", &[0.5, 9.0, -2.0])];
        assert_eq!(sync_stats(&one).unwrap(), local_stats(&one[0]).unwrap());
        assert!(sync_stats(&[]).is_err());
    }

    #[test]
    fn report_gaps() {
        let same = [shard("0", &[1.0, 5.0]), shard("1", &[1.0, 5.0])];
        let r = divergence_report(&same).unwrap();
        assert!(r.devices.iter().all(|d| d.mean_gap == 0.0 && d.variance_gap == 0.0));
        assert_eq!(r.max_gap_device, None);

        let split = [shard("0", &[0.0, 0.0]), shard("1", &[10.0, 10.0])];
        let r = divergence_report(&split).unwrap();
        assert!(r.devices.iter().all(|d| d.variance_gap == 25.0));
        assert_eq!(r.max_variance_gap, 25.0);
    }

    #[test]
    fn rows_group_by_device() {
        let shards = shards_from_rows(vec![("a", 1.0), ("b", 2.0), ("a", 3.0)]).unwrap();
        assert_eq!(shards.len(), 2);
        assert_eq!(shards[0].values, vec![1.0, 3.0]);
        assert_eq!(shards[1].device_id, "b");
    }

    #[test]
    fn large_offset_small_spread() {
        // 1e8 + {-0.01, +0.01} alternating: variance exactly 1e-4 in reals
        let values: Vec<f64> = (0..1000).map(|i| 1e8 + if i % 2 == 0 { -0.01 } else { 0.01 }).collect();
        let s = local_stats(&shard("a", &values)).unwrap();
        let half = ((1e8 + 0.01) - (1e8 - 0.01)) / 2.0;
        assert!((s.variance - half * half).abs() / (half * half) < 1e-9, "{}", s.variance);
    }
}
