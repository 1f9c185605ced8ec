use freebies::io::image::{from_byte, to_byte};
use freebies::mixup::{mix_images, sample_beta, BetaParams};
use freebies::schedule::{LrMode, LrSchedule};
use freebies::{ImageBuffer, RngState};
use wasm_bindgen::prelude::*;

fn from_rgba(rgba: &[u8], width: usize, height: usize) -> Result<ImageBuffer, String> {
    if rgba.len() != width * height * 4 {
        return Err(format!("expected {} RGBA bytes for {width}x{height}, got {}", width * height * 4, rgba.len()));
    }
    let data = rgba.chunks_exact(4).flat_map(|px| px[..3].iter().map(|&b| from_byte(b))).collect();
    ImageBuffer::from_data(height, width, data).map_err(|e| e.to_string())
}

fn to_rgba(img: &ImageBuffer) -> Vec<u8> {
    img.data()
        .chunks_exact(3)
        .flat_map(|px| [to_byte(px[0]), to_byte(px[1]), to_byte(px[2]), 255])
        .collect()
}

/// Blends two RGBA images on a canvas of their maximum extent. The result is
/// RGBA with `max(aw, bw)` columns.
pub fn mixup_rgba(
    a: &[u8],
    aw: usize,
    ah: usize,
    b: &[u8],
    bw: usize,
    bh: usize,
    lambda: f64,
) -> Result<Vec<u8>, String> {
    let a = from_rgba(a, aw, ah)?;
    let b = from_rgba(b, bw, bh)?;
    let out = mix_images(&a, &b, lambda).map_err(|e| e.to_string())?;
    Ok(to_rgba(&out))
}

/// Flattened `[t0, lr0, t1, lr1, ...]` samples of a schedule, roughly
/// `points` of them.
pub fn lr_points(
    mode: &str,
    base_lr: f64,
    total: u64,
    warmup: u64,
    milestones: &[u32],
    factor: f64,
    points: u64,
) -> Result<Vec<f64>, String> {
    let mode = match mode {
        "step" => LrMode::Step,
        "cosine" => LrMode::Cosine,
        "constant" => LrMode::Constant,
        other => return Err(format!("unknown schedule mode {other:?}")),
    };
    let milestones = milestones.iter().map(|&m| m as u64).collect();
    let s = LrSchedule::new(mode, base_lr, total, warmup, milestones, factor).map_err(|e| e.to_string())?;
    let every = (total / points.max(1)).max(1);
    let rows = s.table(every).map_err(|e| e.to_string())?;
    Ok(rows.into_iter().flat_map(|(t, lr)| [t as f64, lr]).collect())
}

/// Empirical density of `draws` Beta samples over `bins` equal bins of [0, 1].
pub fn beta_density(alpha: f64, beta: f64, draws: u32, bins: u32, seed: u64) -> Result<Vec<f64>, String> {
    if bins == 0 || draws == 0 {
        return Err("draws and bins must be positive".into());
    }
    let dist = BetaParams::new(alpha, beta).map_err(|e| e.to_string())?;
    let mut rng = RngState::new(seed);
    let mut counts = vec![0u32; bins as usize];
    for _ in 0..draws {
        let x = sample_beta(&dist, &mut rng);
        let i = ((x * bins as f64) as usize).min(bins as usize - 1);
        counts[i] += 1;
    }
    let scale = bins as f64 / draws as f64;
    Ok(counts.into_iter().map(|c| c as f64 * scale).collect())
}

#[wasm_bindgen]
pub fn mixup(a: &[u8], aw: usize, ah: usize, b: &[u8], bw: usize, bh: usize, lambda: f64) -> Result<Vec<u8>, JsError> {
    mixup_rgba(a, aw, ah, b, bw, bh, lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lr_curve(
    mode: &str,
    base_lr: f64,
    total: u64,
    warmup: u64,
    milestones: &[u32],
    factor: f64,
    points: u64,
) -> Result<Vec<f64>, JsError> {
    lr_points(mode, base_lr, total, warmup, milestones, factor, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn beta_histogram(alpha: f64, beta: f64, draws: u32, bins: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    beta_density(alpha, beta, draws, bins, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixup_canvas_and_pixels() {
        let a = [200, 0, 0, 255].repeat(2 * 3);
        let b = [0, 100, 0, 255].repeat(4);
        let out = mixup_rgba(&a, 3, 2, &b, 1, 4, 0.5).unwrap();
        assert_eq!(out.len(), 3 * 4 * 4);
        assert_eq!(&out[..4], &[100, 50, 0, 255]);
        assert_eq!(&out[4..8], &[100, 0, 0, 255]);
        assert_eq!(&out[(3 * 3) * 4..][..4], &[0, 50, 0, 255]);
        assert_eq!(&out[(3 * 3 + 1) * 4..][..4], &[0, 0, 0, 255]);
    }

    #[test]
    fn mixup_rejects_short_buffers() {
        assert!(mixup_rgba(&[0; 7], 1, 2, &[0; 4], 1, 1, 0.5).is_err());
    }

    #[test]
    fn step_curve() {
        let pts = lr_points("step", 0.001, 50_000, 0, &[40_000, 45_000], 0.1, 10).unwrap();
        let rows: Vec<(f64, f64)> = pts.chunks(2).map(|c| (c[0], c[1])).collect();
        assert_eq!(rows.first(), Some(&(0.0, 0.001)));
        assert_eq!(rows.last().unwrap().0, 50_000.0);
        assert!((rows.last().unwrap().1 - 1e-5).abs() < 1e-18);
        assert!(lr_points("linear", 0.1, 10, 0, &[], 0.1, 5).is_err());
    }

    #[test]
    fn histogram_integrates_to_one() {
        let h = beta_density(1.5, 1.5, 20_000, 20, 3).unwrap();
        let area: f64 = h.iter().sum::<f64>() / 20.0;
        assert!((area - 1.0).abs() < 1e-12);
        assert!(h[10] > h[0] && h[9] > h[19]);
    }
}
