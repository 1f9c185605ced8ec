//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Correctly rounded sum of `xs` (Shewchuk's exact partials).
pub fn fsum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in xs {
        let mut x = x;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // round the partials (largest last) to nearest, with the half-way fix-up
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `integral_0^t x^(a-1) (1-x)^(b-1) dx` for `t <= 1/2`, after the substitution
/// `x = u^(1/a)` that removes the endpoint singularity.
fn lower_beta_integral(a: f64, b: f64, t: f64) -> f64 {
    simpson(|u| (1.0 - u.powf(1.0 / a)).powf(b - 1.0), 0.0, t.powf(a), 20_000) / a
}

/// Probability mass of Beta(a, b) outside `(lo, hi)`, by quadrature of the
/// density. Requires `lo <= 1/2 <= hi`.
pub fn beta_tail_mass(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let total = lower_beta_integral(a, b, 0.5) + lower_beta_integral(b, a, 0.5);
    (lower_beta_integral(a, b, lo) + lower_beta_integral(b, a, 1.0 - hi)) / total
}

/// AP by enumerating every score threshold and reading precision/recall off
/// the detections at or above it. Scores must be distinct.
pub fn ap_by_thresholds(scored: &[(f64, bool)], num_gt: usize, all_points: bool) -> f64 {
    if num_gt == 0 || scored.is_empty() {
        return 0.0;
    }
    // (tp, kept) for each threshold
    let points: Vec<(usize, usize)> = scored
        .iter()
        .map(|&(thr, _)| {
            let kept: Vec<&(f64, bool)> = scored.iter().filter(|s| s.0 >= thr).collect();
            (kept.iter().filter(|s| s.1).count(), kept.len())
        })
        .collect();
    let best_precision_at = |min_tp_num: usize, den: usize| {
        // max precision over thresholds whose recall tp / num_gt reaches min_tp_num / den
        points
            .iter()
            .filter(|(tp, _)| tp * den >= min_tp_num * num_gt)
            .map(|&(tp, kept)| tp as f64 / kept as f64)
            .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))))
    };
    if all_points {
        let n = num_gt as f64;
        let max_tp = points.iter().map(|p| p.0).max().unwrap();
        let mut area = 0.0;
        for t in 1..=max_tp {
            area += best_precision_at(t, num_gt).unwrap() / n;
        }
        area
    } else {
        let mut total = 0.0;
        for level in 0..=10usize {
            total += best_precision_at(level, 10).unwrap_or(0.0);
        }
        total / 11.0
    }
}

/// Reference RGB -> HSV (hue in degrees), in the formulation of Python's
/// `colorsys` module.
pub fn reference_rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let maxc = r.max(g).max(b);
    let minc = r.min(g).min(b);
    let v = maxc;
    if minc == maxc {
        return (0.0, 0.0, v);
    }
    let s = (maxc - minc) / maxc;
    let rc = (maxc - r) / (maxc - minc);
    let gc = (maxc - g) / (maxc - minc);
    let bc = (maxc - b) / (maxc - minc);
    let h = if r == maxc {
        bc - gc
    } else if g == maxc {
        2.0 + rc - bc
    } else {
        4.0 + gc - rc
    };
    ((h / 6.0).rem_euclid(1.0) * 360.0, s, v)
}
