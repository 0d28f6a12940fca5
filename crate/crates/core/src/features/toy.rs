//! Hermetic 64-d image descriptor used in place of a pretrained network.
//!
//! Layout: three 16-bin per-channel intensity histograms (R, G, B) followed
//! by a 16-bin histogram of gradient orientation on the luma plane. Each
//! block is L1-normalized.

use std::f64::consts::TAU;

use super::image::ImageBuffer;

pub const TOY_DIM: usize = 64;
pub const BINS: usize = 16;

/// Luma weights applied to (R, G, B).
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

pub fn toy_descriptor(image: &ImageBuffer) -> [f64; TOY_DIM] {
    let rgb = image.to_rgb();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let n = w * h;
    let mut out = [0.0; TOY_DIM];

    let mut counts = [[0usize; BINS]; 3];
    for px in rgb.data().chunks_exact(3) {
        for (ch, &v) in px.iter().enumerate() {
            counts[ch][v as usize / BINS] += 1;
        }
    }

    let luma: Vec<f64> = rgb
        .data()
        .chunks_exact(3)
        .map(|px| LUMA[0] * px[0] as f64 + LUMA[1] * px[1] as f64 + LUMA[2] * px[2] as f64)
        .collect();
    let mut orient = [0usize; BINS];
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = luma[y * w + right] - luma[y * w + left];
            let gy = luma[down * w + x] - luma[up * w + x];
            orient[orientation_bin(gx, gy)] += 1;
        }
    }

    let total = n as f64;
    for (ch, hist) in counts.iter().enumerate() {
        for (b, &c) in hist.iter().enumerate() {
            out[ch * BINS + b] = c as f64 / total;
        }
    }
    for (b, &c) in orient.iter().enumerate() {
        out[3 * BINS + b] = c as f64 / total;
    }
    out
}

/// Orientation bin of a gradient, uniform over `[0, 2π)`; zero gradients
/// land in bin 0. `gy` grows downwards.
pub fn orientation_bin(gx: f64, gy: f64) -> usize {
    if gx == 0.0 && gy == 0.0 {
        return 0;
    }
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += TAU;
    }
    ((theta / (TAU / BINS as f64)) as usize).min(BINS - 1)
}
