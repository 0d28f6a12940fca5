use std::path::Path;

use crate::error::{Error, Result};
use crate::features::ImageBuffer;

/// Per-pixel removal-target indicator, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
    /// Dilation kernel this mask was produced with; 0 means undilated.
    kernel_size: u32,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
            kernel_size: 0,
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::validation(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
            kernel_size: 0,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn kernel_size(&self) -> u32 {
        self.kernel_size
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width as usize + col]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        let w = self.width as usize;
        self.bits[row * w + col] = on;
    }

    pub fn count_on(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels that are on.
    pub fn coverage(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.count_on() as f64 / self.bits.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixel-wise OR in place.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::validation(format!(
                "mask shapes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Every on-pixel of `self` is on in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Gray image with on = 255 and off = 0.
    pub fn to_image(&self) -> ImageBuffer {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("mask shape is valid")
    }

    /// Any nonzero sample is on; RGB images use the first channel.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let bits = (0..img.pixel_count()).map(|i| img.pixel(i)[0] != 0).collect();
        Self {
            width: img.width(),
            height: img.height(),
            bits,
            kernel_size: 0,
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save_png(path)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(Self::from_image(&ImageBuffer::load_png(path)?))
    }
}

/// Decodes an uncompressed COCO run-length encoding: column-major pixel
/// order, runs alternate starting with zeros.
pub fn decode_rle(counts: &[u64], height: u32, width: u32) -> Result<BinaryMask> {
    let total = height as u64 * width as u64;
    let sum: u64 = counts.iter().sum();
    if sum != total {
        return Err(Error::format(
            0,
            format!("RLE counts sum to {sum}, expected {height}x{width} = {total}"),
        ));
    }
    let mut mask = BinaryMask::empty(width, height);
    let h = height as u64;
    let mut pos = 0u64;
    for (i, &run) in counts.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + run {
                mask.set((p % h) as usize, (p / h) as usize, true);
            }
        }
        pos += run;
    }
    Ok(mask)
}

/// Inverse of [`decode_rle`].
pub fn encode_rle(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for c in 0..w {
        for r in 0..h {
            let b = mask.get(r, c);
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

/// Scanline fill of polygon rings (flat `x0, y0, x1, y1, ...` lists).
///
/// A pixel is on when its center `(x + 0.5, y + 0.5)` lies inside any ring
/// under the even–odd rule.
pub fn rasterize_polygon(rings: &[Vec<f64>], height: u32, width: u32) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(width, height);
    for (k, ring) in rings.iter().enumerate() {
        if ring.len() % 2 != 0 {
            return Err(Error::format(
                0,
                format!("polygon ring {k} has an odd number of coordinates ({})", ring.len()),
            ));
        }
        if ring.len() < 6 {
            return Err(Error::format(
                0,
                format!("polygon ring {k} has fewer than 3 points"),
            ));
        }
        let pts: Vec<(f64, f64)> = ring.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let mut xs = Vec::new();
        for row in 0..height as usize {
            let yc = row as f64 + 0.5;
            xs.clear();
            for (i, &(xi, yi)) in pts.iter().enumerate() {
                let (xj, yj) = pts[(i + pts.len() - 1) % pts.len()];
                if (yi > yc) != (yj > yc) {
                    xs.push((xj - xi) * (yc - yi) / (yj - yi) + xi);
                }
            }
            xs.sort_by(f64::total_cmp);
            for span in xs.chunks_exact(2) {
                let (lo, hi) = (span[0], span[1]);
                let first = (lo - 0.5).floor().max(0.0) as usize;
                for col in first..width as usize {
                    let xc = col as f64 + 0.5;
                    if xc >= hi {
                        break;
                    }
                    if xc >= lo {
                        mask.set(row, col, true);
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// Binary dilation with a `k×k` all-ones structuring element anchored at
/// `(⌊k/2⌋, ⌊k/2⌋)`; pixels outside the image count as off. Kernel sizes
/// 0 and 1 return a copy.
pub fn dilate(mask: &BinaryMask, kernel_size: u32) -> BinaryMask {
    let mut out = mask.clone();
    out.kernel_size = kernel_size;
    if kernel_size <= 1 {
        return out;
    }
    let (w, h) = (mask.width as usize, mask.height as usize);
    let k = kernel_size as usize;
    let a = k / 2;

    // output (r, c) sees input rows r-a ..= r+k-1-a and the same for columns
    let window = |line: &[bool], out: &mut Vec<bool>| {
        let n = line.len();
        let mut prefix = vec![0usize; n + 1];
        for (i, &b) in line.iter().enumerate() {
            prefix[i + 1] = prefix[i] + b as usize;
        }
        out.clear();
        for i in 0..n {
            let lo = i.saturating_sub(a);
            let hi = (i + k - 1 - a).min(n - 1);
            out.push(prefix[hi + 1] > prefix[lo]);
        }
    };

    let mut horizontal = vec![false; w * h];
    let mut buf = Vec::with_capacity(w.max(h));
    for r in 0..h {
        window(&mask.bits[r * w..(r + 1) * w], &mut buf);
        horizontal[r * w..(r + 1) * w].copy_from_slice(&buf);
    }
    let mut column = Vec::with_capacity(h);
    for c in 0..w {
        column.clear();
        column.extend((0..h).map(|r| horizontal[r * w + c]));
        window(&column, &mut buf);
        for (r, &b) in buf.iter().enumerate() {
            out.bits[r * w + c] = b;
        }
    }
    out
}
