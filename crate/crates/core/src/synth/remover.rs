use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::BinaryMask;
use crate::error::{Error, Result};
use crate::features::ImageBuffer;

/// Built-in stand-ins for object removers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Remover {
    /// Copies the object-free rendering into the mask: a perfect remover.
    GtPaste,
    /// Fills the mask with the mean color of the unmasked pixels.
    MeanFill,
    /// Fills the mask with seeded uniform noise.
    NoiseFill { seed: u64 },
    /// Returns the input unchanged.
    NoRemoval,
}

impl Remover {
    pub const ALL: [Remover; 4] = [
        Remover::GtPaste,
        Remover::MeanFill,
        Remover::NoiseFill { seed: 0 },
        Remover::NoRemoval,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Remover::GtPaste => "gt_paste",
            Remover::MeanFill => "mean_fill",
            Remover::NoiseFill { .. } => "noise_fill",
            Remover::NoRemoval => "no_removal",
        }
    }
}

impl fmt::Display for Remover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Remover {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Remover::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown remover {s:?}")))
    }
}

/// Runs `method` on `with` inside `mask`. Off-mask pixels are always
/// copied from `with`. When the mask covers the whole frame, mean fill
/// uses mid-gray.
pub fn apply_remover(
    with: &ImageBuffer,
    without: &ImageBuffer,
    mask: &BinaryMask,
    method: Remover,
) -> Result<ImageBuffer> {
    if !with.same_shape(without) {
        return Err(Error::validation(format!(
            "image shapes differ: {}x{}x{} vs {}x{}x{}",
            with.width(),
            with.height(),
            with.channels(),
            without.width(),
            without.height(),
            without.channels()
        )));
    }
    if mask.width() != with.width() || mask.height() != with.height() {
        return Err(Error::validation(format!(
            "mask is {}x{} but images are {}x{}",
            mask.width(),
            mask.height(),
            with.width(),
            with.height()
        )));
    }
    let mut out = with.clone();
    let ch = with.channels() as usize;
    let bits = mask.bits();
    match method {
        Remover::NoRemoval => {}
        Remover::GtPaste => {
            for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
                out.pixel_mut(i).copy_from_slice(without.pixel(i));
            }
        }
        Remover::MeanFill => {
            let mut sum = vec![0u64; ch];
            let mut n = 0u64;
            for (i, _) in bits.iter().enumerate().filter(|(_, &b)| !b) {
                for (s, &v) in sum.iter_mut().zip(with.pixel(i)) {
                    *s += v as u64;
                }
                n += 1;
            }
            let fill: Vec<u8> = if n == 0 {
                vec![128; ch]
            } else {
                sum.iter().map(|&s| ((s as f64) / n as f64).round() as u8).collect()
            };
            for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
                out.pixel_mut(i).copy_from_slice(&fill);
            }
        }
        Remover::NoiseFill { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
                for v in out.pixel_mut(i) {
                    *v = rng.random();
                }
            }
        }
    }
    Ok(out)
}
