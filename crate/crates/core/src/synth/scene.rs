use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::BinaryMask;
use crate::error::{Error, Result};
use crate::features::ImageBuffer;

/// Per-channel inclusive value ranges. Target objects are saturated red,
/// non-target objects blue-green, and the background stays inside
/// `BACKGROUND`, so target pixels never collide with anything else.
pub const TARGET_PALETTE: [(u8, u8); 3] = [(224, 255), (0, 31), (0, 31)];
pub const OTHER_PALETTE: [(u8, u8); 3] = [(40, 100), (120, 200), (180, 220)];
pub const BACKGROUND: (u8, u8) = (48, 200);

/// Placement attempts per scene before giving up on the coverage limit.
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Value-noise octaves; octave `o` uses cells of `base_cell / 2^o` px.
    pub octaves: u32,
    pub base_cell: u32,
    pub persistence: f64,
    pub min_objects: u32,
    pub max_objects: u32,
    /// Object bounding-box edge range in pixels.
    pub min_size: u32,
    pub max_size: u32,
    pub shapes: Vec<Shape>,
    /// Half-width of the uniform per-pixel jitter on object colors.
    pub texture_amplitude: u8,
    pub target_fraction: f64,
    pub max_target_coverage: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            octaves: 3,
            base_cell: 32,
            persistence: 0.5,
            min_objects: 2,
            max_objects: 6,
            min_size: 10,
            max_size: 40,
            shapes: vec![Shape::Rectangle, Shape::Ellipse],
            texture_amplitude: 8,
            target_fraction: 0.5,
            max_target_coverage: 0.4,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::validation(m));
        if self.width < 8 || self.height < 8 {
            return fail(format!("scene must be at least 8x8, got {}x{}", self.width, self.height));
        }
        if self.octaves == 0 || self.base_cell < 2 {
            return fail("value noise needs at least one octave and base_cell >= 2".into());
        }
        if !(self.persistence > 0.0 && self.persistence <= 1.0) {
            return fail(format!("persistence must lie in (0, 1], got {}", self.persistence));
        }
        if self.min_objects > self.max_objects {
            return fail(format!(
                "object count range {}..={} is empty",
                self.min_objects, self.max_objects
            ));
        }
        if self.min_size < 2 || self.min_size > self.max_size {
            return fail(format!("object size range {}..={} is invalid", self.min_size, self.max_size));
        }
        if self.max_size > self.width.min(self.height) {
            return fail(format!("objects of size {} do not fit the frame", self.max_size));
        }
        if self.shapes.is_empty() {
            return fail("at least one object shape is required".into());
        }
        if !(0.0..=1.0).contains(&self.target_fraction) {
            return fail(format!("target fraction must lie in [0, 1], got {}", self.target_fraction));
        }
        if !(self.max_target_coverage > 0.0 && self.max_target_coverage <= 1.0) {
            return fail(format!(
                "max target coverage must lie in (0, 1], got {}",
                self.max_target_coverage
            ));
        }
        Ok(())
    }

    /// Number of target objects among `n` placed objects.
    pub fn target_count(&self, n: u32) -> u32 {
        if self.target_fraction == 0.0 || n == 0 {
            0
        } else {
            ((self.target_fraction * n as f64).round() as u32).clamp(1, n)
        }
    }
}

/// A rendered with/without pair and the target-object footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub with: ImageBuffer,
    pub without: ImageBuffer,
    pub mask: BinaryMask,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy)]
struct Placed {
    shape: Shape,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl Placed {
    fn sample(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Self {
        let w = rng.random_range(spec.min_size..=spec.max_size);
        let h = rng.random_range(spec.min_size..=spec.max_size);
        Self {
            shape: spec.shapes[rng.random_range(0..spec.shapes.len())],
            x: rng.random_range(0..=spec.width - w),
            y: rng.random_range(0..=spec.height - h),
            w,
            h,
        }
    }

    fn covers(&self, row: u32, col: u32) -> bool {
        if row < self.y || row >= self.y + self.h || col < self.x || col >= self.x + self.w {
            return false;
        }
        match self.shape {
            Shape::Rectangle => true,
            Shape::Ellipse => {
                let rx = self.w as f64 / 2.0;
                let ry = self.h as f64 / 2.0;
                let dx = (col as f64 + 0.5 - self.x as f64 - rx) / rx;
                let dy = (row as f64 + 0.5 - self.y as f64 - ry) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

fn paint(
    img: &mut ImageBuffer,
    obj: &Placed,
    palette: &[(u8, u8); 3],
    amplitude: u8,
    rng: &mut ChaCha8Rng,
    mut mark: impl FnMut(usize),
) {
    let base: [i32; 3] = std::array::from_fn(|c| rng.random_range(palette[c].0..=palette[c].1) as i32);
    let a = amplitude as i32;
    let width = img.width();
    for row in obj.y..obj.y + obj.h {
        for col in obj.x..obj.x + obj.w {
            if !obj.covers(row, col) {
                continue;
            }
            let i = (row * width + col) as usize;
            let px = img.pixel_mut(i);
            for c in 0..3 {
                let v = base[c] + rng.random_range(-a..=a);
                px[c] = v.clamp(palette[c].0 as i32, palette[c].1 as i32) as u8;
            }
            mark(i);
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise normalized to [0, 1].
fn value_noise(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut acc = vec![0.0; w * h];
    let mut amp = 1.0;
    let mut total = 0.0;
    for o in 0..spec.octaves {
        let cell = (spec.base_cell >> o).max(1) as usize;
        let gw = w / cell + 2;
        let gh = h / cell + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        for y in 0..h {
            let fy = (y as f64 + 0.5) / cell as f64;
            let (y0, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..w {
                let fx = (x as f64 + 0.5) / cell as f64;
                let (x0, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                let v00 = lattice[y0 * gw + x0];
                let v01 = lattice[y0 * gw + x0 + 1];
                let v10 = lattice[(y0 + 1) * gw + x0];
                let v11 = lattice[(y0 + 1) * gw + x0 + 1];
                let top = v00 + (v01 - v00) * tx;
                let bottom = v10 + (v11 - v10) * tx;
                acc[y * w + x] += amp * (top + (bottom - top) * ty);
            }
        }
        total += amp;
        amp *= spec.persistence;
    }
    acc.iter_mut().for_each(|v| *v /= total);
    acc
}

fn background(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> ImageBuffer {
    let (lo, hi) = BACKGROUND;
    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(lo..=hi) as f64);
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(lo..=hi) as f64);
    let noise = value_noise(spec, rng);
    let mut data = Vec::with_capacity(noise.len() * 3);
    for t in noise {
        for c in 0..3 {
            let v = (c0[c] + (c1[c] - c0[c]) * t).round();
            data.push(v.clamp(lo as f64, hi as f64) as u8);
        }
    }
    ImageBuffer::new(spec.width, spec.height, 3, data).expect("background dimensions are valid")
}

/// Renders scene `index`: `without` holds background and non-target
/// objects, `with` additionally composites the target objects, and the
/// mask marks exactly the composited pixels. Pure in `(spec, index)`.
pub fn generate_scene_pair(spec: &SceneSpec, index: u64) -> Result<ScenePair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);

    let mut without = background(spec, &mut rng);
    let n = rng.random_range(spec.min_objects..=spec.max_objects);
    let n_targets = spec.target_count(n);
    for _ in 0..n - n_targets {
        let obj = Placed::sample(spec, &mut rng);
        paint(&mut without, &obj, &OTHER_PALETTE, spec.texture_amplitude, &mut rng, |_| {});
    }

    let limit = spec.max_target_coverage;
    let mut mask = BinaryMask::empty(spec.width, spec.height);
    let mut placed = Vec::new();
    if n_targets > 0 {
        let mut ok = false;
        for _ in 0..MAX_ATTEMPTS {
            placed = (0..n_targets).map(|_| Placed::sample(spec, &mut rng)).collect::<Vec<_>>();
            mask = BinaryMask::empty(spec.width, spec.height);
            for obj in &placed {
                for row in obj.y..obj.y + obj.h {
                    for col in obj.x..obj.x + obj.w {
                        if obj.covers(row, col) {
                            mask.set(row as usize, col as usize, true);
                        }
                    }
                }
            }
            if mask.coverage() <= limit {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Generation {
                scene: index,
                message: format!(
                    "no placement of {n_targets} target objects stays within coverage {limit} after {MAX_ATTEMPTS} attempts"
                ),
            });
        }
    }

    let mut with = without.clone();
    for obj in &placed {
        paint(&mut with, obj, &TARGET_PALETTE, spec.texture_amplitude, &mut rng, |_| {});
    }
    let coverage = mask.coverage();
    Ok(ScenePair {
        with,
        without,
        mask,
        coverage,
    })
}
