//! Full-reference metrics over (reference, candidate) image pairs, and
//! import of externally computed per-pair distances.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::ImageBuffer;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Reference and candidate image of one scene.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub id: String,
    reference: ImageBuffer,
    candidate: ImageBuffer,
}

impl ImagePair {
    pub fn new(id: impl Into<String>, reference: ImageBuffer, candidate: ImageBuffer) -> Result<Self> {
        let id = id.into();
        if !reference.same_shape(&candidate) {
            return Err(Error::validation(format!(
                "pair {id:?}: reference is {}x{}x{}, candidate is {}x{}x{}",
                reference.width(),
                reference.height(),
                reference.channels(),
                candidate.width(),
                candidate.height(),
                candidate.channels()
            )));
        }
        Ok(Self {
            id,
            reference,
            candidate,
        })
    }

    pub fn reference(&self) -> &ImageBuffer {
        &self.reference
    }

    pub fn candidate(&self) -> &ImageBuffer {
        &self.candidate
    }

    pub fn swapped(&self) -> Self {
        Self {
            id: self.id.clone(),
            reference: self.candidate.clone(),
            candidate: self.reference.clone(),
        }
    }
}

/// Peak signal-to-noise ratio in dB over all pixels and channels;
/// `f64::INFINITY` for identical images.
pub fn psnr(pair: &ImagePair) -> f64 {
    let a = pair.reference.data();
    let b = pair.candidate.data();
    let sse: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return f64::INFINITY;
    }
    let mse = sse as f64 / a.len() as f64;
    10.0 * (255.0 * 255.0 / mse).log10()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter over valid windows only.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let src = &plane[y * w + x..y * w + x + SSIM_WINDOW];
            rows[y * ow + x] = src.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| rows[(y + i) * ow + x] * k[i]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// evaluated only where the window fits inside the image; channels are
/// averaged.
pub fn ssim(pair: &ImagePair) -> Result<f64> {
    let (w, h) = (pair.reference.width() as usize, pair.reference.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::validation(format!(
            "pair {:?}: SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}",
            pair.id
        )));
    }
    let k = gaussian_kernel();
    let c = pair.reference.channels() as usize;
    let mut total = 0.0;
    for ch in 0..c {
        let plane = |img: &ImageBuffer| -> Vec<f64> {
            img.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect()
        };
        let x = plane(&pair.reference);
        let y = plane(&pair.candidate);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        let n = mx.len();
        let mut acc = 0.0;
        for i in 0..n {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
        }
        total += acc / n as f64;
    }
    Ok(total / c as f64)
}

/// Externally computed per-pair distances (e.g. LPIPS).
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistances {
    pub values: BTreeMap<String, f64>,
}

impl PairDistances {
    pub fn mean(&self) -> f64 {
        self.values.values().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Deserialize)]
struct DistanceRow {
    id: String,
    distance: f64,
}

/// Reads an `id,distance` CSV whose ids must exactly cover `expected`.
pub fn import_pair_distances(path: &Path, expected: &[String]) -> Result<PairDistances> {
    let mut reader = open_csv(path, &["id", "distance"])?;
    let mut values = BTreeMap::new();
    for rec in reader.deserialize::<DistanceRow>() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        if !(row.distance >= 0.0 && row.distance.is_finite()) {
            return Err(Error::format(
                0,
                format!("{}: id {:?} has invalid distance {}", path.display(), row.id, row.distance),
            ));
        }
        if values.insert(row.id.clone(), row.distance).is_some() {
            return Err(Error::validation(format!("duplicate id {:?} in {}", row.id, path.display())));
        }
    }
    let want: HashSet<&str> = expected.iter().map(String::as_str).collect();
    let missing: Vec<&str> = expected
        .iter()
        .map(String::as_str)
        .filter(|id| !values.contains_key(*id))
        .collect();
    let extra: Vec<&str> = values
        .keys()
        .map(String::as_str)
        .filter(|id| !want.contains(id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::validation(format!(
            "pair distances do not match expected ids: missing {missing:?}, unexpected {extra:?}"
        )));
    }
    if values.is_empty() {
        return Err(Error::validation("pair distance file has no rows"));
    }
    Ok(PairDistances { values })
}

#[derive(Deserialize)]
struct PairingRow {
    query_id: String,
    real_id: String,
}

/// Reads a `query_id,real_id` CSV mapping each query (fake) row to the
/// real row it was produced from.
pub fn read_pairing(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = open_csv(path, &["query_id", "real_id"])?;
    let mut map = HashMap::new();
    for rec in reader.deserialize::<PairingRow>() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        if map.contains_key(&row.query_id) {
            return Err(Error::validation(format!(
                "query id {:?} is paired twice in {}",
                row.query_id,
                path.display()
            )));
        }
        map.insert(row.query_id, row.real_id);
    }
    Ok(map)
}

#[derive(Deserialize)]
struct ImagePairRow {
    id: String,
    reference: String,
    candidate: String,
}

/// Loads the images listed in an `id,reference,candidate` CSV. Relative
/// paths are taken from the CSV's directory.
pub fn read_image_pairs(path: &Path) -> Result<Vec<ImagePair>> {
    let mut reader = open_csv(path, &["id", "reference", "candidate"])?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut pairs = Vec::new();
    for rec in reader.deserialize::<ImagePairRow>() {
        let row = rec.map_err(|e| csv_error(path, e))?;
        let reference = ImageBuffer::load_png(&base.join(&row.reference))?;
        let candidate = ImageBuffer::load_png(&base.join(&row.candidate))?;
        pairs.push(ImagePair::new(row.id, reference, candidate)?);
    }
    Ok(pairs)
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::format(
            0,
            format!("{}: expected header {:?}", path.display(), header.join(",")),
        ));
    }
    Ok(reader)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(offset, format!("{}: {other:?}", path.display())),
    }
}
