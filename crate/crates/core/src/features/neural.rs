//! ONNX inference backend. The model must take a `1×3×E×E` float tensor and
//! return the pooled activation vector (any shape with `output_dim`
//! elements).

use std::path::{Path, PathBuf};

use tract_onnx::prelude::*;

use super::image::ImageBuffer;
use crate::error::{Error, Result};

/// Preprocessing constants folded into the extractor fingerprint.
pub const PREPROCESS: &str = "bilinear-half-pixel;nchw;scale=1/127.5;offset=-1";

type Plan = std::sync::Arc<TypedSimplePlan>;

pub struct NeuralExtractor {
    plan: Plan,
    path: PathBuf,
    input_edge: usize,
    output_dim: usize,
}

impl std::fmt::Debug for NeuralExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeuralExtractor")
            .field("path", &self.path)
            .field("input_edge", &self.input_edge)
            .field("output_dim", &self.output_dim)
            .finish()
    }
}

impl NeuralExtractor {
    pub fn load(path: &Path, input_edge: u32, output_dim: usize) -> Result<Self> {
        let backend = |e: TractError| Error::Backend {
            path: path.to_owned(),
            message: format!("{e:#}"),
        };
        let edge = input_edge as usize;
        let plan = tract_onnx::onnx()
            .model_for_path(path)
            .map_err(backend)?
            .with_input_fact(0, f32::fact([1, 3, edge, edge]).into())
            .map_err(backend)?
            .into_optimized()
            .map_err(backend)?
            .into_runnable()
            .map_err(backend)?;
        Ok(Self {
            plan,
            path: path.to_owned(),
            input_edge: edge,
            output_dim,
        })
    }

    pub fn extract(&self, id: &str, image: &ImageBuffer) -> Result<Vec<f64>> {
        if image.channels() != 3 {
            return Err(Error::validation(format!(
                "image {id:?} has {} channel(s); the neural backend needs RGB",
                image.channels()
            )));
        }
        let input = preprocess(image, self.input_edge);
        let e = self.input_edge;
        let tensor = Tensor::from_shape(&[1, 3, e, e], &input).map_err(|err| self.error(err))?;
        let outputs = self
            .plan
            .run(tvec!(tensor.into()))
            .map_err(|err| self.error(err))?;
        let view = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|err| self.error(err))?;
        if view.len() != self.output_dim {
            return Err(Error::Backend {
                path: self.path.clone(),
                message: format!(
                    "model output has {} values, expected {}",
                    view.len(),
                    self.output_dim
                ),
            });
        }
        Ok(view.iter().map(|&v| v as f64).collect())
    }

    fn error(&self, e: TractError) -> Error {
        Error::Backend {
            path: self.path.clone(),
            message: format!("{e:#}"),
        }
    }
}

/// Bilinear resize of the whole image to `edge × edge` (half-pixel
/// centers), channels scaled to `[-1, 1]`, planar NCHW order.
pub fn preprocess(image: &ImageBuffer, edge: usize) -> Vec<f32> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let data = image.data();
    let mut out = vec![0f32; 3 * edge * edge];
    let sx = w as f64 / edge as f64;
    let sy = h as f64 / edge as f64;
    for oy in 0..edge {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        for ox in 0..edge {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = fx - x0 as f64;
            for c in 0..3 {
                let at = |x: usize, y: usize| data[(y * w + x) * 3 + c] as f64;
                let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
                let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
                let v = top * (1.0 - ty) + bottom * ty;
                out[c * edge * edge + oy * edge + ox] = (v / 127.5 - 1.0) as f32;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preprocess_constant_image() {
        let img = ImageBuffer::filled(7, 5, &[0, 255, 51]).unwrap();
        let t = preprocess(&img, 4);
        assert!(t[..16].iter().all(|&v| v == -1.0));
        assert!(t[16..32].iter().all(|&v| v == 1.0));
        assert!(t[32..].iter().all(|&v| (v - (51.0 / 127.5 - 1.0) as f32).abs() < 1e-7));
    }

    #[test]
    fn preprocess_identity_size_keeps_pixels() {
        let img = ImageBuffer::new(2, 1, 3, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let t = preprocess(&img, 2);
        // at matching resolution the half-pixel centers hit the samples
        assert_eq!(&t[0..2], &[-1.0, 1.0]);
    }

    #[test]
    fn missing_model_is_backend_error() {
        let err = NeuralExtractor::load(Path::new("/nonexistent/model.onnx"), 8, 4).unwrap_err();
        assert!(matches!(err, Error::Backend { .. }));
        assert!(err.to_string().contains("/nonexistent/model.onnx"));
    }
}
