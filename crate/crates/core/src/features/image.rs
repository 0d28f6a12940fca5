use std::path::Path;

use ::image::{ColorType, DynamicImage};

use crate::error::{Error, Result};

/// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::validation(format!(
                "image data has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with one value per channel.
    pub fn filled(width: u32, height: u32, pixel: &[u8]) -> Result<Self> {
        let n = width as usize * height as usize;
        Self::new(width, height, pixel.len() as u8, pixel.repeat(n))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Channel values of pixel `i` (row-major index).
    pub fn pixel(&self, i: usize) -> &[u8] {
        let c = self.channels as usize;
        &self.data[i * c..(i + 1) * c]
    }

    pub fn pixel_mut(&mut self, i: usize) -> &mut [u8] {
        let c = self.channels as usize;
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Three-channel copy; gray values are replicated.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Horizontally mirrored copy.
    pub fn flip_horizontal(&self) -> ImageBuffer {
        let (w, h, c) = (self.width as usize, self.height as usize, self.channels as usize);
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..h {
            for x in (0..w).rev() {
                let i = y * w + x;
                data.extend_from_slice(&self.data[i * c..(i + 1) * c]);
            }
        }
        ImageBuffer { data, ..self.clone() }
    }

    /// Decodes an 8-bit PNG. Alpha channels are dropped; 16-bit images are
    /// rejected.
    pub fn load_png(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_png(&bytes).map_err(|e| match e {
            Error::Format { offset, message } => Error::Format {
                offset,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let img = ::image::load_from_memory_with_format(bytes, ::image::ImageFormat::Png)
            .map_err(|e| Error::format(0, format!("PNG decode failed: {e}")))?;
        let (w, h) = (img.width(), img.height());
        match img {
            DynamicImage::ImageLuma8(b) => Self::new(w, h, 1, b.into_raw()),
            DynamicImage::ImageRgb8(b) => Self::new(w, h, 3, b.into_raw()),
            DynamicImage::ImageLumaA8(_) => Self::new(w, h, 1, img.to_luma8().into_raw()),
            DynamicImage::ImageRgba8(_) => Self::new(w, h, 3, img.to_rgb8().into_raw()),
            other => Err(Error::format(
                0,
                format!("unsupported PNG color type {:?}; expected 8-bit gray or RGB", other.color()),
            )),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let color = if self.channels == 1 {
            ColorType::L8
        } else {
            ColorType::Rgb8
        };
        ::image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            color,
            ::image::ImageFormat::Png,
        )
        .map_err(|e| match e {
            ::image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::io(path, std::io::Error::other(other.to_string())),
        })
    }
}
