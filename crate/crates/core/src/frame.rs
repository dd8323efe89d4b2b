//! Image buffers shared by every module.
//!
//! [`Frame`] is a normalized (`[0, 1]`) interleaved buffer with one or three
//! channels; [`Plane`] is a single grayscale `f64` plane on an arbitrary scale
//! (the image-quality metrics take the peak value explicitly).

use std::path::Path;

use image::{imageops, DynamicImage, ImageBuffer, Luma, Rgb};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("empty frame"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "buffer of {} values does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Frame {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Frame {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let grayscale = matches!(
            img,
            DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_)
        );
        if grayscale {
            let buf = img.to_luma32f();
            Frame {
                width: buf.width() as usize,
                height: buf.height() as usize,
                channels: 1,
                data: buf.into_raw(),
            }
        } else {
            let buf = img.to_rgb32f();
            Frame {
                width: buf.width() as usize,
                height: buf.height() as usize,
                channels: 3,
                data: buf.into_raw(),
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Frame::from_dynamic(&image::open(path)?))
    }

    /// 8-bit export, values clamped to `[0, 1]` first.
    pub fn to_dynamic(&self) -> DynamicImage {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 1 {
            DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, bytes).expect("sized buffer"))
        } else {
            DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, bytes).expect("sized buffer"))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_dynamic().save(path)?;
        Ok(())
    }

    /// BT.601 luma scaled so that a white pixel maps to `peak`.
    pub fn luma(&self, peak: f64) -> Plane {
        let data = if self.channels == 1 {
            self.data.iter().map(|&v| v as f64 * peak).collect()
        } else {
            self.data
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) * peak)
                .collect()
        };
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn to_grayscale(&self) -> Frame {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Extracts the `w x h` window whose top-left corner is `(x, y)`; pixels
    /// outside the frame read as zero.
    pub fn crop_padded(&self, x: i64, y: i64, w: usize, h: usize) -> Frame {
        let c = self.channels;
        let mut out = vec![0.0f32; w * h * c];
        for dy in 0..h {
            let sy = y + dy as i64;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            for dx in 0..w {
                let sx = x + dx as i64;
                if sx < 0 || sx >= self.width as i64 {
                    continue;
                }
                let src = (sy as usize * self.width + sx as usize) * c;
                let dst = (dy * w + dx) * c;
                out[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        Frame {
            width: w,
            height: h,
            channels: c,
            data: out,
        }
    }

    /// Bilinear (triangle filter) resize.
    pub fn resize(&self, width: usize, height: usize) -> Frame {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let (w, h) = (self.width as u32, self.height as u32);
        let data = if self.channels == 1 {
            let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
                ImageBuffer::from_raw(w, h, self.data.clone()).expect("sized buffer");
            imageops::resize(&buf, width as u32, height as u32, imageops::FilterType::Triangle)
                .into_raw()
        } else {
            let buf: ImageBuffer<Rgb<f32>, Vec<f32>> =
                ImageBuffer::from_raw(w, h, self.data.clone()).expect("sized buffer");
            imageops::resize(&buf, width as u32, height as u32, imageops::FilterType::Triangle)
                .into_raw()
        };
        Frame {
            width,
            height,
            channels: self.channels,
            data,
        }
    }
}

/// Grayscale `f64` plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    /// Loads any decodable image as BT.601 luma on a `[0, 255]` scale.
    /// Loads an image as luma on the 8-bit scale. Gray images keep their
    /// integer levels exactly.
    pub fn load_luma(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?;
        let data = if img.color().has_color() {
            img.to_rgb8()
                .pixels()
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect()
        } else {
            img.to_luma8().pixels().map(|p| p[0] as f64).collect()
        };
        Ok(Plane {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        })
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A fixed-length run of equally sized frames belonging to one clip.
#[derive(Debug, Clone)]
pub struct ClipTensor {
    pub id: String,
    pub frames: Vec<Frame>,
    pub frame_rate: f64,
    /// Id of the clip this one is compared against (real <-> generated).
    pub pair_id: Option<String>,
}

impl ClipTensor {
    pub fn new(id: impl Into<String>, frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("clip has no frames"));
        };
        let (w, h, c) = (first.width, first.height, first.channels);
        if frames
            .iter()
            .any(|f| f.width != w || f.height != h || f.channels != c)
        {
            return Err(Error::invalid("clip frames differ in geometry"));
        }
        Ok(ClipTensor {
            id: id.into(),
            frames,
            frame_rate,
            pair_id: None,
        })
    }

    pub fn with_pair(mut self, pair_id: impl Into<String>) -> Self {
        self.pair_id = Some(pair_id.into());
        self
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width, channels)` of every frame.
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        let f = &self.frames[0];
        (f.height, f.width, f.channels)
    }
}
