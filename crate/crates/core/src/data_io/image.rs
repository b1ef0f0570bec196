//! RGB images and their on-disk formats.
//!
//! PPM (P3/P6) is parsed natively; PNG goes through the `image` codec.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An H×W RGB image, row-major HWC, values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Input(format!(
                "degenerate image {height}x{width}"
            )));
        }
        if data.len() != height * width * 3 {
            return Err(Error::Input(format!(
                "{height}x{width} RGB image needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Image {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::raw(vec![self.height, self.width, 3], self.data.clone())
    }

    /// Bilinear resample to `height`×`width` with half-pixel centres; the
    /// aspect ratio is not preserved.
    pub fn resize(&self, height: usize, width: usize) -> Image {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let taps = |dst: usize, scale: f64, len: usize| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            (lo, hi, src - lo as f64)
        };
        Image::from_fn(height, width, |y, x, c| {
            let (y0, y1, fy) = taps(y, sy, self.height);
            let (x0, x1, fx) = taps(x, sx, self.width);
            let top = self.pixel(y0, x0, c) * (1.0 - fx) + self.pixel(y0, x1, c) * fx;
            let bottom = self.pixel(y1, x0, c) * (1.0 - fx) + self.pixel(y1, x1, c) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::Input(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Image::from_fn(height, width, |y, x, c| {
            self.pixel(top + y, left + x, c)
        }))
    }

    /// 8-bit quantisation, `round(255 · v)` clamped to 0..=255.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_u8(height: usize, width: usize, bytes: &[u8]) -> Result<Image> {
        Image::new(
            height,
            width,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }
}

pub fn encode_ppm(image: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.to_u8());
    out
}

pub fn write_ppm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

/// Parses binary (P6) or ASCII (P3) PPM with any maxval up to 65535.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let bad = |reason: &str| Error::Input(format!("PPM: {reason}"));
    let mut pos = 0;
    let mut token = || -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token().ok_or_else(|| bad("empty file"))?;
    let mut num = |what: &str| -> Result<usize> {
        token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("missing {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range"));
    }
    let count = width * height * 3;
    let scale = maxval as f64;
    let data: Vec<f64> = match magic.as_str() {
        "P3" => (0..count)
            .map(|_| num("sample").map(|v| v as f64 / scale))
            .collect::<Result<_>>()?,
        "P6" => {
            // Exactly one whitespace byte separates maxval from the raster.
            let raster = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if raster.len() < need {
                return Err(bad("raster truncated"));
            }
            if wide {
                raster[..need]
                    .chunks_exact(2)
                    .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) / scale)
                    .collect()
            } else {
                raster[..need].iter().map(|&b| f64::from(b) / scale).collect()
            }
        }
        other => return Err(bad(&format!("unsupported magic {other}"))),
    };
    Image::new(height, width, data)
}

pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("ppm" | "pnm" | "png")
    )
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let wrap = |e: Error| Error::Image {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    match ext.as_deref() {
        Some("ppm" | "pnm") => decode_ppm(&bytes).map_err(wrap),
        Some("png") => {
            let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
                .map_err(|e| Error::Image {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?
                .to_rgb8();
            let (w, h) = img.dimensions();
            Image::from_u8(h as usize, w as usize, img.as_raw()).map_err(wrap)
        }
        _ => Err(Error::Image {
            path: path.to_path_buf(),
            reason: "unsupported image extension".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_8bit() {
        let img = Image::from_fn(3, 5, |y, x, c| ((y * 5 + x) * 3 + c) as f64 / 64.0);
        let back = decode_ppm(&encode_ppm(&img)).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
    }

    #[test]
    fn ascii_ppm_with_comments() {
        let text = b"P3\n# a comment\n2 1\n255\n255 0 0  0 0 255\n";
        let img = decode_ppm(text).unwrap();
        assert_eq!((img.height(), img.width()), (1, 2));
        assert_eq!(img.pixel(0, 0, 0), 1.0);
        assert_eq!(img.pixel(0, 1, 2), 1.0);
        assert_eq!(img.pixel(0, 1, 0), 0.0);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let mut bytes = encode_ppm(&Image::from_fn(2, 2, |_, _, _| 0.5));
        bytes.pop();
        assert!(decode_ppm(&bytes).is_err());
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let img = Image::from_fn(4, 4, |y, x, c| (y + 2 * x + c) as f64 / 20.0);
        assert_eq!(img.resize(4, 4), img);
    }

    #[test]
    fn resize_halves_width_only() {
        // Columns 0,0,1,1 collapse to 0,1; rows are untouched.
        let img = Image::from_fn(2, 4, |y, x, _| if x >= 2 { 1.0 } else { 0.0 } + y as f64 * 0.0);
        let small = img.resize(2, 2);
        for y in 0..2 {
            assert_eq!(small.pixel(y, 0, 0), 0.0);
            assert_eq!(small.pixel(y, 1, 0), 1.0);
        }
    }

    #[test]
    fn degenerate_image_is_rejected() {
        assert!(Image::new(0, 3, vec![]).is_err());
    }
}
