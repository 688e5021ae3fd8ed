//! Pairwise image metrics on 8-bit luma planes.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGray {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageGray {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::UnsupportedImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    /// BT.601 luma, rounded half-up: `(299 R + 587 G + 114 B) / 1000`.
    pub fn from_rgb(width: u32, height: u32, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * width as usize * height as usize {
            return Err(Error::UnsupportedImage(format!(
                "{} bytes for a {width}x{height} RGB image",
                rgb.len()
            )));
        }
        let pixels = rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Decodes an 8-bit PNG (gray, gray+alpha, RGB, RGBA or palette) to luma.
/// Alpha is ignored.
pub fn decode_png(bytes: &[u8]) -> Result<ImageGray> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedImage("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!(
            "bit depth {:?}, only 8-bit images are supported",
            info.bit_depth
        )));
    }
    let (w, h) = (info.width, info.height);
    let buf = &buf[..info.buffer_size()];
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Grayscale => buf.to_vec(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => buf.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
        png::ColorType::Rgba => buf.chunks_exact(4).map(|p| luma(p[0], p[1], p[2])).collect(),
        other => return Err(Error::UnsupportedImage(format!("color type {other:?}"))),
    };
    ImageGray::new(w, h, pixels)
}

pub fn load_png(path: impl AsRef<Path>) -> Result<ImageGray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    decode_png(&bytes)
}

/// Encodes an 8-bit grayscale PNG.
pub fn encode_png(img: &ImageGray) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(&img.pixels).expect("in-memory png data");
    }
    out
}

fn check_same_size(x: &ImageGray, y: &ImageGray) -> Result<()> {
    if (x.width, x.height) != (y.width, y.height) {
        return Err(Error::ImageSizeMismatch(x.width, x.height, y.width, y.height));
    }
    Ok(())
}

pub fn mse(x: &ImageGray, y: &ImageGray) -> Result<f64> {
    check_same_size(x, y)?;
    let sum: f64 = x
        .pixels
        .iter()
        .zip(&y.pixels)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / x.pixels.len().max(1) as f64)
}

/// `10·log10(255² / MSE)` in dB; `+∞` for identical images.
pub fn psnr(x: &ImageGray, y: &ImageGray) -> Result<f64> {
    let mse = mse(x, y)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Gaussian-weighted local means over every fully contained 11×11 window
/// (no padding), computed separably. Output is `(w − 10) × (h − 10)`.
fn filter_valid(plane: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = w.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = w.iter().enumerate().map(|(k, a)| a * horiz[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5) and
/// the canonical constants `C1 = (0.01·255)²`, `C2 = (0.03·255)²`.
pub fn ssim(x: &ImageGray, y: &ImageGray) -> Result<f64> {
    check_same_size(x, y)?;
    let (width, height) = (x.width as usize, x.height as usize);
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: x.width,
            height: x.height,
            window: SSIM_WINDOW as u32,
        });
    }
    let w = gaussian_window();
    let px: Vec<f64> = x.pixels.iter().map(|&p| p as f64).collect();
    let py: Vec<f64> = y.pixels.iter().map(|&p| p as f64).collect();
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };

    let mu_x = filter_valid(&px, width, height, &w);
    let mu_y = filter_valid(&py, width, height, &w);
    let xx = filter_valid(&prod(&px, &px), width, height, &w);
    let yy = filter_valid(&prod(&py, &py), width, height, &w);
    let xy = filter_valid(&prod(&px, &py), width, height, &w);

    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = xx[i] - mx * mx;
            let var_y = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (var_x + var_y + C2))
        })
        .sum();
    Ok((total / mu_x.len() as f64).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32) -> ImageGray {
        let px = (0..w * h).map(|i| ((i * 37) % 251) as u8).collect();
        ImageGray::new(w, h, px).unwrap()
    }

    #[test]
    fn luma_rounds_half_up() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(10, 0, 0), 3);
        // 114 * 250 = 28500: exactly x.5, rounds up
        assert_eq!(luma(0, 0, 250), 29);
        assert_eq!(luma(128, 128, 128), 128);
    }

    #[test]
    fn psnr_cases() {
        let a = ImageGray::filled(4, 4, 0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = ImageGray::filled(4, 4, 10);
        assert!((psnr(&a, &b).unwrap() - 28.1308036).abs() < 1e-6);
        let c = ImageGray::filled(4, 4, 255);
        assert_eq!(psnr(&a, &c).unwrap(), 0.0);
        assert!(psnr(&a, &ImageGray::filled(4, 5, 0)).is_err());
    }

    #[test]
    fn ssim_identity_is_exact() {
        let x = ramp(23, 17);
        assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_images() {
        let x = ImageGray::filled(16, 16, 100);
        let y = ImageGray::filled(16, 16, 120);
        let want = (2.0 * 100.0 * 120.0 + C1) / (100.0f64.powi(2) + 120.0f64.powi(2) + C1);
        assert!((ssim(&x, &y).unwrap() - want).abs() < 1e-6);
        assert!((want - 0.98362).abs() < 1e-5);
    }

    #[test]
    fn ssim_is_symmetric() {
        let x = ramp(20, 20);
        let y = ImageGray::new(20, 20, x.pixels().iter().map(|p| p / 2 + 40).collect()).unwrap();
        let a = ssim(&x, &y).unwrap();
        let b = ssim(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a < 1.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let x = ImageGray::filled(10, 30, 0);
        assert!(matches!(ssim(&x, &x), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn png_round_trip_and_rgb() {
        let x = ramp(13, 12);
        assert_eq!(decode_png(&encode_png(&x)).unwrap(), x);

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[255, 0, 0, 0, 0, 255]).unwrap();
        }
        let img = decode_png(&out).unwrap();
        assert_eq!(img.pixels(), &[76, 29]);
    }
}
