//! PGM input/output, seeded Gaussian noise and synthetic test images.
//!
//! Noise is drawn from ChaCha20 (`rand_chacha`, seeded through
//! `seed_from_u64`), a counter-based stream cipher generator with a fixed,
//! platform-independent output. Pixels are visited in row-major order; each
//! consumes two 64-bit words `a, b`, mapped to `u1 = (a >> 11) * 2^-53` and
//! `u2 = (b >> 11) * 2^-53`, and the Box-Muller cosine branch
//! `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)` gives one standard normal sample.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::rof::GrayImage;

const MAXVAL: u32 = 255;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format_err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err(format!("{what} out of range")))
    }
}

/// Parses a binary (`P5`) or ASCII (`P2`) graymap with `maxval <= 255`.
/// Samples are rescaled to `[0, 255]` when `maxval < 255`.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(format_err("truncated header"));
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => return Err(format_err(format!("unsupported magic {:?}", String::from_utf8_lossy(other)))),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_err("empty image"));
    }
    if maxval == 0 || maxval > MAXVAL {
        return Err(format_err(format!("maxval {maxval} not in 1..=255")));
    }
    let scale = MAXVAL as f64 / maxval as f64;
    let count = width * height;
    let mut raw = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(format_err("missing raster separator"));
        }
        let start = h.pos + 1;
        let raster = bytes.get(start..start + count).ok_or_else(|| format_err("truncated raster"))?;
        raw.extend(raster.iter().map(|&b| b as u32));
    } else {
        for _ in 0..count {
            raw.push(h.number("sample").map_err(|_| format_err("truncated raster"))?);
        }
    }
    if let Some(bad) = raw.iter().find(|&&v| v > maxval) {
        return Err(format_err(format!("sample {bad} exceeds maxval {maxval}")));
    }
    let pixels = raw.into_iter().map(|v| if maxval == MAXVAL { v as f64 } else { v as f64 * scale }).collect();
    GrayImage::new(width, height, pixels)
}

/// Binary `P5` encoding; samples are rounded half away from zero and clamped
/// to `[0, 255]`.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), MAXVAL).into_bytes();
    out.extend(img.pixels().iter().map(|&v| v.round().clamp(0.0, MAXVAL as f64) as u8));
    out
}

/// ASCII `P2` encoding of the same samples as [`write_pgm`].
pub fn write_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n{}\n", img.width(), img.height(), MAXVAL);
    for row in img.pixels().chunks(img.width()) {
        let line: Vec<String> = row.iter().map(|&v| (v.round().clamp(0.0, 255.0) as u8).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

/// `count` independent standard normal samples for `seed`.
pub fn standard_normals(count: usize, seed: u64) -> Vec<f64> {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u1 = (rng.next_u64() >> 11) as f64 * SCALE;
            let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
            (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect()
}

/// Adds `N(0, sigma^2)` noise per pixel, then clamps to `[0, 255]`.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let noise = standard_normals(img.len(), seed);
    let pixels = img.pixels().iter().zip(noise).map(|(&p, z)| (p + sigma * z).clamp(0.0, 255.0)).collect();
    GrayImage::new(img.width(), img.height(), pixels)
}

/// Piecewise-constant test scene: dark background, a bright rectangle, a mid
/// gray disk and a thin dark bar, scaled to the image size.
pub fn phantom(width: usize, height: usize) -> Result<GrayImage> {
    let mut pixels = Vec::with_capacity(width * height);
    for i in 0..height {
        for j in 0..width {
            let y = (i as f64 + 0.5) / height as f64;
            let x = (j as f64 + 0.5) / width as f64;
            let mut v = 40.0;
            if (0.15..0.55).contains(&x) && (0.2..0.75).contains(&y) {
                v = 200.0;
            }
            if (x - 0.68).powi(2) + (y - 0.62).powi(2) < 0.22f64.powi(2) {
                v = 130.0;
            }
            if (0.1..0.9).contains(&x) && (0.06..0.12).contains(&y) {
                v = 90.0;
            }
            pixels.push(v);
        }
    }
    GrayImage::new(width, height, pixels)
}

/// The noisy phantom used by the denoising experiments.
pub fn noisy_phantom(width: usize, height: usize, sigma: f64, seed: u64) -> Result<GrayImage> {
    add_gaussian_noise(&phantom(width, height)?, sigma, seed)
}
