//! Key-frame detection and frame weights.
//!
//! Frames are compared with a whole-frame SSIM; a frame is key when it is
//! sufficiently different from its predecessor. Experiments usually script
//! key flags directly instead of rendering frames.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::keyed_rng;
use crate::error::{Error, Result};

const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width * height == 0 || pixels.len() != width * height {
            return Err(Error::Invalid(format!(
                "frame {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Frame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Frame::new(width, height, vec![value; width * height]).expect("non-empty frame")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn stats(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let mean = self.pixels.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self.pixels.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }
}

/// Global structural similarity of two equally sized frames.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    let (mu_a, var_a) = a.stats();
    let (mu_b, var_b) = b.stats();
    let n = a.pixels.len() as f64;
    let cov = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| (x as f64 - mu_a) * (y as f64 - mu_b))
        .sum::<f64>()
        / n;
    let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
    let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
    Ok(num / den)
}

/// Frame 1 (no predecessor) is always key; later frames are key when their
/// similarity to the previous frame drops below `threshold`.
pub fn detect_key(t: u64, prev: Option<&Frame>, cur: &Frame, threshold: f64) -> Result<bool> {
    match prev {
        Some(prev) if t > 1 => Ok(ssim(prev, cur)? < threshold),
        _ => Ok(true),
    }
}

/// Synthetic video: each scene is a random base image, every frame adds
/// independent per-pixel jitter in `[-2, 2]`, and a scene change redraws
/// the base image.
#[derive(Debug, Clone)]
pub struct FrameStream {
    width: usize,
    height: usize,
    changes: BTreeSet<u64>,
    rng: ChaCha8Rng,
    base: Vec<u8>,
    next_t: u64,
}

impl FrameStream {
    pub fn new(scene_changes: &[u64], dims: (usize, usize), seed: u64) -> Result<Self> {
        let (width, height) = dims;
        if width * height == 0 {
            return Err(Error::Invalid(format!("invalid frame dimensions {width}x{height}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = (0..width * height).map(|_| rng.random::<u8>()).collect();
        Ok(FrameStream {
            width,
            height,
            changes: scene_changes.iter().copied().collect(),
            rng,
            base,
            next_t: 1,
        })
    }
}

impl Iterator for FrameStream {
    type Item = Frame;

    fn next(&mut self) -> Option<Frame> {
        let t = self.next_t;
        self.next_t += 1;
        if t > 1 && self.changes.contains(&t) {
            for v in &mut self.base {
                *v = self.rng.random();
            }
        }
        let pixels = self
            .base
            .iter()
            .map(|&v| (v as i16 + self.rng.random_range(-2..=2)).clamp(0, 255) as u8)
            .collect();
        Some(Frame {
            width: self.width,
            height: self.height,
            pixels,
        })
    }
}

pub fn synth_stream(scene_changes: &[u64], dims: (usize, usize), frames: usize, seed: u64) -> Result<Vec<Frame>> {
    Ok(FrameStream::new(scene_changes, dims, seed)?.take(frames).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEvent {
    pub t: u64,
    pub is_key: bool,
    pub weight: f64,
}

/// Where key flags come from during a run.
#[derive(Debug, Clone)]
pub enum KeySchedule {
    /// Explicit list of key frames.
    Flags(BTreeSet<u64>),
    /// Each frame is key independently with the given probability.
    Rate { rate: f64, seed: u64 },
    /// SSIM detection on a synthetic stream.
    Ssim {
        stream: Box<FrameStream>,
        prev: Option<Frame>,
        threshold: f64,
    },
}

const TAG_KEY: u64 = 0x006b_6579;

impl KeySchedule {
    pub fn ssim(stream: FrameStream, threshold: f64) -> Self {
        KeySchedule::Ssim {
            stream: Box::new(stream),
            prev: None,
            threshold,
        }
    }

    /// Key flag of frame `t`. Must be called with `t = 1, 2, ...` in order
    /// for the SSIM variant.
    pub fn next_is_key(&mut self, t: u64) -> Result<bool> {
        match self {
            KeySchedule::Flags(set) => Ok(set.contains(&t)),
            KeySchedule::Rate { rate, seed } => Ok(keyed_rng(*seed, TAG_KEY, t, 0).random::<f64>() < *rate),
            KeySchedule::Ssim {
                stream,
                prev,
                threshold,
            } => {
                let cur = stream.next().expect("endless stream");
                let key = detect_key(t, prev.as_ref(), &cur, *threshold)?;
                *prev = Some(cur);
                Ok(key)
            }
        }
    }

    pub fn event(&mut self, t: u64, l_key: f64, l_nonkey: f64) -> Result<FrameEvent> {
        let is_key = self.next_is_key(t)?;
        Ok(FrameEvent {
            t,
            is_key,
            weight: if is_key { l_key } else { l_nonkey },
        })
    }
}
