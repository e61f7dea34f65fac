//! Label-preserving image transforms applied to training samples.

use rand::Rng;

use crate::datasets::ImageSample;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Mirror left-right with probability 1/2.
    pub flip_horizontal: bool,
    pub rotation: bool,
    pub contrast: bool,
    /// Rotation angles are drawn from `[-max_rotation, max_rotation)` radians.
    pub max_rotation: f64,
    pub contrast_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::disabled()
    }
}

impl AugmentConfig {
    pub const MAX_ROTATION: f64 = 0.05;
    pub const CONTRAST_RANGE: (f64, f64) = (0.9, 1.1);

    pub fn disabled() -> Self {
        Self {
            flip_horizontal: false,
            rotation: false,
            contrast: false,
            max_rotation: Self::MAX_ROTATION,
            contrast_range: Self::CONTRAST_RANGE,
        }
    }

    /// Hand-written digits: rotation and contrast.
    pub fn digits() -> Self {
        Self {
            rotation: true,
            contrast: true,
            ..Self::disabled()
        }
    }

    /// Fashion-MNIST and cat/dog: flip and rotation.
    pub fn flip_rotate() -> Self {
        Self {
            flip_horizontal: true,
            rotation: true,
            ..Self::disabled()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.flip_horizontal || self.rotation || self.contrast
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.contrast_range;
        if !(self.max_rotation >= 0.0 && self.max_rotation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "max_rotation must be a finite non-negative angle, got {}",
                self.max_rotation
            )));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "contrast range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

/// Mirrors columns: `(x, y) ↦ (W−1−x, y)`.
pub fn flip_h(img: &ImageSample) -> ImageSample {
    let pixels = img
        .pixels
        .chunks_exact(img.width)
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    ImageSample {
        pixels,
        ..img.clone()
    }
}

/// Rotates about the image center with bilinear sampling; samples falling
/// outside the image read as 0.
pub fn rotate(img: &ImageSample, angle: f64, cfg: &AugmentConfig) -> Result<ImageSample> {
    if angle.is_nan() || angle.abs() > cfg.max_rotation {
        return Err(Error::AngleOutOfBounds {
            angle,
            max: cfg.max_rotation,
        });
    }
    if angle == 0.0 {
        return Ok(img.clone());
    }
    let (h, w) = (img.height, img.width);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (s, c) = angle.sin_cos();
    let sample = |y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
            0.0
        } else {
            img.at(y as usize, x as usize)
        }
    };
    let mut pixels = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = cx + c * dx + s * dy;
            let sy = cy - s * dx + c * dy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let v = sample(y0, x0) * (1.0 - fx) * (1.0 - fy)
                + sample(y0, x0 + 1) * fx * (1.0 - fy)
                + sample(y0 + 1, x0) * (1.0 - fx) * fy
                + sample(y0 + 1, x0 + 1) * fx * fy;
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(ImageSample {
        pixels,
        ..img.clone()
    })
}

/// `mean + factor·(img − mean)`, clamped to `[0, 1]`.
pub fn contrast(img: &ImageSample, factor: f64, cfg: &AugmentConfig) -> Result<ImageSample> {
    let (lo, hi) = cfg.contrast_range;
    if !(lo..=hi).contains(&factor) {
        return Err(Error::FactorOutOfBounds { factor, lo, hi });
    }
    let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
    let pixels = img
        .pixels
        .iter()
        .map(|&p| (mean + factor * (p - mean)).clamp(0.0, 1.0))
        .collect();
    Ok(ImageSample {
        pixels,
        ..img.clone()
    })
}

/// Random choices for one augmented sample; `None` where the transform is disabled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentDraw {
    pub flip: Option<bool>,
    pub angle: Option<f64>,
    pub factor: Option<f64>,
}

/// Draws in the fixed order flip, angle, factor.
pub fn draw<R: Rng + ?Sized>(cfg: &AugmentConfig, rng: &mut R) -> AugmentDraw {
    let flip = cfg.flip_horizontal.then(|| rng.gen_bool(0.5));
    let angle = cfg.rotation.then(|| {
        if cfg.max_rotation > 0.0 {
            rng.gen_range(-cfg.max_rotation..cfg.max_rotation)
        } else {
            0.0
        }
    });
    let factor = cfg.contrast.then(|| {
        let (lo, hi) = cfg.contrast_range;
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    });
    AugmentDraw {
        flip,
        angle,
        factor,
    }
}

/// Applies the enabled transforms in the order flip, rotate, contrast.
pub fn augment_sample<R: Rng + ?Sized>(
    img: &ImageSample,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> ImageSample {
    let d = draw(cfg, rng);
    let mut out = if d.flip == Some(true) {
        flip_h(img)
    } else {
        img.clone()
    };
    if let Some(angle) = d.angle {
        out = rotate(&out, angle, cfg).expect("angle drawn within bounds");
    }
    if let Some(factor) = d.factor {
        out = contrast(&out, factor, cfg).expect("factor drawn within bounds");
    }
    out
}
