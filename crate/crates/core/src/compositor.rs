//! Pixel-space reference drawer: keeps everything outside the edited
//! object, pastes the object at its transformed location, and fills the
//! pixels it vacated.

use image::{Rgb, RgbImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::backends::{EditedImage, Provenance};
use crate::geometry::{source_pixel, warp_mask, AffineTransform, BinaryMask, GeometryError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompositeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("source mask is empty")]
    EmptySource,
    #[error("image is {image:?} but mask is {mask:?}")]
    DimensionMismatch { image: (u32, u32), mask: (u32, u32) },
}

/// How vacated pixels are filled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filler {
    /// Onion-peel inpainting: each layer takes the mean of its already-known
    /// 8-neighbors. Ignores the seed.
    #[default]
    BoundaryMean,
    /// Seeded N(0, 1) per channel, mapped from [-1, 1] to [0, 255].
    GaussianNoise,
}

impl Filler {
    pub fn name(&self) -> &'static str {
        match self {
            Filler::BoundaryMean => "boundary_mean",
            Filler::GaussianNoise => "gaussian_noise",
        }
    }
}

/// Source and target object regions. The fill region is derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendRegions {
    pub source_mask: BinaryMask,
    pub target_mask: BinaryMask,
}

impl BlendRegions {
    /// Vacated pixels: in the source region but not the target.
    pub fn fill_region(&self) -> BinaryMask {
        self.source_mask
            .and_not(&self.target_mask)
            .expect("regions share dimensions")
    }
}

pub fn regions(before: &BinaryMask, t: &AffineTransform) -> Result<BlendRegions, GeometryError> {
    Ok(BlendRegions {
        source_mask: before.clone(),
        target_mask: warp_mask(before, t)?,
    })
}

pub fn composite(
    image: &RgbImage,
    before: &BinaryMask,
    t: &AffineTransform,
    seed: u64,
    filler: Filler,
) -> Result<EditedImage, CompositeError> {
    if image.dimensions() != before.dims() {
        return Err(CompositeError::DimensionMismatch {
            image: image.dimensions(),
            mask: before.dims(),
        });
    }
    if before.is_empty() {
        return Err(CompositeError::EmptySource);
    }
    let inv = t.inverse()?;
    let regions = regions(before, t)?;
    let (w, h) = image.dimensions();

    let mut out = image.clone();
    for (x, y) in regions.target_mask.iter_set() {
        let (sx, sy) = source_pixel(&inv, x, y, w, h).expect("target pixel has a source");
        out.put_pixel(x, y, *image.get_pixel(sx, sy));
    }
    let fill = regions.fill_region();
    match filler {
        Filler::BoundaryMean => inpaint_boundary_mean(&mut out, &fill),
        Filler::GaussianNoise => fill_noise(&mut out, &fill, seed),
    }

    Ok(EditedImage {
        pixels: out,
        provenance: Provenance {
            backend: format!("reference-compositor/{}", filler.name()),
            config_hash: format!("seed={seed}"),
        },
        object_mask: Some(regions.target_mask),
    })
}

fn inpaint_boundary_mean(img: &mut RgbImage, fill: &BinaryMask) {
    let (w, h) = fill.dims();
    let mut known: Vec<bool> = fill.bits().iter().map(|b| !b).collect();
    let mut pending: Vec<(u32, u32)> = fill.iter_set().collect();
    while !pending.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &(x, y) in &pending {
            let mut sum = [0u32; 3];
            let mut n = 0u32;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if known[ny as usize * w as usize + nx as usize] {
                        let p = img.get_pixel(nx as u32, ny as u32).0;
                        for c in 0..3 {
                            sum[c] += p[c] as u32;
                        }
                        n += 1;
                    }
                }
            }
            if n > 0 {
                let px = sum.map(|s| ((s + n / 2) / n) as u8);
                layer.push((x, y, px));
            } else {
                rest.push((x, y));
            }
        }
        if layer.is_empty() {
            // Nothing known anywhere: the whole frame was vacated.
            for (x, y) in rest {
                img.put_pixel(x, y, Rgb([128, 128, 128]));
            }
            return;
        }
        for (x, y, px) in layer {
            img.put_pixel(x, y, Rgb(px));
            known[y as usize * w as usize + x as usize] = true;
        }
        pending = rest;
    }
}

fn fill_noise(img: &mut RgbImage, fill: &BinaryMask, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (x, y) in fill.iter_set() {
        let px = [0; 3].map(|_: u8| {
            let n: f64 = StandardNormal.sample(&mut rng);
            ((n + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
        });
        img.put_pixel(x, y, Rgb(px));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([20, 40, 60]))
    }

    #[test]
    fn identity_is_bit_exact() {
        let mut img = flat(40, 30);
        img.put_pixel(5, 5, Rgb([200, 0, 0]));
        let m = BinaryMask::rect(40, 30, 3, 3, 9, 9);
        for filler in [Filler::BoundaryMean, Filler::GaussianNoise] {
            let out = composite(&img, &m, &AffineTransform::identity(), 7, filler).unwrap();
            assert_eq!(out.pixels, img);
        }
        assert!(regions(&m, &AffineTransform::identity()).unwrap().fill_region().is_empty());
    }

    #[test]
    fn translated_square() {
        let mut img = flat(64, 32);
        let square = BinaryMask::rect(64, 32, 5, 10, 15, 20);
        for (x, y) in square.iter_set() {
            img.put_pixel(x, y, Rgb([250, (x * 10) as u8, (y * 10) as u8]));
        }
        let t = AffineTransform::translate(20.0, 0.0);
        let out = composite(&img, &square, &t, 0, Filler::BoundaryMean).unwrap();
        for y in 0..32 {
            for x in 0..64 {
                let got = out.pixels.get_pixel(x, y);
                if (25..35).contains(&x) && (10..20).contains(&y) {
                    assert_eq!(got, img.get_pixel(x - 20, y));
                } else if square.get(x, y) {
                    // Flat surroundings inpaint to the background color.
                    assert_eq!(*got, Rgb([20, 40, 60]));
                } else {
                    assert_eq!(got, img.get_pixel(x, y));
                }
            }
        }
        assert_eq!(out.object_mask.unwrap(), BinaryMask::rect(64, 32, 25, 10, 35, 20));
    }

    #[test]
    fn no_fill_when_target_covers_source() {
        let img = flat(50, 50);
        let m = BinaryMask::rect(50, 50, 20, 20, 30, 30);
        let t = crate::geometry::about_anchor(
            &AffineTransform::scale(2.0, 2.0),
            crate::geometry::Point::new(25.0, 25.0),
        );
        let r = regions(&m, &t).unwrap();
        assert!(r.fill_region().is_empty());
        let a = composite(&img, &m, &t, 1, Filler::GaussianNoise).unwrap();
        let b = composite(&img, &m, &t, 2, Filler::GaussianNoise).unwrap();
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn region_sizes() {
        let m = BinaryMask::rect(100, 40, 10, 10, 30, 30);
        let full = regions(&m, &AffineTransform::translate(100.0, 0.0)).unwrap();
        assert_eq!(full.fill_region(), m);
        let half = regions(&m, &AffineTransform::translate(10.0, 0.0)).unwrap();
        assert_eq!(half.fill_region().count(), m.count() / 2);
    }

    #[test]
    fn seed_only_changes_fill() {
        let img = flat(40, 40);
        let m = BinaryMask::rect(40, 40, 5, 5, 15, 15);
        let t = AffineTransform::translate(12.0, 3.0);
        let a = composite(&img, &m, &t, 1, Filler::GaussianNoise).unwrap();
        let b = composite(&img, &m, &t, 2, Filler::GaussianNoise).unwrap();
        let again = composite(&img, &m, &t, 1, Filler::GaussianNoise).unwrap();
        assert_eq!(a.pixels, again.pixels);
        let fill = regions(&m, &t).unwrap().fill_region();
        let mut differs = false;
        for (x, y, p) in a.pixels.enumerate_pixels() {
            if fill.get(x, y) {
                differs |= p != b.pixels.get_pixel(x, y);
            } else {
                assert_eq!(p, b.pixels.get_pixel(x, y));
            }
        }
        assert!(differs);
    }

    #[test]
    fn errors() {
        let img = flat(10, 10);
        assert_eq!(
            composite(&img, &BinaryMask::empty(10, 10), &AffineTransform::identity(), 0, Filler::BoundaryMean),
            Err(CompositeError::EmptySource)
        );
        assert!(matches!(
            composite(&img, &BinaryMask::full(10, 10), &AffineTransform::scale(0.0, 0.0), 0, Filler::BoundaryMean),
            Err(CompositeError::Geometry(GeometryError::SingularTransform { .. }))
        ));
        assert!(matches!(
            composite(&img, &BinaryMask::full(9, 10), &AffineTransform::identity(), 0, Filler::BoundaryMean),
            Err(CompositeError::DimensionMismatch { .. })
        ));
    }
}
