use std::path::Path;

use image::{GrayImage, Luma};

use super::{AffineTransform, BoundingBox, GeometryError, Point};

/// Row-major binary raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("count", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, GeometryError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(GeometryError::BitCount {
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Filled axis-aligned rectangle `[x0, x1) × [y0, y1)`, clipped to the raster.
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(bool, bool) -> bool,
    ) -> Result<Self, GeometryError> {
        check_dims(self, other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| op(*a, *b))
                .collect(),
        })
    }

    pub fn and(&self, other: &Self) -> Result<Self, GeometryError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Self) -> Result<Self, GeometryError> {
        self.zip_with(other, |a, b| a || b)
    }

    /// `self \ other`.
    pub fn and_not(&self, other: &Self) -> Result<Self, GeometryError> {
        self.zip_with(other, |a, b| a && !b)
    }

    /// Set pixel closest to the mask centroid (ties to the first in raster
    /// order). Always lies on the object.
    pub fn interior_point(&self) -> Option<Point> {
        let n = self.count();
        if n == 0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for (x, y) in self.iter_set() {
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
        }
        let c = Point::new(sx / n as f64, sy / n as f64);
        self.iter_set()
            .map(|(x, y)| {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                ((px - c.x).powi(2) + (py - c.y).powi(2), px, py)
            })
            .fold(None, |best: Option<(f64, f64, f64)>, cand| match best {
                Some(b) if b.0 <= cand.0 => Some(b),
                _ => Some(cand),
            })
            .map(|(_, x, y)| Point::new(x, y))
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// True if any set pixel lies on the outermost row or column.
    pub fn touches_border(&self) -> bool {
        if self.width == 0 || self.height == 0 {
            return false;
        }
        let (w, h) = (self.width - 1, self.height - 1);
        self.iter_set()
            .any(|(x, y)| x == 0 || y == 0 || x == w || y == h)
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }

    /// Accepts only 0 and 255.
    pub fn from_gray_image(img: &GrayImage) -> Result<Self, GeometryError> {
        let mut bits = Vec::with_capacity(img.len());
        for (x, y, px) in img.enumerate_pixels() {
            match px.0[0] {
                0 => bits.push(false),
                255 => bits.push(true),
                value => return Err(GeometryError::NonBinaryPixel { x, y, value }),
            }
        }
        Self::from_bits(img.width(), img.height(), bits)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), GeometryError> {
        self.to_gray_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| GeometryError::Io(e.to_string()))
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_gray_image()
            .write_to(&mut buf, image::ImageFormat::Png)
            .expect("in-memory PNG encode");
        buf.into_inner()
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, GeometryError> {
        let img = image::load_from_memory(bytes).map_err(|e| GeometryError::Io(e.to_string()))?;
        Self::from_single_channel(img)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let img = image::open(path.as_ref())
            .map_err(|e| GeometryError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_single_channel(img)
    }

    fn from_single_channel(img: image::DynamicImage) -> Result<Self, GeometryError> {
        match img {
            image::DynamicImage::ImageLuma8(g) => Self::from_gray_image(&g),
            other => Err(GeometryError::NotSingleChannel(format!(
                "{:?}",
                other.color()
            ))),
        }
    }
}

pub(crate) fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<(), GeometryError> {
    if a.dims() != b.dims() {
        return Err(GeometryError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Nearest source pixel for output pixel `(x, y)` under the inverse map,
/// using pixel centers. `None` when it falls outside a `width × height` raster.
#[inline]
pub fn source_pixel(inv: &AffineTransform, x: u32, y: u32, width: u32, height: u32) -> Option<(u32, u32)> {
    let q = inv.apply(Point::new(x as f64 + 0.5, y as f64 + 0.5));
    // Nearest center to q - 0.5 is floor(q).
    let (fx, fy) = (q.x.floor(), q.y.floor());
    if fx >= 0.0 && fy >= 0.0 && fx < width as f64 && fy < height as f64 {
        Some((fx as u32, fy as u32))
    } else {
        None
    }
}

/// Warps a mask by `t` using inverse mapping with nearest-neighbor sampling.
/// Output keeps the source dimensions; content mapped off-raster is dropped.
pub fn warp_mask(m: &BinaryMask, t: &AffineTransform) -> Result<BinaryMask, GeometryError> {
    let inv = t.inverse()?;
    let (w, h) = m.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        source_pixel(&inv, x, y, w, h).is_some_and(|(sx, sy)| m.get(sx, sy))
    }))
}

/// Pixel-set IoU. Two empty masks score 1.0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    check_dims(a, b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (p, q) in a.bits.iter().zip(&b.bits) {
        inter += (*p && *q) as usize;
        union += (*p || *q) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Tightest box around all set pixels.
pub fn bbox_of_mask(m: &BinaryMask) -> Result<BoundingBox, GeometryError> {
    let mut it = m.iter_set();
    let (x0, y0) = it.next().ok_or(GeometryError::EmptyMask)?;
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (x0, y0, x0, y0);
    for (x, y) in it {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    BoundingBox::new(
        xmin as f64,
        ymin as f64,
        xmax as f64 + 1.0,
        ymax as f64 + 1.0,
    )
}
