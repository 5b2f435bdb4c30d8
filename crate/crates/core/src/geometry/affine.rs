use serde::{Deserialize, Serialize};
use std::fmt;

use super::GeometryError;

/// Determinants with magnitude below this are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

/// A point in continuous pixel coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A 2D affine map in pixel space. The third row of the 3×3 matrix is always
/// `(0, 0, 1)` and is never stored.
///
/// ```text
/// | a11 a12 a13 |
/// | a21 a22 a23 |
/// |  0   0   1  |
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a11: f64,
    pub a12: f64,
    pub a13: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
}

impl Default for AffineTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform {
    pub const fn new(a11: f64, a12: f64, a13: f64, a21: f64, a22: f64, a23: f64) -> Self {
        Self {
            a11,
            a12,
            a13,
            a21,
            a22,
            a23,
        }
    }

    /// Builds a transform from the six free coefficients in row-major order.
    pub const fn from_coefficients(c: [f64; 6]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4], c[5])
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    }

    pub const fn translate(dx: f64, dy: f64) -> Self {
        Self::new(1.0, 0.0, dx, 0.0, 1.0, dy)
    }

    /// Scale about the origin.
    pub const fn scale(sx: f64, sy: f64) -> Self {
        Self::new(sx, 0.0, 0.0, 0.0, sy, 0.0)
    }

    /// Rotation about the origin by `degrees`, using the mathematical matrix
    /// `[cos -sin; sin cos]` applied directly to pixel coordinates.
    pub fn rotate_degrees(degrees: f64) -> Self {
        let (s, c) = exact_sin_cos(degrees);
        Self::new(c, -s, 0.0, s, c, 0.0)
    }

    /// Shear about the origin: `x' = x + kx·y`, `y' = ky·x + y`.
    pub const fn shear(kx: f64, ky: f64) -> Self {
        Self::new(1.0, kx, 0.0, ky, 1.0, 0.0)
    }

    pub const fn coefficients(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a13, self.a21, self.a22, self.a23]
    }

    /// Full 3×3 matrix, bottom row included.
    pub const fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.a11, self.a12, self.a13],
            [self.a21, self.a22, self.a23],
            [0.0, 0.0, 1.0],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients().iter().all(|c| c.is_finite())
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() >= SINGULAR_EPS
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a11 * p.x + self.a12 * p.y + self.a13,
            self.a21 * p.x + self.a22 * p.y + self.a23,
        )
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let det = self.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_EPS {
            return Err(GeometryError::SingularTransform { det });
        }
        let i11 = self.a22 / det;
        let i12 = -self.a12 / det;
        let i21 = -self.a21 / det;
        let i22 = self.a11 / det;
        let i13 = (self.a12 * self.a23 - self.a22 * self.a13) / det;
        let i23 = (self.a21 * self.a13 - self.a11 * self.a23) / det;
        Ok(Self::new(i11, i12, i13, i21, i22, i23))
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &Self) -> Self {
        compose(other, self)
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coefficients()
            .iter()
            .zip(other.coefficients())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for AffineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}, {}], [{}, {}, {}], [0, 0, 1]]",
            self.a11, self.a12, self.a13, self.a21, self.a22, self.a23
        )
    }
}

/// Matrix product `second · first`: apply `first`, then `second`.
pub fn compose(second: &AffineTransform, first: &AffineTransform) -> AffineTransform {
    let (s, f) = (second, first);
    AffineTransform::new(
        s.a11 * f.a11 + s.a12 * f.a21,
        s.a11 * f.a12 + s.a12 * f.a22,
        s.a11 * f.a13 + s.a12 * f.a23 + s.a13,
        s.a21 * f.a11 + s.a22 * f.a21,
        s.a21 * f.a12 + s.a22 * f.a22,
        s.a21 * f.a13 + s.a22 * f.a23 + s.a23,
    )
}

/// Conjugates `t` by a translation so that it acts about `anchor`:
/// `translate(anchor) · t · translate(-anchor)`.
pub fn about_anchor(t: &AffineTransform, anchor: Point) -> AffineTransform {
    let to_origin = AffineTransform::translate(-anchor.x, -anchor.y);
    let back = AffineTransform::translate(anchor.x, anchor.y);
    compose(&back, &compose(t, &to_origin))
}

// Multiples of 90° get exact coefficients so quarter turns stay lossless.
fn exact_sin_cos(degrees: f64) -> (f64, f64) {
    let r = degrees.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        degrees.to_radians().sin_cos()
    }
}
