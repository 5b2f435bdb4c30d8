use serde::{Deserialize, Serialize};
use std::fmt;

use super::EditError;
use crate::geometry::{AffineTransform, BoundingBox, Point};

/// A parametric object edit. Distances are pixels in screen coordinates
/// (y grows downward); rotation is counter-clockwise positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    Move { dx: f64, dy: f64 },
    ScaleBy { sx: f64, sy: f64 },
    ScaleToWidth { w: f64 },
    ScaleToHeight { h: f64 },
    Rotate { degrees: f64 },
    FlipHorizontal,
    FlipVertical,
    Shear { kx: f64, ky: f64 },
    Sequence { ops: Vec<EditOp> },
}

impl EditOp {
    pub fn validate(&self) -> Result<(), EditError> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            EditOp::Move { dx, dy } if !finite(&[*dx, *dy]) => {
                Err(EditError::InvalidOp("move offsets must be finite".into()))
            }
            EditOp::ScaleBy { sx, sy } if !(finite(&[*sx, *sy]) && *sx > 0.0 && *sy > 0.0) => Err(
                EditError::InvalidOp(format!("scale factors must be positive, got ({sx}, {sy})")),
            ),
            EditOp::ScaleToWidth { w: v } | EditOp::ScaleToHeight { h: v }
                if !(v.is_finite() && *v > 0.0) =>
            {
                Err(EditError::InvalidOp(format!("target size must be positive, got {v}")))
            }
            EditOp::Rotate { degrees } if !degrees.is_finite() => {
                Err(EditError::InvalidOp("rotation must be finite".into()))
            }
            EditOp::Shear { kx, ky } if !finite(&[*kx, *ky]) => {
                Err(EditError::InvalidOp("shear factors must be finite".into()))
            }
            EditOp::Sequence { ops } => {
                if ops.is_empty() {
                    return Err(EditError::InvalidOp("empty sequence".into()));
                }
                ops.iter().try_for_each(EditOp::validate)
            }
            _ => Ok(()),
        }
    }

    /// Short kind name, as used in manifests.
    pub fn kind(&self) -> &'static str {
        match self {
            EditOp::Move { .. } => "move",
            EditOp::ScaleBy { .. } => "scale_by",
            EditOp::ScaleToWidth { .. } => "scale_to_width",
            EditOp::ScaleToHeight { .. } => "scale_to_height",
            EditOp::Rotate { .. } => "rotate",
            EditOp::FlipHorizontal => "flip_horizontal",
            EditOp::FlipVertical => "flip_vertical",
            EditOp::Shear { .. } => "shear",
            EditOp::Sequence { .. } => "sequence",
        }
    }
}

/// Reporting category, one per benchmark column.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub enum EditCategory {
    Move,
    Scale,
    Flip,
    Shear,
    Rotate,
    Reason,
    Mix,
}

impl EditCategory {
    /// Column order of the report table.
    pub const ALL: [EditCategory; 7] = [
        EditCategory::Move,
        EditCategory::Scale,
        EditCategory::Flip,
        EditCategory::Shear,
        EditCategory::Rotate,
        EditCategory::Reason,
        EditCategory::Mix,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EditCategory::Move => "Move",
            EditCategory::Scale => "Scale",
            EditCategory::Flip => "Flip",
            EditCategory::Shear => "Shear",
            EditCategory::Rotate => "Rotate",
            EditCategory::Reason => "Reason",
            EditCategory::Mix => "Mix",
        }
    }
}

impl fmt::Display for EditCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EditCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Never yields `Reason`; that category is only assigned externally.
pub fn categorize(op: &EditOp) -> EditCategory {
    match op {
        EditOp::Move { .. } => EditCategory::Move,
        EditOp::ScaleBy { .. } | EditOp::ScaleToWidth { .. } | EditOp::ScaleToHeight { .. } => {
            EditCategory::Scale
        }
        EditOp::FlipHorizontal | EditOp::FlipVertical => EditCategory::Flip,
        EditOp::Shear { .. } => EditCategory::Shear,
        EditOp::Rotate { .. } => EditCategory::Rotate,
        EditOp::Sequence { .. } => EditCategory::Mix,
    }
}

/// The object's current box within its image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectGeometry {
    pub bbox: BoundingBox,
    pub image_width: u32,
    pub image_height: u32,
}

impl ObjectGeometry {
    pub fn new(bbox: BoundingBox, image_width: u32, image_height: u32) -> Result<Self, EditError> {
        bbox.validate().map_err(|_| EditError::ZeroSizeObject)?;
        let inside = bbox.x_min >= 0.0
            && bbox.y_min >= 0.0
            && bbox.x_max <= image_width as f64
            && bbox.y_max <= image_height as f64;
        if !inside {
            return Err(EditError::OutOfImage {
                bbox,
                width: image_width,
                height: image_height,
            });
        }
        Ok(Self {
            bbox,
            image_width,
            image_height,
        })
    }

    /// Geometry after `t` has been applied to the object: the box becomes the
    /// enclosing box of its mapped corners. The result may leave the frame.
    pub fn transformed(&self, t: &AffineTransform) -> Self {
        let corners: Vec<Point> = self.bbox.corners().iter().map(|c| t.apply(*c)).collect();
        let bbox = BoundingBox::enclosing(&corners).unwrap_or(self.bbox);
        Self { bbox, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories() {
        assert_eq!(categorize(&EditOp::FlipHorizontal), EditCategory::Flip);
        assert_eq!(
            categorize(&EditOp::Sequence {
                ops: vec![
                    EditOp::Move { dx: 1.0, dy: 0.0 },
                    EditOp::ScaleBy { sx: 2.0, sy: 2.0 }
                ]
            }),
            EditCategory::Mix
        );
        assert_eq!(categorize(&EditOp::ScaleToWidth { w: 100.0 }), EditCategory::Scale);
        assert_eq!(categorize(&EditOp::Rotate { degrees: 5.0 }), EditCategory::Rotate);
        assert_eq!(categorize(&EditOp::Shear { kx: 0.1, ky: 0.0 }), EditCategory::Shear);
        assert_eq!(categorize(&EditOp::Move { dx: 0.0, dy: 0.0 }), EditCategory::Move);
    }

    #[test]
    fn validation() {
        assert!(EditOp::ScaleBy { sx: 0.0, sy: 1.0 }.validate().is_err());
        assert!(EditOp::ScaleToHeight { h: -3.0 }.validate().is_err());
        assert!(EditOp::Sequence { ops: vec![] }.validate().is_err());
        assert!(EditOp::Sequence {
            ops: vec![EditOp::ScaleBy { sx: 1.0, sy: -1.0 }]
        }
        .validate()
        .is_err());
        assert!(EditOp::Rotate { degrees: f64::NAN }.validate().is_err());
        assert!(EditOp::FlipVertical.validate().is_ok());
    }

    #[test]
    fn serde_shape() {
        let op = EditOp::Move { dx: -150.0, dy: 0.0 };
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(json, r#"{"kind":"move","dx":-150.0,"dy":0.0}"#);
        let back: EditOp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn geometry_must_fit_image() {
        let b = BoundingBox::new(10.0, 10.0, 60.0, 40.0).unwrap();
        assert!(ObjectGeometry::new(b, 60, 40).is_ok());
        assert!(matches!(
            ObjectGeometry::new(b, 59, 40),
            Err(EditError::OutOfImage { .. })
        ));
    }
}
