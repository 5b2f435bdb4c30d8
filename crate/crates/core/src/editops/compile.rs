use super::{EditError, EditOp, ObjectGeometry};
use crate::geometry::{about_anchor, compose, AffineTransform, SINGULAR_EPS};

/// Compiles an edit into an absolute-coordinate transform.
///
/// Scales, rotations, shears and flips act about the bbox center; moves are
/// plain pixel offsets. Sequence steps run left to right, and each step sees
/// the box produced by the steps before it.
pub fn compile(op: &EditOp, geom: &ObjectGeometry) -> Result<AffineTransform, EditError> {
    op.validate()?;
    compile_step(op, geom).map(|(t, _)| t)
}

fn compile_step(
    op: &EditOp,
    geom: &ObjectGeometry,
) -> Result<(AffineTransform, ObjectGeometry), EditError> {
    let bbox = geom.bbox;
    if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
        return Err(EditError::ZeroSizeObject);
    }
    let center = bbox.center();
    let local = match op {
        EditOp::Move { dx, dy } => return Ok(moved(geom, *dx, *dy)),
        EditOp::ScaleBy { sx, sy } => AffineTransform::scale(*sx, *sy),
        EditOp::ScaleToWidth { w } => {
            let f = w / bbox.width();
            AffineTransform::scale(f, f)
        }
        EditOp::ScaleToHeight { h } => {
            let f = h / bbox.height();
            AffineTransform::scale(f, f)
        }
        EditOp::Rotate { degrees } => AffineTransform::rotate_degrees(*degrees),
        EditOp::FlipHorizontal => AffineTransform::scale(-1.0, 1.0),
        EditOp::FlipVertical => AffineTransform::scale(1.0, -1.0),
        EditOp::Shear { kx, ky } => AffineTransform::shear(*kx, *ky),
        EditOp::Sequence { ops } => {
            let mut total = AffineTransform::identity();
            let mut g = *geom;
            for step in ops {
                let (t, next) = compile_step(step, &g)?;
                total = compose(&t, &total);
                g = next;
            }
            return Ok((total, g));
        }
    };
    let det = local.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_EPS {
        return Err(EditError::DegenerateScale { det });
    }
    let t = about_anchor(&local, center);
    Ok((t, geom.transformed(&t)))
}

fn moved(geom: &ObjectGeometry, dx: f64, dy: f64) -> (AffineTransform, ObjectGeometry) {
    let t = AffineTransform::translate(dx, dy);
    (t, geom.transformed(&t))
}
