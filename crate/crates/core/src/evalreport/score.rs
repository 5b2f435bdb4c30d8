use super::{EvalError, Stage, StageResult};
use crate::backends::{Detector, EditedImage, Frame};
use crate::geometry::{bbox_iou, check_dims, mask_iou, warp_mask, AffineTransform, BinaryMask, BoundingBox};

/// Box IoU of the predicted target box. A missing prediction is replaced by
/// the full image and flagged.
pub fn score_grounding(
    sample_id: &str,
    predicted: Option<&BoundingBox>,
    gt: &BoundingBox,
    image_width: u32,
    image_height: u32,
) -> StageResult {
    let full = BoundingBox::full_image(image_width, image_height);
    let (pred, fallback) = match predicted {
        Some(b) => (b, false),
        None => (&full, true),
    };
    let mut r = StageResult::scored(sample_id, Stage::Grounding, bbox_iou(pred, gt));
    r.fallback_used = fallback;
    r
}

/// Mask IoU of the refined target mask; a missing mask scores 0.
pub fn score_refinement(
    sample_id: &str,
    predicted: Option<&BinaryMask>,
    gt: &BinaryMask,
) -> Result<StageResult, EvalError> {
    let iou = match predicted {
        Some(m) => mask_iou(m, gt)?,
        None => 0.0,
    };
    Ok(StageResult::scored(sample_id, Stage::Refinement, iou))
}

/// Mask IoU between the predicted after-mask and the ground-truth mask
/// warped by the ground-truth transform.
pub fn score_transformation(
    sample_id: &str,
    predicted_after: &BinaryMask,
    gt_before: &BinaryMask,
    gt_transform: &AffineTransform,
) -> Result<StageResult, EvalError> {
    check_dims(predicted_after, gt_before)?;
    let gt_after = warp_mask(gt_before, gt_transform)?;
    Ok(StageResult::scored(
        sample_id,
        Stage::Transformation,
        mask_iou(predicted_after, &gt_after)?,
    ))
}

/// Scores a mask segmented from the edited image against the ground-truth
/// mask warped by the ground-truth transform.
pub fn score_detected(
    sample_id: &str,
    detected: &BinaryMask,
    gt_before: &BinaryMask,
    gt_transform: &AffineTransform,
) -> Result<StageResult, EvalError> {
    check_dims(detected, gt_before)?;
    let gt_after = warp_mask(gt_before, gt_transform)?;
    Ok(StageResult::scored(sample_id, Stage::FinalEdit, mask_iou(detected, &gt_after)?))
}

/// Segments the edited object with `detector` and scores it with
/// [`score_detected`]. Failures land in the result's `error`.
pub fn score_final(
    frame: &Frame,
    edited: &EditedImage,
    class_label: &str,
    gt_before: &BinaryMask,
    gt_transform: &AffineTransform,
    detector: &dyn Detector,
) -> StageResult {
    let id = frame.sample_id;
    let scored = detector
        .detect(frame, edited, class_label)
        .map_err(|e| e.to_string())
        .and_then(|m| score_detected(id, &m, gt_before, gt_transform).map_err(|e| e.to_string()));
    scored.unwrap_or_else(|e| StageResult::failed(id, Stage::FinalEdit, e))
}
