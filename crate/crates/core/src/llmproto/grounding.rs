use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::templates::{render, PromptTemplates};
use super::ProtocolError;
use crate::geometry::{BoundingBox, Point};

/// One grounded object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub point: Point,
    pub class_label: String,
    pub object_id: u32,
}

/// The four free-text summaries produced alongside the detections.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SceneDescriptions {
    pub scene: String,
    pub relationships: String,
    pub background_prompt: String,
    pub generation_prompt: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingReply {
    pub detections: Vec<Detection>,
    pub descriptions: SceneDescriptions,
    pub warnings: Vec<String>,
}

pub fn build_grounding_prompt(
    edit_instruction: &str,
    templates: &PromptTemplates,
) -> Result<String, ProtocolError> {
    if edit_instruction.trim().is_empty() {
        return Err(ProtocolError::EmptyInstruction);
    }
    Ok(render(
        templates.grounding,
        &[("instruction", edit_instruction.trim())],
    ))
}

#[derive(Serialize, Deserialize)]
struct WireObject {
    id: i64,
    class: String,
    bbox: [f64; 4],
    point: [f64; 2],
}

/// Renders a reply in the documented JSON schema.
pub fn render_grounding_reply(detections: &[Detection], d: &SceneDescriptions) -> String {
    let objects: Vec<WireObject> = detections
        .iter()
        .map(|det| WireObject {
            id: det.object_id as i64,
            class: det.class_label.clone(),
            bbox: [det.bbox.x_min, det.bbox.y_min, det.bbox.x_max, det.bbox.y_max],
            point: [det.point.x, det.point.y],
        })
        .collect();
    serde_json::json!({
        "objects": objects,
        "scene": d.scene,
        "relationships": d.relationships,
        "background_prompt": d.background_prompt,
        "generation_prompt": d.generation_prompt,
    })
    .to_string()
}

/// Parses a grounding reply, clamping boxes to the image and dropping
/// repeated ids (first occurrence wins). Both adjustments leave a warning.
pub fn parse_grounding_reply(
    text: &str,
    image_width: u32,
    image_height: u32,
) -> Result<GroundingReply, ProtocolError> {
    let value = extract_json(text)
        .ok_or_else(|| ProtocolError::MalformedReply("no JSON object found".into()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ProtocolError::MalformedReply("top level is not an object".into()))?;

    let mut missing = Vec::new();
    let mut field = |name: &str| -> String {
        match obj.get(name).and_then(Value::as_str).map(str::trim) {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => {
                missing.push(name.to_string());
                String::new()
            }
        }
    };
    let descriptions = SceneDescriptions {
        scene: field("scene"),
        relationships: field("relationships"),
        background_prompt: field("background_prompt"),
        generation_prompt: field("generation_prompt"),
    };
    if !missing.is_empty() {
        return Err(ProtocolError::MissingDescriptions(missing));
    }

    let raw_objects = obj
        .get("objects")
        .and_then(Value::as_array)
        .ok_or_else(|| ProtocolError::MalformedReply("missing \"objects\" array".into()))?;

    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut detections = Vec::with_capacity(raw_objects.len());
    for (i, raw) in raw_objects.iter().enumerate() {
        let wire: WireObject = serde_json::from_value(raw.clone())
            .map_err(|e| ProtocolError::MalformedReply(format!("object {i}: {e}")))?;
        let object_id = u32::try_from(wire.id)
            .map_err(|_| ProtocolError::MalformedReply(format!("object {i}: bad id {}", wire.id)))?;
        if !seen.insert(object_id) {
            warnings.push(format!("duplicate object id {object_id} at index {i}; keeping the first"));
            continue;
        }
        let [x0, y0, x1, y1] = wire.bbox;
        let clamped = BoundingBox {
            x_min: x0,
            y_min: y0,
            x_max: x1,
            y_max: y1,
        }
        .clamp_to(image_width, image_height);
        let bbox = match clamped {
            Ok(b) => b,
            Err(_) => {
                warnings.push(format!("object {object_id}: box {:?} is empty inside the image; dropped", wire.bbox));
                continue;
            }
        };
        if bbox.x_min != x0 || bbox.y_min != y0 || bbox.x_max != x1 || bbox.y_max != y1 {
            warnings.push(format!("object {object_id}: box clamped to image bounds"));
        }
        let mut point = Point::new(wire.point[0], wire.point[1]);
        if !point.is_finite() || !bbox.contains(point) {
            warnings.push(format!("object {object_id}: point moved inside its box"));
            point = if point.is_finite() {
                Point::new(
                    point.x.clamp(bbox.x_min, bbox.x_max),
                    point.y.clamp(bbox.y_min, bbox.y_max),
                )
            } else {
                bbox.center()
            };
        }
        detections.push(Detection {
            bbox,
            point,
            class_label: wire.class.trim().to_string(),
            object_id,
        });
    }
    Ok(GroundingReply {
        detections,
        descriptions,
        warnings,
    })
}

/// Whole text, then a fenced block, then the outermost brace span.
fn extract_json(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    if let Some(start) = trimmed.find("```") {
        let body = &trimmed[start + 3..];
        let body = body.strip_prefix("json").unwrap_or(body);
        if let Some(end) = body.find("```") {
            if let Ok(v) = serde_json::from_str(body[..end].trim()) {
                return Some(v);
            }
        }
    }
    let open = trimmed.find('{')?;
    let close = trimmed.rfind('}')?;
    if close <= open {
        return None;
    }
    serde_json::from_str(&trimmed[open..=close]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESC: &str = r#""scene": "a room", "relationships": "cat left of dog", "background_prompt": "wooden floor", "generation_prompt": "a cat moved left""#;

    #[test]
    fn zero_objects() {
        let r = parse_grounding_reply(&format!("{{\"objects\": [], {DESC}}}"), 100, 100).unwrap();
        assert!(r.detections.is_empty());
        assert_eq!(r.descriptions.scene, "a room");
    }

    #[test]
    fn duplicate_ids_keep_first() {
        let text = format!(
            r#"Sure! ```json
{{"objects": [
  {{"id": 3, "class": "cat", "bbox": [1, 2, 30, 40], "point": [10, 10]}},
  {{"id": 3, "class": "dog", "bbox": [50, 2, 90, 40], "point": [60, 10]}}
], {DESC}}}
```"#
        );
        let r = parse_grounding_reply(&text, 100, 100).unwrap();
        assert_eq!(r.detections.len(), 1);
        assert_eq!(r.detections[0].class_label, "cat");
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn clamps_and_fixes_points() {
        let text = format!(
            r#"{{"objects": [{{"id": 0, "class": "bus", "bbox": [-5, 10, 140, 60], "point": [200, 30]}}], {DESC}}}"#
        );
        let r = parse_grounding_reply(&text, 120, 80).unwrap();
        let d = &r.detections[0];
        assert_eq!(d.bbox, BoundingBox::new(0.0, 10.0, 120.0, 60.0).unwrap());
        assert_eq!(d.point, Point::new(120.0, 30.0));
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_grounding_reply("no json here", 10, 10),
            Err(ProtocolError::MalformedReply(_))
        ));
        match parse_grounding_reply(r#"{"objects": [], "scene": "x", "relationships": ""}"#, 10, 10) {
            Err(ProtocolError::MissingDescriptions(m)) => {
                assert_eq!(m, vec!["relationships", "background_prompt", "generation_prompt"])
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            build_grounding_prompt("  ", &PromptTemplates::latest()),
            Err(ProtocolError::EmptyInstruction)
        ));
    }

    #[test]
    fn prompt_names_each_description_once() {
        let p = build_grounding_prompt("move the cat left by 150px", &PromptTemplates::latest()).unwrap();
        for name in ["scene", "relationships", "background_prompt", "generation_prompt"] {
            assert_eq!(p.matches(name).count(), 1, "{name}");
        }
        assert!(p.contains("move the cat left by 150px"));
        assert_eq!(
            p,
            build_grounding_prompt("move the cat left by 150px", &PromptTemplates::latest()).unwrap()
        );
    }

    #[test]
    fn render_parse_round_trip() {
        let dets = vec![Detection {
            bbox: BoundingBox::new(4.0, 5.0, 40.5, 50.0).unwrap(),
            point: Point::new(20.0, 30.0),
            class_label: "potted plant".into(),
            object_id: 7,
        }];
        let desc = SceneDescriptions {
            scene: "s".into(),
            relationships: "r".into(),
            background_prompt: "b".into(),
            generation_prompt: "g".into(),
        };
        let r = parse_grounding_reply(&render_grounding_reply(&dets, &desc), 64, 64).unwrap();
        assert_eq!(r.detections, dets);
        assert_eq!(r.descriptions, desc);
        assert!(r.warnings.is_empty());
    }
}
