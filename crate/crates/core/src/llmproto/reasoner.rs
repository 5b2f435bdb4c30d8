use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::templates::{render, PromptTemplates};
use super::{ProtocolError, SceneDescriptions};
use crate::geometry::{AffineTransform, BoundingBox};

pub const MATRIX_START: &str = "<MSTART>";
pub const MATRIX_END: &str = "<MEND>";
pub const ID_START: &str = "<ISTART>";
pub const ID_END: &str = "<IEND>";

/// Tolerance on the `(0, 0, 1)` bottom row of a 9-number payload.
pub const BOTTOM_ROW_TOL: f64 = 1e-6;

/// A refined object offered to the reasoner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBox {
    pub object_id: u32,
    pub bbox: BoundingBox,
    pub class_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasonerReply {
    pub target_id: u32,
    pub transform: AffineTransform,
    pub raw_text: String,
    pub warnings: Vec<String>,
}

pub fn build_reasoner_prompt(
    instruction: &str,
    scene: &SceneDescriptions,
    boxes: &[CandidateBox],
    templates: &PromptTemplates,
) -> Result<String, ProtocolError> {
    if instruction.trim().is_empty() {
        return Err(ProtocolError::EmptyInstruction);
    }
    if boxes.is_empty() {
        return Err(ProtocolError::NoCandidateObjects);
    }
    let objects = boxes
        .iter()
        .map(|b| {
            format!(
                "- ID {}: {} [{}, {}, {}, {}] (width {}, height {})",
                b.object_id,
                b.class_label,
                b.bbox.x_min,
                b.bbox.y_min,
                b.bbox.x_max,
                b.bbox.y_max,
                b.bbox.width(),
                b.bbox.height()
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(render(
        templates.reasoner,
        &[
            ("scene", scene.scene.as_str()),
            ("relationships", scene.relationships.as_str()),
            ("objects", objects.as_str()),
            ("instruction", instruction.trim()),
        ],
    ))
}

/// Sentinel-wrapped reply for `t` and `id`, as a well-behaved model would emit.
pub fn render_reasoner_reply(target_id: u32, t: &AffineTransform) -> String {
    format!("{MATRIX_START}{t}{MATRIX_END}\n{ID_START}{target_id}{ID_END}")
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").unwrap()
});

/// Extracts the target id and transform from a model reply.
///
/// Reads the first `<MSTART>…<MEND>` block (9 numbers, or 6 with the bottom
/// row implied) and the first `<ISTART>…<IEND>` block. Prose outside the
/// blocks is ignored.
pub fn parse_reasoner_reply(text: &str) -> Result<ReasonerReply, ProtocolError> {
    let mut warnings = Vec::new();

    let payload = delimited(text, MATRIX_START, MATRIX_END)
        .ok_or(ProtocolError::MissingMatrixTokens)?;
    if text.matches(MATRIX_START).count() > 1 {
        warnings.push("several matrix blocks; using the first".to_string());
    }
    let mut values = Vec::with_capacity(9);
    for m in NUMBER.find_iter(payload) {
        if values.len() == 9 {
            return Err(ProtocolError::WrongNumberCount {
                found: NUMBER.find_iter(payload).count(),
            });
        }
        let v: f64 = m
            .as_str()
            .parse()
            .map_err(|_| ProtocolError::WrongNumberCount { found: values.len() })?;
        values.push(v);
    }
    let coeffs: [f64; 6] = match values.len() {
        6 => values[..6].try_into().unwrap(),
        9 => {
            let row = [values[6], values[7], values[8]];
            let ok = row[0].abs() <= BOTTOM_ROW_TOL
                && row[1].abs() <= BOTTOM_ROW_TOL
                && (row[2] - 1.0).abs() <= BOTTOM_ROW_TOL;
            if !ok {
                return Err(ProtocolError::BadBottomRow(row));
            }
            values[..6].try_into().unwrap()
        }
        found => return Err(ProtocolError::WrongNumberCount { found }),
    };
    let transform = AffineTransform::from_coefficients(coeffs);
    if !transform.is_finite() {
        return Err(ProtocolError::NonFiniteCoefficient);
    }

    let id_text = delimited(text, ID_START, ID_END).ok_or(ProtocolError::MissingIdTokens)?;
    if text.matches(ID_START).count() > 1 {
        warnings.push("several id blocks; using the first".to_string());
    }
    let cleaned = id_text.trim().trim_matches(|c: char| "[](){}\"'".contains(c)).trim();
    let target_id = cleaned
        .parse::<u32>()
        .map_err(|_| ProtocolError::InvalidId(truncate(id_text, 40)))?;

    Ok(ReasonerReply {
        target_id,
        transform,
        raw_text: text.to_string(),
        warnings,
    })
}

fn delimited<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let len = text[start..].find(close)?;
    Some(&text[start..start + len])
}

fn truncate(s: &str, max_chars: usize) -> String {
    s.chars().take(max_chars).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_with_prose() {
        let r = parse_reasoner_reply("blah <MSTART>[[1,0,0],[0,1,0],[0,0,1]]<MEND> ... <ISTART>2<IEND>").unwrap();
        assert_eq!(r.transform, AffineTransform::identity());
        assert_eq!(r.target_id, 2);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn flat_nine_numbers() {
        let r = parse_reasoner_reply("<MSTART>2 0 -150 0 2 0 0 0 1<MEND><ISTART>0<IEND>").unwrap();
        assert_eq!(r.transform, AffineTransform::new(2.0, 0.0, -150.0, 0.0, 2.0, 0.0));
        assert_eq!(r.target_id, 0);
    }

    #[test]
    fn six_numbers_sci_notation_and_newlines() {
        let r = parse_reasoner_reply(
            "T =\n<MSTART>\n[ 1.5e0, -2.5E-1, +12.\n  .25, 0.75, -3e2 ]\n<MEND>\nid: <ISTART> [4] <IEND>",
        )
        .unwrap();
        assert_eq!(r.transform, AffineTransform::new(1.5, -0.25, 12.0, 0.25, 0.75, -300.0));
        assert_eq!(r.target_id, 4);
    }

    #[test]
    fn first_block_wins() {
        let r = parse_reasoner_reply(
            "draft <MSTART>1 0 5 0 1 0<MEND> final <MSTART>1 0 9 0 1 0<MEND><ISTART>1<IEND>",
        )
        .unwrap();
        assert_eq!(r.transform.a13, 5.0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1 0 <ISTART>1<IEND>"),
            Err(ProtocolError::MissingMatrixTokens)
        );
        assert_eq!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1 0<MEND>"),
            Err(ProtocolError::MissingIdTokens)
        );
        assert_eq!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1<MEND><ISTART>1<IEND>"),
            Err(ProtocolError::WrongNumberCount { found: 5 })
        );
        assert_eq!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1 0 0 0 1 7<MEND><ISTART>1<IEND>"),
            Err(ProtocolError::WrongNumberCount { found: 10 })
        );
        assert_eq!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1 0 0.5 0 1<MEND><ISTART>1<IEND>"),
            Err(ProtocolError::BadBottomRow([0.5, 0.0, 1.0]))
        );
        assert!(matches!(
            parse_reasoner_reply("<MSTART>1 0 0 0 1 0<MEND><ISTART>-1<IEND>"),
            Err(ProtocolError::InvalidId(_))
        ));
        assert_eq!(
            parse_reasoner_reply("<MSTART>1e999 0 0 0 1 0<MEND><ISTART>1<IEND>"),
            Err(ProtocolError::NonFiniteCoefficient)
        );
    }

    #[test]
    fn prompt_contents() {
        let boxes = [CandidateBox {
            object_id: 3,
            bbox: BoundingBox::new(12.0, 30.5, 80.0, 99.0).unwrap(),
            class_label: "cat".into(),
        }];
        let scene = SceneDescriptions {
            scene: "a cat on a sofa".into(),
            relationships: "the cat is on the sofa".into(),
            background_prompt: "sofa".into(),
            generation_prompt: "cat".into(),
        };
        let t = PromptTemplates::latest();
        let p = build_reasoner_prompt("make the cat 100px wide", &scene, &boxes, &t).unwrap();
        assert!(p.contains("[12, 30.5, 80, 99]"));
        for tok in [MATRIX_START, MATRIX_END, ID_START, ID_END] {
            assert!(p.contains(tok));
        }
        assert!(p.contains("a cat on a sofa") && p.contains("the cat is on the sofa"));
        assert_eq!(p, build_reasoner_prompt("make the cat 100px wide", &scene, &boxes, &t).unwrap());
        assert_eq!(
            build_reasoner_prompt("x", &scene, &[], &t),
            Err(ProtocolError::NoCandidateObjects)
        );
    }
}
