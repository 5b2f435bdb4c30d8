//! Instruction template bank. Every rendering stays inside the canonical
//! grammar, so parsing it returns the op it was rendered from.

use crate::editops::{EditError, EditOp};

/// Distinct surface forms available for every op kind.
pub const FORMS_PER_KIND: usize = 3;

/// Human wording of a VOC class label.
pub fn display_name(class_label: &str) -> String {
    match class_label {
        "diningtable" => "dining table".into(),
        "pottedplant" => "potted plant".into(),
        "tvmonitor" => "tv monitor".into(),
        other => other.to_string(),
    }
}

/// Renders `op` applied to `object` using surface form `form`
/// (taken modulo [`FORMS_PER_KIND`]). A `Sequence` renders as clauses joined
/// by "and", later ones referring to the object as "it".
pub fn render_template(op: &EditOp, object: &str, form: usize) -> Result<String, EditError> {
    op.validate()?;
    let form = form % FORMS_PER_KIND;
    let subject = format!("the {object}");
    match op {
        EditOp::Sequence { ops } => {
            let mut parts = Vec::with_capacity(ops.len());
            for (i, o) in ops.iter().enumerate() {
                let who = if i == 0 { subject.as_str() } else { "it" };
                parts.push(clause(o, who, form)?);
            }
            Ok(parts.join(" and "))
        }
        _ => clause(op, &subject, form),
    }
}

fn num(v: f64) -> String {
    format!("{}", v)
}

fn clause(op: &EditOp, obj: &str, form: usize) -> Result<String, EditError> {
    Ok(match op {
        EditOp::Move { dx, dy } => {
            let mut steps = Vec::new();
            if *dx != 0.0 || *dy == 0.0 {
                steps.push((if *dx < 0.0 { "left" } else { "right" }, dx.abs()));
            }
            if *dy != 0.0 {
                steps.push((if *dy < 0.0 { "up" } else { "down" }, dy.abs()));
            }
            let parts: Vec<String> = steps
                .iter()
                .map(|&(dir, v)| match form {
                    0 => format!("{dir} by {}px", num(v)),
                    1 if dir == "left" || dir == "right" => format!("{} pixels to the {dir}", num(v)),
                    1 => format!("{} pixels {dir}", num(v)),
                    _ => format!("{}px {dir}", num(v)),
                })
                .collect();
            let verb = if form == 1 { "shift" } else { "move" };
            format!("{verb} {obj} {}", parts.join(" and "))
        }
        EditOp::ScaleBy { sx, sy } => {
            let f = |v: f64| match form {
                2 => format!("{}x", num(v)),
                _ => num(v),
            };
            let (verb, lead) = match form {
                1 => ("resize", "by a factor of "),
                _ => ("scale", "by "),
            };
            let amount = if sx == sy {
                f(*sx)
            } else if *sy == 1.0 {
                format!("{} horizontally", f(*sx))
            } else if *sx == 1.0 {
                format!("{} vertically", f(*sy))
            } else if form == 1 {
                format!("{} horizontally and by {} vertically", f(*sx), f(*sy))
            } else {
                format!("{} horizontally and {} vertically", f(*sx), f(*sy))
            };
            format!("{verb} {obj} {lead}{amount}")
        }
        EditOp::ScaleToWidth { w } => format!("make {obj} {} wide", length(*w, form)),
        EditOp::ScaleToHeight { h } => format!("make {obj} {} tall", length(*h, form)),
        EditOp::Rotate { degrees } => {
            let a = num(degrees.abs());
            let sense = match (*degrees < 0.0, form) {
                (true, _) => "clockwise",
                (false, 2) => "anticlockwise",
                (false, _) => "counterclockwise",
            };
            match form {
                0 => format!("rotate {obj} by {a} degrees {sense}"),
                1 => format!("rotate {obj} {sense} by {a} degrees"),
                _ => format!("rotate {obj} {a}° {sense}"),
            }
        }
        EditOp::FlipHorizontal => match form {
            0 => format!("flip {obj} horizontally"),
            1 => format!("flip {obj} left to right"),
            _ => format!("flip {obj} in the horizontal direction"),
        },
        EditOp::FlipVertical => match form {
            0 => format!("flip {obj} vertically"),
            1 => format!("flip {obj} upside down"),
            _ => format!("flip {obj} top to bottom"),
        },
        EditOp::Shear { kx, ky } => {
            let mut axes = Vec::new();
            if *kx != 0.0 || *ky == 0.0 {
                axes.push(("horizontally", *kx));
            }
            if *ky != 0.0 {
                axes.push(("vertically", *ky));
            }
            let parts: Vec<String> = axes
                .iter()
                .enumerate()
                .map(|(i, &(axis, k))| match (form, i) {
                    (0, _) => format!("{axis} by {}", num(k)),
                    (1, 0) => format!("by {} {axis}", num(k)),
                    (2, 1) => format!("by {} {axis}", num(k)),
                    _ => format!("{} {axis}", num(k)),
                })
                .collect();
            format!("shear {obj} {}", parts.join(" and "))
        }
        EditOp::Sequence { .. } => {
            return Err(EditError::InvalidOp("nested sequences have no template".into()))
        }
    })
}

fn length(v: f64, form: usize) -> String {
    match form {
        0 => format!("{}px", num(v)),
        1 => format!("{} pixels", num(v)),
        _ => format!("{} px", num(v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editops::{parse_instruction, parse_instruction_with_target};

    fn ops() -> Vec<EditOp> {
        vec![
            EditOp::Move { dx: -150.0, dy: 0.0 },
            EditOp::Move { dx: 0.0, dy: 30.0 },
            EditOp::Move { dx: 12.0, dy: -7.5 },
            EditOp::Move { dx: 0.0, dy: 0.0 },
            EditOp::ScaleBy { sx: 1.5, sy: 1.5 },
            EditOp::ScaleBy { sx: 0.75, sy: 1.0 },
            EditOp::ScaleBy { sx: 1.0, sy: 1.25 },
            EditOp::ScaleBy { sx: 0.5, sy: 2.0 },
            EditOp::ScaleToWidth { w: 120.0 },
            EditOp::ScaleToHeight { h: 33.0 },
            EditOp::Rotate { degrees: 45.0 },
            EditOp::Rotate { degrees: -12.5 },
            EditOp::FlipHorizontal,
            EditOp::FlipVertical,
            EditOp::Shear { kx: 0.3, ky: 0.0 },
            EditOp::Shear { kx: 0.0, ky: -0.25 },
            EditOp::Shear { kx: -0.1, ky: 0.4 },
            EditOp::Shear { kx: 0.0, ky: 0.0 },
            EditOp::Sequence {
                ops: vec![EditOp::ScaleBy { sx: 2.0, sy: 2.0 }, EditOp::Move { dx: -150.0, dy: 0.0 }],
            },
            EditOp::Sequence {
                ops: vec![EditOp::Rotate { degrees: -30.0 }, EditOp::FlipVertical],
            },
        ]
    }

    #[test]
    fn every_form_parses_back() {
        for op in ops() {
            for form in 0..FORMS_PER_KIND {
                for obj in ["cat", "potted plant", "tv monitor"] {
                    let text = render_template(&op, obj, form).unwrap();
                    let parsed = parse_instruction_with_target(&text)
                        .unwrap_or_else(|e| panic!("{text:?}: {e}"));
                    assert_eq!(parsed.op, op, "{text}");
                    assert_eq!(parsed.target, obj, "{text}");
                }
            }
        }
    }

    #[test]
    fn forms_differ() {
        for op in ops() {
            let texts: std::collections::BTreeSet<String> = (0..FORMS_PER_KIND)
                .map(|f| render_template(&op, "cat", f).unwrap())
                .collect();
            assert_eq!(texts.len(), FORMS_PER_KIND, "{op:?}");
        }
    }

    #[test]
    fn known_renderings() {
        let op = EditOp::Move { dx: -150.0, dy: 0.0 };
        assert_eq!(render_template(&op, "cat", 0).unwrap(), "move the cat left by 150px");
        assert_eq!(
            render_template(&EditOp::FlipVertical, "dog", 1).unwrap(),
            "flip the dog upside down"
        );
        assert_eq!(parse_instruction("flip the dog upside down").unwrap(), EditOp::FlipVertical);
        let nested = EditOp::Sequence {
            ops: vec![EditOp::Sequence { ops: vec![EditOp::FlipVertical] }],
        };
        assert!(render_template(&nested, "dog", 0).is_err());
        assert_eq!(display_name("diningtable"), "dining table");
    }
}
