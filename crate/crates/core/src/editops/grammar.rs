//! Recursive-descent parser for the canonical instruction grammar
//! (`docs/grammar.md`). Anything outside the grammar is rejected with the
//! offending byte span so the caller can route it to a language model.

use std::sync::LazyLock;

use regex::Regex;

use super::{EditError, EditOp};

/// Whom a clause refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ObjectRef {
    /// A noun phrase with any leading article removed, lower-cased.
    Named(String),
    /// `it`: the object of the previous clause.
    Previous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInstruction {
    pub op: EditOp,
    /// Object phrase of the first clause.
    pub target: String,
}

pub fn parse_instruction(text: &str) -> Result<EditOp, EditError> {
    parse_instruction_with_target(text).map(|p| p.op)
}

pub fn parse_instruction_with_target(text: &str) -> Result<ParsedInstruction, EditError> {
    let tokens = tokenize(text);
    let mut p = Parser {
        text,
        tokens,
        pos: 0,
    };
    p.instruction()
}

const VERBS: &[&str] = &[
    "move", "shift", "scale", "resize", "make", "rotate", "flip", "shear",
];
const DIRECTIONS: &[&str] = &["left", "right", "up", "down"];
const LENGTH_UNITS: &[&str] = &["px", "pixels", "pixel"];
const ANGLE_UNITS: &[&str] = &["degrees", "degree", "deg", "°"];
const CCW: &[&str] = &["counterclockwise", "counter-clockwise", "anticlockwise"];
const AXES: &[&str] = &["horizontally", "vertically"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(f64),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)").unwrap());

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut offset = 0;
    for chunk in text.split_inclusive(char::is_whitespace) {
        let base = offset;
        offset += chunk.len();
        let word = chunk.trim_end();
        let word = word.trim_end_matches(['.', ',', ';', '!', '?']);
        if word.is_empty() {
            continue;
        }
        let mut rest_start = 0;
        if let Some(m) = NUMBER.find(word) {
            if let Ok(v) = m.as_str().parse::<f64>() {
                out.push(Token {
                    tok: Tok::Number(v),
                    start: base,
                    end: base + m.end(),
                });
                rest_start = m.end();
            }
        }
        if rest_start < word.len() {
            out.push(Token {
                tok: Tok::Word(word[rest_start..].to_lowercase()),
                start: base + rest_start,
                end: base + word.len(),
            });
        }
    }
    out
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + k).map(|t| &t.tok)
    }

    fn peek_word(&self) -> Option<&str> {
        self.word_at(0)
    }

    fn word_at(&self, k: usize) -> Option<&str> {
        match self.peek_at(k) {
            Some(Tok::Word(w)) => Some(w),
            _ => None,
        }
    }

    fn peek_is(&self, words: &[&str]) -> bool {
        self.peek_word().is_some_and(|w| words.contains(&w))
    }

    fn error(&self, reason: impl Into<String>) -> EditError {
        let (start, end) = match self.tokens.get(self.pos) {
            Some(t) => (t.start, t.end),
            None => (self.text.len(), self.text.len()),
        };
        EditError::UnparsableInstruction {
            span: (start, end),
            fragment: self.text[start..end].to_string(),
            reason: reason.into(),
        }
    }

    fn expect(&mut self, words: &[&str]) -> Result<String, EditError> {
        match self.peek_word() {
            Some(w) if words.contains(&w) => {
                let w = w.to_string();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(format!("expected one of {words:?}"))),
        }
    }

    fn accept(&mut self, words: &[&str]) -> Option<String> {
        self.expect(words).ok()
    }

    fn number(&mut self) -> Result<f64, EditError> {
        match self.peek_at(0) {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    /// `and` followed by something other than a verb continues the clause.
    fn continues_clause(&self) -> bool {
        self.word_at(0) == Some("and")
            && match self.peek_at(1) {
                Some(Tok::Word(w)) => !VERBS.contains(&w.as_str()),
                Some(Tok::Number(_)) => true,
                None => false,
            }
    }

    fn instruction(&mut self) -> Result<ParsedInstruction, EditError> {
        if self.tokens.is_empty() {
            return Err(self.error("empty instruction"));
        }
        let mut ops = Vec::new();
        let mut target = None;
        loop {
            let (op, obj) = self.clause()?;
            match (obj, &target) {
                (ObjectRef::Named(name), None) => target = Some(name),
                (ObjectRef::Previous, None) => {
                    return Err(EditError::UnparsableInstruction {
                        span: (0, 0),
                        fragment: String::new(),
                        reason: "'it' has no antecedent".into(),
                    })
                }
                _ => {}
            }
            ops.push(op);
            if self.pos == self.tokens.len() {
                break;
            }
            self.expect(&["and"])?;
        }
        let op = if ops.len() == 1 {
            ops.pop().unwrap()
        } else {
            EditOp::Sequence { ops }
        };
        Ok(ParsedInstruction {
            op,
            target: target.unwrap_or_default(),
        })
    }

    fn clause(&mut self) -> Result<(EditOp, ObjectRef), EditError> {
        let verb = self.expect(VERBS)?;
        match verb.as_str() {
            "move" | "shift" => {
                let obj = self.object(|t| matches!(t, Tok::Number(_)) || is_word_in(t, DIRECTIONS))?;
                Ok((self.move_body()?, obj))
            }
            "scale" | "resize" => {
                let obj = self.object(|t| is_word_in(t, &["by"]))?;
                Ok((self.scale_body()?, obj))
            }
            "make" => {
                let obj = self.object(|t| matches!(t, Tok::Number(_)))?;
                let v = self.length()?;
                let op = match self.expect(&["wide", "tall"])?.as_str() {
                    "wide" => EditOp::ScaleToWidth { w: v },
                    _ => EditOp::ScaleToHeight { h: v },
                };
                Ok((op, obj))
            }
            "rotate" => {
                let obj = self.object(|t| {
                    matches!(t, Tok::Number(_))
                        || is_word_in(t, &["by", "clockwise"])
                        || is_word_in(t, CCW)
                })?;
                Ok((self.rotate_body()?, obj))
            }
            "flip" => {
                let obj = self.object(|t| {
                    is_word_in(t, &["horizontally", "vertically", "left", "upside", "top", "in"])
                })?;
                Ok((self.flip_body()?, obj))
            }
            "shear" => {
                let obj = self.object(|t| {
                    matches!(t, Tok::Number(_)) || is_word_in(t, &["by"]) || is_word_in(t, AXES)
                })?;
                Ok((self.shear_body()?, obj))
            }
            _ => unreachable!("verb list and dispatch disagree"),
        }
    }

    fn object(&mut self, stop: impl Fn(&Tok) -> bool) -> Result<ObjectRef, EditError> {
        let first = self.pos;
        while let Some(t) = self.tokens.get(self.pos) {
            if stop(&t.tok) {
                break;
            }
            self.pos += 1;
        }
        if self.pos == first {
            return Err(self.error("missing object"));
        }
        let words: Vec<String> = self.tokens[first..self.pos]
            .iter()
            .map(|t| self.text[t.start..t.end].to_lowercase())
            .collect();
        let words = match words.first().map(String::as_str) {
            Some("the" | "a" | "an") if words.len() > 1 => &words[1..],
            _ => &words[..],
        };
        if words == ["it"] {
            return Ok(ObjectRef::Previous);
        }
        Ok(ObjectRef::Named(words.join(" ")))
    }

    fn length(&mut self) -> Result<f64, EditError> {
        let v = self.number()?;
        self.expect(LENGTH_UNITS)?;
        Ok(v)
    }

    fn move_body(&mut self) -> Result<EditOp, EditError> {
        let (mut dx, mut dy) = (None, None);
        loop {
            let at = self.pos;
            let (dir, v) = if self.peek_is(DIRECTIONS) {
                let dir = self.expect(DIRECTIONS)?;
                self.expect(&["by"])?;
                (dir, self.length()?)
            } else {
                let v = self.length()?;
                if self.accept(&["to"]).is_some() {
                    self.expect(&["the"])?;
                }
                (self.expect(DIRECTIONS)?, v)
            };
            let (slot, signed) = match dir.as_str() {
                "left" => (&mut dx, -v),
                "right" => (&mut dx, v),
                "up" => (&mut dy, -v),
                _ => (&mut dy, v),
            };
            if slot.is_some() {
                self.pos = at;
                return Err(self.error("axis given twice"));
            }
            *slot = Some(signed);
            if !self.continues_clause() {
                break;
            }
            self.pos += 1;
        }
        Ok(EditOp::Move {
            dx: dx.unwrap_or(0.0),
            dy: dy.unwrap_or(0.0),
        })
    }

    fn factor(&mut self) -> Result<f64, EditError> {
        let v = self.number()?;
        self.accept(&["x", "times"]);
        Ok(v)
    }

    fn scale_body(&mut self) -> Result<EditOp, EditError> {
        self.expect(&["by"])?;
        if self.accept(&["a"]).is_some() {
            self.expect(&["factor"])?;
            self.expect(&["of"])?;
        }
        let at = self.pos;
        let f = self.factor()?;
        let Some(axis) = self.accept(AXES) else {
            return Self::positive_scale(self, at, f, f);
        };
        let mut factors = [1.0, 1.0];
        factors[axis_index(&axis)] = f;
        if self.continues_clause() {
            self.pos += 1;
            self.accept(&["by"]);
            let f2 = self.factor()?;
            let axis2 = self.expect(AXES)?;
            if axis2 == axis {
                self.pos -= 1;
                return Err(self.error("axis given twice"));
            }
            factors[axis_index(&axis2)] = f2;
        }
        Self::positive_scale(self, at, factors[0], factors[1])
    }

    fn positive_scale(&mut self, at: usize, sx: f64, sy: f64) -> Result<EditOp, EditError> {
        if sx > 0.0 && sy > 0.0 {
            Ok(EditOp::ScaleBy { sx, sy })
        } else {
            self.pos = at;
            Err(self.error("scale factor must be positive"))
        }
    }

    fn rotate_body(&mut self) -> Result<EditOp, EditError> {
        let sense_words: Vec<&str> = CCW.iter().copied().chain(["clockwise"]).collect();
        let mut sense = self.accept(&sense_words);
        self.accept(&["by"]);
        let v = self.number()?;
        self.expect(ANGLE_UNITS)?;
        if sense.is_none() {
            sense = self.accept(&sense_words);
        }
        let sign = match sense.as_deref() {
            Some("clockwise") => -1.0,
            _ => 1.0,
        };
        Ok(EditOp::Rotate { degrees: sign * v })
    }

    fn flip_body(&mut self) -> Result<EditOp, EditError> {
        let horizontal = match self.expect(&["horizontally", "vertically", "left", "upside", "top", "in"])?.as_str() {
            "horizontally" => true,
            "vertically" => false,
            "left" => {
                self.expect(&["to"])?;
                self.expect(&["right"])?;
                true
            }
            "upside" => {
                self.expect(&["down"])?;
                false
            }
            "top" => {
                self.expect(&["to"])?;
                self.expect(&["bottom"])?;
                false
            }
            _ => {
                self.expect(&["the"])?;
                let axis = self.expect(&["horizontal", "vertical"])?;
                self.expect(&["direction"])?;
                axis == "horizontal"
            }
        };
        Ok(if horizontal {
            EditOp::FlipHorizontal
        } else {
            EditOp::FlipVertical
        })
    }

    fn shear_body(&mut self) -> Result<EditOp, EditError> {
        let mut k: [Option<f64>; 2] = [None, None];
        loop {
            let at = self.pos;
            let (axis, v) = if self.peek_is(AXES) {
                let axis = self.expect(AXES)?;
                self.accept(&["by"]);
                (axis, self.number()?)
            } else {
                self.accept(&["by"]);
                let v = self.number()?;
                (self.expect(AXES)?, v)
            };
            let slot = &mut k[axis_index(&axis)];
            if slot.is_some() {
                self.pos = at;
                return Err(self.error("axis given twice"));
            }
            *slot = Some(v);
            if !self.continues_clause() {
                break;
            }
            self.pos += 1;
        }
        Ok(EditOp::Shear {
            kx: k[0].unwrap_or(0.0),
            ky: k[1].unwrap_or(0.0),
        })
    }
}

fn is_word_in(t: &Tok, words: &[&str]) -> bool {
    matches!(t, Tok::Word(w) if words.contains(&w.as_str()))
}

fn axis_index(axis: &str) -> usize {
    if axis == "horizontally" {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> EditOp {
        parse_instruction(s).unwrap_or_else(|e| panic!("{s:?}: {e}"))
    }

    #[test]
    fn reference_instructions() {
        assert_eq!(
            parse("move the cat left by 150px"),
            EditOp::Move { dx: -150.0, dy: 0.0 }
        );
        assert_eq!(
            parse("Scale the bus by 0.56"),
            EditOp::ScaleBy { sx: 0.56, sy: 0.56 }
        );
        assert_eq!(
            parse("Scale the orange by 2 and move it left by 150px"),
            EditOp::Sequence {
                ops: vec![
                    EditOp::ScaleBy { sx: 2.0, sy: 2.0 },
                    EditOp::Move { dx: -150.0, dy: 0.0 }
                ]
            }
        );
        assert_eq!(parse("make the cat 100px wide"), EditOp::ScaleToWidth { w: 100.0 });
    }

    #[test]
    fn surface_variants() {
        assert_eq!(
            parse("  SHIFT the dining table 40 px to the right and 12px down. "),
            EditOp::Move { dx: 40.0, dy: 12.0 }
        );
        assert_eq!(
            parse("resize the dog by a factor of 1.5x horizontally and by 0.8 vertically"),
            EditOp::ScaleBy { sx: 1.5, sy: 0.8 }
        );
        assert_eq!(
            parse("scale the dog by 1.25 vertically"),
            EditOp::ScaleBy { sx: 1.0, sy: 1.25 }
        );
        assert_eq!(parse("rotate the bird 30° clockwise"), EditOp::Rotate { degrees: -30.0 });
        assert_eq!(
            parse("rotate the bird counterclockwise by 12.5 degrees"),
            EditOp::Rotate { degrees: 12.5 }
        );
        assert_eq!(parse("flip the sheep upside down"), EditOp::FlipVertical);
        assert_eq!(parse("flip the sheep in the horizontal direction"), EditOp::FlipHorizontal);
        assert_eq!(
            parse("shear the boat vertically by -0.25 and 0.1 horizontally"),
            EditOp::Shear { kx: 0.1, ky: -0.25 }
        );
        assert_eq!(parse("make the tv monitor 80 pixels tall"), EditOp::ScaleToHeight { h: 80.0 });
    }

    #[test]
    fn target_phrase() {
        let p = parse_instruction_with_target("move the potted plant up by 3px and flip it vertically").unwrap();
        assert_eq!(p.target, "potted plant");
        assert!(matches!(p.op, EditOp::Sequence { ref ops } if ops.len() == 2));
    }

    #[test]
    fn rejects_with_span() {
        let text = "move the cat next to the dog";
        match parse_instruction(text) {
            Err(EditError::UnparsableInstruction { span, .. }) => {
                assert_eq!(span, (text.len(), text.len()));
            }
            other => panic!("{other:?}"),
        }
        match parse_instruction("make the cat bigger") {
            Err(EditError::UnparsableInstruction { fragment, .. }) => assert_eq!(fragment, ""),
            other => panic!("{other:?}"),
        }
        match parse_instruction("paint the cat red") {
            Err(EditError::UnparsableInstruction { span, fragment, .. }) => {
                assert_eq!(span, (0, 5));
                assert_eq!(fragment, "paint");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_instruction("").is_err());
        assert!(parse_instruction("move it left by 3px").is_err());
        assert!(parse_instruction("move the cat left by 3px and right by 2px").is_err());
        assert!(parse_instruction("scale the cat by 0").is_err());
        assert!(parse_instruction("scale the cat by -2").is_err());
    }
}
