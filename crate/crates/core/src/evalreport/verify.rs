use super::aggregate::aggregate_rows;
use super::render::{render_csv, render_markdown, RawRow};
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub format: &'static str,
    pub cells_checked: usize,
}

fn csv_cells(text: &str) -> Result<Vec<Vec<String>>, EvalError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(String::from).collect())
                .map_err(|e| EvalError::Csv(e.to_string()))
        })
        .collect()
}

fn md_cells(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(str::trim)
        .filter(|l| l.starts_with('|') && !l.starts_with("|---"))
        .map(|l| {
            let inner = l.trim_start_matches('|').trim_end_matches('|');
            let mut cells = Vec::new();
            let mut cur = String::new();
            let mut chars = inner.chars().peekable();
            while let Some(c) = chars.next() {
                match c {
                    '\\' if chars.peek() == Some(&'|') => {
                        cur.push('|');
                        chars.next();
                    }
                    '|' => cells.push(std::mem::take(&mut cur).trim().to_string()),
                    _ => cur.push(c),
                }
            }
            cells.push(cur.trim().to_string());
            cells
        })
        .collect()
}

/// Recomputes the report from `raw` and compares every table cell of
/// `report`, which may be the Markdown or the CSV rendering.
pub fn verify_report(report: &str, raw: &[RawRow]) -> Result<VerifyOutcome, EvalError> {
    let expected = aggregate_rows(raw);
    let is_csv = report.starts_with("row,");
    let (format, got, want) = if is_csv {
        ("csv", csv_cells(report)?, csv_cells(&render_csv(&expected))?)
    } else {
        ("markdown", md_cells(report), md_cells(&render_markdown(&expected)))
    };
    let mut problems = Vec::new();
    if got.len() != want.len() {
        problems.push(format!("report has {} table rows, raw results give {}", got.len(), want.len()));
    }
    let mut checked = 0;
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        if g.len() != w.len() {
            problems.push(format!("row {i} has {} cells, expected {}", g.len(), w.len()));
            continue;
        }
        for (j, (a, b)) in g.iter().zip(w).enumerate() {
            checked += 1;
            if a != b {
                let header = want.first().and_then(|h| h.get(j)).map_or("?", String::as_str);
                problems.push(format!("row {i} column {header}: report says {a:?}, raw gives {b:?}"));
            }
        }
    }
    if problems.is_empty() {
        Ok(VerifyOutcome {
            format,
            cells_checked: checked,
        })
    } else {
        Err(EvalError::Mismatch(problems))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Difficulty;
    use crate::editops::EditCategory;
    use crate::evalreport::Stage;

    fn rows() -> Vec<RawRow> {
        (0..6)
            .map(|i| RawRow {
                label: "a|b".into(),
                config_hash: "h".into(),
                template_version: "v1".into(),
                seed: 0,
                sample_id: format!("s{i}"),
                stage: Stage::ALL[i % 4],
                category: EditCategory::ALL[i % 7],
                difficulty: Difficulty::ALL[i % 3],
                iou: Some(i as f64 / 7.0),
                fallback_used: false,
                error: None,
            })
            .collect()
    }

    #[test]
    fn accepts_faithful_reports_and_flags_edits() {
        let raw = rows();
        let rep = aggregate_rows(&raw);
        for text in [render_markdown(&rep), render_csv(&rep)] {
            let ok = verify_report(&text, &raw).unwrap();
            assert!(ok.cells_checked > 20);
        }
        let tampered = render_csv(&rep).replacen("14.3", "15.0", 1);
        assert!(matches!(verify_report(&tampered, &raw), Err(EvalError::Mismatch(_))));
        let mut fewer = raw.clone();
        fewer.pop();
        assert!(verify_report(&render_markdown(&rep), &fewer).is_err());
    }
}
