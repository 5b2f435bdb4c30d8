use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::aggregate::StageReport;
use super::{EvalError, Stage};
use crate::dataset::Difficulty;
use crate::editops::EditCategory;

/// One line of the raw per-sample results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub label: String,
    pub config_hash: String,
    pub template_version: String,
    pub seed: u64,
    pub sample_id: String,
    pub stage: Stage,
    pub category: EditCategory,
    pub difficulty: Difficulty,
    pub iou: Option<f64>,
    pub fallback_used: bool,
    pub error: Option<String>,
}

fn csv_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Csv(e.to_string())
}

pub fn write_raw_csv(rows: &[RawRow], out: impl Write) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

pub fn read_raw_csv(input: impl Read) -> Result<Vec<RawRow>, EvalError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub(crate) fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}")).unwrap_or_default()
}

pub(crate) const CSV_HEADER: [&str; 20] = [
    "row", "label", "stage", "Move", "Scale", "Flip", "Shear", "Rotate", "Reason", "Mix", "Avg", "Easy",
    "Medium", "Hard", "scored", "errors", "fallbacks", "config_hash", "template_version", "seed",
];

/// Machine-readable table: one `mean` row per run and stage, then a `count`
/// row with the number of samples per category and bucket.
pub fn render_csv(report: &StageReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &report.rows {
        let mut rec = vec!["mean".to_string(), row.run.label.clone(), row.stage.to_string()];
        rec.extend(EditCategory::ALL.iter().map(|c| cell(row.categories.get(c).copied())));
        rec.push(cell(row.avg));
        rec.extend(Difficulty::ALL.iter().map(|d| cell(row.difficulty.get(d).copied())));
        rec.extend([
            row.scored.to_string(),
            row.errors.to_string(),
            row.fallbacks.to_string(),
            row.run.config_hash.clone(),
            row.run.template_version.clone(),
            row.run.seed.to_string(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    let mut rec = vec!["count".to_string(), String::new(), String::new()];
    rec.extend(
        EditCategory::ALL
            .iter()
            .map(|c| report.sample_counts.get(c).copied().unwrap_or(0).to_string()),
    );
    rec.push(report.sample_counts.values().sum::<usize>().to_string());
    rec.extend(
        Difficulty::ALL
            .iter()
            .map(|d| report.difficulty_counts.get(d).copied().unwrap_or(0).to_string()),
    );
    rec.extend(std::iter::repeat_n(String::new(), 6));
    w.write_record(&rec).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into())
}

pub fn render_markdown(report: &StageReport) -> String {
    let mut s = String::from("# Stage-wise IoU (%)\n\n");
    s += "Avg is the sample-weighted mean over every scored sample of the row. ";
    s += "Samples whose stage failed are left out of the means and counted under Errors.\n\n";
    let cats: Vec<&str> = EditCategory::ALL.iter().map(|c| c.as_str()).collect();
    s += &format!("| Method | Stage | {} | Avg | Errors | Fallbacks |\n", cats.join(" | "));
    s += &format!("|{}\n", "---|".repeat(cats.len() + 5));
    for row in &report.rows {
        let cells: Vec<String> = EditCategory::ALL
            .iter()
            .map(|c| md_cell(row.categories.get(c).copied()))
            .collect();
        s += &format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            md_escape(&row.run.label),
            row.stage,
            cells.join(" | "),
            md_cell(row.avg),
            row.errors,
            row.fallbacks
        );
    }
    let counts: Vec<String> = EditCategory::ALL
        .iter()
        .map(|c| report.sample_counts.get(c).copied().unwrap_or(0).to_string())
        .collect();
    s += &format!(
        "| Samples | | {} | {} | | |\n\n",
        counts.join(" | "),
        report.sample_counts.values().sum::<usize>()
    );

    s += "## By difficulty\n\n| Method | Stage | Easy | Medium | Hard |\n|---|---|---|---|---|\n";
    for row in &report.rows {
        let cells: Vec<String> = Difficulty::ALL
            .iter()
            .map(|d| md_cell(row.difficulty.get(d).copied()))
            .collect();
        s += &format!("| {} | {} | {} |\n", md_escape(&row.run.label), row.stage, cells.join(" | "));
    }
    let counts: Vec<String> = Difficulty::ALL
        .iter()
        .map(|d| report.difficulty_counts.get(d).copied().unwrap_or(0).to_string())
        .collect();
    s += &format!("| Samples | | {} |\n\n", counts.join(" | "));

    s += "## Runs\n\n| Method | Config hash | Templates | Seed |\n|---|---|---|---|\n";
    let mut runs: Vec<_> = report.rows.iter().map(|r| &r.run).collect();
    runs.dedup();
    for run in runs {
        s += &format!(
            "| {} | {} | {} | {} |\n",
            md_escape(&run.label),
            run.config_hash,
            run.template_version,
            run.seed
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, stage: Stage, iou: Option<f64>) -> RawRow {
        RawRow {
            label: "oracle".into(),
            config_hash: "h".into(),
            template_version: "v1".into(),
            seed: 3,
            sample_id: id.into(),
            stage,
            category: EditCategory::Shear,
            difficulty: Difficulty::Medium,
            iou,
            fallback_used: false,
            error: iou.is_none().then(|| "timeout, after 3 tries".to_string()),
        }
    }

    #[test]
    fn raw_csv_round_trips() {
        let rows = vec![
            row("a", Stage::Grounding, Some(0.1 + 0.2)),
            row("b", Stage::FinalEdit, None),
        ];
        let mut buf = Vec::new();
        write_raw_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_raw_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn tables_render() {
        let rows = vec![row("a", Stage::Transformation, Some(0.986)), row("b", Stage::Transformation, None)];
        let rep = super::super::aggregate_rows(&rows);
        let md = render_markdown(&rep);
        assert!(md.contains("| oracle | transformation | - | - | - | 98.6 | - | - | - | 98.6 | 1 | 0 |"), "{md}");
        let csv = render_csv(&rep);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "mean,oracle,transformation,,,,98.6,,,,98.6,,98.6,,1,1,0,h,v1,3"
        );
        assert_eq!(lines.next().unwrap(), "count,,,0,0,0,2,0,0,0,2,0,2,0,,,,,,");
    }
}
