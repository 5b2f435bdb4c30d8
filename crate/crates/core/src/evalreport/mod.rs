//! Stage-wise IoU scoring and benchmark tables.
//!
//! Every stage of a run is scored per sample into a [`StageResult`]. Results
//! are written as a raw per-sample CSV, aggregated into per-category and
//! per-difficulty means, and rendered as Markdown or CSV. [`verify_report`]
//! recomputes a rendered report from the raw CSV and compares every cell.

mod aggregate;
mod render;
mod score;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::GeometryError;

pub use aggregate::{aggregate, aggregate_rows, attach, ReportRow, RunInfo, SampleInfo, StageReport};
pub use render::{read_raw_csv, render_csv, render_markdown, write_raw_csv, RawRow};
pub use score::{score_detected, score_final, score_grounding, score_refinement, score_transformation};
pub use verify::{verify_report, VerifyOutcome};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("result for unknown sample {0}")]
    UnknownSampleId(String),
    #[error("invalid stage result for {sample_id}: {reason}")]
    InvalidResult { sample_id: String, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(String),
    #[error("report does not match raw results: {}", .0.join("; "))]
    Mismatch(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Grounding,
    Refinement,
    Transformation,
    FinalEdit,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Grounding, Stage::Refinement, Stage::Transformation, Stage::FinalEdit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Grounding => "grounding",
            Stage::Refinement => "refinement",
            Stage::Transformation => "transformation",
            Stage::FinalEdit => "final_edit",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Score of one sample at one stage. Exactly one of `iou` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub sample_id: String,
    pub stage: Stage,
    pub iou: Option<f64>,
    /// Grounding only: the target was not detected and the full image was
    /// scored instead.
    pub fallback_used: bool,
    pub error: Option<String>,
}

impl StageResult {
    pub fn scored(sample_id: &str, stage: Stage, iou: f64) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            stage,
            iou: Some(iou),
            fallback_used: false,
            error: None,
        }
    }

    pub fn failed(sample_id: &str, stage: Stage, error: impl fmt::Display) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            stage,
            iou: None,
            fallback_used: false,
            error: Some(error.to_string()),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: &str| {
            Err(EvalError::InvalidResult {
                sample_id: self.sample_id.clone(),
                reason: reason.into(),
            })
        };
        match (self.iou, &self.error) {
            (Some(v), None) if (0.0..=1.0).contains(&v) => {}
            (Some(_), None) => return bad("iou outside [0, 1]"),
            (None, Some(_)) => {}
            _ => return bad("exactly one of iou and error must be set"),
        }
        if self.fallback_used && self.stage != Stage::Grounding {
            return bad("fallback is only defined for grounding");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_invariants() {
        assert!(StageResult::scored("a", Stage::Refinement, 0.5).validate().is_ok());
        assert!(StageResult::failed("a", Stage::Refinement, "boom").validate().is_ok());
        assert!(StageResult::scored("a", Stage::Refinement, 1.5).validate().is_err());
        let mut r = StageResult::scored("a", Stage::Refinement, 0.5);
        r.fallback_used = true;
        assert!(r.validate().is_err());
        r.stage = Stage::Grounding;
        assert!(r.validate().is_ok());
        r.error = Some("x".into());
        assert!(r.validate().is_err());
        assert_eq!("final_edit".parse::<Stage>().unwrap(), Stage::FinalEdit);
    }
}
