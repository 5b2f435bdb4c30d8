use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GenerationConfig, SourceInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The image holds two or more instances of one class.
    DuplicateClass,
    Truncated,
    /// Mask area outside the configured fraction of the image.
    ExtremeSize,
    /// Mask touches the outermost pixel row or column.
    Boundary,
    /// The image holds more instances than the configured maximum.
    TooManyObjects,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::DuplicateClass,
        DropReason::Truncated,
        DropReason::ExtremeSize,
        DropReason::Boundary,
        DropReason::TooManyObjects,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::DuplicateClass => "duplicate_class",
            DropReason::Truncated => "truncated",
            DropReason::ExtremeSize => "extreme_size",
            DropReason::Boundary => "boundary",
            DropReason::TooManyObjects => "too_many_objects",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<SourceInstance>,
    /// Dropped instances per reason. Each instance is charged to the first
    /// rule it fails, image-level rules first.
    pub dropped: BTreeMap<DropReason, usize>,
}

impl FilterOutcome {
    pub fn images_kept(&self) -> usize {
        self.kept.iter().map(|i| &i.image_id).collect::<BTreeSet<_>>().len()
    }

    pub fn tally(&self, reason: DropReason) -> usize {
        self.dropped.get(&reason).copied().unwrap_or(0)
    }
}

/// Applies the image rules (too many objects, duplicate classes) and then
/// the instance rules (truncation, size, border contact).
pub fn filter_instances(instances: &[SourceInstance], cfg: &GenerationConfig) -> FilterOutcome {
    let mut by_image: BTreeMap<&str, Vec<&SourceInstance>> = BTreeMap::new();
    for inst in instances {
        by_image.entry(&inst.image_id).or_default().push(inst);
    }
    let mut out = FilterOutcome::default();
    let mut charge = |r: DropReason, n: usize| *out.dropped.entry(r).or_insert(0) += n;
    let mut kept = Vec::new();
    for (_, group) in by_image {
        if group.len() > cfg.max_foreground_objects {
            charge(DropReason::TooManyObjects, group.len());
            continue;
        }
        let mut classes = BTreeSet::new();
        if !group.iter().all(|i| classes.insert(i.class_label.as_str())) {
            charge(DropReason::DuplicateClass, group.len());
            continue;
        }
        for inst in group {
            let frac = inst.area_fraction();
            let reason = if inst.truncated {
                Some(DropReason::Truncated)
            } else if frac < cfg.min_object_area_fraction || frac > cfg.max_object_area_fraction {
                Some(DropReason::ExtremeSize)
            } else if inst.gt_mask.touches_border() {
                Some(DropReason::Boundary)
            } else {
                None
            };
            match reason {
                Some(r) => charge(r, 1),
                None => kept.push(inst.clone()),
            }
        }
    }
    out.kept = kept;
    out
}
