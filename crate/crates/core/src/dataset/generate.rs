use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::templates::{display_name, render_template, FORMS_PER_KIND};
use super::{DatasetError, Difficulty, EditSample, SourceInstance};
use crate::editops::{categorize, compile, parse_instruction_with_target, EditCategory, EditOp, ObjectGeometry};
use crate::geometry::{bbox_of_mask, mask_iou, warp_mask};
use crate::util::{normalize_label, stable_seed};

/// Sampling and filtering parameters. Ranges are `[low, high]`; move,
/// rotation and shear magnitudes get a random sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub seed: u64,
    pub transforms_per_image: usize,
    pub paraphrases_per_transform: usize,
    pub max_foreground_objects: usize,
    pub min_object_area_fraction: f64,
    pub max_object_area_fraction: f64,
    /// IoU(before, after) at or above which a sample is Easy.
    pub t_easy: f64,
    /// IoU(before, after) at or below which a sample is Hard.
    pub t_hard: f64,
    pub translation_px: [f64; 2],
    pub scale_factor: [f64; 2],
    pub rotation_deg: [f64; 2],
    pub shear: [f64; 2],
    /// Categories to draw from, uniformly. `Reason` is not generated.
    pub categories: Vec<EditCategory>,
    pub max_resample_attempts: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            transforms_per_image: 2,
            paraphrases_per_transform: 3,
            max_foreground_objects: 5,
            min_object_area_fraction: 0.01,
            max_object_area_fraction: 0.70,
            t_easy: 0.5,
            t_hard: 0.1,
            translation_px: [25.0, 250.0],
            scale_factor: [0.5, 2.0],
            rotation_deg: [10.0, 90.0],
            shear: [0.1, 0.5],
            categories: vec![
                EditCategory::Move,
                EditCategory::Scale,
                EditCategory::Flip,
                EditCategory::Shear,
                EditCategory::Rotate,
                EditCategory::Mix,
            ],
            max_resample_attempts: 200,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if self.transforms_per_image == 0 || self.paraphrases_per_transform == 0 {
            return bad("transform and paraphrase counts must be at least 1".into());
        }
        if self.max_foreground_objects == 0 || self.max_resample_attempts == 0 {
            return bad("max_foreground_objects and max_resample_attempts must be at least 1".into());
        }
        let (lo, hi) = (self.min_object_area_fraction, self.max_object_area_fraction);
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("area fractions must satisfy 0 < min < max < 1, got {lo}, {hi}"));
        }
        if !(0.0 <= self.t_hard && self.t_hard < self.t_easy && self.t_easy <= 1.0) {
            return bad(format!("need 0 <= t_hard < t_easy <= 1, got {}, {}", self.t_hard, self.t_easy));
        }
        for (name, [a, b], min) in [
            ("translation_px", self.translation_px, 0.0),
            ("rotation_deg", self.rotation_deg, 0.0),
            ("shear", self.shear, 0.0),
            ("scale_factor", self.scale_factor, f64::MIN_POSITIVE),
        ] {
            if !(a.is_finite() && b.is_finite() && a >= min && a <= b) {
                return bad(format!("{name} range [{a}, {b}] is invalid"));
            }
        }
        if self.categories.is_empty() || self.categories.contains(&EditCategory::Reason) {
            return bad("categories must be nonempty and cannot include Reason".into());
        }
        Ok(())
    }

    pub fn difficulty(&self, iou: f64) -> Difficulty {
        bucket_difficulty(iou, self.t_easy, self.t_hard)
    }
}

pub fn bucket_difficulty(iou: f64, t_easy: f64, t_hard: f64) -> Difficulty {
    if iou >= t_easy {
        Difficulty::Easy
    } else if iou <= t_hard {
        Difficulty::Hard
    } else {
        Difficulty::Medium
    }
}

/// Emits `transforms_per_image × paraphrases_per_transform` samples per
/// image, sorted by sample id. Pure in `(instances, cfg)`.
pub fn generate(instances: &[SourceInstance], cfg: &GenerationConfig) -> Result<Vec<EditSample>, DatasetError> {
    cfg.validate()?;
    let mut by_image: BTreeMap<&str, Vec<&SourceInstance>> = BTreeMap::new();
    for inst in instances {
        by_image.entry(&inst.image_id).or_default().push(inst);
    }
    let groups: Vec<(&str, Vec<&SourceInstance>)> = by_image.into_iter().collect();
    let per_image: Vec<Vec<EditSample>> = groups
        .par_iter()
        .map(|(id, group)| generate_image(id, group, cfg))
        .collect::<Result<_, _>>()?;
    let mut out: Vec<EditSample> = per_image.into_iter().flatten().collect();
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(out)
}

fn generate_image(
    image_id: &str,
    group: &[&SourceInstance],
    cfg: &GenerationConfig,
) -> Result<Vec<EditSample>, DatasetError> {
    let seed = stable_seed(cfg.seed, image_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<(u32, EditOp)> = Vec::new();
    let mut out = Vec::new();
    for t in 0..cfg.transforms_per_image {
        let mut accepted = None;
        for _ in 0..cfg.max_resample_attempts {
            let target = group[rng.random_range(0..group.len())];
            let category = cfg.categories[rng.random_range(0..cfg.categories.len())];
            let geom = ObjectGeometry::new(target.gt_bbox, target.image_width, target.image_height)?;
            let op = draw_op(category, &geom, cfg, &mut rng)?;
            if drawn.iter().any(|(id, o)| *id == target.instance_index && *o == op) {
                continue;
            }
            let transform = compile(&op, &geom)?;
            let after = warp_mask(&target.gt_mask, &transform)?;
            if after.is_empty() {
                continue;
            }
            accepted = Some((target, op, transform, after));
            break;
        }
        let Some((target, op, transform, after)) = accepted else {
            return Err(DatasetError::ExhaustedResampling(image_id.to_string()));
        };
        drawn.push((target.instance_index, op.clone()));
        let iou = mask_iou(&target.gt_mask, &after)?;
        let mut forms: Vec<usize> = (0..FORMS_PER_KIND).collect();
        forms.shuffle(&mut rng);
        let distractors: Vec<SourceInstance> = group
            .iter()
            .filter(|i| i.instance_index != target.instance_index)
            .map(|i| (*i).clone())
            .collect();
        for p in 0..cfg.paraphrases_per_transform {
            let sample = EditSample {
                sample_id: format!("{image_id}_t{t}_p{p}"),
                instance: target.clone(),
                distractors: distractors.clone(),
                instruction_text: render_template(&op, &display_name(&target.class_label), forms[p % forms.len()])?,
                canonical_op: op.clone(),
                gt_transform: transform,
                gt_mask_after: after.clone(),
                category: categorize(&op),
                iou_before_after: iou,
                difficulty: cfg.difficulty(iou),
                seed,
            };
            verify_sample(&sample, cfg)?;
            out.push(sample);
        }
    }
    Ok(out)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn signed(rng: &mut ChaCha8Rng, v: f64) -> f64 {
    if rng.random_bool(0.5) {
        -v
    } else {
        v
    }
}

fn draw_op(
    category: EditCategory,
    geom: &ObjectGeometry,
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EditOp, DatasetError> {
    const BASE: [EditCategory; 5] = [
        EditCategory::Move,
        EditCategory::Scale,
        EditCategory::Flip,
        EditCategory::Shear,
        EditCategory::Rotate,
    ];
    if category != EditCategory::Mix {
        return Ok(draw_base(category, geom, cfg, rng));
    }
    let first = BASE[rng.random_range(0..BASE.len())];
    let second = loop {
        let c = BASE[rng.random_range(0..BASE.len())];
        if c != first {
            break c;
        }
    };
    let op1 = draw_base(first, geom, cfg, rng);
    let after_first = geom.transformed(&compile(&op1, geom)?);
    let op2 = draw_base(second, &after_first, cfg, rng);
    Ok(EditOp::Sequence { ops: vec![op1, op2] })
}

fn draw_base(category: EditCategory, geom: &ObjectGeometry, cfg: &GenerationConfig, rng: &mut ChaCha8Rng) -> EditOp {
    let uniform = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    match category {
        EditCategory::Move => {
            let mag = |rng: &mut ChaCha8Rng| {
                let v = uniform(rng, cfg.translation_px).round();
                signed(rng, v)
            };
            match rng.random_range(0..3) {
                0 => EditOp::Move { dx: mag(rng), dy: 0.0 },
                1 => EditOp::Move { dx: 0.0, dy: mag(rng) },
                _ => {
                    let dx = mag(rng);
                    EditOp::Move { dx, dy: mag(rng) }
                }
            }
        }
        EditCategory::Scale => {
            // Prefer factors that visibly change the size, when the range allows.
            let mut f = round2(uniform(rng, cfg.scale_factor));
            for _ in 0..32 {
                if f > 0.0 && (f - 1.0).abs() >= 0.05 {
                    break;
                }
                f = round2(uniform(rng, cfg.scale_factor));
            }
            let f = if f > 0.0 { f } else { cfg.scale_factor[1] };
            match rng.random_range(0..5) {
                0 | 1 => EditOp::ScaleBy { sx: f, sy: f },
                2 => EditOp::ScaleBy { sx: f, sy: 1.0 },
                3 => EditOp::ScaleToWidth {
                    w: (geom.bbox.width() * f).round().max(1.0),
                },
                _ => EditOp::ScaleToHeight {
                    h: (geom.bbox.height() * f).round().max(1.0),
                },
            }
        }
        EditCategory::Flip => {
            if rng.random_bool(0.5) {
                EditOp::FlipHorizontal
            } else {
                EditOp::FlipVertical
            }
        }
        EditCategory::Shear => {
            let k = round2(uniform(rng, cfg.shear));
            let k = signed(rng, k);
            if rng.random_bool(0.5) {
                EditOp::Shear { kx: k, ky: 0.0 }
            } else {
                EditOp::Shear { kx: 0.0, ky: k }
            }
        }
        EditCategory::Rotate => {
            let d = uniform(rng, cfg.rotation_deg).round();
            EditOp::Rotate { degrees: signed(rng, d) }
        }
        EditCategory::Reason | EditCategory::Mix => unreachable!("not a base category"),
    }
}

/// Re-derives every sample invariant from its parts.
pub fn verify_sample(s: &EditSample, cfg: &GenerationConfig) -> Result<(), DatasetError> {
    let fail = |reason: String| {
        Err(DatasetError::InvariantViolated {
            sample_id: s.sample_id.clone(),
            reason,
        })
    };
    let inst = &s.instance;
    if s.category == EditCategory::Reason {
        // Authored outside the template bank; only the geometry is checkable.
        if warp_mask(&inst.gt_mask, &s.gt_transform)? != s.gt_mask_after {
            return fail("gt_mask_after is not the warped mask".into());
        }
        return Ok(());
    }
    if bbox_of_mask(&inst.gt_mask)? != inst.gt_bbox {
        return fail("gt_bbox is not the mask's bounding box".into());
    }
    let parsed = match parse_instruction_with_target(&s.instruction_text) {
        Ok(p) => p,
        Err(e) => return fail(format!("instruction does not parse: {e}")),
    };
    if parsed.op != s.canonical_op {
        return fail(format!("instruction parses to {:?}", parsed.op));
    }
    if normalize_label(&parsed.target) != normalize_label(&inst.class_label) {
        return fail(format!("instruction names {:?}", parsed.target));
    }
    if categorize(&s.canonical_op) != s.category {
        return fail(format!("category {} does not match the op", s.category));
    }
    let geom = ObjectGeometry::new(inst.gt_bbox, inst.image_width, inst.image_height)?;
    let t = compile(&s.canonical_op, &geom)?;
    if t != s.gt_transform {
        return fail("gt_transform is not the compiled op".into());
    }
    if warp_mask(&inst.gt_mask, &s.gt_transform)? != s.gt_mask_after {
        return fail("gt_mask_after is not the warped mask".into());
    }
    if s.gt_mask_after.is_empty() {
        return fail("gt_mask_after is empty".into());
    }
    let iou = mask_iou(&inst.gt_mask, &s.gt_mask_after)?;
    if iou != s.iou_before_after || cfg.difficulty(iou) != s.difficulty {
        return fail("difficulty does not match the before/after IoU".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::random_scenes;
    use crate::geometry::bbox_of_mask;

    fn instances(n: usize, seed: u64) -> Vec<SourceInstance> {
        random_scenes(n, 96, 72, 2, seed)
            .into_iter()
            .flat_map(|img| {
                let id = img.id.clone();
                img.objects
                    .into_iter()
                    .enumerate()
                    .map(move |(k, o)| {
                        let m = o.shape.mask(96, 72);
                        SourceInstance {
                            image_id: id.clone(),
                            image_ref: format!("{id}.jpg").into(),
                            instance_index: k as u32 + 1,
                            class_label: o.class_label,
                            truncated: false,
                            gt_bbox: bbox_of_mask(&m).unwrap(),
                            gt_mask: m,
                            image_width: 96,
                            image_height: 72,
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn buckets() {
        assert_eq!(bucket_difficulty(1.0, 0.5, 0.1), Difficulty::Easy);
        assert_eq!(bucket_difficulty(0.5, 0.5, 0.1), Difficulty::Easy);
        assert_eq!(bucket_difficulty(0.3, 0.5, 0.1), Difficulty::Medium);
        assert_eq!(bucket_difficulty(0.1, 0.5, 0.1), Difficulty::Hard);
        assert_eq!(bucket_difficulty(0.0, 0.5, 0.1), Difficulty::Hard);
    }

    #[test]
    fn counts_and_determinism() {
        let inst = instances(4, 3);
        let cfg = GenerationConfig::default();
        let a = generate(&inst, &cfg).unwrap();
        assert_eq!(a.len(), 4 * 2 * 3);
        assert_eq!(a, generate(&inst, &cfg).unwrap());
        let other = generate(&inst, &GenerationConfig { seed: 1, ..cfg.clone() }).unwrap();
        assert_ne!(a, other);
        for s in &a {
            verify_sample(s, &cfg).unwrap();
        }
        // Paraphrases of one transform share everything but the wording.
        let t0: Vec<&EditSample> = a.iter().filter(|s| s.sample_id.contains("_t0_")).take(3).collect();
        assert_eq!(t0[0].canonical_op, t0[1].canonical_op);
        assert_ne!(t0[0].instruction_text, t0[1].instruction_text);
    }

    #[test]
    fn config_validation() {
        let ok = GenerationConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GenerationConfig { transforms_per_image: 0, ..ok.clone() },
            GenerationConfig { min_object_area_fraction: 0.8, ..ok.clone() },
            GenerationConfig { t_hard: 0.6, ..ok.clone() },
            GenerationConfig { scale_factor: [0.0, 2.0], ..ok.clone() },
            GenerationConfig { categories: vec![EditCategory::Reason], ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn exhausted_resampling_is_reported() {
        let inst = instances(1, 9);
        // Every move leaves the 96×72 frame.
        let cfg = GenerationConfig {
            translation_px: [500.0, 500.0],
            categories: vec![EditCategory::Move],
            max_resample_attempts: 5,
            ..Default::default()
        };
        assert!(matches!(generate(&inst, &cfg), Err(DatasetError::ExhaustedResampling(_))));
    }

    #[test]
    fn tampered_samples_fail_verification() {
        let inst = instances(1, 4);
        let cfg = GenerationConfig::default();
        let s = generate(&inst, &cfg).unwrap().remove(0);
        let mut bad = s.clone();
        bad.instruction_text = "flip the zebra vertically".into();
        assert!(verify_sample(&bad, &cfg).is_err());
        let mut bad = s.clone();
        bad.gt_mask_after = s.instance.gt_mask.clone();
        bad.gt_mask_after.set(0, 0, true);
        assert!(verify_sample(&bad, &cfg).is_err());
    }
}
