//! Ingestion, filtering and manifests over the shipped VOC-layout fixtures.

use std::fs;
use std::path::{Path, PathBuf};

use objedit::dataset::{
    filter_instances, generate, ingest_voc, load_manifest, write_manifest, DatasetError, DropReason,
    GenerationConfig, SourceInstance,
};
use objedit::geometry::BoundingBox;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            fs::copy(entry.path(), dest).unwrap();
        }
    }
}

fn find<'a>(all: &'a [SourceInstance], class: &str) -> &'a SourceInstance {
    all.iter().find(|i| i.class_label == class).unwrap()
}

fn bbox(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

#[test]
fn mini_fixture_boxes_match_the_drawn_shapes() {
    let all = ingest_voc(&fixture("voc_mini")).unwrap();
    assert_eq!(all.len(), 9);
    // Rectangle [20, 50) x [30, 100).
    let person = find(&all, "person");
    assert_eq!(person.gt_bbox, bbox(20.0, 30.0, 50.0, 100.0));
    assert_eq!(person.gt_mask.count(), 30 * 70);
    assert_eq!((person.image_width, person.image_height), (160, 120));
    // Ellipse centred at (105, 65), radii 30 and 20, sampled at pixel
    // centres: columns 75..=134 and rows 45..=84.
    assert_eq!(find(&all, "horse").gt_bbox, bbox(75.0, 45.0, 135.0, 85.0));
    // Ellipse centred at (80, 60), radii 40 and 30.
    assert_eq!(find(&all, "cat").gt_bbox, bbox(40.0, 30.0, 120.0, 90.0));
    assert_eq!(find(&all, "sheep").gt_mask.count(), 16);
    assert_eq!(find(&all, "boat").gt_bbox, bbox(40.0, 0.0, 120.0, 40.0));
    assert!(find(&all, "bird").truncated);
    let chair = find(&all, "chair");
    assert_eq!(chair.gt_bbox.y_min, 20.0);
    assert!(chair.gt_bbox.x_min >= 60.0 && chair.gt_bbox.x_max <= 130.0);
    let dogs: Vec<u32> = all.iter().filter(|i| i.class_label == "dog").map(|i| i.instance_index).collect();
    assert_eq!(dogs, [1, 2]);
    assert!(person.image_ref.ends_with("JPEGImages/syn_000001.jpg"));
}

#[test]
fn mini_fixture_filter_tallies() {
    let cfg = GenerationConfig::default();
    let out = filter_instances(&ingest_voc(&fixture("voc_mini")).unwrap(), &cfg);
    let mut kept: Vec<&str> = out.kept.iter().map(|i| i.class_label.as_str()).collect();
    kept.sort();
    assert_eq!(kept, ["cat", "chair", "horse", "person"]);
    assert_eq!(out.images_kept(), 3);
    assert_eq!(out.tally(DropReason::DuplicateClass), 2);
    assert_eq!(out.tally(DropReason::Truncated), 1);
    assert_eq!(out.tally(DropReason::ExtremeSize), 1);
    assert_eq!(out.tally(DropReason::Boundary), 1);
    assert_eq!(out.tally(DropReason::TooManyObjects), 0);
}

#[test]
fn crowded_fixture_drops_every_object() {
    let cfg = GenerationConfig::default();
    let all = ingest_voc(&fixture("voc_crowded")).unwrap();
    assert_eq!(all.len(), 6);
    let out = filter_instances(&all, &cfg);
    assert!(out.kept.is_empty());
    assert_eq!(out.tally(DropReason::TooManyObjects), 6);
    let relaxed = GenerationConfig {
        max_foreground_objects: 6,
        ..GenerationConfig::default()
    };
    assert_eq!(filter_instances(&all, &relaxed).kept.len(), 6);
}

#[test]
fn manifests_round_trip_and_recheck_invariants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = GenerationConfig::default();
    let filtered = filter_instances(&ingest_voc(&fixture("voc_mini")).unwrap(), &cfg);
    let samples = generate(&filtered.kept, &cfg).unwrap();
    let path = write_manifest(tmp.path(), &samples, &cfg, Some(&filtered)).unwrap();
    let (manifest, back) = load_manifest(&path).unwrap();
    assert_eq!(back, samples);
    let summary = manifest.filter.unwrap();
    assert_eq!((summary.images_kept, summary.instances_kept), (3, 4));
    assert_eq!(summary.dropped["duplicate_class"], 2);

    // A flipped pixel in a stored after-mask breaks the warp invariant.
    let rel = &manifest.samples[0].mask_after;
    let mut after = objedit::geometry::BinaryMask::load_png(tmp.path().join(rel)).unwrap();
    after.set(0, 0, !after.get(0, 0));
    after.save_png(tmp.path().join(rel)).unwrap();
    assert!(matches!(load_manifest(tmp.path()), Err(DatasetError::InvariantViolated { .. })));

    let text = fs::read_to_string(&path).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_manifest(&path), Err(DatasetError::UnsupportedSchema(9))));
}

#[test]
fn broken_inputs_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("voc");
    copy_dir(&fixture("voc_mini"), &root);

    let xml = root.join("Annotations/syn_000002.xml");
    let original = fs::read_to_string(&xml).unwrap();
    fs::write(&xml, &original[..original.len() / 2]).unwrap();
    assert!(matches!(ingest_voc(&root), Err(DatasetError::MalformedAnnotation { .. })));

    // Dropping an <object> leaves instance index 2 unowned.
    let one_dog = original.replacen("<object>", "<skipped>", 1).replacen("</object>", "</skipped>", 1);
    fs::write(&xml, one_dog).unwrap();
    let err = ingest_voc(&root).unwrap_err();
    assert!(matches!(&err, DatasetError::MalformedAnnotation { reason, .. } if reason.contains("index 2")), "{err}");
    fs::write(&xml, &original).unwrap();

    fs::write(&xml, original.replacen("<truncated>0</truncated>", "<truncated>maybe</truncated>", 1)).unwrap();
    assert!(matches!(ingest_voc(&root), Err(DatasetError::MalformedAnnotation { .. })));
    fs::write(&xml, &original).unwrap();

    fs::remove_file(root.join("SegmentationObject/syn_000004.png")).unwrap();
    assert!(matches!(ingest_voc(&root), Err(DatasetError::MissingMask(id)) if id == "syn_000004"));
}
