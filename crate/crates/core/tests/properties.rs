//! Property checks over geometry, the instruction grammar, the reply parsers
//! and the compositor.

use image::{Rgb, RgbImage};
use proptest::prelude::*;

use objedit::compositor::{composite, Filler};
use objedit::dataset::synth::VOC_CLASSES;
use objedit::dataset::{bucket_difficulty, display_name, render_template, Difficulty, FORMS_PER_KIND};
use objedit::editops::{compile, parse_instruction_with_target, EditOp, ObjectGeometry};
use objedit::geometry::{compose, mask_iou, warp_mask, AffineTransform, BinaryMask, BoundingBox, Point};
use objedit::llmproto::{parse_grounding_reply, parse_reasoner_reply};
use objedit::util::normalize_label;

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), (w * h) as usize)
            .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
    })
}

fn invertible() -> impl Strategy<Value = AffineTransform> {
    (
        -2.0f64..2.0,
        -2.0f64..2.0,
        -20.0f64..20.0,
        -2.0f64..2.0,
        -2.0f64..2.0,
        -20.0f64..20.0,
    )
        .prop_map(|(a, b, c, d, e, f)| AffineTransform::new(a, b, c, d, e, f))
        .prop_filter("invertible", |t| t.determinant().abs() > 0.05)
}

fn nonzero(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_filter("nonzero", |v| *v != 0).prop_map(f64::from)
}

fn hundredths(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..=hi).prop_filter("not 0 or 1", |v| *v != 0 && *v != 100).prop_map(|v| f64::from(v) / 100.0)
}

fn base_op() -> impl Strategy<Value = EditOp> {
    prop_oneof![
        nonzero(-300, 300).prop_map(|dx| EditOp::Move { dx, dy: 0.0 }),
        nonzero(-300, 300).prop_map(|dy| EditOp::Move { dx: 0.0, dy }),
        (nonzero(-300, 300), nonzero(-300, 300)).prop_map(|(dx, dy)| EditOp::Move { dx, dy }),
        hundredths(10, 400).prop_map(|f| EditOp::ScaleBy { sx: f, sy: f }),
        hundredths(10, 400).prop_map(|f| EditOp::ScaleBy { sx: f, sy: 1.0 }),
        (1i32..500).prop_map(|w| EditOp::ScaleToWidth { w: f64::from(w) }),
        (1i32..500).prop_map(|h| EditOp::ScaleToHeight { h: f64::from(h) }),
        nonzero(-180, 180).prop_map(|degrees| EditOp::Rotate { degrees }),
        Just(EditOp::FlipHorizontal),
        Just(EditOp::FlipVertical),
        hundredths(-100, 100).prop_map(|k| EditOp::Shear { kx: k, ky: 0.0 }),
        hundredths(-100, 100).prop_map(|k| EditOp::Shear { kx: 0.0, ky: k }),
    ]
}

fn op_strategy() -> impl Strategy<Value = EditOp> {
    prop_oneof![
        3 => base_op(),
        1 => (base_op(), base_op())
            .prop_filter("distinct kinds", |(a, b)| a.kind() != b.kind())
            .prop_map(|(a, b)| EditOp::Sequence { ops: vec![a, b] }),
    ]
}

fn shift_oracle(m: &BinaryMask, dx: i64, dy: i64) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 && m.get(sx as u32, sy as u32)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identity_warp_is_a_no_op(m in mask_strategy()) {
        prop_assert_eq!(warp_mask(&m, &AffineTransform::identity()).unwrap(), m);
    }

    #[test]
    fn integer_translation_shifts_pixels(m in mask_strategy(), dx in -30i64..30, dy in -30i64..30) {
        let t = AffineTransform::translate(dx as f64, dy as f64);
        prop_assert_eq!(warp_mask(&m, &t).unwrap(), shift_oracle(&m, dx, dy));
    }

    #[test]
    fn translations_compose_through_warps(m in mask_strategy(), a in -5i64..5, b in -5i64..5, c in -5i64..5, d in -5i64..5) {
        let t1 = AffineTransform::translate(a as f64, b as f64);
        let t2 = AffineTransform::translate(c as f64, d as f64);
        let stepwise = warp_mask(&warp_mask(&m, &t1).unwrap(), &t2).unwrap();
        // Pixels pushed off the canvas by the first step are lost, so compare
        // against the direct warp only where both shifts keep them.
        let direct = warp_mask(&m, &compose(&t2, &t1)).unwrap();
        let lost = shift_oracle(&shift_oracle(&BinaryMask::full(m.width(), m.height()), a, b), c, d);
        prop_assert_eq!(stepwise.clone(), direct.and(&lost).unwrap());
    }

    #[test]
    fn mask_iou_is_symmetric_and_bounded(a in mask_strategy(), seed in any::<u64>()) {
        let (w, h) = a.dims();
        let b = BinaryMask::from_fn(w, h, |x, y| (seed >> ((x * 7 + y * 13) % 64)) & 1 == 1);
        let ab = mask_iou(&a, &b).unwrap();
        prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn inverse_composes_to_identity(t in invertible(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let inv = t.inverse().unwrap();
        let p = compose(&inv, &t).apply(Point::new(x, y));
        prop_assert!((p.x - x).abs() < 1e-6 && (p.y - y).abs() < 1e-6);
    }

    #[test]
    fn composition_is_associative(a in invertible(), b in invertible(), c in invertible()) {
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-9);
    }

    #[test]
    fn shape_edits_fix_the_box_centre(
        op in base_op().prop_filter("not a move", |o| !matches!(o, EditOp::Move { .. })),
        x0 in 0.0f64..100.0, y0 in 0.0f64..100.0, w in 1.0f64..100.0, h in 1.0f64..100.0,
    ) {
        let bbox = BoundingBox::new(x0, y0, x0 + w, y0 + h).unwrap();
        let t = compile(&op, &ObjectGeometry::new(bbox, 200, 200).unwrap()).unwrap();
        let c = bbox.center();
        let moved = t.apply(c);
        prop_assert!((moved.x - c.x).abs() < 1e-9 && (moved.y - c.y).abs() < 1e-9);
    }

    #[test]
    fn templates_parse_back(op in op_strategy(), class in 0usize..20, form in 0usize..FORMS_PER_KIND) {
        let class = VOC_CLASSES[class];
        let text = render_template(&op, &display_name(class), form).unwrap();
        let parsed = parse_instruction_with_target(&text).unwrap();
        prop_assert_eq!(&parsed.op, &op, "{}", text);
        prop_assert_eq!(normalize_label(&parsed.target), normalize_label(class));
    }

    #[test]
    fn reply_parsers_never_panic(text in ".{0,200}") {
        let _ = parse_reasoner_reply(&text);
        let _ = parse_grounding_reply(&text, 64, 48);
        let wrapped = format!("<MSTART>{text}<MEND><ISTART>{text}<IEND>");
        let _ = parse_reasoner_reply(&wrapped);
        let _ = parse_instruction_with_target(&text);
    }

    #[test]
    fn difficulty_is_monotone_in_overlap(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let rank = |d: Difficulty| Difficulty::ALL.iter().position(|x| *x == d).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(bucket_difficulty(hi, 0.5, 0.1)) <= rank(bucket_difficulty(lo, 0.5, 0.1)));
    }

    #[test]
    fn compositing_leaves_the_rest_of_the_image_alone(
        x0 in 0u32..30, y0 in 0u32..20, w in 1u32..10, h in 1u32..10,
        dx in -15i32..15, dy in -15i32..15, seed in any::<u64>(), noise in any::<bool>(),
    ) {
        let (iw, ih) = (40, 30);
        let img = RgbImage::from_fn(iw, ih, |x, y| Rgb([(x * 6) as u8, (y * 8) as u8, ((x + y) * 3) as u8]));
        let before = BinaryMask::rect(iw, ih, x0, y0, (x0 + w).min(iw), (y0 + h).min(ih));
        let t = AffineTransform::translate(dx as f64, dy as f64);
        let filler = if noise { Filler::GaussianNoise } else { Filler::BoundaryMean };
        let out = composite(&img, &before, &t, seed, filler).unwrap();
        let after = warp_mask(&before, &t).unwrap();
        for (x, y, px) in img.enumerate_pixels() {
            if !before.get(x, y) && !after.get(x, y) {
                prop_assert_eq!(out.pixels.get_pixel(x, y), px);
            }
            if after.get(x, y) {
                let (sx, sy) = ((x as i32 - dx) as u32, (y as i32 - dy) as u32);
                prop_assert_eq!(out.pixels.get_pixel(x, y), img.get_pixel(sx, sy));
            }
        }
        prop_assert_eq!(out.object_mask.as_ref(), Some(&after));
    }
}
