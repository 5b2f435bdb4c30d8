//! Writes synthetic scenes in the VOC2012 directory layout, for fixtures and
//! offline experiments.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::voc::VOID_INDEX;
use super::DatasetError;
use crate::geometry::BinaryMask;
use crate::util::stable_seed;

pub const VOC_CLASSES: [&str; 20] = [
    "aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa",
    "train", "tvmonitor",
];

/// Object outline in pixel coordinates. A pixel belongs to the shape when
/// its center does.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
    Rect { x0: u32, y0: u32, x1: u32, y1: u32 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Triangle([(f64, f64); 3]),
}

impl Shape {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        match *self {
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Ellipse { cx, cy, rx, ry } => {
                ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2) <= 1.0
            }
            Shape::Triangle([a, b, c]) => {
                let side = |p: (f64, f64), q: (f64, f64)| (q.0 - p.0) * (py - p.1) - (q.1 - p.1) * (px - p.0);
                let (d1, d2, d3) = (side(a, b), side(b, c), side(c, a));
                let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                !(neg && pos)
            }
        }
    }

    pub fn mask(&self, width: u32, height: u32) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| self.contains(x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub class_label: String,
    pub shape: Shape,
    pub truncated: bool,
}

impl SynthObject {
    pub fn new(class_label: &str, shape: Shape) -> Self {
        Self {
            class_label: class_label.into(),
            shape,
            truncated: false,
        }
    }
}

/// One scene. Later objects occlude earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<SynthObject>,
}

impl SynthImage {
    /// Per-pixel instance index (1-based, 0 background, 255 void ring).
    pub fn instance_raster(&self) -> Vec<u8> {
        let (w, h) = (self.width, self.height);
        let mut idx = vec![0u8; (w * h) as usize];
        for (k, obj) in self.objects.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    if obj.shape.contains(x, y) {
                        idx[(y * w + x) as usize] = k as u8 + 1;
                    }
                }
            }
        }
        let inside = idx.clone();
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if inside[(y * w as i64 + x) as usize] != 0 {
                    continue;
                }
                let near = (-1..=1).any(|dy| {
                    (-1..=1).any(|dx| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0
                            && ny >= 0
                            && nx < w as i64
                            && ny < h as i64
                            && inside[(ny * w as i64 + nx) as usize] != 0
                    })
                });
                if near {
                    idx[(y * w as i64 + x) as usize] = VOID_INDEX;
                }
            }
        }
        idx
    }

    /// Textured RGB rendering: a gradient background and one flat hue per class.
    pub fn render(&self) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(0, &self.id));
        let raster = self.instance_raster();
        let (w, h) = (self.width, self.height);
        RgbImage::from_fn(w, h, |x, y| {
            let jitter: i32 = rng.random_range(-8..=8);
            let k = raster[(y * w + x) as usize];
            let base = if k == 0 || k == VOID_INDEX {
                [
                    60 + (120 * x / w.max(1)) as i32,
                    90 + (80 * y / h.max(1)) as i32,
                    150,
                ]
            } else {
                class_color(&self.objects[k as usize - 1].class_label)
            };
            Rgb(base.map(|c| (c + jitter).clamp(0, 255) as u8))
        })
    }
}

fn class_color(label: &str) -> [i32; 3] {
    let i = VOC_CLASSES.iter().position(|c| *c == label).unwrap_or(0) as i32;
    [40 + (i * 53) % 200, 40 + (i * 97) % 200, 40 + (i * 31) % 200]
}

/// Standard VOC color map.
fn voc_palette() -> Vec<u8> {
    let mut out = Vec::with_capacity(768);
    for i in 0..256u32 {
        let (mut r, mut g, mut b, mut c) = (0u8, 0u8, 0u8, i);
        for j in 0..8 {
            r |= ((c & 1) as u8) << (7 - j);
            g |= (((c >> 1) & 1) as u8) << (7 - j);
            b |= (((c >> 2) & 1) as u8) << (7 - j);
            c >>= 3;
        }
        out.extend([r, g, b]);
    }
    out
}

fn write_index_png(path: &Path, w: u32, h: u32, data: &[u8]) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(voc_palette());
    let mut writer = enc.write_header().map_err(|e| DatasetError::io(path, e))?;
    writer.write_image_data(data).map_err(|e| DatasetError::io(path, e))
}

fn annotation_xml(img: &SynthImage) -> String {
    let mut s = format!(
        "<annotation>\n\t<folder>VOC2012</folder>\n\t<filename>{}.jpg</filename>\n\t<size>\n\t\t<width>{}</width>\n\t\t<height>{}</height>\n\t\t<depth>3</depth>\n\t</size>\n\t<segmented>1</segmented>\n",
        img.id, img.width, img.height
    );
    for obj in &img.objects {
        let m = obj.shape.mask(img.width, img.height);
        let b = crate::geometry::bbox_of_mask(&m).ok();
        s += &format!(
            "\t<object>\n\t\t<name>{}</name>\n\t\t<pose>Unspecified</pose>\n\t\t<truncated>{}</truncated>\n\t\t<difficult>0</difficult>\n",
            obj.class_label, obj.truncated as u8
        );
        if let Some(b) = b {
            // VOC boxes are 1-based and inclusive.
            s += &format!(
                "\t\t<bndbox>\n\t\t\t<xmin>{}</xmin>\n\t\t\t<ymin>{}</ymin>\n\t\t\t<xmax>{}</xmax>\n\t\t\t<ymax>{}</ymax>\n\t\t</bndbox>\n",
                b.x_min + 1.0,
                b.y_min + 1.0,
                b.x_max,
                b.y_max
            );
        }
        s += "\t</object>\n";
    }
    s + "</annotation>\n"
}

/// Writes `images` under `root` as JPEGImages, SegmentationObject,
/// SegmentationClass, Annotations and the trainval image set.
pub fn write_voc(root: &Path, images: &[SynthImage]) -> Result<(), DatasetError> {
    for sub in ["JPEGImages", "SegmentationObject", "SegmentationClass", "Annotations", "ImageSets/Segmentation"] {
        let d = root.join(sub);
        fs::create_dir_all(&d).map_err(|e| DatasetError::io(&d, e))?;
    }
    let mut list = String::new();
    for img in images {
        let (w, h) = (img.width, img.height);
        let inst = img.instance_raster();
        let class: Vec<u8> = inst
            .iter()
            .map(|&k| match k {
                0 | VOID_INDEX => k,
                k => {
                    let label = &img.objects[k as usize - 1].class_label;
                    VOC_CLASSES.iter().position(|c| c == label).map_or(0, |i| i as u8 + 1)
                }
            })
            .collect();
        write_index_png(&root.join(format!("SegmentationObject/{}.png", img.id)), w, h, &inst)?;
        write_index_png(&root.join(format!("SegmentationClass/{}.png", img.id)), w, h, &class)?;
        let jpg = root.join(format!("JPEGImages/{}.jpg", img.id));
        img.render()
            .save_with_format(&jpg, image::ImageFormat::Jpeg)
            .map_err(|e| DatasetError::io(&jpg, e))?;
        let xml = root.join(format!("Annotations/{}.xml", img.id));
        fs::write(&xml, annotation_xml(img)).map_err(|e| DatasetError::io(&xml, e))?;
        list += &img.id;
        list.push('\n');
    }
    let set = root.join("ImageSets/Segmentation/trainval.txt");
    fs::write(&set, list).map_err(|e| DatasetError::io(&set, e))
}

/// Six 160×120 scenes holding nine instances: one clean pair, one
/// duplicate-class pair, a truncated object, a sliver next to a normal
/// object, an object touching the top edge, and one clean single object.
pub fn mini_fixture() -> Vec<SynthImage> {
    let (w, h) = (160, 120);
    let scene = |id: &str, objects: Vec<SynthObject>| SynthImage {
        id: id.into(),
        width: w,
        height: h,
        objects,
    };
    let rect = |x0, y0, x1, y1| Shape::Rect { x0, y0, x1, y1 };
    let ellipse = |cx, cy, rx, ry| Shape::Ellipse { cx, cy, rx, ry };
    vec![
        scene(
            "syn_000001",
            vec![
                SynthObject::new("person", rect(20, 30, 50, 100)),
                SynthObject::new("horse", ellipse(105.0, 65.0, 30.0, 20.0)),
            ],
        ),
        scene(
            "syn_000002",
            vec![
                SynthObject::new("dog", rect(15, 20, 55, 60)),
                SynthObject::new("dog", rect(90, 50, 140, 100)),
            ],
        ),
        scene(
            "syn_000003",
            vec![SynthObject {
                truncated: true,
                ..SynthObject::new("bird", ellipse(80.0, 60.0, 25.0, 15.0))
            }],
        ),
        scene(
            "syn_000004",
            vec![
                SynthObject::new("sheep", rect(10, 10, 14, 14)),
                SynthObject::new(
                    "chair",
                    Shape::Triangle([(60.0, 20.0), (130.0, 20.0), (95.0, 100.0)]),
                ),
            ],
        ),
        scene("syn_000005", vec![SynthObject::new("boat", rect(40, 0, 120, 40))]),
        scene("syn_000006", vec![SynthObject::new("cat", ellipse(80.0, 60.0, 40.0, 30.0))]),
    ]
}

/// One scene with six small, separate objects of distinct classes.
pub fn crowded_fixture() -> Vec<SynthImage> {
    let classes = ["person", "car", "bus", "cow", "bottle", "sofa"];
    let objects = classes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (col, row) = (i as u32 % 3, i as u32 / 3);
            SynthObject::new(
                c,
                Shape::Rect {
                    x0: 10 + col * 50,
                    y0: 15 + row * 50,
                    x1: 45 + col * 50,
                    y1: 55 + row * 50,
                },
            )
        })
        .collect();
    vec![SynthImage {
        id: "syn_crowded".into(),
        width: 160,
        height: 120,
        objects,
    }]
}

/// Random clean scenes: 1 to `max_objects` disjoint shapes of distinct
/// classes, each covering 2-20% of the image and clear of the border.
pub fn random_scenes(count: usize, width: u32, height: u32, max_objects: usize, seed: u64) -> Vec<SynthImage> {
    (0..count)
        .map(|i| {
            let id = format!("rnd_{i:06}");
            let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(seed, &id));
            let n = rng.random_range(1..=max_objects.max(1));
            let mut objects: Vec<SynthObject> = Vec::new();
            let mut occupied = BinaryMask::empty(width, height);
            let mut attempts = 0;
            while objects.len() < n && attempts < 200 {
                attempts += 1;
                let shape = random_shape(&mut rng, width, height);
                let m = shape.mask(width, height);
                let frac = m.count() as f64 / (width * height) as f64;
                // Keep a gap so void rings never merge objects.
                let grown = BinaryMask::from_fn(width, height, |x, y| {
                    (x.saturating_sub(2)..=(x + 2).min(width - 1))
                        .any(|sx| (y.saturating_sub(2)..=(y + 2).min(height - 1)).any(|sy| m.get(sx, sy)))
                });
                if !(0.02..=0.20).contains(&frac)
                    || m.touches_border()
                    || grown.and(&occupied).is_ok_and(|o| !o.is_empty())
                {
                    continue;
                }
                let class = loop {
                    let c = VOC_CLASSES[rng.random_range(0..VOC_CLASSES.len())];
                    if objects.iter().all(|o| o.class_label != c) {
                        break c;
                    }
                };
                occupied = occupied.or(&m).expect("same dims");
                objects.push(SynthObject::new(class, shape));
            }
            SynthImage {
                id,
                width,
                height,
                objects,
            }
        })
        .collect()
}

fn random_shape(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Shape {
    let (wf, hf) = (w as f64, h as f64);
    match rng.random_range(0..3) {
        0 => {
            let bw = rng.random_range(w / 8..=w / 2);
            let bh = rng.random_range(h / 8..=h / 2);
            let x0 = rng.random_range(1..w - bw);
            let y0 = rng.random_range(1..h - bh);
            Shape::Rect { x0, y0, x1: x0 + bw, y1: y0 + bh }
        }
        1 => {
            let rx = rng.random_range(wf / 14.0..wf / 4.0);
            let ry = rng.random_range(hf / 14.0..hf / 4.0);
            Shape::Ellipse {
                cx: rng.random_range(rx + 1.0..wf - rx - 1.0),
                cy: rng.random_range(ry + 1.0..hf - ry - 1.0),
                rx,
                ry,
            }
        }
        _ => {
            let cx = rng.random_range(wf * 0.2..wf * 0.8);
            let cy = rng.random_range(hf * 0.2..hf * 0.8);
            let r = rng.random_range(wf.min(hf) / 8.0..wf.min(hf) / 3.0);
            let a0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let pts = [0.0, 1.0, 2.0].map(|k| {
                let a = a0 + k * std::f64::consts::TAU / 3.0;
                ((cx + r * a.cos()).clamp(1.0, wf - 1.0), (cy + r * a.sin()).clamp(1.0, hf - 1.0))
            });
            Shape::Triangle(pts)
        }
    }
}
