use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::{DatasetError, SourceInstance};
use crate::geometry::{bbox_of_mask, BinaryMask};

/// Index value VOC uses for "void" boundary pixels.
pub(crate) const VOID_INDEX: u8 = 255;

struct AnnotatedObject {
    name: String,
    truncated: bool,
}

struct Annotation {
    size: Option<(u32, u32)>,
    objects: Vec<AnnotatedObject>,
}

/// Reads every (image, instance) pair of a VOC-style directory.
///
/// Images are listed by `ImageSets/Segmentation/trainval.txt` when present,
/// else by the files in `SegmentationObject/`. The k-th `<object>` of an
/// image's XML owns the pixels with value k in its instance raster.
pub fn ingest_voc(root: &Path) -> Result<Vec<SourceInstance>, DatasetError> {
    let mut out = Vec::new();
    for id in image_ids(root)? {
        out.extend(ingest_image(root, &id)?);
    }
    Ok(out)
}

fn image_ids(root: &Path) -> Result<Vec<String>, DatasetError> {
    let list = root.join("ImageSets/Segmentation/trainval.txt");
    if list.is_file() {
        let text = std::fs::read_to_string(&list).map_err(|e| DatasetError::io(&list, e))?;
        return Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect());
    }
    let seg = root.join("SegmentationObject");
    if !seg.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids: Vec<String> = std::fs::read_dir(&seg)
        .map_err(|e| DatasetError::io(&seg, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    Ok(ids)
}

fn ingest_image(root: &Path, id: &str) -> Result<Vec<SourceInstance>, DatasetError> {
    let xml_path = root.join("Annotations").join(format!("{id}.xml"));
    let ann = read_annotation(&xml_path)?;
    let mask_path = root.join("SegmentationObject").join(format!("{id}.png"));
    if !mask_path.is_file() {
        return Err(DatasetError::MissingMask(id.to_string()));
    }
    let (width, height, indices) = read_index_png(&mask_path)?;
    if let Some(size) = ann.size {
        if size != (width, height) {
            return Err(DatasetError::MalformedAnnotation {
                path: xml_path,
                reason: format!("size {size:?} disagrees with mask {:?}", (width, height)),
            });
        }
    }
    let n = ann.objects.len();
    if let Some(&bad) = indices.iter().find(|&&v| v != 0 && v != VOID_INDEX && v as usize > n) {
        return Err(DatasetError::MalformedAnnotation {
            path: mask_path,
            reason: format!("instance index {bad} but only {n} objects annotated"),
        });
    }
    let image_ref = root.join("JPEGImages").join(format!("{id}.jpg"));
    let mut out = Vec::new();
    for (k, obj) in ann.objects.into_iter().enumerate() {
        let index = k as u32 + 1;
        let bits = indices.iter().map(|&v| v as u32 == index).collect();
        let mask = BinaryMask::from_bits(width, height, bits)?;
        if mask.is_empty() {
            log::warn!("{id}: object {index} ({}) has no mask pixels; skipped", obj.name);
            continue;
        }
        out.push(SourceInstance {
            image_id: id.to_string(),
            image_ref: image_ref.clone(),
            instance_index: index,
            class_label: obj.name,
            truncated: obj.truncated,
            gt_bbox: bbox_of_mask(&mask)?,
            gt_mask: mask,
            image_width: width,
            image_height: height,
        });
    }
    Ok(out)
}

fn read_annotation(path: &Path) -> Result<Annotation, DatasetError> {
    let malformed = |reason: String| DatasetError::MalformedAnnotation {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| malformed(e.to_string()))?;
    let doc = roxmltree::Document::parse(&text).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "annotation" {
        return Err(malformed(format!("root element is <{}>", root.tag_name().name())));
    }
    let child_text = |node: roxmltree::Node, tag: &str| {
        node.children()
            .find(|c| c.has_tag_name(tag))
            .and_then(|c| c.text())
            .map(str::trim)
            .map(String::from)
    };
    let size = match root.children().find(|c| c.has_tag_name("size")) {
        Some(s) => {
            let dim = |tag| -> Result<u32, DatasetError> {
                child_text(s, tag)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| malformed(format!("bad <size><{tag}>")))
            };
            Some((dim("width")?, dim("height")?))
        }
        None => None,
    };
    let mut objects = Vec::new();
    for node in root.children().filter(|c| c.has_tag_name("object")) {
        let name = child_text(node, "name")
            .filter(|n| !n.is_empty())
            .ok_or_else(|| malformed("object without <name>".into()))?;
        let truncated = match child_text(node, "truncated").as_deref() {
            None | Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(malformed(format!("<truncated> is {other:?}"))),
        };
        objects.push(AnnotatedObject { name, truncated });
    }
    Ok(Annotation { size, objects })
}

/// Raw 8-bit values of a palette or grayscale PNG.
pub(crate) fn read_index_png(path: &Path) -> Result<(u32, u32, Vec<u8>), DatasetError> {
    let malformed = |reason: String| DatasetError::MalformedAnnotation {
        path: PathBuf::from(path),
        reason,
    };
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| malformed(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| malformed(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale)
    {
        return Err(malformed(format!(
            "expected an 8-bit palette or grayscale raster, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width, info.height);
    let row = info.line_size;
    let mut values = Vec::with_capacity((w * h) as usize);
    for y in 0..h as usize {
        values.extend_from_slice(&buf[y * row..y * row + w as usize]);
    }
    Ok((w, h, values))
}
