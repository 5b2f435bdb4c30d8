//! JSON request/response bodies of the HTTP backend API. Rasters travel as
//! base64-encoded PNG.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::geometry::BinaryMask;

pub const API_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundRequest {
    pub request_id: String,
    pub image_b64: String,
    pub instruction: String,
    pub prompt: String,
    pub template_version: String,
}

/// Shared by `/ground` and `/reason`: the raw model text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextReply {
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub object_id: u32,
    pub class_label: String,
    pub bbox: [f64; 4],
    pub point: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRequest {
    pub request_id: String,
    pub image_b64: String,
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    pub object_id: u32,
    pub mask_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResponse {
    pub objects: Vec<WireMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub object_id: u32,
    pub class_label: String,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonRequest {
    pub request_id: String,
    pub instruction: String,
    pub prompt: String,
    pub template_version: String,
    pub candidates: Vec<WireCandidate>,
    /// 1-based attempt counter; retries after unparsable replies increase it.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRequestBody {
    pub request_id: String,
    pub image_b64: String,
    pub before_mask_b64: String,
    pub after_mask_b64: String,
    pub background_prompt: String,
    pub generation_prompt: String,
    /// `[a11, a12, a13, a21, a22, a23]`.
    pub transform: [f64; 6],
    /// Ask the server to run its refiner pass, if it has one.
    pub refine: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawResponse {
    pub image_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_mask_b64: Option<String>,
}

pub fn encode_rgb(img: &RgbImage) -> String {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encode");
    STANDARD.encode(buf.into_inner())
}

pub fn decode_rgb(b64: &str) -> Result<RgbImage, BackendError> {
    let bytes = STANDARD
        .decode(b64.trim())
        .map_err(|e| BackendError::BadPayload(format!("base64: {e}")))?;
    image::load_from_memory(&bytes)
        .map(|i| i.to_rgb8())
        .map_err(|e| BackendError::BadPayload(format!("image: {e}")))
}

pub fn encode_mask(m: &BinaryMask) -> String {
    STANDARD.encode(m.encode_png())
}

pub fn decode_mask(b64: &str) -> Result<BinaryMask, BackendError> {
    let bytes = STANDARD
        .decode(b64.trim())
        .map_err(|e| BackendError::BadPayload(format!("base64: {e}")))?;
    Ok(BinaryMask::decode_png(&bytes)?)
}
