use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::{self, *};
use super::{
    require_nonempty_image, BackendConfig, BackendError, Detector, DrawRequest, Drawer,
    EditedImage, Frame, Grounder, Provenance, Reasoner, RefinedObject, Refiner,
};
use crate::geometry::{bbox_of_mask, BinaryMask, BoundingBox};
use crate::llmproto::{
    build_grounding_prompt, build_reasoner_prompt, parse_grounding_reply, parse_reasoner_reply,
    CandidateBox, Detection, GroundingReply, PromptTemplates, ReasonerReply, SceneDescriptions,
};

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// JSON-over-HTTP client shared by the stage backends. Transport failures
/// and 5xx responses are retried up to `max_retries` times.
#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    config: BackendConfig,
    gate: Arc<Gate>,
}

impl HttpClient {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config
            .validate()
            .map_err(BackendError::InvalidRequest)?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        Ok(Self {
            agent,
            gate: Arc::new(Gate::new(config.max_in_flight)),
            config,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = self.url(path);
        let body = serde_json::to_value(body).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut last = None;
        for _ in 0..=self.config.max_retries {
            let _slot = self.gate.acquire();
            match self.agent.post(&url).send_json(body.clone()) {
                Ok(resp) => {
                    return resp
                        .into_json::<Resp>()
                        .map_err(|e| BackendError::BadPayload(format!("{url}: {e}")));
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let text = resp.into_string().unwrap_or_default();
                    let err = BackendError::Status { status, body: text };
                    if status < 500 {
                        return Err(err);
                    }
                    last = Some(err);
                }
                Err(ureq::Error::Transport(t)) => {
                    last = Some(BackendError::Unreachable(format!("{url}: {t}")));
                }
            }
        }
        Err(last.unwrap_or_else(|| BackendError::Unreachable(url)))
    }

    fn provenance(&self, backend: &str) -> Provenance {
        Provenance {
            backend: backend.to_string(),
            config_hash: self.config.hash(),
        }
    }

    fn templates(&self) -> Result<PromptTemplates, BackendError> {
        Ok(PromptTemplates::get(&self.config.template_version)?)
    }
}

fn bbox_array(b: &BoundingBox) -> [f64; 4] {
    [b.x_min, b.y_min, b.x_max, b.y_max]
}

#[derive(Debug, Clone)]
pub struct HttpGrounder(pub HttpClient);

impl Grounder for HttpGrounder {
    fn name(&self) -> String {
        format!("http-grounder({})", self.0.config.endpoint_url)
    }

    fn ground(&self, frame: &Frame) -> Result<GroundingReply, BackendError> {
        require_nonempty_image(frame.image)?;
        let templates = self.0.templates()?;
        let req = GroundRequest {
            request_id: frame.sample_id.to_string(),
            image_b64: wire::encode_rgb(frame.image),
            instruction: frame.instruction.to_string(),
            prompt: build_grounding_prompt(frame.instruction, &templates)?,
            template_version: templates.version.to_string(),
        };
        let resp: TextReply = self.0.post("/ground", &req)?;
        let (w, h) = frame.image.dimensions();
        Ok(parse_grounding_reply(&resp.reply, w, h)?)
    }
}

#[derive(Debug, Clone)]
pub struct HttpRefiner(pub HttpClient);

impl HttpRefiner {
    fn call(
        &self,
        request_id: String,
        image: &image::RgbImage,
        detections: &[Detection],
    ) -> Result<BTreeMap<u32, RefinedObject>, BackendError> {
        if detections.is_empty() {
            return Err(BackendError::InvalidRequest("no detections to refine".into()));
        }
        let req = RefineRequest {
            request_id,
            image_b64: wire::encode_rgb(image),
            detections: detections
                .iter()
                .map(|d| WireDetection {
                    object_id: d.object_id,
                    class_label: d.class_label.clone(),
                    bbox: bbox_array(&d.bbox),
                    point: [d.point.x, d.point.y],
                })
                .collect(),
        };
        let resp: RefineResponse = self.0.post("/refine", &req)?;
        let mut masks = BTreeMap::new();
        for m in resp.objects {
            masks.insert(m.object_id, wire::decode_mask(&m.mask_b64)?);
        }
        let mut out = BTreeMap::new();
        for d in detections {
            let mask = masks.remove(&d.object_id).ok_or(BackendError::ObjectNotFound(d.object_id))?;
            if mask.dims() != image.dimensions() {
                return Err(BackendError::BadPayload(format!(
                    "mask for object {} is {:?}, image is {:?}",
                    d.object_id,
                    mask.dims(),
                    image.dimensions()
                )));
            }
            if mask.is_empty() {
                return Err(BackendError::ObjectNotFound(d.object_id));
            }
            out.insert(d.object_id, RefinedObject { bbox: bbox_of_mask(&mask)?, mask });
        }
        Ok(out)
    }
}

impl Refiner for HttpRefiner {
    fn name(&self) -> String {
        format!("http-refiner({})", self.0.config.endpoint_url)
    }

    fn refine(
        &self,
        frame: &Frame,
        detections: &[Detection],
    ) -> Result<BTreeMap<u32, RefinedObject>, BackendError> {
        require_nonempty_image(frame.image)?;
        self.call(frame.sample_id.to_string(), frame.image, detections)
    }
}

/// Re-segments the edited image through the refiner endpoint, prompted with
/// the target class.
#[derive(Debug, Clone)]
pub struct HttpDetector(pub HttpRefiner);

impl HttpDetector {
    pub fn request_id(sample_id: &str) -> String {
        format!("{sample_id}#final")
    }
}

impl Detector for HttpDetector {
    fn name(&self) -> String {
        format!("http-detector({})", self.0 .0.config.endpoint_url)
    }

    fn detect(
        &self,
        frame: &Frame,
        edited: &EditedImage,
        class_label: &str,
    ) -> Result<BinaryMask, BackendError> {
        let (w, h) = edited.pixels.dimensions();
        let full = BoundingBox::full_image(w, h);
        let det = Detection {
            bbox: full,
            point: full.center(),
            class_label: class_label.to_string(),
            object_id: 0,
        };
        let mut out = self.0.call(Self::request_id(frame.sample_id), &edited.pixels, &[det])?;
        Ok(out.remove(&0).expect("requested id present").mask)
    }
}

/// Model-backed reasoner. Unparsable replies are retried up to
/// `max_retries` times before the last parse error is returned.
#[derive(Debug, Clone)]
pub struct HttpReasoner(pub HttpClient);

impl Reasoner for HttpReasoner {
    fn name(&self) -> String {
        format!("http-reasoner({})", self.0.config.endpoint_url)
    }

    fn reason(
        &self,
        frame: &Frame,
        scene: &SceneDescriptions,
        candidates: &[CandidateBox],
    ) -> Result<ReasonerReply, BackendError> {
        let templates = self.0.templates()?;
        let prompt = build_reasoner_prompt(frame.instruction, scene, candidates, &templates)?;
        let mut last = None;
        for attempt in 1..=self.0.config.max_retries + 1 {
            let req = ReasonRequest {
                request_id: frame.sample_id.to_string(),
                instruction: frame.instruction.to_string(),
                prompt: prompt.clone(),
                template_version: templates.version.to_string(),
                candidates: candidates
                    .iter()
                    .map(|c| WireCandidate {
                        object_id: c.object_id,
                        class_label: c.class_label.clone(),
                        bbox: bbox_array(&c.bbox),
                    })
                    .collect(),
                attempt,
            };
            let resp: TextReply = self.0.post("/reason", &req)?;
            match parse_reasoner_reply(&resp.reply) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    log::warn!("{}: unparsable reasoner reply (attempt {attempt}): {e}", frame.sample_id);
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt").into())
    }
}

#[derive(Debug, Clone)]
pub struct HttpDrawer {
    pub client: HttpClient,
    pub refine: bool,
    pub seed: u64,
}

impl Drawer for HttpDrawer {
    fn name(&self) -> String {
        format!("http-drawer({})", self.client.config.endpoint_url)
    }

    fn draw(&self, frame: &Frame, req: &DrawRequest) -> Result<EditedImage, BackendError> {
        if req.before.dims() != frame.image.dimensions() || req.after.dims() != req.before.dims() {
            return Err(BackendError::InvalidRequest("mask and image dimensions differ".into()));
        }
        let body = DrawRequestBody {
            request_id: frame.sample_id.to_string(),
            image_b64: wire::encode_rgb(frame.image),
            before_mask_b64: wire::encode_mask(req.before),
            after_mask_b64: wire::encode_mask(req.after),
            background_prompt: req.background_prompt.to_string(),
            generation_prompt: req.generation_prompt.to_string(),
            transform: req.transform.coefficients(),
            refine: self.refine,
            seed: self.seed,
        };
        let resp: DrawResponse = self.client.post("/draw", &body)?;
        let pixels = wire::decode_rgb(&resp.image_b64)?;
        if pixels.dimensions() != frame.image.dimensions() {
            return Err(BackendError::BadPayload(format!(
                "drawer returned {:?}, expected {:?}",
                pixels.dimensions(),
                frame.image.dimensions()
            )));
        }
        let object_mask = resp.object_mask_b64.as_deref().map(wire::decode_mask).transpose()?;
        Ok(EditedImage {
            pixels,
            provenance: self.client.provenance(&self.name()),
            object_mask,
        })
    }
}
