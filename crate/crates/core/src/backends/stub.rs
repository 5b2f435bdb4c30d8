//! A localhost HTTP server that answers the backend API from canned replies.
//! Integration tests and the CLI's `stub-serve` use it in place of model
//! servers.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

const WORKERS: usize = 4;

/// One canned body, or a list served in order (the last one repeats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CannedReply {
    Sequence(Vec<Value>),
    Single(Value),
}

/// Replies keyed by endpoint (`ground`, `refine`, `reason`, `draw`) and then
/// by `request_id`; the id `*` matches any request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CannedReplies {
    pub endpoints: BTreeMap<String, BTreeMap<String, CannedReply>>,
}

impl CannedReplies {
    pub fn insert(&mut self, endpoint: &str, request_id: &str, reply: CannedReply) {
        self.endpoints
            .entry(endpoint.trim_start_matches('/').to_string())
            .or_default()
            .insert(request_id.to_string(), reply);
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, text + "\n")
    }

    /// Turns the table into a handler. Each (endpoint, id) pair keeps its
    /// own position in a `Sequence`.
    pub fn into_handler(self) -> Arc<Handler> {
        let served: Mutex<BTreeMap<(String, String), usize>> = Mutex::new(BTreeMap::new());
        Arc::new(move |path: &str, body: &Value| {
            let endpoint = path.trim_start_matches('/');
            let Some(table) = self.endpoints.get(endpoint) else {
                return (404, json!({"error": format!("unknown endpoint {path}")}));
            };
            let id = body.get("request_id").and_then(Value::as_str).unwrap_or("");
            let (key, reply) = match table.get(id) {
                Some(r) => (id, r),
                None => match table.get("*") {
                    Some(r) => ("*", r),
                    None => return (404, json!({"error": format!("no canned reply for {id:?}")})),
                },
            };
            match reply {
                CannedReply::Single(v) => (200, v.clone()),
                CannedReply::Sequence(list) if list.is_empty() => {
                    (404, json!({"error": "empty reply sequence"}))
                }
                CannedReply::Sequence(list) => {
                    let mut served = served.lock().unwrap();
                    let n = served.entry((endpoint.to_string(), key.to_string())).or_insert(0);
                    let v = list[(*n).min(list.len() - 1)].clone();
                    *n += 1;
                    (200, v)
                }
            }
        })
    }
}

/// Maps (path, JSON body) to (status, JSON body).
pub type Handler = dyn Fn(&str, &Value) -> (u16, Value) + Send + Sync;

/// A received request, kept for assertions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRequest {
    pub path: String,
    pub body: Value,
}

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
}

impl StubServer {
    /// Serves on an ephemeral localhost port.
    pub fn start(handler: Arc<Handler>) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", handler)
    }

    pub fn with_replies(replies: CannedReplies) -> std::io::Result<Self> {
        Self::start(replies.into_handler())
    }

    pub fn bind(addr: &str, handler: Arc<Handler>) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server is not on a TCP socket"))?;
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let log = Arc::new(Mutex::new(Vec::new()));
        let workers = (0..WORKERS)
            .map(|_| {
                let (server, stop, log, handler) =
                    (server.clone(), stop.clone(), log.clone(), handler.clone());
                std::thread::spawn(move || serve(&server, &stop, &log, handler.as_ref()))
            })
            .collect();
        Ok(Self {
            server,
            addr,
            stop,
            workers,
            log,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap().clone()
    }

    /// Blocks until the server threads exit, i.e. forever unless another
    /// handle stops it.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn serve(
    server: &tiny_http::Server,
    stop: &AtomicBool,
    log: &Mutex<Vec<LoggedRequest>>,
    handler: &Handler,
) {
    while !stop.load(Ordering::SeqCst) {
        let Ok(mut req) = server.recv() else { break };
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let path = req.url().split('?').next().unwrap_or("").to_string();
        let mut text = String::new();
        let (status, body) = if *req.method() != tiny_http::Method::Post {
            (405, json!({"error": "only POST is supported"}))
        } else if let Err(e) = req.as_reader().read_to_string(&mut text) {
            (400, json!({"error": e.to_string()}))
        } else {
            match serde_json::from_str::<Value>(&text) {
                Ok(body) => {
                    log.lock().unwrap().push(LoggedRequest {
                        path: path.clone(),
                        body: body.clone(),
                    });
                    handler(&path, &body)
                }
                Err(e) => (400, json!({"error": e.to_string()})),
            }
        };
        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
        let resp = tiny_http::Response::from_string(body.to_string())
            .with_status_code(status)
            .with_header(header);
        let _ = req.respond(resp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(url: &str, body: Value) -> (u16, Value) {
        match ureq::post(url).send_json(body) {
            Ok(r) => (r.status(), r.into_json().unwrap()),
            Err(ureq::Error::Status(s, r)) => (s, r.into_json().unwrap()),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn serves_canned_replies_by_id_then_wildcard() {
        let mut replies = CannedReplies::default();
        replies.insert("reason", "a", CannedReply::Single(json!({"reply": "A"})));
        replies.insert("reason", "*", CannedReply::Single(json!({"reply": "any"})));
        replies.insert(
            "ground",
            "a",
            CannedReply::Sequence(vec![json!({"reply": "1"}), json!({"reply": "2"})]),
        );
        let s = StubServer::with_replies(replies).unwrap();
        let u = s.url();
        assert_eq!(post(&format!("{u}/reason"), json!({"request_id": "a"})).1["reply"], "A");
        assert_eq!(post(&format!("{u}/reason"), json!({"request_id": "z"})).1["reply"], "any");
        for expected in ["1", "2", "2"] {
            assert_eq!(post(&format!("{u}/ground"), json!({"request_id": "a"})).1["reply"], expected);
        }
        assert_eq!(post(&format!("{u}/ground"), json!({"request_id": "b"})).0, 404);
        assert_eq!(post(&format!("{u}/draw"), json!({})).0, 404);
        assert_eq!(s.requests().len(), 7);
    }

    #[test]
    fn replies_round_trip_through_json() {
        let mut replies = CannedReplies::default();
        replies.insert("/draw", "x", CannedReply::Single(json!({"image_b64": ""})));
        replies.insert("reason", "x", CannedReply::Sequence(vec![json!({"reply": ""})]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        replies.save(&p).unwrap();
        assert_eq!(CannedReplies::load(&p).unwrap(), replies);
    }
}
