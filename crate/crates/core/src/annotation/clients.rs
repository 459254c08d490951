use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::window::{Axis, PairWindowSummary, WindowSummary};
use crate::error::{Error, Result};
use crate::representation::{GroupPair, KinematicGroup, Pose, Vec3};

/// Sentence embedder used for keyframe selection and negative filtering.
/// Outputs must be unit-norm.
pub trait TextEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Turns one body pose into a short description.
pub trait PoseDescriber: Send + Sync {
    /// `pose` holds body positions: root-relative, facing frame, absolute height.
    fn describe_pose(&self, pose: &Pose) -> String;
}

/// What an annotator is asked to describe.
#[derive(Clone, Debug, PartialEq)]
pub enum AnnotationRequest {
    Joint { group: KinematicGroup, windows: Vec<WindowSummary>, pose_texts: Vec<String> },
    Interaction { pair: GroupPair, windows: Vec<PairWindowSummary>, pose_texts: Vec<String> },
}

impl AnnotationRequest {
    pub fn subject(&self) -> String {
        match self {
            AnnotationRequest::Joint { group, .. } => group.to_string(),
            AnnotationRequest::Interaction { pair, .. } => pair.to_string(),
        }
    }

    pub fn to_json(&self) -> Value {
        let v3 = |v: &Vec3| json!([v.x, v.y, v.z]);
        match self {
            AnnotationRequest::Joint { group, windows, pose_texts } => json!({
                "kind": "joint",
                "group": group.name(),
                "windows": windows.iter().map(|w| json!({
                    "start": w.window.0,
                    "end": w.window.1,
                    "displacement": v3(&w.displacement),
                    "mean_speed": w.mean_speed,
                    "dominant_axis": format!("{:?}", w.dominant_axis).to_lowercase(),
                })).collect::<Vec<_>>(),
                "pose_texts": pose_texts,
            }),
            AnnotationRequest::Interaction { pair, windows, pose_texts } => json!({
                "kind": "interaction",
                "groups": [pair.first.name(), pair.second.name()],
                "windows": windows.iter().map(|w| json!({
                    "start": w.window.0,
                    "end": w.window.1,
                    "distance_start": w.distance_start,
                    "distance_end": w.distance_end,
                    "displacement": v3(&w.displacement),
                })).collect::<Vec<_>>(),
                "pose_texts": pose_texts,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditEntry {
    pub subject: String,
    pub request: String,
    pub response: String,
    pub reviewer_note: Option<String>,
}

/// Append-only record of annotator calls, safe to share between threads.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
}

impl AuditLog {
    pub fn record(&self, request: &AnnotationRequest, response: &str) {
        self.entries.lock().expect("audit log poisoned").push(AuditEntry {
            subject: request.subject(),
            request: request.to_json().to_string(),
            response: response.to_string(),
            reviewer_note: None,
        });
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.entries.lock().expect("audit log poisoned").clone()
    }

    /// Attaches a manual-review note to entry `index`.
    pub fn add_note(&self, index: usize, note: &str) -> Result<()> {
        let mut entries = self.entries.lock().expect("audit log poisoned");
        let len = entries.len();
        let entry = entries
            .get_mut(index)
            .ok_or_else(|| Error::InvalidArgument(format!("audit entry {index} out of range ({len} entries)")))?;
        entry.reviewer_note = Some(note.to_string());
        Ok(())
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .map(|e| {
                json!({
                    "subject": e.subject,
                    "request": e.request,
                    "response": e.response,
                    "reviewer_note": e.reviewer_note,
                })
                .to_string()
                    + "\n"
            })
            .collect()
    }
}

/// Produces joint and interaction texts from windowed summaries.
pub trait AnnotatorClient: Send + Sync {
    fn describe(&self, request: &AnnotationRequest) -> Result<String>;
    fn audit_log(&self) -> Vec<AuditEntry>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Lower-cased alphanumeric words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Signed feature hashing of word unigrams and bigrams, L2-normalized.
#[derive(Clone, Debug)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn add(&self, v: &mut [f64], feature: &str) {
        let h = fnv1a(feature.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % self.dim as u64) as usize] += sign;
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl TextEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let words = tokenize(text);
        let mut v = vec![0.0; self.dim];
        for w in &words {
            self.add(&mut v, w);
        }
        for pair in words.windows(2) {
            self.add(&mut v, &format!("{} {}", pair[0], pair[1]));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
            return v;
        }
        v.iter().map(|x| x / norm).collect()
    }
}

/// Dot product; the cosine for the unit-length vectors embedders return.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rule-based pose descriptions from limb angles and heights.
#[derive(Clone, Debug, Default)]
pub struct RulePoseDescriber;

fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    let d = a.norm() * b.norm();
    if d < 1e-12 {
        return 0.0;
    }
    (a.dot(&b) / d).clamp(-1.0, 1.0).acos().to_degrees()
}

fn bend(deg: f64) -> &'static str {
    if deg < 25.0 {
        "straight"
    } else if deg < 70.0 {
        "slightly bent"
    } else {
        "bent"
    }
}

impl PoseDescriber for RulePoseDescriber {
    /// Mentions only non-neutral attributes so that pose changes dominate
    /// the text.
    fn describe_pose(&self, p: &Pose) -> String {
        let mut parts = Vec::new();
        for (side, shoulder, elbow, wrist) in [("left", 16, 18, 20), ("right", 17, 19, 21)] {
            let rise = p[wrist].y - p[shoulder].y;
            if rise > 0.15 {
                parts.push(format!("{side} hand raised above the shoulder"));
            } else if rise < -0.2 {
                parts.push(format!("{side} hand lowered"));
            }
            if p[wrist].z - p[shoulder].z > 0.25 {
                parts.push(format!("{side} hand reaching forward"));
            }
            let elbow_bend = bend(angle_deg(p[elbow] - p[shoulder], p[wrist] - p[elbow]));
            if elbow_bend != "straight" {
                parts.push(format!("{side} elbow {elbow_bend}"));
            }
        }
        for (side, hip, knee, ankle, other) in [("left", 1, 4, 7, 8), ("right", 2, 5, 8, 7)] {
            let knee_bend = bend(angle_deg(p[knee] - p[hip], p[ankle] - p[knee]));
            if knee_bend != "straight" {
                parts.push(format!("{side} knee {knee_bend}"));
            }
            if p[ankle].y - p[other].y > 0.08 {
                parts.push(format!("{side} foot lifted"));
            }
        }
        let lean = p[9].z - p[0].z;
        if lean > 0.1 {
            parts.push("torso leaning forward".into());
        } else if lean < -0.1 {
            parts.push("torso leaning backward".into());
        }
        if p[0].y < 0.7 {
            parts.push("body crouched low".into());
        }
        if parts.is_empty() {
            return "neutral upright pose".into();
        }
        parts.join(", ")
    }
}

/// Displacements smaller than this count as standing still, meters.
const STILL_DISPLACEMENT: f64 = 0.02;
/// Mean group speed above which motion is called quick, meters per frame.
const QUICK_SPEED: f64 = 0.04;

fn direction_phrase(v: &Vec3) -> &'static str {
    let axis = Axis::dominant(v);
    let positive = axis.component(v) >= 0.0;
    match (axis, positive) {
        (Axis::X, true) => "moves to the left",
        (Axis::X, false) => "moves to the right",
        (Axis::Y, true) => "moves up",
        (Axis::Y, false) => "moves down",
        (Axis::Z, true) => "moves forward",
        (Axis::Z, false) => "moves backward",
    }
}

fn join_phrases(phrases: Vec<&'static str>) -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for p in phrases {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Deterministic template annotator that needs no network access.
#[derive(Debug, Default)]
pub struct StubAnnotator {
    log: AuditLog,
}

impl StubAnnotator {
    pub fn new() -> Self {
        Self::default()
    }

    fn text(request: &AnnotationRequest) -> String {
        match request {
            AnnotationRequest::Joint { group, windows, .. } => {
                let moving: Vec<&WindowSummary> =
                    windows.iter().filter(|w| w.displacement.norm() >= STILL_DISPLACEMENT).collect();
                if moving.is_empty() {
                    return format!("{} remains still", group.phrase());
                }
                let phrases = join_phrases(moving.iter().map(|w| direction_phrase(&w.displacement)).collect());
                let speed = moving.iter().map(|w| w.mean_speed).sum::<f64>() / moving.len() as f64;
                let adverb = if speed > QUICK_SPEED { " quickly" } else { "" };
                format!("{}{adverb} {}", group.phrase(), phrases.join(", then "))
            }
            AnnotationRequest::Interaction { pair, windows, .. } => {
                let phrases = join_phrases(
                    windows
                        .iter()
                        .filter_map(|w| {
                            let change = w.distance_end - w.distance_start;
                            if change > STILL_DISPLACEMENT {
                                Some("move apart")
                            } else if change < -STILL_DISPLACEMENT {
                                Some("move closer together")
                            } else {
                                None
                            }
                        })
                        .collect(),
                );
                let (a, b) = (pair.first.phrase(), pair.second.phrase());
                if phrases.is_empty() {
                    format!("{a} and {b} keep their distance")
                } else {
                    format!("{a} and {b} {}", phrases.join(", then "))
                }
            }
        }
    }
}

impl AnnotatorClient for StubAnnotator {
    fn describe(&self, request: &AnnotationRequest) -> Result<String> {
        let text = Self::text(request);
        self.log.record(request, &text);
        Ok(text)
    }

    fn audit_log(&self) -> Vec<AuditEntry> {
        self.log.entries()
    }
}

/// Environment variable holding the bearer token for [`RemoteAnnotator`].
pub const API_KEY_ENV: &str = "KINMO_ANNOTATOR_API_KEY";

/// HTTP annotator. Posts the request JSON and expects `{"text": "..."}` back.
#[derive(Debug)]
pub struct RemoteAnnotator {
    endpoint: String,
    api_key: Option<String>,
    retries: u32,
    timeout: Duration,
    log: AuditLog,
}

impl RemoteAnnotator {
    /// Reads the API key from [`API_KEY_ENV`] if set.
    pub fn new(endpoint: impl Into<String>, retries: u32) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            retries,
            timeout: Duration::from_secs(30),
            log: AuditLog::default(),
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn attempt(&self, body: &str) -> std::result::Result<String, String> {
        let mut req = ureq::post(&self.endpoint)
            .config()
            .timeout_global(Some(self.timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = req.send(body).map_err(|e| e.to_string())?;
        let raw = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        let value: Value = serde_json::from_str(&raw).map_err(|e| format!("malformed response: {e}"))?;
        value
            .get("text")
            .and_then(Value::as_str)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| "response has no \"text\" field".to_string())
    }
}

impl AnnotatorClient for RemoteAnnotator {
    fn describe(&self, request: &AnnotationRequest) -> Result<String> {
        let body = request.to_json().to_string();
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match self.attempt(&body) {
                Ok(text) => {
                    self.log.record(request, &text);
                    return Ok(text);
                }
                Err(e) => {
                    log::warn!("annotator call {} for {} failed: {e}", attempt + 1, request.subject());
                    last = e;
                }
            }
        }
        Err(Error::AnnotationBackend { message: last, retries: self.retries })
    }

    fn audit_log(&self) -> Vec<AuditEntry> {
        self.log.entries()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn embedder_is_unit_and_deterministic() {
        let e = HashingEmbedder::default();
        for t in ["a person waves", "", "!!!", "walk forward quickly"] {
            let v = e.embed(t);
            assert!((v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
            assert_eq!(v, e.embed(t));
        }
        assert!((cosine(&e.embed("A Person waves."), &e.embed("a person waves")) - 1.0).abs() < 1e-12);
        assert!(cosine(&e.embed("a person waves"), &e.embed("someone squats down slowly")) < 0.5);
    }

    #[test]
    fn stub_joint_text_follows_dominant_axis() {
        let w = |d: Vec3| WindowSummary { window: (0, 5), displacement: d, mean_speed: 0.01, dominant_axis: Axis::dominant(&d) };
        let req = AnnotationRequest::Joint {
            group: KinematicGroup::LeftArm,
            windows: vec![w(Vec3::new(0.0, 0.3, 0.0)), w(Vec3::new(0.0, -0.3, 0.0)), w(Vec3::new(0.0, -0.001, 0.0))],
            pose_texts: vec![],
        };
        let stub = StubAnnotator::new();
        assert_eq!(stub.describe(&req).unwrap(), "the left arm moves up, then moves down");
        let still = AnnotationRequest::Joint { group: KinematicGroup::Neck, windows: vec![WindowSummary::zero(0)], pose_texts: vec![] };
        assert_eq!(stub.describe(&still).unwrap(), "the head remains still");
        assert_eq!(stub.audit_log().len(), 2);
    }

    #[test]
    fn stub_interaction_text() {
        let req = AnnotationRequest::Interaction {
            pair: GroupPair::new(KinematicGroup::Torso, KinematicGroup::LeftArm),
            windows: vec![PairWindowSummary { window: (0, 3), distance_start: 0.3, distance_end: 0.6, displacement: Vec3::zeros() }],
            pose_texts: vec![],
        };
        assert_eq!(StubAnnotator::new().describe(&req).unwrap(), "the torso and the left arm move apart");
    }

    #[test]
    fn audit_notes() {
        let stub = StubAnnotator::new();
        let req = AnnotationRequest::Joint { group: KinematicGroup::Neck, windows: vec![], pose_texts: vec![] };
        stub.describe(&req).unwrap();
        stub.log.add_note(0, "checked").unwrap();
        assert!(stub.log.add_note(3, "x").is_err());
        assert_eq!(stub.audit_log()[0].reviewer_note.as_deref(), Some("checked"));
        assert!(stub.log.to_jsonl().contains("\"reviewer_note\":\"checked\""));
    }

    fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/annotate", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut length = 0usize;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_string();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; length];
                reader.read_exact(&mut buf).unwrap();
                seen.push(auth);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                reader.get_mut().write_all(reply.as_bytes()).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn neck_request() -> AnnotationRequest {
        AnnotationRequest::Joint { group: KinematicGroup::Neck, windows: vec![WindowSummary::zero(0)], pose_texts: vec![] }
    }

    #[test]
    fn remote_retries_then_succeeds() {
        let (url, handle) = serve(vec![(500, "{}"), (200, r#"{"text": "the head nods"}"#)]);
        let client = RemoteAnnotator::new(url, 2).with_api_key(Some("secret".into()));
        assert_eq!(client.describe(&neck_request()).unwrap(), "the head nods");
        let seen = handle.join().unwrap();
        assert_eq!(seen.len(), 2);
        assert!(seen[1].ends_with("Bearer secret"));
        assert_eq!(client.audit_log().len(), 1);
    }

    #[test]
    fn remote_gives_up_after_retries() {
        let (url, handle) = serve(vec![(503, "{}"), (200, r#"{"nope": 1}"#)]);
        let client = RemoteAnnotator::new(url, 1).with_api_key(None);
        match client.describe(&neck_request()) {
            Err(Error::AnnotationBackend { retries, .. }) => assert_eq!(retries, 1),
            other => panic!("expected backend error, got {other:?}"),
        }
        handle.join().unwrap();
        assert!(client.audit_log().is_empty());
    }
}
