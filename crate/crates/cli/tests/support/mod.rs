//! Shared helpers for the integration tests: a minimal scriptable HTTP
//! mock server and the canonical pinned wire request.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use diasim_core::backend::{BackendConfig, BackendRequest, ChatMessage, RequestTag};

/// One scripted reply from the mock server. Compiled once per test binary,
/// so not every binary uses every variant.
#[derive(Clone)]
#[allow(dead_code)]
pub enum MockReply {
    Ok(String),
    Status(u16, String),
    RawBody(String),
    SleepThenOk(u64, String),
}

pub struct MockServer {
    pub addr: String,
    pub hits: Arc<AtomicUsize>,
    pub high_water: Arc<AtomicUsize>,
    in_flight: Arc<AtomicUsize>,
    pub bodies: Arc<Mutex<Vec<String>>>,
    script: Arc<Mutex<VecDeque<MockReply>>>,
    /// Reply used once the script runs dry.
    default_reply: MockReply,
}

fn chat_body(content: &str) -> String {
    format!(
        "{{\"choices\":[{{\"message\":{{\"role\":\"assistant\",\"content\":{}}}}}]}}",
        serde_json::to_string(content).unwrap()
    )
}

impl MockServer {
    pub fn start(script: Vec<MockReply>, default_content: &str) -> Arc<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let server = Arc::new(MockServer {
            addr,
            hits: Arc::new(AtomicUsize::new(0)),
            high_water: Arc::new(AtomicUsize::new(0)),
            in_flight: Arc::new(AtomicUsize::new(0)),
            bodies: Arc::new(Mutex::new(Vec::new())),
            script: Arc::new(Mutex::new(script.into_iter().collect())),
            default_reply: MockReply::Ok(default_content.to_string()),
        });
        let worker = Arc::clone(&server);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let server = Arc::clone(&worker);
                thread::spawn(move || server.handle(stream));
            }
        });
        server
    }

    fn handle(&self, mut stream: std::net::TcpStream) {
        let current = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.high_water.fetch_max(current, Ordering::SeqCst);
        self.hits.fetch_add(1, Ordering::SeqCst);

        let body = read_request_body(&mut stream);
        self.bodies.lock().unwrap().push(body);

        let reply = self
            .script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| self.default_reply.clone());
        let (status, body) = match reply {
            MockReply::Ok(content) => (200u16, chat_body(&content)),
            MockReply::Status(code, text) => (code, text),
            MockReply::RawBody(raw) => (200, raw),
            MockReply::SleepThenOk(ms, content) => {
                thread::sleep(Duration::from_millis(ms));
                (200, chat_body(&content))
            }
        };
        let reason = if status == 200 { "OK" } else { "ERR" };
        let response = format!(
            "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        // Decrement before the reply leaves: the client may fire its next
        // request the instant it reads this response, and that request must
        // not race an un-decremented counter into a false high-water mark.
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        let _ = stream.write_all(response.as_bytes());
        let _ = stream.flush();
    }
}

fn read_request_body(stream: &mut std::net::TcpStream) -> String {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end;
    loop {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            return String::new();
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_subsequence(&buf, b"\r\n\r\n") {
            header_end = pos + 4;
            break;
        }
    }
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
    let content_length: usize = headers
        .lines()
        .find_map(|l| l.strip_prefix("content-length:").map(|v| v.trim().parse().ok()))
        .flatten()
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    String::from_utf8_lossy(&buf[header_end..]).into_owned()
}

fn find_subsequence(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Backend config pointing at a mock server, tuned for fast tests.
pub fn test_config(endpoint: &str) -> BackendConfig {
    BackendConfig {
        endpoint: endpoint.to_string(),
        model: "local-chat".to_string(),
        auth_env: "DIASIM_TEST_KEY_UNSET".to_string(),
        timeout_s: 2,
        max_retries: 3,
        backoff_initial_ms: 20,
        backoff_mult: 2.0,
        max_concurrent: 2,
    }
}

/// The canonical request pinned by the wire fixture.
pub fn pinned_request() -> BackendRequest {
    BackendRequest {
        tag: RequestTag::Classifier,
        system_prompt: "Classify the patient's reply to a yes/no symptom question. Output exactly one word: present or absent.".to_string(),
        messages: vec![ChatMessage {
            role: "user".to_string(),
            content: "Question: Have you been sleeping badly recently?\nReply: Yes, most nights.".to_string(),
        }],
        max_chars: 10,
        temperature: 0.0,
    }
}

pub fn pinned_config() -> BackendConfig {
    test_config("http://127.0.0.1:9/v1/chat/completions")
}
