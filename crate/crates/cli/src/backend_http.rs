//! HTTP chat-completion backend: retries with exponential backoff, a
//! concurrency gate, and a pinned wire format.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use diasim_core::backend::{Backend, BackendConfig, BackendError, BackendRequest};

#[derive(Debug, Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Debug, Deserialize)]
struct WireChoiceMessage {
    content: String,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

/// Serializes a request exactly as it goes on the wire. Field order is
/// fixed by struct declaration order, so the bytes are stable.
pub fn wire_request_body(config: &BackendConfig, request: &BackendRequest) -> String {
    let mut messages = Vec::with_capacity(request.messages.len() + 1);
    messages.push(WireMessage {
        role: "system",
        content: &request.system_prompt,
    });
    for m in &request.messages {
        messages.push(WireMessage {
            role: &m.role,
            content: &m.content,
        });
    }
    serde_json::to_string(&WireRequest {
        model: &config.model,
        messages,
        // Rough character-to-token budget; generous rather than tight.
        temperature: request.temperature,
        max_tokens: (request.max_chars / 2).max(16),
    })
    .expect("wire request serializes")
}

/// Extracts the completion text from a wire response body.
pub fn parse_wire_response(body: &str) -> Result<String, String> {
    let parsed: WireResponse = serde_json::from_str(body).map_err(|e| e.to_string())?;
    parsed
        .choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| String::from("response has no choices"))
}

pub struct HttpBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    gate: (Mutex<usize>, Condvar),
}

struct Permit<'a>(&'a (Mutex<usize>, Condvar));

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.0 .0.lock().unwrap();
        *in_flight -= 1;
        self.0 .1.notify_one();
    }
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .expect("client builds");
        HttpBackend {
            config,
            client,
            gate: (Mutex::new(0), Condvar::new()),
        }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn acquire(&self) -> Permit<'_> {
        let (lock, cvar) = &self.gate;
        let mut in_flight = lock.lock().unwrap();
        while *in_flight >= self.config.max_concurrent {
            in_flight = cvar.wait(in_flight).unwrap();
        }
        *in_flight += 1;
        Permit(&self.gate)
    }

    fn attempt(&self, request: &BackendRequest) -> Result<String, (BackendError, bool)> {
        let tag = request.tag;
        let body = wire_request_body(&self.config, request);
        let mut call = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .body(body);
        if let Ok(key) = std::env::var(&self.config.auth_env) {
            call = call.header("authorization", format!("Bearer {key}"));
        }
        let response = call.send().map_err(|e| {
            if e.is_timeout() {
                (BackendError::Timeout { tag }, true)
            } else {
                (
                    BackendError::Http {
                        tag,
                        status: None,
                        message: e.to_string(),
                    },
                    true,
                )
            }
        })?;

        let status = response.status();
        let text = response.text().map_err(|e| {
            (
                BackendError::Http {
                    tag,
                    status: Some(status.as_u16()),
                    message: e.to_string(),
                },
                true,
            )
        })?;
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err((
                BackendError::Http {
                    tag,
                    status: Some(status.as_u16()),
                    message: text.chars().take(200).collect(),
                },
                retryable,
            ));
        }
        parse_wire_response(&text).map_err(|message| {
            (BackendError::Malformed { tag, message }, false)
        })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let _permit = self.acquire();
        let mut backoff = self.config.backoff_initial_ms;
        let mut last_err = None;
        for attempt in 0..=self.config.max_retries {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err((err, retryable)) => {
                    if !retryable || attempt == self.config.max_retries {
                        return Err(err);
                    }
                    last_err = Some(err);
                    std::thread::sleep(Duration::from_millis(backoff));
                    backoff = ((backoff as f64) * self.config.backoff_mult) as u64;
                }
            }
        }
        Err(last_err.expect("loop returns before draining retries"))
    }
}
