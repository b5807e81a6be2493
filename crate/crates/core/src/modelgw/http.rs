//! Remote logprob backend speaking the completions-style echo protocol:
//! the request asks for zero generated tokens with `echo: true` and reads
//! per-token log-probabilities of the prompt back from
//! `choices[0].logprobs`.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendConfig, BackendKind, ModelError, TokenLogProbs};

/// Environment variable holding the optional bearer token.
pub const TOKEN_ENV_VAR: &str = "MIA_BACKEND_TOKEN";

const MAX_ATTEMPTS: usize = 3;
const RETRY_BACKOFF: Duration = Duration::from_millis(50);

#[derive(Serialize)]
struct EchoRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    echo: bool,
    logprobs: u32,
}

#[derive(Deserialize)]
struct EchoResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    logprobs: ChoiceLogProbs,
}

#[derive(Deserialize)]
struct ChoiceLogProbs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

/// Counting semaphore bounding in-flight requests.
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Permits {
    fn new(count: usize) -> Self {
        Permits {
            available: Mutex::new(count),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.freed.wait(available).unwrap();
        }
        *available -= 1;
    }

    fn release(&self) {
        *self.available.lock().unwrap() += 1;
        self.freed.notify_one();
    }
}

pub struct HttpBackend {
    cfg: BackendConfig,
    client: reqwest::blocking::Client,
    auth_token: Option<String>,
    permits: Permits,
    id: String,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, ModelError> {
        if cfg.kind != BackendKind::Http {
            return Err(ModelError::InvalidConfig(
                "not an http backend config".into(),
            ));
        }
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout())
            .build()
            .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        let id = cfg.backend_id();
        Ok(HttpBackend {
            permits: Permits::new(cfg.max_concurrent_requests),
            auth_token: std::env::var(TOKEN_ENV_VAR).ok().filter(|t| !t.is_empty()),
            client,
            cfg,
            id,
        })
    }

    fn request_once(&self, text: &str) -> Result<EchoResponse, RequestFailure> {
        let body = EchoRequest {
            model: &self.cfg.model_name,
            prompt: text,
            max_tokens: 0,
            echo: true,
            logprobs: 0,
        };
        let endpoint = self.cfg.endpoint.as_deref().expect("validated");
        let mut req = self.client.post(endpoint).json(&body);
        if let Some(token) = &self.auth_token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| RequestFailure::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(RequestFailure::Transport(format!("server status {status}")));
        }
        if !status.is_success() {
            return Err(RequestFailure::Fatal(ModelError::Protocol(format!(
                "status {status}"
            ))));
        }
        resp.json::<EchoResponse>()
            .map_err(|e| RequestFailure::Fatal(ModelError::Protocol(format!("bad body: {e}"))))
    }

    fn parse_response(&self, text: &str, resp: EchoResponse) -> Result<TokenLogProbs, ModelError> {
        let Some(choice) = resp.choices.into_iter().next() else {
            return Err(ModelError::Protocol("response has no choices".into()));
        };
        let ChoiceLogProbs {
            mut tokens,
            mut token_logprobs,
        } = choice.logprobs;
        if tokens.len() != token_logprobs.len() {
            return Err(ModelError::Protocol(format!(
                "token/logprob length mismatch: {} vs {}",
                tokens.len(),
                token_logprobs.len()
            )));
        }
        // The first prompt token has no context; servers send null for it.
        if token_logprobs.first().is_some_and(Option::is_none) {
            tokens.remove(0);
            token_logprobs.remove(0);
        }
        let mut logprobs = Vec::with_capacity(token_logprobs.len());
        for (i, lp) in token_logprobs.into_iter().enumerate() {
            match lp {
                Some(v) => logprobs.push(v),
                None => {
                    return Err(ModelError::Protocol(format!(
                        "null logprob at conditional position {i}"
                    )))
                }
            }
        }
        let mut truncated = false;
        if tokens.len() > self.cfg.max_context_tokens {
            tokens.truncate(self.cfg.max_context_tokens);
            logprobs.truncate(self.cfg.max_context_tokens);
            truncated = true;
        }
        TokenLogProbs::new(
            self.id.clone(),
            super::text_key(text),
            tokens,
            logprobs,
            truncated,
        )
    }
}

enum RequestFailure {
    /// Connection/server trouble worth retrying.
    Transport(String),
    /// Malformed exchange; retrying cannot help.
    Fatal(ModelError),
}

impl Backend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn score_text(&self, text: &str) -> Result<TokenLogProbs, ModelError> {
        if text.is_empty() {
            return Err(ModelError::EmptyText);
        }
        self.permits.acquire();
        let result = (|| {
            let mut last_message = String::new();
            for attempt in 1..=MAX_ATTEMPTS {
                match self.request_once(text) {
                    Ok(resp) => return self.parse_response(text, resp),
                    Err(RequestFailure::Fatal(err)) => return Err(err),
                    Err(RequestFailure::Transport(message)) => {
                        last_message = message;
                        if attempt < MAX_ATTEMPTS {
                            std::thread::sleep(RETRY_BACKOFF * attempt as u32);
                        }
                    }
                }
            }
            Err(ModelError::Network {
                attempts: MAX_ATTEMPTS,
                message: last_message,
            })
        })();
        self.permits.release();
        result
    }
}
