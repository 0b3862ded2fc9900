//! Blocking HTTP transport speaking the de-facto open chat-completions wire
//! format: a `messages` array with temperature, top_p, and a logprobs flag.

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, ChatTransport, Completion, GenEndpointConfig, TransportError};

/// reqwest-backed transport for an OpenAI-compatible endpoint.
///
/// The credential is resolved from the configured environment variable at
/// construction and is deliberately excluded from `Debug` output.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpTransport {
    pub fn new(cfg: &GenEndpointConfig) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(cfg.request_timeout_ms))
            .build()
            .map_err(|e| TransportError::Transport(e.to_string()))?;
        let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(Self {
            client,
            url,
            model: cfg.model_name.clone(),
            api_key,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct Logprobs {
    #[serde(default)]
    content: Vec<TokenLogprob>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    logprob: f64,
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "logprobs": request.want_logprobs,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::Transport(e.to_string()))?;

        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(TransportError::Status {
                status: status.as_u16(),
                // Bodies can echo request headers; keep only a short prefix.
                body: body.chars().take(200).collect(),
            });
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| TransportError::BadBody(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| TransportError::BadBody("response has no choices".into()))?;
        let token_logprobs = choice.logprobs.and_then(|lp| {
            (!lp.content.is_empty()).then(|| lp.content.into_iter().map(|t| t.logprob).collect())
        });
        Ok(Completion {
            text: choice.message.content,
            token_logprobs,
        })
    }
}
