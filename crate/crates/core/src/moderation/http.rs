use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use ureq::Agent;

use super::client::{Transport, TransportError};
use super::{Attribute, AttributeScores, ModerationError};

/// JSON-over-HTTP scorer. Sends `{text, attributes}` and expects a JSON
/// object of attribute scores. The API key is read from an environment
/// variable and sent as a bearer token.
pub struct HttpTransport {
    agent: Agent,
    endpoint: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct Request<'a> {
    text: &'a str,
    attributes: &'a [Attribute],
}

impl HttpTransport {
    pub fn new(endpoint: &str, api_key_env: Option<&str>, timeout: Duration) -> Result<Self, ModerationError> {
        if endpoint.trim().is_empty() {
            return Err(ModerationError::Config("moderation endpoint is empty".into()));
        }
        let api_key = match api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ModerationError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Ok(HttpTransport { agent, endpoint: endpoint.to_string(), api_key })
    }
}

impl Transport for HttpTransport {
    fn score(&self, text: &str, attributes: &[Attribute]) -> Result<AttributeScores, TransportError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(Request { text, attributes })
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {
                let raw: BTreeMap<String, f64> =
                    resp.body_mut().read_json().map_err(|e| TransportError::Permanent(format!("bad response: {e}")))?;
                raw.into_iter()
                    .map(|(k, v)| {
                        k.parse::<Attribute>()
                            .map(|a| (a, v))
                            .map_err(|e| TransportError::Permanent(e.to_string()))
                    })
                    .collect()
            }
            429 => {
                let retry_after = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                Err(TransportError::RateLimited { retry_after })
            }
            408 | 500..=599 => Err(TransportError::Transient(format!("HTTP {status}"))),
            _ => Err(TransportError::Permanent(format!("HTTP {status}"))),
        }
    }
}
