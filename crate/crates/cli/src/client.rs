use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

/// Why a command did not succeed, by exit class.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: the request was understood and refused, or the input was bad.
    Rejected(String),
    /// Exit 2: the service could not be reached or failed internally.
    Transport(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Rejected(_) => 1,
            Failure::Transport(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Rejected(m) | Failure::Transport(m) => m,
        }
    }
}

pub struct Client {
    agent: Agent,
    base: String,
    tenant: String,
}

impl Client {
    pub fn new(endpoint: &str, tenant: &str, timeout: Duration) -> Result<Self, Failure> {
        let base = endpoint.trim_end_matches('/');
        let well_formed = base.parse::<ureq::http::Uri>().ok().filter(|u| {
            matches!(u.scheme_str(), Some("http" | "https")) && u.host().is_some_and(|h| !h.is_empty())
        });
        if well_formed.is_none() {
            return Err(Failure::Rejected(format!("invalid endpoint {endpoint:?}: expected http://host[:port]")));
        }
        let agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Ok(Client { agent, base: base.to_string(), tenant: tenant.to_string() })
    }

    pub fn get(&self, path: &str) -> Result<Value, Failure> {
        let res = self.agent.get(self.url(path)).header("X-Tenant", &self.tenant).call();
        self.finish(res)
    }

    pub fn delete(&self, path: &str) -> Result<Value, Failure> {
        let res = self.agent.delete(self.url(path)).header("X-Tenant", &self.tenant).call();
        self.finish(res)
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, Failure> {
        let res = self
            .agent
            .post(self.url(path))
            .header("X-Tenant", &self.tenant)
            .content_type("application/json")
            .send(body.to_string());
        self.finish(res)
    }

    pub fn patch(&self, path: &str, body: &Value) -> Result<Value, Failure> {
        let res = self
            .agent
            .patch(self.url(path))
            .header("X-Tenant", &self.tenant)
            .content_type("application/json")
            .send(body.to_string());
        self.finish(res)
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish(&self, res: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Value, Failure> {
        let mut res = res.map_err(|e| Failure::Transport(format!("{}: {e}", self.base)))?;
        let status = res.status().as_u16();
        let text = res
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transport(format!("reading response: {e}")))?;
        if (200..300).contains(&status) {
            if text.trim().is_empty() {
                return Ok(Value::Null);
            }
            return serde_json::from_str(&text)
                .map_err(|e| Failure::Transport(format!("malformed response from service: {e}")));
        }
        let detail = match serde_json::from_str::<Value>(&text) {
            Ok(body) => {
                let code = body["code"].as_str().unwrap_or("ERROR");
                let reason = body["reason"].as_str().unwrap_or_default();
                match body["stage"].as_str() {
                    Some(stage) => format!("{code}: {reason} (stage {stage})"),
                    None => format!("{code}: {reason}"),
                }
            }
            Err(_) => format!("HTTP {status}: {}", text.trim()),
        };
        if status >= 500 {
            Err(Failure::Transport(detail))
        } else {
            Err(Failure::Rejected(detail))
        }
    }
}
