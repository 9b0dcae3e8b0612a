use std::fmt;

use serde::{Deserialize, Serialize};

/// Where in request handling an error arose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Request,
    Permission,
    Lookup,
    Lifecycle,
    Validate,
    MapQos,
    RequiredCapabilities,
    ComposeChain,
    CheckAdmission,
    Allocate,
    PlaceChain,
    CompileRules,
    Activate,
    Release,
    Persist,
}

impl Stage {
    /// Stages of the create pipeline, in execution order.
    pub const CREATE_PIPELINE: [Stage; 10] = [
        Stage::Validate,
        Stage::MapQos,
        Stage::RequiredCapabilities,
        Stage::ComposeChain,
        Stage::CheckAdmission,
        Stage::Allocate,
        Stage::PlaceChain,
        Stage::CompileRules,
        Stage::Activate,
        Stage::Persist,
    ];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// JSON error body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub reason: String,
    pub stage: Option<Stage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: u16, code: impl Into<String>, reason: impl Into<String>, stage: Option<Stage>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                reason: reason.into(),
                stage,
            },
        }
    }

    pub fn bad_request(code: impl Into<String>, reason: impl Into<String>, stage: Stage) -> Self {
        Self::new(400, code, reason, Some(stage))
    }

    pub fn forbidden(reason: impl Into<String>) -> Self {
        Self::new(403, "FORBIDDEN", reason, Some(Stage::Permission))
    }

    pub fn not_found(what: impl fmt::Display) -> Self {
        Self::new(404, "NOT_FOUND", format!("{what} not found"), Some(Stage::Lookup))
    }

    pub fn conflict(code: impl Into<String>, reason: impl Into<String>, stage: Stage) -> Self {
        Self::new(409, code, reason, Some(stage))
    }

    pub fn unprocessable(code: impl Into<String>, reason: impl Into<String>, stage: Stage) -> Self {
        Self::new(422, code, reason, Some(stage))
    }

    pub fn internal(reason: impl Into<String>, stage: Stage) -> Self {
        Self::new(500, "INTERNAL", reason, Some(stage))
    }

    pub fn code(&self) -> &str {
        &self.body.code
    }

    pub fn stage(&self) -> Option<Stage> {
        self.body.stage
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.status, self.body.code, self.body.reason)
    }
}

impl std::error::Error for ApiError {}
