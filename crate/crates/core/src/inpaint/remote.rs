use std::time::Duration;

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{BackViewPayload, BackViewReply, HealthReply, InpaintPayload, InpaintReply};
use super::{BackViewRequest, BackendError, InpaintBackend, InpaintRequest, InpaintResponse};

/// HTTP client for an inpainting service speaking the JSON protocol.
pub struct RemoteBackend {
    endpoint: String,
    timeout_ms: u64,
    retries: u32,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(endpoint: &str, timeout_ms: u64, retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            timeout_ms,
            retries,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn map_transport(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.timeout_ms),
            ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => {
                BackendError::Timeout(self.timeout_ms)
            }
            other => BackendError::Unreachable(format!("{}: {other}", self.endpoint)),
        }
    }

    fn read<T: DeserializeOwned>(&self, mut response: ureq::http::Response<ureq::Body>) -> Result<T, BackendError> {
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| self.map_transport(e))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body });
        }
        serde_json::from_str(&body).map_err(|e| BackendError::MalformedPayload(e.to_string()))
    }

    /// Transport failures and 5xx replies are retried; everything else is final.
    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if attempt < self.retries && retryable(&e) => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(50 * attempt as u64));
                }
                other => return other,
            }
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, BackendError> {
        let json = serde_json::to_string(body).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let url = format!("{}{path}", self.endpoint);
        self.with_retries(|| {
            let response = self
                .agent
                .post(&url)
                .header("Content-Type", "application/json")
                .send(json.as_str())
                .map_err(|e| self.map_transport(e))?;
            self.read(response)
        })
    }

    pub fn health(&self) -> Result<HealthReply, BackendError> {
        let url = format!("{}/health", self.endpoint);
        self.with_retries(|| {
            let response = self.agent.get(&url).call().map_err(|e| self.map_transport(e))?;
            self.read(response)
        })
    }
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Unreachable(_) | BackendError::Timeout(_) => true,
        BackendError::Status { status, .. } => *status >= 500,
        _ => false,
    }
}

impl InpaintBackend for RemoteBackend {
    fn id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<InpaintResponse, BackendError> {
        let reply: InpaintReply = self.post("/inpaint", &InpaintPayload::from_request(request))?;
        reply.into_response()
    }

    fn back_view(&self, request: &BackViewRequest) -> Result<RgbImage, BackendError> {
        let reply: BackViewReply = self.post("/backview", &BackViewPayload::from_request(request))?;
        super::protocol::decode_rgb("image", &reply.image)
    }
}
