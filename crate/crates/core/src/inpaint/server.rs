//! Minimal in-process implementation of the inpainting HTTP protocol, backed
//! by any local [`InpaintBackend`]. Used for protocol conformance tests and by
//! the `serve-mock` command.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use super::protocol::{BackViewPayload, BackViewReply, ErrorReply, HealthReply, InpaintPayload, InpaintReply};
use super::{composite_known, BackendError, InpaintBackend};

struct State {
    backend: Arc<dyn InpaintBackend>,
    available: AtomicBool,
}

type Reply = (u16, String);

fn json<T: Serialize>(status: u16, body: &T) -> Reply {
    (status, serde_json::to_string(body).expect("reply serialization"))
}

fn error(status: u16, message: impl Into<String>) -> Reply {
    json(status, &ErrorReply { error: message.into() })
}

fn backend_failure(e: BackendError) -> Reply {
    match e {
        BackendError::MissingView(_) | BackendError::Unreachable(_) | BackendError::Timeout(_) => {
            error(503, e.to_string())
        }
        BackendError::SizeMismatch { .. } => error(422, e.to_string()),
        BackendError::InvalidRequest(_) | BackendError::MalformedPayload(_) => error(400, e.to_string()),
        other => error(500, other.to_string()),
    }
}

impl State {
    fn health(&self) -> Reply {
        if !self.available.load(Ordering::SeqCst) {
            return error(503, "model not loaded");
        }
        json(
            200,
            &HealthReply {
                status: "ok".into(),
                model: self.backend.id(),
            },
        )
    }

    fn inpaint(&self, body: &str) -> Reply {
        let payload: InpaintPayload = match serde_json::from_str(body) {
            Ok(p) => p,
            Err(e) => return error(400, e.to_string()),
        };
        let request = match payload.into_request() {
            Ok(r) => r,
            Err(e) => return error(400, e.to_string()),
        };
        let dims = request.dimensions();
        for d in [
            request.known_mask.dimensions(),
            request.normal_map.dimensions(),
            request.silhouette.dimensions(),
        ] {
            if d != dims {
                return error(422, format!("image is {dims:?} but a guidance map is {d:?}"));
            }
        }
        if request.steps == 0 {
            return error(400, "steps must be positive");
        }
        if !self.available.load(Ordering::SeqCst) {
            return error(503, "model not loaded");
        }
        match self.backend.inpaint(&request) {
            Ok(mut response) => {
                if response.image.dimensions() != dims {
                    return error(500, "backend produced an image of the wrong size");
                }
                composite_known(&request, &mut response.image);
                json(200, &InpaintReply::from_response(&response))
            }
            Err(e) => backend_failure(e),
        }
    }

    fn back_view(&self, body: &str) -> Reply {
        let payload: BackViewPayload = match serde_json::from_str(body) {
            Ok(p) => p,
            Err(e) => return error(400, e.to_string()),
        };
        let request = match payload.into_request() {
            Ok(r) => r,
            Err(e) => return error(400, e.to_string()),
        };
        let dims = request.silhouette.dimensions();
        for d in [
            request.input_image.dimensions(),
            request.normal.dimensions(),
            request.depth.dimensions(),
        ] {
            if d != dims {
                return error(422, format!("silhouette is {dims:?} but another map is {d:?}"));
            }
        }
        if !self.available.load(Ordering::SeqCst) {
            return error(503, "model not loaded");
        }
        match self.backend.back_view(&request) {
            Ok(image) => json(
                200,
                &BackViewReply {
                    image: super::protocol::encode_rgb(&image),
                },
            ),
            Err(e) => backend_failure(e),
        }
    }

    fn handle(&self, mut request: Request) {
        let mut body = String::new();
        let (status, text) = if let Err(e) = request.as_reader().read_to_string(&mut body) {
            error(400, format!("unreadable body: {e}"))
        } else {
            match (request.method(), request.url()) {
                (Method::Get, "/health") => self.health(),
                (Method::Post, "/inpaint") => self.inpaint(&body),
                (Method::Post, "/backview") => self.back_view(&body),
                (_, "/health" | "/inpaint" | "/backview") => error(405, "method not allowed"),
                (_, url) => error(404, format!("no route for {url}")),
            }
        };
        let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
        let response = Response::from_string(text).with_status_code(status).with_header(header);
        // A client that hung up is not our problem.
        let _ = request.respond(response);
    }
}

/// A protocol server running on a background thread.
pub struct MockServer {
    server: Arc<Server>,
    state: Arc<State>,
    addr: SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (port 0 picks a free port) and starts serving.
    pub fn spawn(addr: &str, backend: Arc<dyn InpaintBackend>) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP socket"))?;
        let server = Arc::new(server);
        let state = Arc::new(State {
            backend,
            available: AtomicBool::new(true),
        });
        let thread = {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    state.handle(request);
                }
            })
        };
        Ok(Self {
            server,
            state,
            addr,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Toggles the simulated model-loaded state; while unavailable every
    /// endpoint answers 503.
    pub fn set_available(&self, available: bool) {
        self.state.available.store(available, Ordering::SeqCst);
    }

    /// Blocks until the server thread exits (it never does on its own).
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}
