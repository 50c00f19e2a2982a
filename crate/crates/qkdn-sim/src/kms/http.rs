//! ETSI GS QKD 014-style REST surface over the mock KMS.
//!
//! Endpoints:
//!   GET  /api/v1/keys/{slave_SAE_ID}/enc_keys?number=N&size=256
//!   POST /api/v1/keys/{master_SAE_ID}/dec_keys   {"key_IDs":[{"key_ID":..}]}
//!   POST /api/v1/admin/provision                 (mock-only pool filling)
//!
//! Real deployments identify the calling SAE through mutual TLS; this mock
//! folds both sides of a link into one service and takes the caller from
//! the `X-SAE-ID` header instead.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use super::wire::{container_for, DecRequest, ErrorBody, KeyContainer, ProvisionRequest};
use super::{Kms, KmsApi, KmsError, QkdKey, QKD_KEY_SIZE_BITS};
use qkdn_core::NodeId;

/// Header naming the calling SAE.
pub const SAE_ID_HEADER: &str = "X-SAE-ID";

fn status_for(err: &KmsError) -> u16 {
    match err {
        KmsError::Malformed(_) | KmsError::UnsupportedSize(_) => 400,
        KmsError::UnknownLink(..) | KmsError::UnknownKeyId(_) => 404,
        KmsError::DuplicateLink(..) => 409,
        KmsError::Exhausted { .. } => 503,
        KmsError::Transport(_) => 502,
    }
}

fn json_response(status: u16, body: &impl serde::Serialize) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::to_vec(body).expect("wire types serialize");
    Response::from_data(body)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn error_response(err: &KmsError) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(
        status_for(err),
        &ErrorBody {
            message: err.to_string(),
        },
    )
}

fn parse_query(query: &str) -> Result<(usize, u32), KmsError> {
    let mut number = 1usize;
    let mut size = QKD_KEY_SIZE_BITS;
    for pair in query.split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| KmsError::Malformed(format!("bad query pair {pair:?}")))?;
        match k {
            "number" => {
                number = v
                    .parse()
                    .map_err(|_| KmsError::Malformed(format!("bad number {v:?}")))?;
            }
            "size" => {
                size = v
                    .parse()
                    .map_err(|_| KmsError::Malformed(format!("bad size {v:?}")))?;
            }
            _ => return Err(KmsError::Malformed(format!("unknown parameter {k:?}"))),
        }
    }
    Ok((number, size))
}

fn handle(kms: &Kms, request: &mut tiny_http::Request) -> Response<std::io::Cursor<Vec<u8>>> {
    let url = request.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((url.as_str(), ""));
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();

    let caller = request
        .headers()
        .iter()
        .find(|h| h.field.as_str().as_str().eq_ignore_ascii_case(SAE_ID_HEADER))
        .map(|h| NodeId::from(h.value.as_str()));

    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        return error_response(&KmsError::Malformed("unreadable body".into()));
    }

    match (request.method(), segments.as_slice()) {
        (Method::Get, ["api", "v1", "keys", slave, "enc_keys"]) => {
            let Some(caller) = caller else {
                return error_response(&KmsError::Malformed(format!(
                    "missing {SAE_ID_HEADER} header"
                )));
            };
            let (number, size) = match parse_query(query) {
                Ok(v) => v,
                Err(e) => return error_response(&e),
            };
            match kms.get_enc_keys(&caller, &NodeId::from(*slave), number, size) {
                Ok(keys) => json_response(200, &container_for(&keys)),
                Err(e) => error_response(&e),
            }
        }
        (Method::Post, ["api", "v1", "keys", master, "dec_keys"]) => {
            let Some(caller) = caller else {
                return error_response(&KmsError::Malformed(format!(
                    "missing {SAE_ID_HEADER} header"
                )));
            };
            let req: DecRequest = match serde_json::from_str(&body) {
                Ok(r) => r,
                Err(e) => return error_response(&KmsError::Malformed(format!("bad body: {e}"))),
            };
            let ids: Vec<String> = req.key_ids.into_iter().map(|k| k.key_id).collect();
            match kms.get_dec_keys(&caller, &NodeId::from(*master), &ids) {
                Ok(keys) => json_response(200, &container_for(&keys)),
                Err(e) => error_response(&e),
            }
        }
        (Method::Post, ["api", "v1", "admin", "provision"]) => {
            let req: ProvisionRequest = match serde_json::from_str(&body) {
                Ok(r) => r,
                Err(e) => return error_response(&KmsError::Malformed(format!("bad body: {e}"))),
            };
            match kms.provision_link(
                &NodeId::from(req.master_sae_id.as_str()),
                &NodeId::from(req.slave_sae_id.as_str()),
                req.count,
            ) {
                Ok(()) => json_response(200, &serde_json::json!({"provisioned": req.count})),
                Err(e) => error_response(&e),
            }
        }
        _ => error_response(&KmsError::Malformed(format!("no route for {path}"))),
    }
}

/// A running HTTP front end over a shared [`Kms`].
pub struct KmsHttpServer {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl KmsHttpServer {
    /// Bind `addr` (use port 0 for an ephemeral port) and serve requests on
    /// a small worker pool.
    pub fn serve(kms: Arc<Kms>, addr: &str, workers: usize) -> std::io::Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(std::io::Error::other)?);
        let addr = match server.server_addr() {
            tiny_http::ListenAddr::IP(a) => a,
            #[allow(unreachable_patterns)]
            _ => return Err(std::io::Error::other("expected an IP listener")),
        };
        let mut handles = Vec::new();
        for _ in 0..workers.max(1) {
            let server = server.clone();
            let kms = kms.clone();
            handles.push(std::thread::spawn(move || {
                while let Ok(mut request) = server.recv() {
                    let response = handle(&kms, &mut request);
                    let _ = request.respond(response);
                }
            }));
        }
        Ok(KmsHttpServer {
            server,
            workers: handles,
            addr,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting requests and join the workers.
    pub fn stop(self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for handle in self.workers {
            let _ = handle.join();
        }
    }
}

/// Blocking HTTP client implementing the same [`KmsApi`] as the in-process
/// store, so the engines never know which transport they are on.
pub struct HttpKmsClient {
    agent: ureq::Agent,
    base: String,
}

impl HttpKmsClient {
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into();
        let base = base.trim_end_matches('/').to_string();
        let base = if base.starts_with("http") {
            base
        } else {
            format!("http://{base}")
        };
        HttpKmsClient {
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(10))
                .build(),
            base,
        }
    }

    fn decode_container(body: &str) -> Result<Vec<QkdKey>, KmsError> {
        let container: KeyContainer = serde_json::from_str(body)
            .map_err(|e| KmsError::Transport(format!("bad response body: {e}")))?;
        container.keys.iter().map(|k| k.decode()).collect()
    }

    fn map_error(err: ureq::Error) -> KmsError {
        match err {
            ureq::Error::Status(code, response) => {
                let message = response
                    .into_string()
                    .ok()
                    .and_then(|body| serde_json::from_str::<ErrorBody>(&body).ok())
                    .map(|e| e.message)
                    .unwrap_or_default();
                match code {
                    400 if message.contains("unsupported key size") => {
                        KmsError::UnsupportedSize(0)
                    }
                    400 => KmsError::Malformed(message),
                    404 if message.contains("unknown key id") => {
                        KmsError::UnknownKeyId(message)
                    }
                    404 => KmsError::UnknownLink(NodeId::from("?"), NodeId::from("?")),
                    409 => KmsError::DuplicateLink(NodeId::from("?"), NodeId::from("?")),
                    503 => KmsError::Exhausted {
                        requested: 0,
                        remaining: 0,
                    },
                    other => KmsError::Transport(format!("HTTP {other}: {message}")),
                }
            }
            other => KmsError::Transport(other.to_string()),
        }
    }
}

impl KmsApi for HttpKmsClient {
    fn provision_link(
        &self,
        sae_a: &NodeId,
        sae_b: &NodeId,
        count: usize,
    ) -> Result<(), KmsError> {
        let body = serde_json::to_string(&ProvisionRequest {
            master_sae_id: sae_a.as_str().into(),
            slave_sae_id: sae_b.as_str().into(),
            count,
        })
        .expect("wire types serialize");
        self.agent
            .post(&format!("{}/api/v1/admin/provision", self.base))
            .set("Content-Type", "application/json")
            .send_string(&body)
            .map_err(Self::map_error)?;
        Ok(())
    }

    fn get_enc_keys(
        &self,
        caller: &NodeId,
        slave: &NodeId,
        number: usize,
        size_bits: u32,
    ) -> Result<Vec<QkdKey>, KmsError> {
        let url = format!(
            "{}/api/v1/keys/{}/enc_keys?number={}&size={}",
            self.base,
            slave.as_str(),
            number,
            size_bits
        );
        let response = self
            .agent
            .get(&url)
            .set(SAE_ID_HEADER, caller.as_str())
            .call()
            .map_err(Self::map_error)?;
        let body = response
            .into_string()
            .map_err(|e| KmsError::Transport(e.to_string()))?;
        Self::decode_container(&body)
    }

    fn get_dec_keys(
        &self,
        caller: &NodeId,
        master: &NodeId,
        key_ids: &[String],
    ) -> Result<Vec<QkdKey>, KmsError> {
        let body = serde_json::to_string(&DecRequest {
            key_ids: key_ids
                .iter()
                .map(|id| super::wire::KeyIdEntry { key_id: id.clone() })
                .collect(),
        })
        .expect("wire types serialize");
        let url = format!("{}/api/v1/keys/{}/dec_keys", self.base, master.as_str());
        let response = self
            .agent
            .post(&url)
            .set(SAE_ID_HEADER, caller.as_str())
            .set("Content-Type", "application/json")
            .send_string(&body)
            .map_err(Self::map_error)?;
        let body = response
            .into_string()
            .map_err(|e| KmsError::Transport(e.to_string()))?;
        Self::decode_container(&body)
    }
}
