use std::io::Read;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Generator, OutpaintRequest, OutpaintResult};
use crate::conditioning::TensorPayload;
use crate::error::{Error, Result};
use crate::geom::{Mask, Raster, ViewSpec};

/// Largest response body accepted from a generator endpoint.
pub const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGuidance {
    pub global: TensorPayload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local: Option<TensorPayload>,
}

/// JSON body sent to a remote outpainting endpoint.
///
/// `image` and `mask` are base64 PNGs; mask value 255 marks known pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutpaintWireRequest {
    pub image: String,
    pub mask: String,
    pub prompt: String,
    pub seed: u64,
    pub view: ViewSpec,
    pub guidance: WireGuidance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutpaintWireResponse {
    /// Base64 PNG with the same size as the request image.
    pub image: String,
}

impl OutpaintWireRequest {
    pub fn from_request(req: &OutpaintRequest) -> Result<Self> {
        Ok(Self {
            image: B64.encode(req.nfov.to_png_bytes()?),
            mask: B64.encode(req.nfov_mask.to_png_bytes()?),
            prompt: req.prompt.clone(),
            seed: req.seed,
            view: req.view,
            guidance: WireGuidance {
                global: TensorPayload::encode(&req.bundle.global_stream),
                local: req.bundle.local_stream.as_ref().map(TensorPayload::encode),
            },
        })
    }

    pub fn decode_image(&self) -> Result<Raster> {
        decode_png(&self.image, "image").and_then(|b| Raster::from_png_bytes(&b))
    }

    pub fn decode_mask(&self) -> Result<Mask> {
        decode_png(&self.mask, "mask").and_then(|b| Mask::from_png_bytes(&b))
    }
}

impl OutpaintWireResponse {
    pub fn from_raster(r: &Raster) -> Result<Self> {
        Ok(Self {
            image: B64.encode(r.to_png_bytes()?),
        })
    }

    pub fn decode_image(&self) -> Result<Raster> {
        let bytes = decode_png(&self.image, "image")?;
        Raster::from_png_bytes(&bytes).map_err(|e| Error::Protocol(format!("response image: {e}")))
    }
}

fn decode_png(s: &str, what: &str) -> Result<Vec<u8>> {
    B64.decode(s)
        .map_err(|e| Error::Protocol(format!("{what} is not valid base64: {e}")))
}

/// HTTP client for an outpainting service.
///
/// Timeouts and connection failures are retried with exponential backoff;
/// HTTP error statuses are not.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    pub url: String,
    pub timeout: Duration,
    pub retries: u32,
    pub backoff: Duration,
    cancel: Arc<AtomicBool>,
}

impl RemoteGenerator {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(120),
            retries: 3,
            backoff: Duration::from_millis(250),
            cancel: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    /// Flag that aborts in-flight retries when set.
    pub fn cancel_handle(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    fn cancelled(&self) -> Result<()> {
        if self.cancel.load(Ordering::SeqCst) {
            Err(Error::Aborted)
        } else {
            Ok(())
        }
    }

    fn attempt(&self, client: &reqwest::blocking::Client, body: &[u8]) -> Result<Vec<u8>> {
        let resp = client
            .post(&self.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec())
            .send()
            .map_err(transport_error)?;
        let status = resp.status();
        let mut buf = Vec::new();
        resp.take(MAX_BODY_BYTES + 1)
            .read_to_end(&mut buf)
            .map_err(|e| Error::Transport {
                message: format!("reading response: {e}"),
                retryable: e.kind() == std::io::ErrorKind::TimedOut,
            })?;
        if buf.len() as u64 > MAX_BODY_BYTES {
            return Err(Error::Protocol(format!(
                "response exceeds {MAX_BODY_BYTES} bytes"
            )));
        }
        if !status.is_success() {
            return Err(Error::Generator {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&buf[..buf.len().min(4096)]).into_owned(),
            });
        }
        Ok(buf)
    }
}

fn transport_error(e: reqwest::Error) -> Error {
    Error::Transport {
        retryable: e.is_timeout() || e.is_connect(),
        message: e.to_string(),
    }
}

impl Generator for RemoteGenerator {
    fn id(&self) -> String {
        format!("remote:{}", self.url)
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        req.validate()?;
        let started = Instant::now();
        let body = serde_json::to_vec(&OutpaintWireRequest::from_request(req)?)?;
        // built per call: the blocking client must not be dropped inside an async runtime
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(transport_error)?;
        let mut attempt = 0;
        let bytes = loop {
            self.cancelled()?;
            match self.attempt(&client, &body) {
                Ok(b) => break b,
                Err(e) if e.is_retryable() && attempt < self.retries => {
                    let wait = self.backoff * 2u32.saturating_pow(attempt);
                    tracing::warn!(attempt, ?wait, error = %e, "retrying generator call");
                    attempt += 1;
                    let until = Instant::now() + wait;
                    while Instant::now() < until {
                        self.cancelled()?;
                        std::thread::sleep(Duration::from_millis(10).min(wait));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let wire: OutpaintWireResponse = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Protocol(format!("malformed generator response: {e}")))?;
        let mut image = wire.decode_image()?;
        if image.width != req.nfov.width || image.height != req.nfov.height {
            return Err(Error::Protocol(format!(
                "generator returned {}x{}, expected {}x{}",
                image.width, image.height, req.nfov.width, req.nfov.height
            )));
        }
        if req.nfov.channels == 1 {
            image = Raster::from_fn(image.width, image.height, 1, |x, y, _| {
                let p = image.pixel(x, y);
                (p[0] + p[1] + p[2]) / 3.0
            });
        }
        Ok(OutpaintResult {
            nfov: image,
            generator_id: self.id(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::{encode_text, ConditioningFlags, GuidanceBundle};
    use std::io::Write;
    use std::net::TcpListener;
    use std::sync::atomic::AtomicUsize;

    /// Minimal one-request-per-connection HTTP server.
    fn serve(
        handler: impl Fn(usize, &[u8]) -> (u16, Vec<u8>, Duration) + Send + Sync + 'static,
    ) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let count = Arc::new(AtomicUsize::new(0));
        let handler = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let (count, handler) = (count.clone(), handler.clone());
                std::thread::spawn(move || {
                    let body = read_request(&mut stream);
                    let n = count.fetch_add(1, Ordering::SeqCst);
                    let (status, resp, delay) = handler(n, &body);
                    std::thread::sleep(delay);
                    let head = format!(
                        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                        resp.len()
                    );
                    let _ = stream.write_all(head.as_bytes());
                    let _ = stream.write_all(&resp);
                });
            }
        });
        format!("http://{addr}/outpaint")
    }

    fn read_request(stream: &mut std::net::TcpStream) -> Vec<u8> {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            let n = stream.read(&mut chunk).unwrap_or(0);
            if n == 0 {
                return buf;
            }
            buf.extend_from_slice(&chunk[..n]);
            if let Some(end) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                let head = String::from_utf8_lossy(&buf[..end]).to_lowercase();
                let len = head
                    .lines()
                    .find_map(|l| l.strip_prefix("content-length:"))
                    .and_then(|v| v.trim().parse::<usize>().ok())
                    .unwrap_or(0);
                while buf.len() < end + 4 + len {
                    let n = stream.read(&mut chunk).unwrap_or(0);
                    if n == 0 {
                        break;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                }
                return buf[end + 4..].to_vec();
            }
        }
    }

    fn echo(body: &[u8]) -> Vec<u8> {
        let req: OutpaintWireRequest = serde_json::from_slice(body).unwrap();
        serde_json::to_vec(&OutpaintWireResponse { image: req.image }).unwrap()
    }

    fn request() -> OutpaintRequest {
        OutpaintRequest {
            nfov: Raster::from_fn(16, 16, 3, |x, _, _| x as f32 / 15.0),
            nfov_mask: Mask::from_fn(16, 16, |x, _| x < 8),
            bundle: GuidanceBundle {
                global_stream: encode_text("hello world", 8, 0).unwrap().embedding,
                local_stream: None,
                flags: ConditioningFlags::default(),
            },
            prompt: "hello world".into(),
            seed: 5,
            view: ViewSpec::square(0.0, 0.0, 16).unwrap(),
        }
    }

    #[test]
    fn echo_round_trip() {
        let url = serve(|_, b| (200, echo(b), Duration::ZERO));
        let req = request();
        let out = RemoteGenerator::new(url).outpaint(&req).unwrap();
        assert_eq!(out.nfov, req.nfov.quantized());
    }

    #[test]
    fn wire_request_carries_guidance() {
        let req = request();
        let wire = OutpaintWireRequest::from_request(&req).unwrap();
        assert_eq!(wire.decode_mask().unwrap(), req.nfov_mask);
        assert_eq!(wire.guidance.global.decode().unwrap().dim(), (2, 8));
        assert!(wire.guidance.local.is_none());
        let json = serde_json::to_string(&wire).unwrap();
        assert!(!json.contains("\"local\""));
    }

    #[test]
    fn wrong_size_is_protocol_error() {
        let url = serve(|_, _| {
            let r = OutpaintWireResponse::from_raster(&Raster::new(8, 8, 3)).unwrap();
            (200, serde_json::to_vec(&r).unwrap(), Duration::ZERO)
        });
        let err = RemoteGenerator::new(url).outpaint(&request()).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)), "{err:?}");
    }

    #[test]
    fn http_error_is_not_retried() {
        let url = serve(|_, _| (500, b"boom".to_vec(), Duration::ZERO));
        let err = RemoteGenerator::new(url)
            .with_retries(3, Duration::from_millis(1))
            .outpaint(&request())
            .unwrap_err();
        match err {
            Error::Generator { status, body } => {
                assert_eq!(status, 500);
                assert_eq!(body, "boom");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_timeouts_then_success() {
        let url = serve(|n, b| {
            let delay = if n < 2 {
                Duration::from_millis(800)
            } else {
                Duration::ZERO
            };
            (200, echo(b), delay)
        });
        let out = RemoteGenerator::new(url)
            .with_timeout(Duration::from_millis(200))
            .with_retries(3, Duration::from_millis(5))
            .outpaint(&request());
        assert!(out.is_ok(), "{out:?}");
    }

    #[test]
    fn timeouts_exhaust_retries() {
        let url = serve(|_, b| (200, echo(b), Duration::from_millis(600)));
        let err = RemoteGenerator::new(url)
            .with_timeout(Duration::from_millis(100))
            .with_retries(1, Duration::from_millis(1))
            .outpaint(&request())
            .unwrap_err();
        assert!(
            matches!(
                err,
                Error::Transport {
                    retryable: true,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn cancelled_before_call() {
        let gen = RemoteGenerator::new("http://127.0.0.1:9/");
        gen.cancel_handle().store(true, Ordering::SeqCst);
        assert!(matches!(gen.outpaint(&request()), Err(Error::Aborted)));
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        // bind then drop to get a port with nothing listening
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let err = RemoteGenerator::new(format!("http://127.0.0.1:{port}/"))
            .with_retries(1, Duration::from_millis(1))
            .outpaint(&request())
            .unwrap_err();
        assert!(matches!(err, Error::Transport { .. }), "{err:?}");
    }
}
