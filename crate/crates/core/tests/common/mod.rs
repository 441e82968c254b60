#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use panogen::generator::{OutpaintWireRequest, OutpaintWireResponse};
use panogen::geom::{EquirectImage, Raster};

/// Smooth test image defined on the sphere, so it has no seam or pole
/// discontinuities.
pub fn smooth_sphere_image(width: usize) -> EquirectImage {
    EquirectImage::from_lon_lat(width, 3, |lon, lat, c| {
        let (lo, la) = (lon.to_radians(), lat.to_radians());
        let (x, y, z) = (la.cos() * lo.sin(), la.sin(), la.cos() * lo.cos());
        let k = c as f64;
        (0.5 + 0.2 * (1.3 * x + 0.7 * y - 0.4 * z + k).sin()
            + 0.12 * (0.9 * y * z + 0.6 * x - 0.5 * k).cos()) as f32
    })
    .unwrap()
}

pub fn seed_image(size: usize) -> Raster {
    Raster::from_fn(size, size, 3, |x, y, c| {
        let (fx, fy) = (x as f64 / size as f64, y as f64 / size as f64);
        (0.5 + 0.3 * (6.0 * fx + 2.0 * c as f64).sin() * (4.0 * fy).cos()) as f32
    })
}

pub fn seed_png(size: usize) -> Vec<u8> {
    seed_image(size).to_png_bytes().unwrap()
}

#[derive(Clone, Copy, Debug)]
pub enum Reply {
    /// Known pixels echoed, unknown ones mid gray.
    Echo,
    /// A wrongly sized image.
    WrongSize,
    Status(u16),
}

/// Outpainting endpoint speaking the JSON wire protocol on a local port.
/// `behaviour(n)` picks the delay and reply for the `n`-th request.
pub struct MockGenerator {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

pub fn mock_generator(
    behaviour: impl Fn(usize) -> (Duration, Reply) + Send + Sync + 'static,
) -> MockGenerator {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/outpaint", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let behaviour = Arc::new(behaviour);
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (counter, behaviour) = (counter.clone(), behaviour.clone());
            std::thread::spawn(move || {
                handle(stream, counter.fetch_add(1, Ordering::SeqCst), &*behaviour)
            });
        }
    });
    MockGenerator { url, hits }
}

fn handle(mut stream: TcpStream, n: usize, behaviour: &dyn Fn(usize) -> (Duration, Reply)) {
    let body = read_body(&mut stream);
    let (delay, reply) = behaviour(n);
    std::thread::sleep(delay);
    let (status, payload) = match reply {
        Reply::Status(s) => (s, format!("injected failure {s}").into_bytes()),
        Reply::Echo | Reply::WrongSize => {
            let req: OutpaintWireRequest = serde_json::from_slice(&body).unwrap();
            let img = req.decode_image().unwrap();
            let mask = req.decode_mask().unwrap();
            let out = match reply {
                Reply::WrongSize => Raster::new(img.width + 2, img.height, 3),
                _ => Raster::from_fn(img.width, img.height, 3, |x, y, c| {
                    if mask.get(x, y) {
                        img.pixel(x, y)[c]
                    } else {
                        0.5
                    }
                }),
            };
            (
                200,
                serde_json::to_vec(&OutpaintWireResponse::from_raster(&out).unwrap()).unwrap(),
            )
        }
    };
    let head = format!(
        "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        payload.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(&payload);
}

fn read_body(stream: &mut TcpStream) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 16384];
    let header_end = loop {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            return Vec::new();
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(p) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break p + 4;
        }
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
    let len: usize = head
        .lines()
        .find_map(|l| l.strip_prefix("content-length:"))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0);
    while buf.len() < header_end + len {
        let n = stream.read(&mut chunk).unwrap_or(0);
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    buf[header_end..].to_vec()
}

/// Multipart body for `POST /runs`.
pub fn multipart_body(boundary: &str, image: &[u8], config_json: &str) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"config\"\r\nContent-Type: application/json\r\n\r\n{config_json}\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"seed.png\"\r\nContent-Type: image/png\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(image);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    body
}

/// Starts the HTTP service on a background runtime and returns its base URL.
pub fn start_service(data_dir: &std::path::Path, endpoint_override: Option<String>) -> String {
    let app = Arc::new(panogen::service::AppState::load(data_dir, endpoint_override).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        rt.block_on(panogen::service::serve_on(listener, app))
            .unwrap();
    });
    format!("http://{addr}")
}

pub fn create_run(base: &str, image: &[u8], config_json: &str) -> String {
    let boundary = "panogen-test-boundary";
    let resp = reqwest::blocking::Client::new()
        .post(format!("{base}/runs"))
        .header(
            "content-type",
            format!("multipart/form-data; boundary={boundary}"),
        )
        .body(multipart_body(boundary, image, config_json))
        .send()
        .unwrap();
    assert_eq!(
        resp.status().as_u16(),
        201,
        "{}",
        resp.text().unwrap_or_default()
    );
    let v: serde_json::Value = serde_json::from_slice(&resp.bytes().unwrap()).unwrap();
    v["run_id"].as_str().unwrap().to_string()
}

pub fn psnr(a: &Raster, b: &Raster) -> f64 {
    let mse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = (*x as f64) - (*y as f64);
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    10.0 * (1.0 / mse).log10()
}
