//! Out-of-process detector protocol.
//!
//! Request, all integers big-endian u32:
//!
//! ```text
//! width | height | byte_len | RGB bytes (byte_len == width * height * 3)
//! ```
//!
//! Response: `byte_len | JSON`, where the JSON is either
//! `{"faces": [{"rect": {"x":..,"y":..,"w":..,"h":..}, "confidence": ..}]}`
//! or `{"error": "message"}`. A connection may carry any number of requests.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Detection, FaceDetector, FaceError};

const MAX_RESPONSE: u32 = 16 << 20;

#[derive(Debug, Serialize, Deserialize)]
struct Response {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    faces: Option<Vec<Detection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Client side: forwards each detection request over a loopback TCP socket.
#[derive(Debug, Clone)]
pub struct SocketDetector {
    addr: SocketAddr,
    timeout: Duration,
}

impl SocketDetector {
    pub fn new(addr: SocketAddr) -> Self {
        Self { addr, timeout: Duration::from_secs(5) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn roundtrip(&self, width: u32, height: u32, rgb: &[u8]) -> io::Result<Response> {
        let stream = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_write_timeout(Some(self.timeout))?;
        let mut w = BufWriter::new(&stream);
        w.write_all(&width.to_be_bytes())?;
        w.write_all(&height.to_be_bytes())?;
        w.write_all(&(rgb.len() as u32).to_be_bytes())?;
        w.write_all(rgb)?;
        w.flush()?;
        drop(w);
        let mut r = BufReader::new(&stream);
        let len = read_u32(&mut r)?;
        if len > MAX_RESPONSE {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "oversized response"));
        }
        let mut body = vec![0u8; len as usize];
        r.read_exact(&mut body)?;
        serde_json::from_slice(&body).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

impl FaceDetector for SocketDetector {
    fn detect(&self, width: u32, height: u32, rgb: &[u8]) -> Result<Vec<Detection>, FaceError> {
        let resp = self
            .roundtrip(width, height, rgb)
            .map_err(|e| FaceError::Detector(format!("{}: {e}", self.addr)))?;
        match (resp.faces, resp.error) {
            (_, Some(err)) => Err(FaceError::Detector(err)),
            (Some(faces), None) => Ok(faces),
            (None, None) => Err(FaceError::Detector("empty detector response".into())),
        }
    }
}

fn serve_connection(stream: TcpStream, detector: &dyn FaceDetector) -> io::Result<()> {
    let mut r = BufReader::new(&stream);
    let mut w = BufWriter::new(&stream);
    loop {
        let width = match read_u32(&mut r) {
            Ok(v) => v,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let height = read_u32(&mut r)?;
        let len = read_u32(&mut r)?;
        let expected = u64::from(width) * u64::from(height) * 3;
        let resp = if u64::from(len) != expected {
            // the payload cannot be trusted to be framed; answer and hang up
            let resp = Response { faces: None, error: Some(format!("expected {expected} bytes, got {len}")) };
            let body = serde_json::to_vec(&resp).expect("response serializes");
            w.write_all(&(body.len() as u32).to_be_bytes())?;
            w.write_all(&body)?;
            return w.flush();
        } else {
            let mut rgb = vec![0u8; len as usize];
            r.read_exact(&mut rgb)?;
            match detector.detect(width, height, &rgb) {
                Ok(faces) => Response { faces: Some(faces), error: None },
                Err(e) => Response { faces: None, error: Some(e.to_string()) },
            }
        };
        let body = serde_json::to_vec(&resp).expect("response serializes");
        w.write_all(&(body.len() as u32).to_be_bytes())?;
        w.write_all(&body)?;
        w.flush()?;
    }
}

/// Server side: answer detection requests on `listener` until it fails.
/// Each connection is handled on its own thread.
pub fn serve_detector(listener: TcpListener, detector: Arc<dyn FaceDetector>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let detector = Arc::clone(&detector);
        std::thread::spawn(move || {
            if let Err(e) = serve_connection(stream, detector.as_ref()) {
                log::debug!("detector connection ended: {e}");
            }
        });
    }
    Ok(())
}
