//! Request/response inference service over plain TCP, one request per
//! connection. The server holds a public context and never performs an
//! operation requiring a secret key; the privacy model is the encryption
//! itself, so there is no transport-layer security.

use std::io::Write;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use super::codec::{deserialize_encrypted_vector, serialize_encrypted_vector};
use super::frame::{read_frame, write_frame, FrameKind};
use crate::backend::Backend;
use crate::context::Context;
use crate::error::{Error, Result};
use crate::nn::{self, Model};
use crate::tensors::PlainTensor;

/// A running inference service; shuts down on drop.
pub struct ServiceHandle {
    addr: std::net::SocketAddr,
    shutdown: Arc<AtomicBool>,
    join: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn error_payload(err: &Error) -> Vec<u8> {
    let code = err.code().as_bytes();
    let msg = err.to_string().into_bytes();
    let mut out = Vec::with_capacity(2 + code.len() + 4 + msg.len());
    out.extend_from_slice(&(code.len() as u16).to_le_bytes());
    out.extend_from_slice(code);
    out.extend_from_slice(&(msg.len() as u32).to_le_bytes());
    out.extend_from_slice(&msg);
    out
}

/// Parse an Error frame payload into (code, message).
pub fn parse_error_payload(payload: &[u8]) -> Result<(String, String)> {
    if payload.len() < 2 {
        return Err(Error::Truncated("error payload".into()));
    }
    let code_len = u16::from_le_bytes([payload[0], payload[1]]) as usize;
    if payload.len() < 2 + code_len + 4 {
        return Err(Error::Truncated("error payload".into()));
    }
    let code = String::from_utf8_lossy(&payload[2..2 + code_len]).into_owned();
    let msg_len =
        u32::from_le_bytes(payload[2 + code_len..6 + code_len].try_into().unwrap()) as usize;
    if payload.len() < 6 + code_len + msg_len {
        return Err(Error::Truncated("error payload".into()));
    }
    let msg = String::from_utf8_lossy(&payload[6 + code_len..6 + code_len + msg_len]).into_owned();
    Ok((code, msg))
}

fn handle_request(stream: &mut TcpStream, backend: &Backend, model: &Model) {
    let response = (|| -> Result<Vec<u8>> {
        let (kind, payload, _) = read_frame(stream)?;
        if kind != FrameKind::InferRequest {
            return Err(Error::ParseError(format!(
                "expected an InferRequest frame, got {kind:?}"
            )));
        }
        let ev = deserialize_encrypted_vector(backend, &payload)?;
        // inputs must arrive fresh at the top of the chain
        if ev.level() != backend.top_level() {
            return Err(Error::LevelMismatch {
                left: ev.level(),
                right: backend.top_level(),
            });
        }
        let out = nn::encrypted_forward(backend, model, &ev)?;
        serialize_encrypted_vector(&out)
    })();
    let result = match response {
        Ok(payload) => write_frame(stream, FrameKind::InferResponse, &payload),
        Err(err) => write_frame(stream, FrameKind::Error, &error_payload(&err)),
    };
    if let Err(e) = result {
        eprintln!("service: failed to reply: {e}");
    }
    let _ = stream.flush();
    let _ = stream.shutdown(Shutdown::Both);
}

/// Start serving encrypted inference on `address`. The context is reduced
/// to its public form before any request is handled.
pub fn serve_inference(address: &str, ctx: &Context, model: &Model) -> Result<ServiceHandle> {
    model.validate()?;
    let public = ctx.make_public();
    let listener = TcpListener::bind(address)
        .map_err(|e| Error::Transport(format!("bind {address}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| Error::Transport(format!("nonblocking: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| Error::Transport(e.to_string()))?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let stop = shutdown.clone();
    let model = model.clone();
    let join = std::thread::spawn(move || {
        let backend = Arc::new(Backend::real(&public));
        let model = Arc::new(model);
        let mut workers = Vec::new();
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((mut stream, _)) => {
                    let _ = stream.set_nonblocking(false);
                    let backend = backend.clone();
                    let model = model.clone();
                    workers.push(std::thread::spawn(move || {
                        handle_request(&mut stream, &backend, &model);
                    }));
                }
                Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => {
                    eprintln!("service: accept failed: {e}");
                    break;
                }
            }
        }
        for w in workers {
            let _ = w.join();
        }
    });
    Ok(ServiceHandle {
        addr,
        shutdown,
        join: Some(join),
    })
}

/// Timing and traffic accounting for one remote inference.
#[derive(Debug, Clone)]
pub struct InferReport {
    pub logits: PlainTensor,
    pub bytes_sent: usize,
    pub bytes_received: usize,
    pub prepare_ms: f64,
    pub round_trip_ms: f64,
    pub decrypt_ms: f64,
}

/// Encrypt locally, send, receive, decrypt. The context must be private
/// (decryption happens here); the model supplies the preprocessing
/// geometry and the expected output length.
pub fn client_infer<R: Rng + Send + ?Sized>(
    address: &str,
    ctx: &Context,
    model: &Model,
    image: &PlainTensor,
    rng: &mut R,
) -> Result<InferReport> {
    if ctx.is_public() {
        return Err(Error::MissingKey(
            "client needs a private context to decrypt the response".into(),
        ));
    }
    let backend = Backend::real(ctx);
    let t0 = Instant::now();
    let ev = nn::prepare_input(&backend, model, image, rng)?;
    let request = serialize_encrypted_vector(&ev)?;
    let prepare_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let mut stream = TcpStream::connect(address)
        .map_err(|e| Error::Transport(format!("connect {address}: {e}")))?;
    let bytes_sent = write_frame(&mut stream, FrameKind::InferRequest, &request)?;
    stream.flush().map_err(|e| Error::Transport(e.to_string()))?;
    let (kind, payload, bytes_received) = read_frame(&mut stream)?;
    let round_trip_ms = t1.elapsed().as_secs_f64() * 1e3;

    match kind {
        FrameKind::InferResponse => {
            let t2 = Instant::now();
            let out = deserialize_encrypted_vector(&backend, &payload)?;
            let logits = crate::tensors::decrypt_vector(&backend, &out)?;
            Ok(InferReport {
                logits,
                bytes_sent,
                bytes_received,
                prepare_ms,
                round_trip_ms,
                decrypt_ms: t2.elapsed().as_secs_f64() * 1e3,
            })
        }
        FrameKind::Error => {
            let (code, msg) = parse_error_payload(&payload)?;
            Err(Error::Transport(format!("service error [{code}]: {msg}")))
        }
        other => Err(Error::ParseError(format!(
            "unexpected response frame {other:?}"
        ))),
    }
}
