//! Client side of the model-runner bridge.
//!
//! Each connection is one child process (`sh -c <command>`) with at most one
//! request in flight. The backend keeps a small pool of connections so that
//! per-image work can run in parallel; a connection that times out or breaks
//! the protocol is killed and respawned on next use.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{Request, Response};
use super::{Backend, BackendDescriptor, ScoredMask};
use crate::error::{Error, Result};
use crate::prompt::PromptSet;
use crate::tensor_io::{read_feature_grid, read_mask_png, FeatureGrid};

pub const DEFAULT_TIMEOUT_SECS: u64 = 120;
const TRANSCRIPT_LINES: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeParams {
    /// Shell command line that starts one runner process.
    pub command: String,
    pub timeout_secs: u64,
    pub connections: usize,
}

impl BridgeParams {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            connections: 1,
        }
    }
}

type Transcript = Arc<Mutex<VecDeque<String>>>;

fn record(transcript: &Transcript, line: String) {
    let mut t = transcript.lock().unwrap();
    if t.len() == TRANSCRIPT_LINES {
        t.pop_front();
    }
    t.push_back(line);
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    transcript: Transcript,
    /// Set when the request/response alternation can no longer be trusted.
    broken: bool,
}

impl Connection {
    fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::backend(format!("failed to start runner `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let transcript: Transcript = Arc::default();

        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let err_log = Arc::clone(&transcript);
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(std::result::Result::ok) {
                record(&err_log, format!("stderr: {line}"));
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
            transcript,
            broken: false,
        })
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Backend {
            message: message.into(),
            transcript: self.transcript.lock().unwrap().iter().cloned().collect(),
        }
    }

    fn call(&mut self, request: &Request, timeout: Duration) -> Result<Response> {
        self.broken = true;
        let line = serde_json::to_string(request)?;
        record(&self.transcript, format!("-> {line}"));
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.fail(format!("runner stdin closed: {e}")))?;
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                return Err(self.fail(format!("runner timed out after {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(self.fail("runner exited before answering"))
            }
        };
        record(&self.transcript, format!("<- {reply}"));
        let response: Response = serde_json::from_str(&reply)
            .map_err(|e| self.fail(format!("malformed runner response: {e}")))?;
        self.broken = false;
        if !response.ok {
            let reason = response.error.as_deref().unwrap_or("unspecified error");
            return Err(self.fail(format!("runner reported failure: {reason}")));
        }
        Ok(response)
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct BridgeBackend {
    params: BridgeParams,
    pool: Vec<Mutex<Option<Connection>>>,
    next: AtomicUsize,
}

impl std::fmt::Debug for BridgeBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeBackend")
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl BridgeBackend {
    /// Connections are started lazily on first use.
    pub fn new(params: BridgeParams) -> Result<Self> {
        if params.connections == 0 {
            return Err(Error::Config("bridge needs at least one connection".into()));
        }
        if params.timeout_secs == 0 {
            return Err(Error::Config("bridge timeout must be positive".into()));
        }
        let pool = (0..params.connections).map(|_| Mutex::new(None)).collect();
        Ok(Self {
            params,
            pool,
            next: AtomicUsize::new(0),
        })
    }

    fn call(&self, request: &Request) -> Result<Response> {
        let slot = self.next.fetch_add(1, Ordering::Relaxed) % self.pool.len();
        let mut guard = self.pool[slot].lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Connection::spawn(&self.params.command)?);
        }
        let conn = guard.as_mut().expect("connection present");
        let timeout = Duration::from_secs(self.params.timeout_secs);
        let result = conn.call(request, timeout);
        if conn.broken {
            *guard = None;
        }
        result
    }

    fn image_dims(image: &Path) -> Result<(u32, u32)> {
        let (w, h) = image::image_dimensions(image).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(image, io),
            other => Error::image(image, other),
        })?;
        Ok((h, w))
    }
}

impl Backend for BridgeBackend {
    fn extract_features(&self, image: &Path) -> Result<FeatureGrid> {
        let response = self.call(&Request::Extract {
            image: image.to_path_buf(),
        })?;
        let path = response
            .features
            .ok_or_else(|| Error::backend("extract response has no `features` path"))?;
        let grid = read_feature_grid(&path)
            .map_err(|e| Error::backend(format!("unreadable feature file {}: {e}", path.display())))?;
        grid.check_normalized()
            .map_err(|e| Error::backend(format!("runner features violate unit norm: {e}")))?;
        let dims = Self::image_dims(image)?;
        if grid.source_dims() != dims {
            return Err(Error::backend(format!(
                "feature grid source dims {:?} differ from image dims {dims:?}",
                grid.source_dims()
            )));
        }
        Ok(grid)
    }

    fn segment(&self, image: &Path, prompts: &PromptSet) -> Result<Vec<ScoredMask>> {
        let (h, w) = Self::image_dims(image)?;
        prompts.validate(h, w)?;
        let response = self.call(&Request::Segment {
            image: image.to_path_buf(),
            points: prompts.points.clone(),
        })?;
        let refs = response.masks.unwrap_or_default();
        if refs.is_empty() {
            return Err(Error::backend("runner returned zero candidate masks"));
        }
        refs.into_iter()
            .map(|r| {
                let mask = read_mask_png(&r.png).map_err(|e| {
                    Error::backend(format!("unreadable mask {}: {e}", r.png.display()))
                })?;
                if mask.dims() != (h, w) {
                    return Err(Error::backend(format!(
                        "mask {} is {:?}, image is {:?}",
                        r.png.display(),
                        mask.dims(),
                        (h, w)
                    )));
                }
                Ok(ScoredMask {
                    mask,
                    score: r.score,
                })
            })
            .collect()
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::Bridge(self.params.clone())
    }
}
