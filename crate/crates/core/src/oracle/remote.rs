use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{Request, RequestBody, Response};
use super::{
    check_blank, check_candidates, check_word, rank_candidates, CoarseTag, FillCandidate,
    LabelDistribution, Oracle, OracleError,
};

/// Moves one request to the bridge and returns the response with the same id.
pub trait Transport: Send + Sync {
    fn roundtrip(&self, request: &Request, timeout: Duration) -> Result<Response, OracleError>;
}

/// Protocol client over any transport. Each logical call is attempted at
/// most twice; precondition violations are never retried.
pub struct RemoteOracle<T> {
    transport: T,
    next_id: AtomicU64,
    timeout: Duration,
}

impl<T: Transport> RemoteOracle<T> {
    pub fn new(transport: T, timeout: Duration) -> Self {
        Self { transport, next_id: AtomicU64::new(1), timeout }
    }

    fn call<R>(
        &self,
        body: RequestBody,
        decode: impl Fn(Response) -> Result<R, OracleError>,
    ) -> Result<R, OracleError> {
        let mut last_err = OracleError::Disconnected;
        for attempt in 0..2 {
            let request = Request { id: self.next_id.fetch_add(1, Ordering::Relaxed), body: body.clone() };
            let result = self.transport.roundtrip(&request, self.timeout).and_then(|response| {
                if response.id != request.id {
                    return Err(OracleError::Protocol(format!(
                        "response id {} for request {}",
                        response.id, request.id
                    )));
                }
                if let Some(err) = response.error {
                    return Err(OracleError::Remote(err));
                }
                decode(response)
            });
            match result {
                Ok(value) => return Ok(value),
                Err(e) if e.is_retryable() => {
                    log::warn!("{} request failed (attempt {}): {e}", body.op(), attempt + 1);
                    last_err = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err)
    }
}

fn missing(field: &str) -> OracleError {
    OracleError::Protocol(format!("response lacks `{field}`"))
}

impl<T: Transport> Oracle for RemoteOracle<T> {
    fn fill(&self, text_with_blank: &str, top_k: usize) -> Result<Vec<FillCandidate>, OracleError> {
        check_blank(text_with_blank)?;
        if top_k == 0 {
            return Ok(Vec::new());
        }
        let body = RequestBody::Fill { text: text_with_blank.to_string(), top_k };
        self.call(body, |r| {
            let candidates = r.candidates.ok_or_else(|| missing("candidates"))?;
            check_candidates(&candidates)?;
            Ok(rank_candidates(candidates, top_k))
        })
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<LabelDistribution, OracleError> {
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(OracleError::Precondition("classify requires non-empty texts".into()));
        }
        let body = RequestBody::Classify { premise: premise.into(), hypothesis: hypothesis.into() };
        self.call(body, |r| {
            let probs = r.probs.ok_or_else(|| missing("probs"))?;
            probs.validate()?;
            Ok(probs)
        })
    }

    fn tokenize(&self, word: &str) -> Result<Vec<String>, OracleError> {
        check_word(word)?;
        self.call(RequestBody::Tokenize { text: word.into() }, |r| {
            let pieces = r.pieces.ok_or_else(|| missing("pieces"))?;
            if pieces.is_empty() {
                return Err(OracleError::Protocol("empty piece list".into()));
            }
            Ok(pieces)
        })
    }

    fn tag(&self, tokens: &[String]) -> Result<Vec<CoarseTag>, OracleError> {
        let n = tokens.len();
        self.call(RequestBody::Tag { tokens: tokens.to_vec() }, |r| {
            let tags = r.tags.ok_or_else(|| missing("tags"))?;
            if tags.len() != n {
                return Err(OracleError::Protocol(format!("{} tags for {n} tokens", tags.len())));
            }
            Ok(tags)
        })
    }
}

#[derive(Default)]
struct Pending {
    waiting: HashMap<u64, Sender<Response>>,
    closed: bool,
}

/// Line-delimited JSON over a byte-stream pair, normally a child process's
/// stdin/stdout. Any number of requests may be in flight; a reader thread
/// routes responses to their callers by id, in whatever order they arrive.
pub struct StdioTransport {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Arc<Mutex<Pending>>,
    child: Option<Mutex<Child>>,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, OracleError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Transport(format!("cannot start bridge `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut transport = Self::from_streams(BufReader::new(stdout), stdin);
        transport.child = Some(Mutex::new(child));
        Ok(transport)
    }

    pub fn from_streams(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        let pending = Arc::new(Mutex::new(Pending::default()));
        let routes = Arc::clone(&pending);
        thread::spawn(move || {
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let Some(response) = Response::parse(&line) else {
                    log::warn!("ignoring unparseable bridge output: {line}");
                    continue;
                };
                let sender = routes.lock().expect("pending lock").waiting.remove(&response.id);
                match sender {
                    Some(tx) => {
                        let _ = tx.send(response);
                    }
                    None => log::warn!("dropping response for unknown request id {}", response.id),
                }
            }
            let mut p = routes.lock().expect("pending lock");
            p.closed = true;
            p.waiting.clear();
        });
        Self { writer: Mutex::new(Box::new(writer)), pending, child: None }
    }
}

impl Transport for StdioTransport {
    fn roundtrip(&self, request: &Request, timeout: Duration) -> Result<Response, OracleError> {
        let (tx, rx) = mpsc::channel();
        {
            let mut p = self.pending.lock().expect("pending lock");
            if p.closed {
                return Err(OracleError::Disconnected);
            }
            p.waiting.insert(request.id, tx);
        }
        let line = serde_json::to_string(request).map_err(|e| OracleError::Transport(e.to_string()))?;
        let written = {
            let mut w = self.writer.lock().expect("writer lock");
            w.write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush())
        };
        if written.is_err() {
            self.pending.lock().expect("pending lock").waiting.remove(&request.id);
            return Err(OracleError::Disconnected);
        }
        match rx.recv_timeout(timeout) {
            Ok(response) => Ok(response),
            Err(RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").waiting.remove(&request.id);
                Err(OracleError::Timeout(timeout))
            }
            Err(RecvTimeoutError::Disconnected) => Err(OracleError::Disconnected),
        }
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            let mut child = child.lock().expect("child lock");
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// One HTTP POST per request to a single endpoint.
pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { url: url.into(), agent }
    }
}

impl Transport for HttpTransport {
    fn roundtrip(&self, request: &Request, _timeout: Duration) -> Result<Response, OracleError> {
        let mut response = self.agent.post(&self.url).send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => OracleError::Timeout(Duration::ZERO),
            other => OracleError::Transport(other.to_string()),
        })?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        Response::parse(&text).ok_or_else(|| OracleError::Protocol(format!("unparseable body {text:?}")))
    }
}
