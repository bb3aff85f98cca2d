//! Opt-in network layers: the watermark-detection client and reverse
//! image search. Both are disabled by default; with the flags off no
//! byte ever reaches the transport.

use std::fmt;
use std::io::Read;
use std::time::Duration;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::container::ImageBytes;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Response body cap for provider replies.
const MAX_RESPONSE_LEN: u64 = 4 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct NetPolicy {
    /// Off by default: the watermark check transmits image bytes.
    pub watermark_enabled: bool,
    /// Off by default: reverse search transmits image bytes.
    pub reverse_search_enabled: bool,
    pub timeout: Duration,
    pub watermark_endpoint: Option<String>,
    pub search_endpoint: Option<String>,
    pub bearer_token: Option<String>,
}

impl Default for NetPolicy {
    fn default() -> Self {
        NetPolicy {
            watermark_enabled: false,
            reverse_search_enabled: false,
            timeout: DEFAULT_TIMEOUT,
            watermark_endpoint: None,
            search_endpoint: None,
            bearer_token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("provider returned status {0}")]
    Status(u16),
    #[error("malformed provider reply: {0}")]
    Malformed(String),
    #[error("transport: {0}")]
    Io(String),
    #[error("no endpoint configured")]
    NoEndpoint,
}

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Pluggable HTTP POST. Implementations must honor `timeout` as an upper
/// bound on the whole call.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        body: &[u8],
        timeout: Duration,
        bearer: Option<&str>,
    ) -> Result<HttpResponse, TransportError>;
}

/// Real transport backed by a blocking HTTP client.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        body: &[u8],
        timeout: Duration,
        bearer: Option<&str>,
    ) -> Result<HttpResponse, TransportError> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let mut request = agent
            .post(url)
            .set("Content-Type", "application/octet-stream");
        if let Some(token) = bearer {
            request = request.set("Authorization", &format!("Bearer {token}"));
        }
        match request.send_bytes(body) {
            Ok(response) => {
                let status = response.status();
                let mut buf = Vec::new();
                response
                    .into_reader()
                    .take(MAX_RESPONSE_LEN)
                    .read_to_end(&mut buf)
                    .map_err(|e| TransportError::Io(e.to_string()))?;
                Ok(HttpResponse { status, body: buf })
            }
            Err(ureq::Error::Status(code, _)) => Err(TransportError::Status(code)),
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                if message.contains("timed out") || message.contains("timeout") {
                    Err(TransportError::Timeout)
                } else {
                    Err(TransportError::Io(message))
                }
            }
        }
    }
}

/// Outcome of an opt-in layer: skipped by policy, completed, or degraded
/// to unavailable by a transport failure.
#[derive(Debug, Clone, PartialEq)]
pub enum NetCheck<T> {
    Skipped,
    Completed(T),
    Unavailable(TransportError),
}

impl<T> NetCheck<T> {
    pub fn completed(&self) -> Option<&T> {
        match self {
            NetCheck::Completed(value) => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkResult {
    pub detected: bool,
    pub watermark_kind: Option<String>,
    /// Present only when detected.
    pub provider_confidence: Option<f64>,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReverseSearchHit {
    pub url: String,
    pub first_seen: Option<NaiveDate>,
    pub title: Option<String>,
}

impl fmt::Display for ReverseSearchHit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.first_seen {
            Some(date) => write!(f, "{} (first seen {date})", self.url),
            None => f.write_str(&self.url),
        }
    }
}

#[derive(Deserialize)]
struct WatermarkReply {
    detected: bool,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

#[derive(Deserialize)]
struct SearchReply {
    hits: Vec<SearchReplyHit>,
}

#[derive(Deserialize)]
struct SearchReplyHit {
    url: String,
    #[serde(default)]
    first_seen: Option<String>,
    #[serde(default)]
    title: Option<String>,
}

fn provider_name(endpoint: &str) -> String {
    endpoint
        .trim_start_matches("https://")
        .trim_start_matches("http://")
        .split('/')
        .next()
        .unwrap_or(endpoint)
        .to_string()
}

/// POSTs the image to `{endpoint}/v1/detect` when the watermark layer is
/// enabled. Skipped means no bytes left the process.
pub fn check_watermark(
    image: &ImageBytes,
    policy: &NetPolicy,
    transport: &dyn Transport,
) -> NetCheck<WatermarkResult> {
    if !policy.watermark_enabled {
        return NetCheck::Skipped;
    }
    let Some(endpoint) = policy.watermark_endpoint.as_deref() else {
        return NetCheck::Unavailable(TransportError::NoEndpoint);
    };
    let url = format!("{}/v1/detect", endpoint.trim_end_matches('/'));
    let response = match transport.post(
        &url,
        image.bytes(),
        policy.timeout,
        policy.bearer_token.as_deref(),
    ) {
        Ok(r) => r,
        Err(e) => return NetCheck::Unavailable(e),
    };
    if !(200..300).contains(&response.status) {
        return NetCheck::Unavailable(TransportError::Status(response.status));
    }
    let reply: WatermarkReply = match serde_json::from_slice(&response.body) {
        Ok(r) => r,
        Err(e) => return NetCheck::Unavailable(TransportError::Malformed(e.to_string())),
    };
    NetCheck::Completed(WatermarkResult {
        detected: reply.detected,
        watermark_kind: if reply.detected { reply.kind } else { None },
        provider_confidence: if reply.detected { reply.confidence } else { None },
        provider: provider_name(endpoint),
    })
}

/// POSTs the image to `{endpoint}/v1/search` when reverse search is
/// enabled; hits come back sorted by first-seen date, unknown dates last.
pub fn reverse_search(
    image: &ImageBytes,
    policy: &NetPolicy,
    transport: &dyn Transport,
) -> NetCheck<Vec<ReverseSearchHit>> {
    if !policy.reverse_search_enabled {
        return NetCheck::Skipped;
    }
    let Some(endpoint) = policy.search_endpoint.as_deref() else {
        return NetCheck::Unavailable(TransportError::NoEndpoint);
    };
    let url = format!("{}/v1/search", endpoint.trim_end_matches('/'));
    let response = match transport.post(
        &url,
        image.bytes(),
        policy.timeout,
        policy.bearer_token.as_deref(),
    ) {
        Ok(r) => r,
        Err(e) => return NetCheck::Unavailable(e),
    };
    if !(200..300).contains(&response.status) {
        return NetCheck::Unavailable(TransportError::Status(response.status));
    }
    let reply: SearchReply = match serde_json::from_slice(&response.body) {
        Ok(r) => r,
        Err(e) => return NetCheck::Unavailable(TransportError::Malformed(e.to_string())),
    };
    let mut hits: Vec<ReverseSearchHit> = reply
        .hits
        .into_iter()
        .map(|h| ReverseSearchHit {
            url: h.url,
            first_seen: h
                .first_seen
                .and_then(|s| NaiveDate::parse_from_str(&s, "%Y-%m-%d").ok()),
            title: h.title,
        })
        .collect();
    hits.sort_by(|a, b| match (a.first_seen, b.first_seen) {
        (Some(x), Some(y)) => x.cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    NetCheck::Completed(hits)
}

pub mod testing {
    //! Hermetic doubles: counting/scripted/stalling transports and a real
    //! TCP mock server speaking the provider wire contract.

    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::{TcpListener, TcpStream};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    /// Counts every call; the privacy invariant asserts the count is zero.
    #[derive(Default)]
    pub struct CountingTransport {
        calls: AtomicUsize,
        inner: Option<Box<dyn Transport>>,
    }

    impl CountingTransport {
        pub fn new() -> Self {
            CountingTransport::default()
        }

        pub fn wrapping(inner: Box<dyn Transport>) -> Self {
            CountingTransport {
                calls: AtomicUsize::new(0),
                inner: Some(inner),
            }
        }

        pub fn calls(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl Transport for CountingTransport {
        fn post(
            &self,
            url: &str,
            body: &[u8],
            timeout: Duration,
            bearer: Option<&str>,
        ) -> Result<HttpResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match &self.inner {
                Some(inner) => inner.post(url, body, timeout, bearer),
                None => Err(TransportError::Io("counting transport has no backend".into())),
            }
        }
    }

    /// Replays canned responses in order, recording request URLs.
    pub struct ScriptedTransport {
        responses: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        pub urls: Mutex<Vec<String>>,
    }

    impl ScriptedTransport {
        pub fn new(responses: Vec<Result<HttpResponse, TransportError>>) -> Self {
            ScriptedTransport {
                responses: Mutex::new(responses),
                urls: Mutex::new(Vec::new()),
            }
        }

        pub fn json(status: u16, body: &str) -> Result<HttpResponse, TransportError> {
            Ok(HttpResponse {
                status,
                body: body.as_bytes().to_vec(),
            })
        }
    }

    impl Transport for ScriptedTransport {
        fn post(
            &self,
            url: &str,
            _body: &[u8],
            _timeout: Duration,
            _bearer: Option<&str>,
        ) -> Result<HttpResponse, TransportError> {
            self.urls.lock().unwrap().push(url.to_string());
            let mut responses = self.responses.lock().unwrap();
            if responses.is_empty() {
                Err(TransportError::Io("script exhausted".into()))
            } else {
                responses.remove(0)
            }
        }
    }

    /// Simulates a stalled provider: sleeps for the caller's timeout and
    /// then reports it, like a real transport would.
    pub struct StallingTransport;

    impl Transport for StallingTransport {
        fn post(
            &self,
            _url: &str,
            _body: &[u8],
            timeout: Duration,
            _bearer: Option<&str>,
        ) -> Result<HttpResponse, TransportError> {
            std::thread::sleep(timeout);
            Err(TransportError::Timeout)
        }
    }

    /// One-request-at-a-time HTTP server implementing the provider
    /// contract: POST /v1/detect and POST /v1/search.
    pub struct MockProviderServer {
        pub endpoint: String,
        handle: Option<std::thread::JoinHandle<()>>,
    }

    impl MockProviderServer {
        /// Serves `detect_body` / `search_body` for up to `requests`
        /// requests, then shuts down.
        pub fn spawn(detect_body: String, search_body: String, requests: usize) -> Self {
            let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
            let endpoint = format!("http://{}", listener.local_addr().unwrap());
            let handle = std::thread::spawn(move || {
                for _ in 0..requests {
                    let Ok((stream, _)) = listener.accept() else {
                        return;
                    };
                    let _ = handle_one(stream, &detect_body, &search_body);
                }
            });
            MockProviderServer {
                endpoint,
                handle: Some(handle),
            }
        }
    }

    impl Drop for MockProviderServer {
        fn drop(&mut self) {
            // Unblock accept() if no request ever arrived.
            if let Some(handle) = self.handle.take() {
                if !handle.is_finished() {
                    let _ = TcpStream::connect(self.endpoint.trim_start_matches("http://"));
                }
                let _ = handle.join();
            }
        }
    }

    fn handle_one(stream: TcpStream, detect_body: &str, search_body: &str) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream);
        let mut request_line = String::new();
        reader.read_line(&mut request_line)?;
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
        let mut body = vec![0u8; content_length];
        std::io::Read::read_exact(&mut reader, &mut body)?;

        let reply = if request_line.contains("/v1/detect") {
            detect_body
        } else if request_line.contains("/v1/search") {
            search_body
        } else {
            let mut stream = reader.into_inner();
            stream.write_all(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")?;
            return Ok(());
        };
        let mut stream = reader.into_inner();
        write!(
            stream,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
            reply.len(),
            reply
        )?;
        Ok(())
    }
}
