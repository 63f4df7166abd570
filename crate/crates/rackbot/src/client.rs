//! Blocking HTTP client for one robot.

use std::io::{BufRead, BufReader, Read};
use std::time::{Duration, Instant};

use rackbot_core::workcell::View;
use serde::de::DeserializeOwned;
use ureq::http::Response;
use ureq::{Agent, Body};

use crate::api::{
    CommandRequest, ErrorBody, Health, Receipt, RobotStatus, RopeSnapshot, SEQ_HEADER, STREAM_SEQ_HEADER,
    TOKEN_HEADER, TS_HEADER,
};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("authentication rejected")]
    Unauthorized,
    #[error("robot busy")]
    Busy,
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
}

impl From<ureq::Error> for ClientError {
    fn from(e: ureq::Error) -> Self {
        ClientError::Transport(e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Image {
    pub seq: u64,
    pub ts_ms: u64,
    pub jpeg: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct StreamFrame {
    pub stream_seq: u64,
    pub seq: u64,
    pub ts_ms: u64,
    pub jpeg: Vec<u8>,
}

#[derive(Clone)]
pub struct RobotClient {
    base: String,
    token: String,
    agent: Agent,
    stream_agent: Agent,
}

fn agent(timeout: Option<Duration>) -> Agent {
    Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(timeout)
        .timeout_connect(Some(Duration::from_secs(2)))
        .max_idle_connections_per_host(8)
        .build()
        .into()
}

fn header_u64(resp: &Response<Body>, name: &str) -> Result<u64, ClientError> {
    resp.headers()
        .get(name)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| ClientError::Decode(format!("missing header {name}")))
}

impl RobotClient {
    /// `base` is `http://host:port`.
    pub fn new(base: impl Into<String>, token: impl Into<String>) -> Self {
        Self::with_timeout(base, token, Duration::from_secs(5))
    }

    pub fn with_timeout(base: impl Into<String>, token: impl Into<String>, timeout: Duration) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            token: token.into(),
            agent: agent(Some(timeout)),
            stream_agent: agent(None),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn check(mut resp: Response<Body>) -> Result<Response<Body>, ClientError> {
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            return Ok(resp);
        }
        let body: Option<ErrorBody> = resp
            .body_mut()
            .read_to_vec()
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok());
        let message = body.as_ref().map(|b| b.error.clone()).unwrap_or_default();
        Err(match status {
            401 => ClientError::Unauthorized,
            409 => ClientError::Busy,
            400 if body.as_ref().is_some_and(|b| b.field.is_some()) => ClientError::Validation {
                field: body.and_then(|b| b.field).unwrap_or_default(),
                message,
            },
            _ => ClientError::Status { status, message },
        })
    }

    fn json<T: DeserializeOwned>(mut resp: Response<Body>) -> Result<T, ClientError> {
        let bytes = resp.body_mut().read_to_vec()?;
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    /// GET with the token attached.
    pub fn get_raw(&self, path: &str) -> Result<Response<Body>, ClientError> {
        let resp = self.agent.get(self.url(path)).header(TOKEN_HEADER, &self.token).call()?;
        Self::check(resp)
    }

    /// GET without any token.
    pub fn get_anonymous(&self, path: &str) -> Result<u16, ClientError> {
        let mut resp = self.agent.get(self.url(path)).call()?;
        let _ = resp.body_mut().read_to_vec();
        Ok(resp.status().as_u16())
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        let resp = self.agent.get(self.url("/healthz")).call()?;
        Self::json(Self::check(resp)?)
    }

    pub fn state(&self) -> Result<RobotStatus, ClientError> {
        Self::json(self.get_raw("/api/v1/state")?)
    }

    pub fn sim_rope(&self) -> Result<RopeSnapshot, ClientError> {
        Self::json(self.get_raw("/api/v1/sim/rope")?)
    }

    pub fn image(&self, view: View) -> Result<Image, ClientError> {
        let mut resp = self.get_raw(&format!("/api/v1/image/{view}"))?;
        let seq = header_u64(&resp, SEQ_HEADER)?;
        let ts_ms = header_u64(&resp, TS_HEADER)?;
        let jpeg = resp.body_mut().with_config().limit(64 << 20).read_to_vec()?;
        Ok(Image { seq, ts_ms, jpeg })
    }

    pub fn command(&self, req: &CommandRequest) -> Result<Receipt, ClientError> {
        let body = serde_json::to_vec(req).expect("command serializes");
        let resp = self
            .agent
            .post(self.url("/api/v1/command"))
            .header(TOKEN_HEADER, &self.token)
            .header("content-type", "application/json")
            .send(&body[..])?;
        Self::json(Self::check(resp)?)
    }

    pub fn calibrate(&self) -> Result<Receipt, ClientError> {
        let resp = self
            .agent
            .post(self.url("/api/v1/calibrate"))
            .header(TOKEN_HEADER, &self.token)
            .send_empty()?;
        Self::json(Self::check(resp)?)
    }

    /// Polls until the robot reports idle.
    pub fn wait_idle(&self, timeout: Duration, poll: Duration) -> Result<RobotStatus, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let status = self.state()?;
            if !status.busy {
                return Ok(status);
            }
            if Instant::now() >= deadline {
                return Err(ClientError::Timeout("robot to become idle"));
            }
            std::thread::sleep(poll);
        }
    }

    /// Sends `req`, retrying busy rejections up to `retries` more times.
    pub fn command_retrying(&self, req: &CommandRequest, retries: usize, backoff: Duration) -> Result<Receipt, ClientError> {
        let mut attempt = 0;
        loop {
            match self.command(req) {
                Err(ClientError::Busy) if attempt < retries => {
                    attempt += 1;
                    std::thread::sleep(backoff);
                }
                other => return other,
            }
        }
    }

    pub fn stream(&self, view: View) -> Result<FrameStream, ClientError> {
        let resp = self
            .stream_agent
            .get(self.url(&format!("/api/v1/stream/{view}")))
            .header(TOKEN_HEADER, &self.token)
            .call()?;
        let resp = Self::check(resp)?;
        Ok(FrameStream {
            reader: Box::new(BufReader::with_capacity(1 << 18, resp.into_body().into_reader())),
        })
    }
}

/// Iterator over the parts of a multipart MJPEG response. Ends when the
/// server closes the stream.
pub struct FrameStream {
    reader: Box<dyn BufRead + Send>,
}

impl FrameStream {
    /// Parses multipart frames from any reader; used for files and tests.
    pub fn from_reader(reader: impl Read + Send + 'static) -> Self {
        Self {
            reader: Box::new(BufReader::new(reader)),
        }
    }

    fn line(&mut self) -> std::io::Result<Option<String>> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\r', '\n']).to_string()))
    }

    fn next_frame(&mut self) -> Result<Option<StreamFrame>, ClientError> {
        let io = |e: std::io::Error| ClientError::Transport(e.to_string());
        loop {
            match self.line().map_err(io)? {
                None => return Ok(None),
                Some(l) if l.starts_with("--") => break,
                Some(_) => {}
            }
        }
        let (mut len, mut seq, mut ts, mut stream_seq) = (None, None, None, None);
        loop {
            let Some(line) = self.line().map_err(io)? else {
                return Ok(None);
            };
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                let value = value.trim().parse::<u64>().ok();
                match name.trim().to_ascii_lowercase().as_str() {
                    "content-length" => len = value,
                    SEQ_HEADER => seq = value,
                    TS_HEADER => ts = value,
                    STREAM_SEQ_HEADER => stream_seq = value,
                    _ => {}
                }
            }
        }
        let missing = |h: &str| ClientError::Decode(format!("stream part without {h}"));
        let len = len.ok_or_else(|| missing("content-length"))? as usize;
        let mut jpeg = vec![0; len];
        self.reader.read_exact(&mut jpeg).map_err(io)?;
        Ok(Some(StreamFrame {
            stream_seq: stream_seq.ok_or_else(|| missing(STREAM_SEQ_HEADER))?,
            seq: seq.ok_or_else(|| missing(SEQ_HEADER))?,
            ts_ms: ts.ok_or_else(|| missing(TS_HEADER))?,
            jpeg,
        }))
    }
}

impl Iterator for FrameStream {
    type Item = Result<StreamFrame, ClientError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}
