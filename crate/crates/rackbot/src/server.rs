//! HTTP surface of one cell.

use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bytes::BytesMut;
use hyper_util::rt::TokioIo;
use hyper_util::service::TowerToHyperService;
use rackbot_core::workcell::View;
use subtle::ConstantTimeEq;
use tokio::net::TcpListener;
use tokio::task::{JoinHandle, JoinSet};

use crate::api::{
    CommandRequest, ErrorBody, Health, SEQ_HEADER, STREAM_BOUNDARY, STREAM_SEQ_HEADER, TOKEN_HEADER, TS_HEADER,
};
use crate::camera::{Camera, Captured};
use crate::cell::{CellSim, CommandError};
use crate::clock;
use crate::config::CellConfig;

/// A cell together with its two cameras, shared by all request handlers.
pub struct CellShared {
    pub cfg: CellConfig,
    pub sim: Mutex<CellSim>,
    cameras: [Camera; 2],
}

impl CellShared {
    pub fn new(cfg: CellConfig) -> anyhow::Result<Arc<Self>> {
        let sim = CellSim::new(cfg.clone(), clock::now_ms_f64())?;
        let workcell = Arc::new(cfg.workcell.clone());
        let s = &cfg.server;
        let cameras = [
            Camera::new(View::Top, workcell.clone(), s.jpeg_quality_top, s.sensor_noise, s.frame_cache_ms),
            Camera::new(View::Bottom, workcell, s.jpeg_quality_bottom, s.sensor_noise, s.frame_cache_ms),
        ];
        Ok(Arc::new(Self {
            cfg,
            sim: Mutex::new(sim),
            cameras,
        }))
    }

    pub fn camera(&self, view: View) -> &Camera {
        match view {
            View::Top => &self.cameras[0],
            View::Bottom => &self.cameras[1],
        }
    }

    /// Pre-encodes the idle scene of both cameras.
    pub async fn warm(&self) {
        for camera in &self.cameras {
            let _ = camera.warm(&self.sim).await;
        }
    }
}

fn error(status: StatusCode, message: impl Into<String>, field: Option<String>) -> Response {
    let body = ErrorBody {
        error: message.into(),
        field,
    };
    (status, Json(body)).into_response()
}

async fn auth(State(cell): State<Arc<CellShared>>, req: Request, next: Next) -> Response {
    let presented = req.headers().get(TOKEN_HEADER).map(HeaderValue::as_bytes);
    let ok = presented.is_some_and(|t| bool::from(t.ct_eq(cell.cfg.token.as_bytes())));
    if !ok {
        return error(StatusCode::UNAUTHORIZED, "missing or invalid token", None);
    }
    next.run(req).await
}

async fn health(State(cell): State<Arc<CellShared>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        robot_id: cell.cfg.robot_id.clone(),
    })
}

async fn state(State(cell): State<Arc<CellShared>>) -> Response {
    let status = cell.sim.lock().unwrap().status(clock::now_ms_f64());
    Json(status).into_response()
}

async fn rope(State(cell): State<Arc<CellShared>>) -> Response {
    let snapshot = cell.sim.lock().unwrap().rope_snapshot(clock::now_ms_f64());
    Json(snapshot).into_response()
}

fn parse_view(raw: &str) -> Result<View, Response> {
    raw.parse::<View>()
        .map_err(|e| error(StatusCode::BAD_REQUEST, e.to_string(), Some("view".into())))
}

fn frame_headers(c: &Captured) -> [(header::HeaderName, HeaderValue); 3] {
    [
        (header::CONTENT_TYPE, HeaderValue::from_static("image/jpeg")),
        (header::HeaderName::from_static(SEQ_HEADER), HeaderValue::from(c.seq)),
        (header::HeaderName::from_static(TS_HEADER), HeaderValue::from(c.ts_ms)),
    ]
}

async fn image(State(cell): State<Arc<CellShared>>, Path(view): Path<String>) -> Response {
    let view = match parse_view(&view) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match cell.camera(view).still(&cell.sim).await {
        Ok(c) => (frame_headers(&c), c.jpeg).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None),
    }
}

fn stream_part(c: &Captured, stream_seq: u64) -> Bytes {
    let head = format!(
        "--{STREAM_BOUNDARY}\r\nContent-Type: image/jpeg\r\nContent-Length: {}\r\n{SEQ_HEADER}: {}\r\n{TS_HEADER}: {}\r\n{STREAM_SEQ_HEADER}: {}\r\n\r\n",
        c.jpeg.len(),
        c.seq,
        c.ts_ms,
        stream_seq
    );
    let mut part = BytesMut::with_capacity(head.len() + c.jpeg.len() + 2);
    part.extend_from_slice(head.as_bytes());
    part.extend_from_slice(&c.jpeg);
    part.extend_from_slice(b"\r\n");
    part.freeze()
}

/// MJPEG stream. Frames are exposed on a fixed tick grid, so timestamps are
/// evenly spaced even when delivery jitters; late ticks are delivered in a
/// burst rather than dropped.
async fn stream(State(cell): State<Arc<CellShared>>, Path(view): Path<String>) -> Response {
    let view = match parse_view(&view) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let period = Duration::from_secs_f64(1.0 / cell.cfg.server.stream_fps);
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);
    let frames = futures::stream::unfold((cell, ticker, 1u64), move |(cell, mut ticker, k)| async move {
        let tick = ticker.tick().await;
        let at = clock::instant_ms(tick.into_std()).round() as u64;
        let captured = cell.camera(view).capture_at(&cell.sim, at).await.ok()?;
        let part = stream_part(&captured, k);
        Some((Ok::<_, Infallible>(part), (cell, ticker, k + 1)))
    });
    let content_type = format!("multipart/x-mixed-replace; boundary={STREAM_BOUNDARY}");
    ([(header::CONTENT_TYPE, content_type)], Body::from_stream(frames)).into_response()
}

fn run_command(cell: &CellShared, req: CommandRequest) -> Response {
    let result = cell.sim.lock().unwrap().command(&req, clock::now_ms_f64());
    match result {
        Ok(receipt) => (StatusCode::ACCEPTED, Json(receipt)).into_response(),
        Err(CommandError::Busy) => error(StatusCode::CONFLICT, "robot is busy", None),
        Err(CommandError::Validation(v)) => error(StatusCode::BAD_REQUEST, v.message, Some(v.field)),
        Err(CommandError::Kinematics(e)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), None),
    }
}

async fn command(State(cell): State<Arc<CellShared>>, body: Bytes) -> Response {
    match CommandRequest::from_json(&body) {
        Ok(req) => run_command(&cell, req),
        Err(v) => error(StatusCode::BAD_REQUEST, v.message, Some(v.field)),
    }
}

async fn calibrate(State(cell): State<Arc<CellShared>>) -> Response {
    run_command(&cell, CommandRequest::calibrate())
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "no such endpoint", None)
}

pub fn router(cell: Arc<CellShared>) -> Router {
    let api = Router::new()
        .route("/api/v1/state", get(state))
        .route("/api/v1/image/{view}", get(image))
        .route("/api/v1/stream/{view}", get(stream))
        .route("/api/v1/command", post(command))
        .route("/api/v1/calibrate", post(calibrate))
        .route("/api/v1/sim/rope", get(rope))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(cell.clone(), auth));
    Router::new()
        .route("/healthz", get(health))
        .merge(api)
        .with_state(cell)
}

/// Accept loop. Connections live in a join set owned by this future, so
/// dropping or aborting it closes the listener and every open connection.
pub async fn serve(listener: TcpListener, router: Router) {
    let mut connections = JoinSet::new();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, _)) => {
                    let _ = stream.set_nodelay(true);
                    let service = TowerToHyperService::new(router.clone());
                    connections.spawn(async move {
                        let _ = hyper::server::conn::http1::Builder::new()
                            .serve_connection(TokioIo::new(stream), service)
                            .await;
                    });
                }
                Err(_) => tokio::time::sleep(Duration::from_millis(5)).await,
            },
            Some(_) = connections.join_next(), if !connections.is_empty() => {}
        }
    }
}

/// A running cell server. Dropping it stops the server.
pub struct CellServer {
    pub cell: Arc<CellShared>,
    pub addr: SocketAddr,
    task: JoinHandle<()>,
}

impl CellServer {
    /// Starts serving `cell` on an already bound listener. Must be called
    /// within a tokio runtime.
    pub fn start(cell: Arc<CellShared>, listener: std::net::TcpListener) -> std::io::Result<Self> {
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let listener = TcpListener::from_std(listener)?;
        let app = router(cell.clone());
        let warm = cell.clone();
        let task = tokio::spawn(async move {
            warm.warm().await;
            serve(listener, app).await;
        });
        Ok(Self { cell, addr, task })
    }

    pub fn is_finished(&self) -> bool {
        self.task.is_finished()
    }
}

impl Drop for CellServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}
