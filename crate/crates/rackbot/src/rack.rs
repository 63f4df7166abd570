//! Rack orchestrator: spawns cells, keeps the registry and sweeps health.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::client::RobotClient;
use crate::clock;
use crate::config::{CellConfig, Deployment, RackConfig};
use crate::server::{serve, CellServer, CellShared};

#[derive(Debug, thiserror::Error)]
pub enum RackError {
    #[error("port {port} unavailable: {source}")]
    PortInUse { port: u16, source: std::io::Error },
    #[error("cell {robot_id} failed to start: {reason}")]
    CellStart { robot_id: String, reason: String },
    #[error("process deployment needs the path of the rack executable")]
    NoCellExecutable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub robot_id: String,
    /// `host:port`
    pub endpoint: String,
    pub alive: bool,
    pub last_heartbeat_ms: Option<u64>,
}

struct Heartbeat {
    robot_id: String,
    endpoint: String,
    last_ms: Option<u64>,
}

/// Robot endpoints with their last successful health probe. Liveness is
/// derived on read: alive iff the last heartbeat is at most three
/// intervals old.
pub struct Registry {
    interval_ms: u64,
    entries: Vec<RwLock<Heartbeat>>,
}

impl Registry {
    fn new(interval_ms: u64, endpoints: Vec<(String, String)>) -> Self {
        Self {
            interval_ms,
            entries: endpoints
                .into_iter()
                .map(|(robot_id, endpoint)| {
                    RwLock::new(Heartbeat {
                        robot_id,
                        endpoint,
                        last_ms: None,
                    })
                })
                .collect(),
        }
    }

    pub fn interval(&self) -> Duration {
        Duration::from_millis(self.interval_ms)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn list(&self) -> Vec<RegistryEntry> {
        let now = clock::now_ms();
        self.entries
            .iter()
            .map(|e| {
                let e = e.read().unwrap();
                RegistryEntry {
                    robot_id: e.robot_id.clone(),
                    endpoint: e.endpoint.clone(),
                    alive: e
                        .last_ms
                        .is_some_and(|t| now.saturating_sub(t) <= 3 * self.interval_ms),
                    last_heartbeat_ms: e.last_ms,
                }
            })
            .collect()
    }

    /// Probes every `/healthz` concurrently and records the successes.
    pub fn health_sweep(&self) -> Vec<RegistryEntry> {
        let timeout = Duration::from_millis((self.interval_ms / 2).max(50));
        std::thread::scope(|s| {
            for entry in &self.entries {
                s.spawn(move || {
                    let endpoint = entry.read().unwrap().endpoint.clone();
                    let client = RobotClient::with_timeout(format!("http://{endpoint}"), "", timeout);
                    if client.health().is_ok() {
                        entry.write().unwrap().last_ms = Some(clock::now_ms());
                    }
                });
            }
        });
        self.list()
    }
}

enum Slot {
    Local(CellServer),
    Process(Child),
    Stopped,
}

impl Drop for Slot {
    fn drop(&mut self) {
        if let Slot::Process(child) = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// A running rack. Dropping it tears down every cell.
pub struct Rack {
    cfg: RackConfig,
    cell_exe: Option<PathBuf>,
    runtime: Option<tokio::runtime::Runtime>,
    slots: Vec<Mutex<Slot>>,
    endpoints: Vec<SocketAddr>,
    registry: Arc<Registry>,
    registry_addr: SocketAddr,
    registry_task: Option<tokio::task::JoinHandle<()>>,
    stop: Arc<AtomicBool>,
    sweeper: Option<JoinHandle<()>>,
}

fn bind(host: &str, port: u16) -> Result<TcpListener, RackError> {
    TcpListener::bind((host, port)).map_err(|source| RackError::PortInUse { port, source })
}

fn build_runtime(workers: usize) -> std::io::Result<tokio::runtime::Runtime> {
    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(2, |n| n.get()).max(2)
    } else {
        workers
    };
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers)
        .thread_name("rack-cell")
        .enable_all()
        .build()
}

/// Starts one cell as a child process and waits for it to report its port.
fn spawn_process(exe: &PathBuf, cell: &CellConfig, host: &str, port: u16) -> Result<(Child, SocketAddr), RackError> {
    let fail = |reason: String| RackError::CellStart {
        robot_id: cell.robot_id.clone(),
        reason,
    };
    let mut child = Command::new(exe)
        .args(["cell", "--host", host, "--port", &port.to_string()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let line = serde_json::to_string(cell).expect("cell config serializes");
    writeln!(stdin, "{line}").map_err(|e| fail(e.to_string()))?;
    // The child exits when this handle closes, so keep it alive inside the
    // child struct.
    child.stdin = Some(stdin);

    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut line = String::new();
        let _ = BufReader::new(stdout).read_line(&mut line);
        let _ = tx.send(line);
    });
    let line = match rx.recv_timeout(Duration::from_secs(10)) {
        Ok(l) => l,
        Err(_) => {
            let _ = child.kill();
            return Err(fail("no READY line within 10 s".into()));
        }
    };
    let reported = line
        .trim()
        .strip_prefix("READY ")
        .and_then(|p| p.parse::<u16>().ok());
    match reported {
        Some(port) => {
            let addr = format!("{host}:{port}")
                .parse()
                .map_err(|_| fail(format!("bad address {host}:{port}")))?;
            Ok((child, addr))
        }
        None => {
            let _ = child.kill();
            let _ = child.wait();
            Err(fail(format!("unexpected child output {:?}", line.trim())))
        }
    }
}

impl Rack {
    /// Spawns every cell on the shared runtime of this process.
    pub fn spawn(cfg: RackConfig) -> Result<Self, RackError> {
        Self::spawn_with(cfg, None)
    }

    /// Spawns the rack; `cell_exe` is the `rack` binary used for
    /// process deployment.
    pub fn spawn_with(cfg: RackConfig, cell_exe: Option<PathBuf>) -> Result<Self, RackError> {
        // Bind everything first so a conflict fails before any cell runs.
        let mut listeners = Vec::with_capacity(cfg.robot_count);
        for i in 0..cfg.robot_count {
            listeners.push(bind(&cfg.host, cfg.port(i))?);
        }
        let registry_listener = bind(&cfg.host, cfg.registry_port)?;
        let runtime = build_runtime(cfg.runtime_workers)?;

        let mut slots = Vec::with_capacity(cfg.robot_count);
        let mut endpoints = Vec::with_capacity(cfg.robot_count);
        match cfg.deployment {
            Deployment::Threads => {
                let _guard = runtime.enter();
                for (i, listener) in listeners.into_iter().enumerate() {
                    let cell = cfg.cell(i);
                    let robot_id = cell.robot_id.clone();
                    let shared = CellShared::new(cell).map_err(|e| RackError::CellStart {
                        robot_id: robot_id.clone(),
                        reason: e.to_string(),
                    })?;
                    let server = CellServer::start(shared, listener)?;
                    endpoints.push(server.addr);
                    slots.push(Mutex::new(Slot::Local(server)));
                }
            }
            Deployment::Processes => {
                let exe = cell_exe.clone().ok_or(RackError::NoCellExecutable)?;
                let ports: Vec<u16> = listeners
                    .iter()
                    .map(|l| if cfg.base_port == 0 { Ok(0) } else { l.local_addr().map(|a| a.port()) })
                    .collect::<Result<_, _>>()?;
                drop(listeners);
                for (i, port) in ports.into_iter().enumerate() {
                    let (child, addr) = spawn_process(&exe, &cfg.cell(i), &cfg.host, port)?;
                    endpoints.push(addr);
                    slots.push(Mutex::new(Slot::Process(child)));
                }
            }
        }

        let registry = Arc::new(Registry::new(
            cfg.heartbeat_interval_ms,
            endpoints
                .iter()
                .enumerate()
                .map(|(i, a)| (cfg.cell(i).robot_id, a.to_string()))
                .collect(),
        ));
        let registry_addr = registry_listener.local_addr()?;
        registry_listener.set_nonblocking(true)?;
        let registry_task = {
            let _guard = runtime.enter();
            let listener = tokio::net::TcpListener::from_std(registry_listener)?;
            let app = Router::new()
                .route("/registry", get(registry_list))
                .with_state(registry.clone());
            runtime.spawn(serve(listener, app))
        };

        let stop = Arc::new(AtomicBool::new(false));
        let mut rack = Self {
            cfg,
            cell_exe,
            runtime: Some(runtime),
            slots,
            endpoints,
            registry,
            registry_addr,
            registry_task: Some(registry_task),
            stop,
            sweeper: None,
        };
        rack.await_all_healthy(Duration::from_secs(10))?;
        rack.sweeper = Some(rack.start_sweeper());
        Ok(rack)
    }

    fn await_all_healthy(&self, limit: Duration) -> Result<(), RackError> {
        let deadline = Instant::now() + limit;
        loop {
            let entries = self.registry.health_sweep();
            if let Some(dead) = entries.iter().find(|e| !e.alive) {
                if Instant::now() >= deadline {
                    return Err(RackError::CellStart {
                        robot_id: dead.robot_id.clone(),
                        reason: "health check failing".into(),
                    });
                }
                std::thread::sleep(Duration::from_millis(20));
            } else {
                return Ok(());
            }
        }
    }

    fn start_sweeper(&self) -> JoinHandle<()> {
        let registry = self.registry.clone();
        let stop = self.stop.clone();
        std::thread::Builder::new()
            .name("rack-health".into())
            .spawn(move || {
                let interval = registry.interval();
                let mut next = Instant::now() + interval;
                while !stop.load(Ordering::Relaxed) {
                    let now = Instant::now();
                    if now < next {
                        std::thread::sleep((next - now).min(Duration::from_millis(50)));
                        continue;
                    }
                    registry.health_sweep();
                    next += interval;
                }
            })
            .expect("spawn health thread")
    }

    pub fn config(&self) -> &RackConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endpoints.is_empty()
    }

    pub fn endpoint(&self, index: usize) -> SocketAddr {
        self.endpoints[index]
    }

    pub fn base_url(&self, index: usize) -> String {
        format!("http://{}", self.endpoints[index])
    }

    pub fn client(&self, index: usize) -> RobotClient {
        RobotClient::new(self.base_url(index), self.cfg.token.clone())
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn registry_url(&self) -> String {
        format!("http://{}/registry", self.registry_addr)
    }

    /// Direct access to an in-process cell.
    pub fn cell(&self, index: usize) -> Option<Arc<CellShared>> {
        match &*self.slots[index].lock().unwrap() {
            Slot::Local(server) => Some(server.cell.clone()),
            _ => None,
        }
    }

    /// Stops robot `index`, closing its listener and open connections.
    pub fn kill(&self, index: usize) {
        let mut slot = self.slots[index].lock().unwrap();
        *slot = Slot::Stopped;
    }

    /// Boots a fresh robot `index` on the same endpoint.
    pub fn restart(&self, index: usize) -> Result<(), RackError> {
        let mut slot = self.slots[index].lock().unwrap();
        *slot = Slot::Stopped;
        let addr = self.endpoints[index];
        let cell = self.cfg.cell(index);
        match self.cfg.deployment {
            Deployment::Threads => {
                // An aborted server releases its port asynchronously.
                let deadline = Instant::now() + Duration::from_secs(5);
                let listener = loop {
                    match TcpListener::bind(addr) {
                        Ok(l) => break l,
                        Err(e) if Instant::now() >= deadline => {
                            return Err(RackError::PortInUse { port: addr.port(), source: e })
                        }
                        Err(_) => std::thread::sleep(Duration::from_millis(10)),
                    }
                };
                let runtime = self.runtime.as_ref().expect("runtime alive");
                let _guard = runtime.enter();
                let shared = CellShared::new(cell).map_err(|e| RackError::CellStart {
                    robot_id: self.cfg.cell(index).robot_id,
                    reason: e.to_string(),
                })?;
                *slot = Slot::Local(CellServer::start(shared, listener)?);
            }
            Deployment::Processes => {
                let exe = self.cell_exe.as_ref().ok_or(RackError::NoCellExecutable)?;
                let (child, _) = spawn_process(exe, &cell, &self.cfg.host, addr.port())?;
                *slot = Slot::Process(child);
            }
        }
        Ok(())
    }

    /// Blocks until SIGINT.
    pub fn wait_for_interrupt(&self) {
        let runtime = self.runtime.as_ref().expect("runtime alive");
        let _ = runtime.block_on(tokio::signal::ctrl_c());
    }
}

async fn registry_list(State(registry): State<Arc<Registry>>) -> Json<Vec<RegistryEntry>> {
    Json(registry.list())
}

impl Drop for Rack {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.sweeper.take() {
            let _ = t.join();
        }
        if let Some(t) = self.registry_task.take() {
            t.abort();
        }
        for slot in &self.slots {
            *slot.lock().unwrap() = Slot::Stopped;
        }
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_timeout(Duration::from_secs(2));
        }
    }
}

/// Body of `rack cell`: reads one JSON cell config line from stdin, serves
/// it, prints `READY <port>` and runs until stdin closes.
pub fn run_cell_process(host: &str, port: u16) -> anyhow::Result<()> {
    let stdin = std::io::stdin();
    let mut line = String::new();
    stdin.lock().read_line(&mut line)?;
    let cell: CellConfig = serde_json::from_str(&line)?;
    let listener = match TcpListener::bind((host, port)) {
        Ok(l) => l,
        Err(e) => {
            println!("ERROR port {port}: {e}");
            return Err(e.into());
        }
    };
    let runtime = build_runtime(2)?;
    let _guard = runtime.enter();
    let server = CellServer::start(CellShared::new(cell)?, listener)?;
    println!("READY {}", server.addr.port());
    std::io::stdout().flush()?;
    let mut rest = String::new();
    while stdin.lock().read_line(&mut rest)? > 0 {
        rest.clear();
    }
    drop(server);
    runtime.shutdown_timeout(Duration::from_secs(1));
    Ok(())
}
