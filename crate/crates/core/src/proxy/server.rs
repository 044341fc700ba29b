//! Multi-port HTTP server over a shared route table.

use std::fmt;
use std::io::Write as _;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener as StdListener};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use chrono::{DateTime, SecondsFormat, Utc};
use tokio::sync::watch;

use super::routes::{route_request, RouteTable, RoutingDecision};

/// Overrides the address every port listens on (default 127.0.0.1).
pub const BIND_ADDR_ENV: &str = "WEBADAPT_BIND_ADDR";

const UPSTREAM_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_FORWARD_BODY: usize = 16 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("serve: cannot bind port {port}: {source}")]
    Bind {
        port: u16,
        #[source]
        source: std::io::Error,
    },
    #[error("serve: invalid bind address {0:?}")]
    BindAddr(String),
    #[error("serve: {0}")]
    Runtime(String),
    #[error("serve: access log {}: {source}", path.display())]
    AccessLog {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Listen address; falls back to the environment override, then loopback.
    pub bind_addr: Option<IpAddr>,
    /// Appends one tab-separated line per request when set.
    pub access_log: Option<PathBuf>,
}

/// One access log line: timestamp, host, port, path, status, bytes,
/// elapsed milliseconds, separated by tabs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessLogEntry {
    pub timestamp: DateTime<Utc>,
    pub host: String,
    pub port: u16,
    pub path: String,
    pub status: u16,
    pub bytes: usize,
    pub elapsed_ms: f64,
}

impl fmt::Display for AccessLogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
            self.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
            clean(&self.host),
            self.port,
            clean(&self.path),
            self.status,
            self.bytes,
            self.elapsed_ms
        )
    }
}

impl AccessLogEntry {
    pub fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        let [ts, host, port, path, status, bytes, elapsed] = f.as_slice() else {
            return None;
        };
        Some(AccessLogEntry {
            timestamp: DateTime::parse_from_rfc3339(ts).ok()?.with_timezone(&Utc),
            host: host.to_string(),
            port: port.parse().ok()?,
            path: path.to_string(),
            status: status.parse().ok()?,
            bytes: bytes.parse().ok()?,
            elapsed_ms: elapsed.parse().ok()?,
        })
    }
}

struct Shared {
    table: RwLock<Arc<RouteTable>>,
    client: reqwest::Client,
    log: Option<Mutex<std::fs::File>>,
}

#[derive(Clone)]
struct PortState {
    shared: Arc<Shared>,
    port: u16,
}

/// A running server. Dropping the handle shuts it down.
pub struct ServerHandle {
    shared: Arc<Shared>,
    addrs: Vec<SocketAddr>,
    shutdown: watch::Sender<bool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addrs(&self) -> &[SocketAddr] {
        &self.addrs
    }

    /// Replaces the route table. Requests already routed finish on the old
    /// one. Listening ports are not changed.
    pub fn reload(&self, table: RouteTable) {
        *self.shared.table.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(table);
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        let _ = self.shutdown.send(true);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn bind_addr(options: &ServeOptions) -> Result<IpAddr, ServeError> {
    if let Some(addr) = options.bind_addr {
        return Ok(addr);
    }
    match std::env::var(BIND_ADDR_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| ServeError::BindAddr(v.clone())),
        _ => Ok(IpAddr::V4(Ipv4Addr::LOCALHOST)),
    }
}

pub fn serve(table: RouteTable) -> Result<ServerHandle, ServeError> {
    serve_with(table, &ServeOptions::default())
}

/// Binds every port of the table, then serves them from a background
/// runtime.
pub fn serve_with(table: RouteTable, options: &ServeOptions) -> Result<ServerHandle, ServeError> {
    let ip = bind_addr(options)?;
    let mut listeners = Vec::new();
    for port in table.ports() {
        let l = StdListener::bind((ip, port)).map_err(|source| ServeError::Bind { port, source })?;
        l.set_nonblocking(true)
            .map_err(|source| ServeError::Bind { port, source })?;
        listeners.push((port, l));
    }
    let addrs = listeners
        .iter()
        .filter_map(|(_, l)| l.local_addr().ok())
        .collect();
    let log = match &options.access_log {
        Some(path) => Some(Mutex::new(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| ServeError::AccessLog {
                    path: path.clone(),
                    source,
                })?,
        )),
        None => None,
    };
    let client = reqwest::Client::builder()
        .timeout(UPSTREAM_TIMEOUT)
        .redirect(reqwest::redirect::Policy::none())
        .no_proxy()
        .build()
        .map_err(|e| ServeError::Runtime(e.to_string()))?;
    let shared = Arc::new(Shared {
        table: RwLock::new(Arc::new(table)),
        client,
        log,
    });
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServeError::Runtime(e.to_string()))?;
    let (tx, rx) = watch::channel(false);

    let task_shared = shared.clone();
    let (ready_tx, ready_rx) = std::sync::mpsc::channel();
    let thread = std::thread::Builder::new()
        .name("webadapt-proxy".into())
        .spawn(move || {
            runtime.block_on(async move {
                let mut tasks = Vec::new();
                for (port, std_listener) in listeners {
                    let listener = match tokio::net::TcpListener::from_std(std_listener) {
                        Ok(l) => l,
                        Err(e) => {
                            let _ = ready_tx.send(Err(ServeError::Bind { port, source: e }));
                            return;
                        }
                    };
                    let app = Router::new().fallback(handle).with_state(PortState {
                        shared: task_shared.clone(),
                        port,
                    });
                    let mut rx = rx.clone();
                    tasks.push(tokio::spawn(async move {
                        let signal = async move {
                            let _ = rx.wait_for(|stop| *stop).await;
                        };
                        if let Err(e) = axum::serve(listener, app)
                            .with_graceful_shutdown(signal)
                            .await
                        {
                            log::error!("serve: port {port}: {e}");
                        }
                    }));
                }
                let _ = ready_tx.send(Ok(()));
                for t in tasks {
                    let _ = t.await;
                }
            });
        })
        .map_err(|e| ServeError::Runtime(e.to_string()))?;
    match ready_rx.recv() {
        Ok(Ok(())) => {}
        Ok(Err(e)) => return Err(e),
        Err(_) => return Err(ServeError::Runtime("server thread exited".into())),
    }
    Ok(ServerHandle {
        shared,
        addrs,
        shutdown: tx,
        thread: Some(thread),
    })
}

fn text_response(status: StatusCode, message: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        message + "\n",
    )
        .into_response()
}

async fn handle(State(state): State<PortState>, request: Request) -> Response {
    let started = Instant::now();
    let host = request
        .headers()
        .get(header::HOST)
        .and_then(|h| h.to_str().ok())
        .or_else(|| request.uri().host())
        .unwrap_or("")
        .to_string();
    let path = request
        .uri()
        .path_and_query()
        .map(|p| p.as_str().to_string())
        .unwrap_or_else(|| "/".to_string());
    let table = state
        .shared
        .table
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .clone();
    let (route_site, decision) = {
        let route = table.find(&host, state.port);
        let site = route.map(|r| r.site_dir.clone());
        (site, route_request(&table, &host, state.port, &path))
    };

    let response = match decision {
        RoutingDecision::NotRouted => text_response(
            StatusCode::BAD_GATEWAY,
            format!("proxy: no route for host {host:?} on port {}", state.port),
        ),
        RoutingDecision::TraversalRejected => {
            text_response(StatusCode::FORBIDDEN, format!("proxy: path {path:?} rejected"))
        }
        RoutingDecision::ServeFile(file) => {
            serve_file(&file, route_site.as_deref().unwrap_or(Path::new("/")), request.method())
                .await
        }
        RoutingDecision::Forward(url) => forward(&state.shared.client, url, request).await,
    };

    if let Some(log) = &state.shared.log {
        let bytes = response
            .headers()
            .get(header::CONTENT_LENGTH)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .unwrap_or(0);
        let entry = AccessLogEntry {
            timestamp: Utc::now(),
            host,
            port: state.port,
            path,
            status: response.status().as_u16(),
            bytes,
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        };
        let mut file = log.lock().unwrap_or_else(|e| e.into_inner());
        let _ = writeln!(file, "{entry}");
    }
    response
}

async fn serve_file(file: &Path, site_dir: &Path, method: &Method) -> Response {
    if method != Method::GET && method != Method::HEAD {
        return text_response(
            StatusCode::METHOD_NOT_ALLOWED,
            format!("proxy: {method} not allowed on static sites"),
        );
    }
    // symlinks must not lead out of the site either
    let resolved = match (
        tokio::fs::canonicalize(file).await,
        tokio::fs::canonicalize(site_dir).await,
    ) {
        (Ok(f), Ok(root)) if f.starts_with(&root) => f,
        (Ok(_), Ok(_)) => {
            return text_response(StatusCode::FORBIDDEN, "proxy: path escapes site".into())
        }
        _ => return text_response(StatusCode::NOT_FOUND, "proxy: not found".into()),
    };
    match tokio::fs::read(&resolved).await {
        Ok(bytes) => {
            let mime = mime_guess::from_path(&resolved).first_or_octet_stream();
            let content_type = if mime.type_() == mime_guess::mime::TEXT {
                format!("{mime}; charset=utf-8")
            } else {
                mime.to_string()
            };
            let body = if method == Method::HEAD {
                Body::empty()
            } else {
                Body::from(bytes.clone())
            };
            let mut response = Response::new(body);
            let headers = response.headers_mut();
            if let Ok(v) = HeaderValue::from_str(&content_type) {
                headers.insert(header::CONTENT_TYPE, v);
            }
            headers.insert(header::CONTENT_LENGTH, HeaderValue::from(bytes.len()));
            response
        }
        Err(_) => text_response(StatusCode::NOT_FOUND, "proxy: not found".into()),
    }
}

const HOP_BY_HOP: &[&str] = &[
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "transfer-encoding",
    "upgrade",
    "host",
    "content-length",
];

fn copy_headers(from: &HeaderMap, to: &mut HeaderMap) {
    for (name, value) in from {
        if !HOP_BY_HOP.contains(&name.as_str()) {
            to.append(name.clone(), value.clone());
        }
    }
}

async fn forward(client: &reqwest::Client, url: url::Url, request: Request) -> Response {
    let (parts, body) = request.into_parts();
    let body: Bytes = match axum::body::to_bytes(body, MAX_FORWARD_BODY).await {
        Ok(b) => b,
        Err(e) => {
            return text_response(StatusCode::BAD_REQUEST, format!("proxy: request body: {e}"))
        }
    };
    let mut headers = HeaderMap::new();
    copy_headers(&parts.headers, &mut headers);
    let upstream = client
        .request(parts.method, url.as_str())
        .headers(headers)
        .body(body)
        .send()
        .await;
    let upstream = match upstream {
        Ok(r) => r,
        Err(e) => {
            return text_response(
                StatusCode::BAD_GATEWAY,
                format!("proxy: upstream {url}: {e}"),
            )
        }
    };
    let status = upstream.status();
    let upstream_headers = upstream.headers().clone();
    match upstream.bytes().await {
        Ok(bytes) => {
            let len = bytes.len();
            let mut response = Response::new(Body::from(bytes));
            *response.status_mut() = status;
            copy_headers(&upstream_headers, response.headers_mut());
            response
                .headers_mut()
                .insert(header::CONTENT_LENGTH, HeaderValue::from(len));
            response
        }
        Err(e) => text_response(
            StatusCode::BAD_GATEWAY,
            format!("proxy: upstream {url}: {e}"),
        ),
    }
}
