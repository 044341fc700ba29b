//! Reverse proxy that hosts translated sites on per-domain ports and
//! forwards other routes upstream.
//!
//! Routes are declared in a TOML file:
//!
//! ```toml
//! [[route]]
//! host = "flash.example"
//! port = 8081
//! site_dir = "sites/flash.example"
//!
//! [[route]]
//! host = "*"
//! port = 8082
//! upstream = "http://127.0.0.1:9000/"
//! ```

mod routes;
mod server;

pub use routes::{
    load_routes, normalize_host, parse_routes, route_request, ConfigError, Route, RouteMode,
    RouteTable, RoutingDecision, ANY_HOST,
};
pub use server::{
    serve, serve_with, AccessLogEntry, ServeError, ServeOptions, ServerHandle, BIND_ADDR_ENV,
};
