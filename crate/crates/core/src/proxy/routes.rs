//! Route configuration and the pure routing decision.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use percent_encoding::percent_decode_str;
use serde::Deserialize;
use toml::Spanned;
use url::Url;

use crate::translator::{SiteManifest, SITE_MANIFEST};

/// Host pattern matching any `Host` header on the route's port.
pub const ANY_HOST: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteMode {
    Serve,
    Forward(Url),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    /// Lowercase host name, or `*`.
    pub host: String,
    pub port: u16,
    /// Site directory for serve routes; empty for forward routes.
    pub site_dir: PathBuf,
    pub mode: RouteMode,
    /// Page served for `/`, from the site manifest when present.
    pub index: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteTable {
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoutingDecision {
    ServeFile(PathBuf),
    Forward(Url),
    TraversalRejected,
    NotRouted,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("routes: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("routes: line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("routes: line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("routes: line {line}: duplicate route {host}:{port} (first defined on line {first_line})")]
    Duplicate {
        line: usize,
        first_line: usize,
        host: String,
        port: u16,
    },
    #[error("routes: line {line}: site directory {} does not exist", path.display())]
    MissingSiteDir { line: usize, path: PathBuf },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    route: Vec<Spanned<RawRoute>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoute {
    host: Spanned<String>,
    port: Spanned<i64>,
    site_dir: Option<Spanned<String>>,
    upstream: Option<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Reads the route file. Relative site directories resolve against the
/// file's own directory.
pub fn load_routes(path: &Path) -> Result<RouteTable, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_routes(&text, base)
}

pub fn parse_routes(text: &str, base_dir: &Path) -> Result<RouteTable, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let mut seen: HashMap<(String, u16), usize> = HashMap::new();
    let mut routes = Vec::new();
    for entry in raw.route {
        let entry_line = line_of(text, entry.span().start);
        let r = entry.into_inner();
        let field_err = |span: std::ops::Range<usize>, field, message: String| ConfigError::Field {
            line: line_of(text, span.start),
            field,
            message,
        };

        let host = r.host.get_ref().trim().to_ascii_lowercase();
        if host.is_empty()
            || (host != ANY_HOST
                && !host
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '.')))
        {
            return Err(field_err(
                r.host.span(),
                "host",
                format!("invalid host name {:?}", r.host.get_ref()),
            ));
        }
        let port = u16::try_from(*r.port.get_ref())
            .ok()
            .filter(|&p| p != 0)
            .ok_or_else(|| {
                field_err(
                    r.port.span(),
                    "port",
                    format!("{} is not a TCP port (1-65535)", r.port.get_ref()),
                )
            })?;

        let (mode, site_dir, index) = match (r.site_dir, r.upstream) {
            (Some(dir), None) => {
                let dir_path = base_dir.join(dir.get_ref());
                if !dir_path.is_dir() {
                    return Err(ConfigError::MissingSiteDir {
                        line: line_of(text, dir.span().start),
                        path: dir_path,
                    });
                }
                let index = site_index(&dir_path);
                (RouteMode::Serve, dir_path, index)
            }
            (None, Some(upstream)) => {
                let url = Url::parse(upstream.get_ref()).map_err(|e| {
                    field_err(
                        upstream.span(),
                        "upstream",
                        format!("{:?} is not an absolute URL: {e}", upstream.get_ref()),
                    )
                })?;
                if !matches!(url.scheme(), "http" | "https") {
                    return Err(field_err(
                        upstream.span(),
                        "upstream",
                        format!("unsupported scheme {:?}", url.scheme()),
                    ));
                }
                (RouteMode::Forward(url), PathBuf::new(), String::new())
            }
            (Some(dir), Some(_)) => {
                return Err(field_err(
                    dir.span(),
                    "site_dir",
                    "a route has either site_dir or upstream, not both".to_string(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Field {
                    line: entry_line,
                    field: "site_dir",
                    message: "route needs site_dir or upstream".to_string(),
                })
            }
        };

        let line = line_of(text, r.host.span().start);
        if let Some(&first_line) = seen.get(&(host.clone(), port)) {
            return Err(ConfigError::Duplicate {
                line,
                first_line,
                host,
                port,
            });
        }
        seen.insert((host.clone(), port), line);
        routes.push(Route {
            host,
            port,
            site_dir,
            mode,
            index,
        });
    }
    Ok(RouteTable { routes })
}

fn site_index(dir: &Path) -> String {
    std::fs::read(dir.join(SITE_MANIFEST))
        .ok()
        .and_then(|b| serde_json::from_slice::<SiteManifest>(&b).ok())
        .map(|m| m.index)
        .unwrap_or_else(|| "index.html".to_string())
}

impl RouteTable {
    /// Distinct ports in first-appearance order.
    pub fn ports(&self) -> Vec<u16> {
        let mut ports = Vec::new();
        for r in &self.routes {
            if !ports.contains(&r.port) {
                ports.push(r.port);
            }
        }
        ports
    }

    /// Exact host matches win over the wildcard.
    pub fn find(&self, host: &str, port: u16) -> Option<&Route> {
        let host = normalize_host(host);
        self.routes
            .iter()
            .find(|r| r.port == port && r.host == host)
            .or_else(|| {
                self.routes
                    .iter()
                    .find(|r| r.port == port && r.host == ANY_HOST)
            })
    }
}

/// Lowercases and drops any `:port` suffix of a `Host` header value.
pub fn normalize_host(host: &str) -> String {
    let host = host.trim();
    let bare = if host.starts_with('[') {
        host.split_inclusive(']').next().unwrap_or(host)
    } else {
        host.rsplit_once(':')
            .filter(|(_, p)| p.chars().all(|c| c.is_ascii_digit()))
            .map(|(h, _)| h)
            .unwrap_or(host)
    };
    bare.trim_end_matches('.').to_ascii_lowercase()
}

pub fn route_request(table: &RouteTable, host: &str, port: u16, path: &str) -> RoutingDecision {
    let Some(route) = table.find(host, port) else {
        return RoutingDecision::NotRouted;
    };
    match &route.mode {
        RouteMode::Serve => match safe_relative_path(path) {
            Some(rel) if rel.as_os_str().is_empty() => {
                RoutingDecision::ServeFile(route.site_dir.join(&route.index))
            }
            Some(rel) => {
                let trailing = path.split(['?', '#']).next().unwrap_or("").ends_with('/');
                let file = route.site_dir.join(rel);
                RoutingDecision::ServeFile(if trailing { file.join("index.html") } else { file })
            }
            None => RoutingDecision::TraversalRejected,
        },
        RouteMode::Forward(upstream) => RoutingDecision::Forward(forward_url(upstream, path)),
    }
}

/// Decoded request path as a relative path, or `None` when it could name
/// anything outside the site directory.
fn safe_relative_path(path: &str) -> Option<PathBuf> {
    let raw = path.split(['?', '#']).next().unwrap_or("");
    let decoded = percent_decode_str(raw).decode_utf8().ok()?;
    if decoded.contains(['\\', '\0']) {
        return None;
    }
    let mut rel = PathBuf::new();
    for part in decoded.split('/') {
        match part {
            "" | "." => {}
            ".." => return None,
            p if p.contains(':') => return None,
            p => rel.push(p),
        }
    }
    Some(rel)
}

fn forward_url(upstream: &Url, path: &str) -> Url {
    let mut base = upstream.clone();
    if !base.path().ends_with('/') {
        let p = format!("{}/", base.path());
        base.set_path(&p);
    }
    let rel = path.trim_start_matches('/');
    // the ./ prefix keeps a request path such as /http://x relative
    base.join(&format!("./{rel}")).unwrap_or(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(dir: &Path) -> RouteTable {
        let text = format!(
            "[[route]]\nhost = \"site.test\"\nport = 8081\nsite_dir = {:?}\n\n\
             [[route]]\nhost = \"*\"\nport = 8082\nupstream = \"http://127.0.0.1:9/base\"\n",
            dir.to_str().unwrap()
        );
        parse_routes(&text, Path::new("/")).unwrap()
    }

    #[test]
    fn two_routes() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(dir.path());
        assert_eq!(t.routes.len(), 2);
        assert_eq!(t.ports(), [8081, 8082]);
    }

    #[test]
    fn duplicate_host_port() {
        let text = "[[route]]\nhost = \"a\"\nport = 1\nupstream = \"http://x/\"\n\
                    [[route]]\nhost = \"A\"\nport = 1\nupstream = \"http://y/\"\n";
        match parse_routes(text, Path::new("/")) {
            Err(ConfigError::Duplicate {
                line, first_line, ..
            }) => assert_eq!((line, first_line), (6, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_site_dir_is_named() {
        let text = "[[route]]\nhost = \"a\"\nport = 1\nsite_dir = \"no/such/dir\"\n";
        let err = parse_routes(text, Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, ConfigError::MissingSiteDir { line: 4, .. }));
        assert!(err.to_string().contains("/nonexistent/no/such/dir"));
    }

    #[test]
    fn field_diagnostics() {
        let bad_port = "[[route]]\nhost = \"a\"\nport = 70000\nupstream = \"http://x/\"\n";
        assert!(matches!(
            parse_routes(bad_port, Path::new("/")),
            Err(ConfigError::Field { line: 3, field: "port", .. })
        ));
        let relative = "[[route]]\nhost = \"a\"\nport = 1\nupstream = \"/x\"\n";
        assert!(matches!(
            parse_routes(relative, Path::new("/")),
            Err(ConfigError::Field { line: 4, field: "upstream", .. })
        ));
        assert!(matches!(
            parse_routes("[[route]]\nhost = \n", Path::new("/")),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn decisions() {
        let dir = tempfile::tempdir().unwrap();
        let t = table(dir.path());
        assert_eq!(
            route_request(&t, "site.test:8081", 8081, "/"),
            RoutingDecision::ServeFile(dir.path().join("index.html"))
        );
        assert_eq!(
            route_request(&t, "SITE.test", 8081, "/a%20b.html?x=1"),
            RoutingDecision::ServeFile(dir.path().join("a b.html"))
        );
        for bad in ["/../etc/x", "/%2e%2e/etc/x", "/a/..%2f..%2fx", "/a\\..\\x", "/c:/x"] {
            assert_eq!(route_request(&t, "site.test", 8081, bad), RoutingDecision::TraversalRejected, "{bad}");
        }
        assert_eq!(route_request(&t, "other.test", 8081, "/"), RoutingDecision::NotRouted);
        assert_eq!(route_request(&t, "site.test", 9999, "/"), RoutingDecision::NotRouted);
        assert_eq!(
            route_request(&t, "anything", 8082, "/p/q?z=1"),
            RoutingDecision::Forward(Url::parse("http://127.0.0.1:9/base/p/q?z=1").unwrap())
        );
        assert_eq!(
            route_request(&t, "anything", 8082, "//evil.test/x"),
            RoutingDecision::Forward(Url::parse("http://127.0.0.1:9/base/evil.test/x").unwrap())
        );
    }

    #[test]
    fn index_comes_from_site_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(SITE_MANIFEST),
            r#"{"site":"s","index":"home.html","pages":[],"nav_index":{},"assets":[]}"#,
        )
        .unwrap();
        let t = table(dir.path());
        assert_eq!(
            route_request(&t, "site.test", 8081, "/"),
            RoutingDecision::ServeFile(dir.path().join("home.html"))
        );
    }
}
