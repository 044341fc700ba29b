mod common;

use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{fixture, free_port, http_get, FixtureServer, Reply};
use webadapt::proxy::{
    load_routes, parse_routes, serve, serve_with, AccessLogEntry, RouteTable, ServeError,
    ServeOptions,
};
use webadapt::translator::translate_site;

fn translated_site(dir: &Path) {
    translate_site(
        &fixture("translate/isim/capture.mhtml"),
        &fixture("translate/isim/segments.jsonl"),
        dir,
    )
    .unwrap();
}

fn serve_table(site_dir: &Path, port: u16, extra: &str) -> RouteTable {
    let text = format!(
        "[[route]]\nhost = \"isim.test\"\nport = {port}\nsite_dir = {:?}\n{extra}",
        site_dir.to_str().unwrap()
    );
    parse_routes(&text, Path::new("/")).unwrap()
}

fn addr(port: u16) -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], port))
}

#[test]
fn serves_translated_site_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    translated_site(dir.path());
    let port = free_port();
    let handle = serve(serve_table(dir.path(), port, "")).unwrap();

    let (status, body) = http_get(addr(port), "isim.test", "/").unwrap();
    assert_eq!(status, 200);
    assert_eq!(body, std::fs::read(dir.path().join("home.html")).unwrap());
    let (status, body) = http_get(addr(port), "ISIM.test:1234", "/about.html").unwrap();
    assert_eq!(status, 200);
    assert_eq!(body, std::fs::read(dir.path().join("about.html")).unwrap());

    let (status, _) = http_get(addr(port), "isim.test", "/nope.html").unwrap();
    assert_eq!(status, 404);
    let (status, _) = http_get(addr(port), "isim.test", "/../../etc/passwd").unwrap();
    assert_eq!(status, 403);
    let (status, body) = http_get(addr(port), "unknown.test", "/").unwrap();
    assert_eq!(status, 502);
    assert!(String::from_utf8_lossy(&body).contains("no route for host"));
    handle.shutdown();
}

#[test]
fn responses_carry_media_types() {
    let dir = tempfile::tempdir().unwrap();
    translated_site(dir.path());
    let port = free_port();
    let _handle = serve(serve_table(dir.path(), port, "")).unwrap();
    let client = reqwest::blocking::Client::new();
    let get = |path: &str| {
        client
            .get(format!("http://127.0.0.1:{port}{path}"))
            .header("Host", "isim.test")
            .send()
            .unwrap()
    };
    let html = get("/home.html");
    assert_eq!(html.headers()["content-type"], "text/html; charset=utf-8");
    let png = get("/assets/2-about.png");
    assert_eq!(png.status(), 200);
    assert_eq!(png.headers()["content-type"], "image/png");
    assert_eq!(
        png.bytes().unwrap().as_ref(),
        std::fs::read(fixture("translate/isim/about.png")).unwrap()
    );
    let manifest = get("/site-manifest.json");
    assert_eq!(manifest.headers()["content-type"], "application/json");
}

#[test]
fn forwards_to_upstream() {
    let upstream = FixtureServer::start(|method, path| Reply::ok("text/plain", format!("{method} {path}")));
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let extra = format!(
        "\n[[route]]\nhost = \"*\"\nport = {port}\nupstream = \"http://{}/up\"\n",
        upstream.addr
    );
    let _handle = serve(serve_table(dir.path(), port, &extra)).unwrap();
    let (status, body) = http_get(addr(port), "anything.test", "/a/b?x=1").unwrap();
    assert_eq!(status, 200);
    assert_eq!(String::from_utf8(body).unwrap(), "GET /up/a/b?x=1");
}

#[test]
fn unreachable_upstream_is_a_bad_gateway() {
    let port = free_port();
    let dead = free_port();
    let table = parse_routes(
        &format!("[[route]]\nhost = \"*\"\nport = {port}\nupstream = \"http://127.0.0.1:{dead}/\"\n"),
        Path::new("/"),
    )
    .unwrap();
    let _handle = serve(table).unwrap();
    let (status, body) = http_get(addr(port), "x.test", "/").unwrap();
    assert_eq!(status, 502);
    assert!(String::from_utf8_lossy(&body).starts_with("proxy: upstream"));
}

#[test]
fn shutdown_drains_in_flight_requests_and_refuses_new_ones() {
    let upstream = FixtureServer::start(|_, _| {
        std::thread::sleep(Duration::from_millis(800));
        Reply::ok("text/plain", "slow answer")
    });
    let port = free_port();
    let table = parse_routes(
        &format!(
            "[[route]]\nhost = \"*\"\nport = {port}\nupstream = \"http://{}/\"\n",
            upstream.addr
        ),
        Path::new("/"),
    )
    .unwrap();
    let handle = serve(table).unwrap();
    let in_flight = std::thread::spawn(move || http_get(addr(port), "x.test", "/slow"));
    std::thread::sleep(Duration::from_millis(200));
    let stopper = std::thread::spawn(move || handle.shutdown());
    std::thread::sleep(Duration::from_millis(200));
    assert!(TcpStream::connect(addr(port)).is_err(), "new connection accepted");
    let (status, body) = in_flight.join().unwrap().unwrap();
    assert_eq!((status, body.as_slice()), (200, b"slow answer".as_slice()));
    stopper.join().unwrap();
}

#[test]
fn occupied_port_is_a_bind_error() {
    let dir = tempfile::tempdir().unwrap();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    match serve(serve_table(dir.path(), port, "")) {
        Err(ServeError::Bind { port: p, .. }) => assert_eq!(p, port),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("bound an occupied port"),
    }
}

#[test]
fn access_log_has_one_line_per_request() {
    let dir = tempfile::tempdir().unwrap();
    translated_site(dir.path());
    let log = dir.path().join("access.log");
    let port = free_port();
    let handle = serve_with(
        serve_table(dir.path(), port, ""),
        &ServeOptions {
            bind_addr: None,
            access_log: Some(log.clone()),
        },
    )
    .unwrap();
    http_get(addr(port), "isim.test", "/").unwrap();
    http_get(addr(port), "other.test", "/x").unwrap();
    handle.shutdown();
    let text = std::fs::read_to_string(&log).unwrap();
    let entries: Vec<_> = text.lines().map(|l| AccessLogEntry::parse(l).unwrap()).collect();
    assert_eq!(entries.len(), 2);
    assert_eq!((entries[0].status, entries[0].port), (200, port));
    assert_eq!(
        entries[0].bytes,
        std::fs::metadata(dir.path().join("home.html")).unwrap().len() as usize
    );
    assert_eq!((entries[1].host.as_str(), entries[1].status), ("other.test", 502));
}

#[test]
fn reload_swaps_routes_atomically() {
    let dir = tempfile::tempdir().unwrap();
    translated_site(dir.path());
    let port = free_port();
    let handle = serve(serve_table(dir.path(), port, "")).unwrap();
    assert_eq!(http_get(addr(port), "isim.test", "/").unwrap().0, 200);
    handle.reload(RouteTable::default());
    assert_eq!(http_get(addr(port), "isim.test", "/").unwrap().0, 502);
}

#[test]
fn route_file_resolves_relative_site_dirs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("isim")).unwrap();
    let conf = dir.path().join("routes.toml");
    std::fs::write(
        &conf,
        "# translated sites\n[[route]]\nhost = \"isim.test\"\nport = 8081\nsite_dir = \"isim\"\n",
    )
    .unwrap();
    let table = load_routes(&conf).unwrap();
    assert_eq!(table.routes[0].site_dir, dir.path().join("isim"));
    let err = load_routes(&dir.path().join("missing.toml")).unwrap_err();
    assert!(err.to_string().contains("missing.toml"));
}

#[test]
fn symlinks_cannot_leave_the_site() {
    let dir = tempfile::tempdir().unwrap();
    let site = dir.path().join("site");
    std::fs::create_dir(&site).unwrap();
    std::fs::write(dir.path().join("secret.txt"), "secret").unwrap();
    std::os::unix::fs::symlink(dir.path().join("secret.txt"), site.join("link.txt")).unwrap();
    let port = free_port();
    let _handle = serve(serve_table(&site, port, "")).unwrap();
    let started = Instant::now();
    let (status, body) = http_get(addr(port), "isim.test", "/link.txt").unwrap();
    assert_eq!(status, 403);
    assert_ne!(body, b"secret");
    assert!(started.elapsed() < Duration::from_secs(5));
}
