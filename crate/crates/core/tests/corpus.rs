mod common;

use std::time::Duration;

use common::{fixture, read_fixture, FixtureServer, Reply, PAGE_FIXTURES};
use webadapt::corpus::{
    build_manifest, classify_parts, fetch_page, load_local, load_manifest, scan_domain,
    FetchError, FetchOptions, Fetcher, PageSource, PageTechnology,
};

#[test]
fn page_fixtures_classify_as_labelled() {
    for (path, expected) in PAGE_FIXTURES {
        let record = load_local(&fixture(path)).unwrap();
        assert_eq!(record.technology.as_str(), *expected, "{path}");
        assert_eq!(record.source, PageSource::LocalFile);
    }
}

#[test]
fn declared_media_type_beats_suffix_but_not_magic_bytes() {
    let swf = read_fixture("pages/intro.swf");
    assert_eq!(
        classify_parts("http://x.test/page.html", "text/html", &swf),
        PageTechnology::Flash
    );
    let xml = read_fixture("pages/catalog.xml");
    assert_eq!(
        classify_parts("http://x.test/feed", "application/rss+xml", &xml),
        PageTechnology::Xml
    );
    assert_eq!(
        classify_parts("http://x.test/data.xml", "text/html; charset=utf-8", b"<p>hi</p>"),
        PageTechnology::Html
    );
}

fn site() -> FixtureServer {
    FixtureServer::start(|_, path| match path {
        "/" => Reply::ok(
            "text/html",
            r#"<html><body><a href="/a">A</a> <a href="b#frag">B</a>
               <a href="/missing">gone</a> <a href="http://elsewhere.invalid/">out</a>
               <iframe src="/movie"></iframe></body></html>"#,
        ),
        "/a" => Reply::ok("text/html", r#"<html><body><a href="/">home</a><a href="/feed">feed</a></body></html>"#),
        "/b" => Reply::redirect("/a"),
        "/feed" => Reply::ok("application/xml", read_fixture("pages/catalog.xml")),
        "/movie" => Reply::ok("application/x-shockwave-flash", read_fixture("pages/intro.swf")),
        "/loop" => Reply::redirect("/loop"),
        "/slow" => {
            std::thread::sleep(Duration::from_millis(1500));
            Reply::ok("text/html", "<p>late</p>")
        }
        _ => Reply::status(404),
    })
}

#[test]
fn fetch_records_final_url_and_classifies_later() {
    let server = site();
    let record = fetch_page(&server.url("/b"), Duration::from_secs(5)).unwrap();
    assert_eq!(record.url, server.url("/a"));
    assert_eq!(record.source, PageSource::LiveFetch);
    assert_eq!(record.technology, PageTechnology::Unknown);
    assert_eq!(record.classified().technology, PageTechnology::Html);
}

#[test]
fn fetch_errors_name_their_stage() {
    let server = site();
    let err = fetch_page(&server.url("/missing"), Duration::from_secs(5)).unwrap_err();
    assert_eq!(err.status(), Some(404));
    assert!(err.to_string().starts_with("status:"), "{err}");

    let err = fetch_page(&server.url("/loop"), Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, FetchError::TooManyRedirects { limit: 5, .. }), "{err:?}");

    let fetcher = Fetcher::new(FetchOptions {
        timeout: Duration::from_millis(300),
        ..FetchOptions::default()
    })
    .unwrap();
    let err = fetcher.fetch(&server.url("/slow")).unwrap_err();
    assert!(matches!(err, FetchError::Timeout { .. }), "{err:?}");

    let port = common::free_port();
    let url = url::Url::parse(&format!("http://127.0.0.1:{port}/")).unwrap();
    let err = fetch_page(&url, Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, FetchError::Connect { .. }), "{err:?}");

    let err = fetch_page(&url::Url::parse("ftp://x.test/").unwrap(), Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, FetchError::InvalidUrl { .. }));
    assert!(matches!(
        fetch_page(&server.url("/"), Duration::ZERO),
        Err(FetchError::InvalidUrl { .. })
    ));
}

#[test]
fn scan_crawls_same_host_breadth_first() {
    let server = site();
    let outcome = scan_domain(&server.url("/"), 20, true);
    let mut got: Vec<(String, PageTechnology)> = outcome
        .records
        .iter()
        .map(|r| (r.url.path().to_string(), r.technology))
        .collect();
    got.sort();
    assert_eq!(
        got,
        vec![
            ("/".into(), PageTechnology::Html),
            ("/a".into(), PageTechnology::Html),
            ("/feed".into(), PageTechnology::Xml),
            ("/movie".into(), PageTechnology::Flash),
        ]
    );
    // the redirect to an already-recorded page is not recorded twice
    let failed: Vec<_> = outcome.failures.iter().map(|f| f.url.path().to_string()).collect();
    assert_eq!(failed, ["/missing"]);
}

#[test]
fn scan_respects_page_budget() {
    let server = site();
    let outcome = scan_domain(&server.url("/"), 2, true);
    assert_eq!(outcome.records.len() + outcome.failures.len(), 2);
}

#[test]
fn manifest_round_trip_of_fixture_corpus() {
    let records: Vec<_> = PAGE_FIXTURES
        .iter()
        .map(|(p, _)| load_local(&fixture(p)).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let built = build_manifest(&records, dir.path()).unwrap();
    let loaded = load_manifest(dir.path()).unwrap();
    assert_eq!(loaded.entries, built.entries);
    let bodies = loaded.load_records().unwrap();
    for (a, b) in records.iter().zip(&bodies) {
        assert_eq!(a.body, b.body);
        assert_eq!(a.technology, b.technology);
    }
}
