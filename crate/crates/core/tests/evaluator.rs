mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::{fixture, free_port, FixtureServer, Reply, PAGE_FIXTURES};
use webadapt::corpus::{build_manifest, load_local, PageTechnology};
use webadapt::evaluator::{
    feasibility_report, measure_response, median, system_view_ratings, write_feasibility_csv,
    CoverageRating, MeasureError, Outcome, System, Variant,
};
use webadapt::noisefilter::RuleSet;
use webadapt::segmenter::PDoC;
use webadapt::translator::{ingest_segments, translate_site};

#[test]
fn timing_median_matches_brute_force() {
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let server = FixtureServer::start(move |_, _| {
        counter.fetch_add(1, Ordering::SeqCst);
        Reply::ok("text/html", vec![b'x'; 2048])
    });
    let record = measure_response(&server.url("/"), 5, Variant::Translated, "desk").unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 5);
    assert_eq!(record.samples.len(), 5);
    assert_eq!(record.bytes, 2048);
    assert!(record.failures.is_empty());
    // the median is the sample with two others on each side
    let s = &record.samples;
    let brute = s
        .iter()
        .copied()
        .find(|&x| {
            let below = s.iter().filter(|&&y| y < x).count();
            let above = s.iter().filter(|&&y| y > x).count();
            below <= 2 && above <= 2
        })
        .unwrap();
    assert_eq!(record.median_ms, brute);
    assert_eq!(median(s), Some(brute));

    let single = measure_response(&server.url("/"), 1, Variant::Conventional, "desk").unwrap();
    assert_eq!(single.median_ms, single.samples[0]);
}

#[test]
fn unreachable_url_fails_every_sample() {
    let url = url::Url::parse(&format!("http://127.0.0.1:{}/", free_port())).unwrap();
    match measure_response(&url, 3, Variant::Conventional, "desk") {
        Err(MeasureError::MeasurementFailed { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("{other:?}"),
    }
    let server = FixtureServer::start(|_, _| Reply::status(500));
    assert!(matches!(
        measure_response(&server.url("/"), 2, Variant::Translated, "desk"),
        Err(MeasureError::MeasurementFailed { attempts: 2, .. })
    ));
}

#[test]
fn feasibility_of_fixture_corpus() {
    let records: Vec<_> = PAGE_FIXTURES
        .iter()
        .map(|(p, _)| load_local(&fixture(p)).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_manifest(&records, dir.path()).unwrap();
    let cells = feasibility_report(&manifest, PDoC::DEFAULT, &RuleSet::default()).unwrap();
    let outcome = |system, tech| {
        cells
            .iter()
            .find(|c| c.system == system && c.technology == tech)
            .map(|c| (c.outcome, c.n_pages))
            .unwrap()
    };
    assert_eq!(outcome(System::Segmenter, PageTechnology::Html), (Outcome::Works, 4));
    assert_eq!(outcome(System::Segmenter, PageTechnology::Flash).0, Outcome::SingleBlock);
    assert_eq!(outcome(System::Segmenter, PageTechnology::Xml), (Outcome::Fails, 2));
    assert_eq!(outcome(System::NoiseFilter, PageTechnology::Xml).0, Outcome::Fails);

    let mut csv = Vec::new();
    write_feasibility_csv(&mut csv, &cells).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("system,technology,outcome,n_pages\n"));
    assert!(text.contains("segmenter,xml,fails,2\n"), "{text}");
}

#[test]
fn system_view_flags_missing_segments() {
    let segments = ingest_segments(&fixture("translate/isim/segments.jsonl")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let site = translate_site(
        &fixture("translate/isim/capture.mhtml"),
        &fixture("translate/isim/segments.jsonl"),
        out.path(),
    )
    .unwrap();
    let ratings = system_view_ratings(&segments, &site);
    assert_eq!(ratings.len(), 4);
    assert!(ratings.iter().all(|(_, r)| *r == CoverageRating::Full));

    // a page that lost its body text keeps half its content
    let mut damaged = site.clone();
    let about = damaged.pages.iter_mut().find(|p| p.page_id == "about").unwrap();
    let body = segments
        .iter()
        .find(|s| s.page == "about" && s.order == segments.iter().filter(|s| s.page == "about").map(|s| s.order).max().unwrap())
        .unwrap();
    about.html = about.html.replace(&body.text, "");
    let ratings = system_view_ratings(&segments, &damaged);
    let about_rating = ratings.iter().find(|(p, _)| p == "about").unwrap().1;
    assert_eq!(about_rating, CoverageRating::Half);
}
