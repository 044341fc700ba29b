use std::collections::{HashSet, VecDeque};

use url::Url;

use crate::blockmodel::parse_html;

use super::{classify_technology, FetchError, Fetcher, PageRecord, PageTechnology};

/// Canonical form used for deduplication: lowercase scheme and host, dot
/// segments resolved, fragment removed.
pub fn normalize_url(url: &Url) -> Url {
    // `Url` already lowercases scheme/host, drops default ports and
    // resolves dot segments when parsing.
    let mut u = url.clone();
    u.set_fragment(None);
    u
}

#[derive(Debug)]
pub struct ScanFailure {
    pub url: Url,
    pub error: FetchError,
}

#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub records: Vec<PageRecord>,
    pub failures: Vec<ScanFailure>,
}

/// Breadth-first crawl from `seed` using a default client.
pub fn scan_domain(seed: &Url, max_pages: usize, same_host_only: bool) -> ScanOutcome {
    match Fetcher::new(Default::default()) {
        Ok(fetcher) => scan_domain_with(&fetcher, seed, max_pages, same_host_only),
        Err(error) => ScanOutcome {
            records: Vec::new(),
            failures: vec![ScanFailure {
                url: seed.clone(),
                error,
            }],
        },
    }
}

/// Breadth-first crawl. At most `max_pages` fetches are attempted; failed
/// fetches are reported in `failures` and do not stop the scan.
pub fn scan_domain_with(
    fetcher: &Fetcher,
    seed: &Url,
    max_pages: usize,
    same_host_only: bool,
) -> ScanOutcome {
    let mut outcome = ScanOutcome::default();
    let mut seen: HashSet<Url> = HashSet::new();
    let mut recorded: HashSet<Url> = HashSet::new();
    let mut frontier = VecDeque::new();
    let seed = normalize_url(seed);
    seen.insert(seed.clone());
    frontier.push_back(seed.clone());

    let mut attempts = 0;
    while let Some(url) = frontier.pop_front() {
        if attempts >= max_pages.max(1) {
            break;
        }
        attempts += 1;
        let mut record = match fetcher.fetch(&url) {
            Ok(r) => r,
            Err(error) => {
                log::debug!("scan: {error}");
                outcome.failures.push(ScanFailure { url, error });
                continue;
            }
        };
        record.technology = classify_technology(&record);
        let final_url = normalize_url(&record.url);
        seen.insert(final_url.clone());
        if !recorded.insert(final_url) {
            continue;
        }
        if record.technology == PageTechnology::Html {
            for link in extract_links(&record) {
                if same_host_only && !same_origin_host(&seed, &link) {
                    continue;
                }
                if seen.insert(link.clone()) {
                    frontier.push_back(link);
                }
            }
        }
        outcome.records.push(record);
    }
    outcome
}

fn same_origin_host(a: &Url, b: &Url) -> bool {
    a.host_str() == b.host_str() && a.port_or_known_default() == b.port_or_known_default()
}

fn extract_links(record: &PageRecord) -> Vec<Url> {
    let Ok(dom) = parse_html(&record.body, None) else {
        return Vec::new();
    };
    let base = dom
        .find_element("base")
        .and_then(|b| dom.node(b).attr("href"))
        .and_then(|h| record.url.join(h).ok())
        .unwrap_or_else(|| record.url.clone());
    dom.ids()
        .filter_map(|id| {
            let node = dom.node(id);
            match node.tag()? {
                "a" | "area" => node.attr("href"),
                "frame" | "iframe" => node.attr("src"),
                _ => None,
            }
        })
        .filter_map(|href| base.join(href.trim()).ok())
        .filter(|u| matches!(u.scheme(), "http" | "https"))
        .map(|u| normalize_url(&u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_canonicalizes() {
        let a = Url::parse("HTTP://Example.COM:80/a/./b/../c#frag").unwrap();
        assert_eq!(normalize_url(&a).as_str(), "http://example.com/a/c");
    }
}
