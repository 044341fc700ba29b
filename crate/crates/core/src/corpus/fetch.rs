use std::error::Error as _;
use std::time::Duration;

use chrono::Utc;
use reqwest::blocking::Client;
use reqwest::redirect::Policy;
use url::Url;

use super::{PageRecord, PageSource, PageTechnology};

pub const DEFAULT_MAX_REDIRECTS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("request: invalid url {url}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("response: {url} timed out after {timeout:?}")]
    Timeout { url: Url, timeout: Duration },
    #[error("dns: cannot resolve {url}: {message}")]
    Dns { url: Url, message: String },
    #[error("connect: {url}: {message}")]
    Connect { url: Url, message: String },
    #[error("redirect: {url} exceeded {limit} redirects")]
    TooManyRedirects { url: Url, limit: usize },
    #[error("status: {url} answered HTTP {status}")]
    Http { url: Url, status: u16 },
    #[error("body: {url}: {message}")]
    Body { url: Url, message: String },
}

impl FetchError {
    pub fn status(&self) -> Option<u16> {
        match self {
            FetchError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub timeout: Duration,
    pub max_redirects: usize,
    pub user_agent: String,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            timeout: Duration::from_secs(30),
            max_redirects: DEFAULT_MAX_REDIRECTS,
            user_agent: concat!("webadapt/", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

/// A reusable blocking HTTP client.
///
/// Must not be used from inside an async runtime.
#[derive(Debug, Clone)]
pub struct Fetcher {
    client: Client,
    options: FetchOptions,
}

impl Fetcher {
    pub fn new(options: FetchOptions) -> Result<Self, FetchError> {
        let client = Client::builder()
            .timeout(options.timeout)
            .redirect(Policy::limited(options.max_redirects))
            .user_agent(options.user_agent.clone())
            .build()
            .map_err(|e| FetchError::InvalidUrl {
                url: String::new(),
                reason: e.to_string(),
            })?;
        Ok(Fetcher { client, options })
    }

    pub fn options(&self) -> &FetchOptions {
        &self.options
    }

    /// Fetches one page. The returned record carries the final URL after
    /// redirects and is not yet classified.
    pub fn fetch(&self, url: &Url) -> Result<PageRecord, FetchError> {
        let response = self
            .client
            .get(url.clone())
            .send()
            .map_err(|e| self.map_error(url, e))?;
        let final_url = response.url().clone();
        let status = response.status();
        if status.as_u16() >= 400 {
            return Err(FetchError::Http {
                url: final_url,
                status: status.as_u16(),
            });
        }
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let body = response.bytes().map_err(|e| {
            if e.is_timeout() {
                FetchError::Timeout {
                    url: final_url.clone(),
                    timeout: self.options.timeout,
                }
            } else {
                FetchError::Body {
                    url: final_url.clone(),
                    message: e.to_string(),
                }
            }
        })?;
        Ok(PageRecord {
            url: final_url,
            body: body.to_vec(),
            content_type,
            technology: PageTechnology::Unknown,
            fetched_at: Utc::now(),
            source: PageSource::LiveFetch,
        })
    }

    fn map_error(&self, url: &Url, e: reqwest::Error) -> FetchError {
        if e.is_timeout() {
            return FetchError::Timeout {
                url: url.clone(),
                timeout: self.options.timeout,
            };
        }
        if e.is_redirect() {
            return FetchError::TooManyRedirects {
                url: url.clone(),
                limit: self.options.max_redirects,
            };
        }
        let chain = error_chain(&e);
        if e.is_connect() {
            let lower = chain.to_ascii_lowercase();
            if lower.contains("dns") || lower.contains("lookup") || lower.contains("resolve") {
                return FetchError::Dns {
                    url: url.clone(),
                    message: chain,
                };
            }
            return FetchError::Connect {
                url: url.clone(),
                message: chain,
            };
        }
        if e.is_builder() {
            return FetchError::InvalidUrl {
                url: url.to_string(),
                reason: chain,
            };
        }
        FetchError::Connect {
            url: url.clone(),
            message: chain,
        }
    }
}

fn error_chain(e: &reqwest::Error) -> String {
    let mut parts = vec![e.to_string()];
    let mut source = e.source();
    while let Some(s) = source {
        parts.push(s.to_string());
        source = s.source();
    }
    parts.join(": ")
}

/// Fetches `url` with the default redirect limit.
pub fn fetch_page(url: &Url, timeout: Duration) -> Result<PageRecord, FetchError> {
    if timeout.is_zero() {
        return Err(FetchError::InvalidUrl {
            url: url.to_string(),
            reason: "timeout must be positive".to_string(),
        });
    }
    if url.cannot_be_a_base() || !matches!(url.scheme(), "http" | "https") {
        return Err(FetchError::InvalidUrl {
            url: url.to_string(),
            reason: "only absolute http(s) URLs can be fetched".to_string(),
        });
    }
    Fetcher::new(FetchOptions {
        timeout,
        ..FetchOptions::default()
    })?
    .fetch(url)
}
