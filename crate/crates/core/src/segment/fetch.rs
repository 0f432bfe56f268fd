//! Optional client that downloads hearing transcripts into a local cache.
//! Everything downstream reads local files, so this is the only module that
//! touches the network.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;

use crate::error::{Error, Result};

/// GPO hearing collection. `{hearing_id}` is replaced by the package id,
/// e.g. `CHRG-117hhrg45678`.
pub const GOVINFO_ENDPOINT: &str =
    "https://www.govinfo.gov/content/pkg/{hearing_id}/html/{hearing_id}.htm";

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// URL template containing `{hearing_id}`, or a base URL the id is
    /// appended to.
    pub endpoint: String,
    pub cache_dir: PathBuf,
    pub min_delay: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl FetchConfig {
    pub fn new(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        FetchConfig {
            endpoint: endpoint.into(),
            cache_dir: cache_dir.into(),
            min_delay: Duration::from_secs(1),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn url_for(&self, hearing_id: &str) -> String {
        if self.endpoint.contains("{hearing_id}") {
            self.endpoint.replace("{hearing_id}", hearing_id)
        } else {
            format!("{}/{hearing_id}", self.endpoint.trim_end_matches('/'))
        }
    }

    pub fn cache_path(&self, hearing_id: &str) -> PathBuf {
        self.cache_dir.join(format!("{hearing_id}.txt"))
    }
}

/// Cached, rate-limited transcript downloader. Requests through one
/// `Fetcher` are serialized.
pub struct Fetcher {
    config: FetchConfig,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
    network_calls: AtomicUsize,
}

impl Fetcher {
    pub fn new(config: FetchConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Fetcher {
            config,
            agent,
            last_request: Mutex::new(None),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    /// HTTP requests issued so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn fetch(&self, hearing_id: &str) -> Result<String> {
        check_id(hearing_id)?;
        let cache = self.config.cache_path(hearing_id);
        if cache.is_file() {
            return fs::read_to_string(&cache).map_err(|e| Error::io(&cache, e));
        }
        let url = self.config.url_for(hearing_id);
        let body = self.download(hearing_id, &url)?;
        let text = if looks_like_html(&body) {
            html_to_text(&body)
        } else {
            body
        };
        fs::create_dir_all(&self.config.cache_dir)
            .map_err(|e| Error::io(&self.config.cache_dir, e))?;
        write_atomic(&cache, &text)?;
        Ok(text)
    }

    fn download(&self, hearing_id: &str, url: &str) -> Result<String> {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(prev) = *last {
                let since = prev.elapsed();
                if since < self.config.min_delay {
                    thread::sleep(self.config.min_delay - since);
                }
            }
            *last = Some(Instant::now());
            self.network_calls.fetch_add(1, Ordering::SeqCst);

            let failure = match self.agent.get(url).call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    match status {
                        200..=299 => {
                            return resp
                                .body_mut()
                                .with_config()
                                .limit(512 * 1024 * 1024)
                                .read_to_string()
                                .map_err(|e| Error::Http {
                                    hearing_id: hearing_id.to_string(),
                                    attempts: attempt,
                                    message: e.to_string(),
                                });
                        }
                        404 | 410 => {
                            return Err(Error::NotFound {
                                hearing_id: hearing_id.to_string(),
                                url: url.to_string(),
                            })
                        }
                        429 | 500..=599 => format!("HTTP {status}"),
                        _ => {
                            return Err(Error::Http {
                                hearing_id: hearing_id.to_string(),
                                attempts: attempt,
                                message: format!("HTTP {status}"),
                            })
                        }
                    }
                }
                Err(e) => e.to_string(),
            };
            if attempt > self.config.max_retries {
                return Err(Error::Http {
                    hearing_id: hearing_id.to_string(),
                    attempts: attempt,
                    message: failure,
                });
            }
            thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
        }
    }
}

/// One-shot fetch with default settings.
pub fn fetch_transcript(hearing_id: &str, endpoint: &str, cache_dir: &Path) -> Result<String> {
    Fetcher::new(FetchConfig::new(endpoint, cache_dir)).fetch(hearing_id)
}

fn check_id(hearing_id: &str) -> Result<()> {
    let ok = !hearing_id.is_empty()
        && hearing_id != "."
        && hearing_id != ".."
        && hearing_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("bad hearing id `{hearing_id}`")))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("txt.part");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn looks_like_html(body: &str) -> bool {
    let head: String = body.chars().take(512).collect::<String>().to_ascii_lowercase();
    head.contains("<html") || head.contains("<pre") || head.contains("<!doctype html")
}

/// Strip tags and decode the handful of entities GPO pages use.
pub fn html_to_text(html: &str) -> String {
    static TAG: OnceLock<Regex> = OnceLock::new();
    let tag = TAG.get_or_init(|| Regex::new(r"(?s)<[^>]*>").expect("static regex"));
    tag.replace_all(html, "")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&")
}
