//! Byte transport for REST-style sources: `http(s)` through a shared agent
//! with a polite rate limit, `file` URLs (and plain paths) from disk.

use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use url::Url;

use super::ImportError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum FetchError {
    /// The server answered with a client or server error status.
    Status(u16, String),
    /// Transport failure; the source may come back later.
    Network(String),
    Malformed(String),
}

impl FetchError {
    pub fn is_client_error(&self) -> bool {
        matches!(self, FetchError::Status(s, _) if (400..500).contains(s))
    }
}

impl std::fmt::Display for FetchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FetchError::Status(s, url) => write!(f, "{url}: status {s}"),
            FetchError::Network(m) | FetchError::Malformed(m) => f.write_str(m),
        }
    }
}

/// Spaces request starts at least `interval` apart across all threads.
pub(crate) struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    /// `per_second <= 0` disables limiting.
    pub fn new(per_second: f64) -> Self {
        let interval = (per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / per_second));
        RateLimiter {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let Some(interval) = self.interval else {
            return;
        };
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

pub(crate) struct Source {
    base: Url,
    agent: ureq::Agent,
    limiter: RateLimiter,
    requests: Mutex<usize>,
}

impl Source {
    /// `base` is an absolute URL or a local directory path.
    pub fn new(base: &str, rate: f64) -> Result<Self, ImportError> {
        let mut base = match Url::parse(base) {
            Ok(u) if matches!(u.scheme(), "http" | "https" | "file") => u,
            Ok(u) if u.scheme().len() > 1 => {
                return Err(ImportError::Param(format!("unsupported URL scheme {:?}", u.scheme())))
            }
            // no scheme (or a Windows drive letter): treat as a local path
            _ => {
                let p = Path::new(base)
                    .canonicalize()
                    .map_err(|e| ImportError::Unreachable(format!("{base}: {e}")))?;
                Url::from_directory_path(&p)
                    .map_err(|_| ImportError::Param(format!("bad base path {base:?}")))?
            }
        };
        if !base.path().ends_with('/') {
            let p = format!("{}/", base.path());
            base.set_path(&p);
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Ok(Source {
            base,
            agent,
            limiter: RateLimiter::new(rate),
            requests: Mutex::new(0),
        })
    }

    pub fn base(&self) -> &Url {
        &self.base
    }

    pub fn url(&self, rel: &str) -> Result<Url, FetchError> {
        self.base
            .join(rel)
            .map_err(|e| FetchError::Malformed(format!("bad reference {rel:?}: {e}")))
    }

    /// Number of requests issued so far.
    pub fn requests(&self) -> usize {
        *self.requests.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn get(&self, rel: &str) -> Result<Vec<u8>, FetchError> {
        let url = self.url(rel)?;
        *self.requests.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        if url.scheme() == "file" {
            let path = url
                .to_file_path()
                .map_err(|_| FetchError::Malformed(format!("bad file URL {url}")))?;
            return std::fs::read(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => FetchError::Status(404, url.to_string()),
                std::io::ErrorKind::PermissionDenied => FetchError::Status(403, url.to_string()),
                _ => FetchError::Network(format!("{url}: {e}")),
            });
        }
        self.limiter.acquire();
        log::debug!("GET {url}");
        match self.agent.get(url.as_str()).call() {
            Ok(mut resp) => resp
                .body_mut()
                .with_config()
                .limit(64 * 1024 * 1024)
                .read_to_vec()
                .map_err(|e| FetchError::Network(format!("{url}: {e}"))),
            Err(ureq::Error::StatusCode(s)) => Err(FetchError::Status(s, url.to_string())),
            Err(e) => Err(FetchError::Network(format!("{url}: {e}"))),
        }
    }

    pub fn get_json(&self, rel: &str) -> Result<serde_json::Value, FetchError> {
        let bytes = self.get(rel)?;
        serde_json::from_slice(&bytes).map_err(|e| FetchError::Malformed(format!("{rel}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limiter_spaces_requests() {
        let l = RateLimiter::new(50.0);
        let start = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        // first slot is immediate, the next three wait 20 ms each
        assert!(start.elapsed() >= Duration::from_millis(55));
    }

    #[test]
    fn zero_rate_is_unlimited() {
        let l = RateLimiter::new(0.0);
        let start = Instant::now();
        for _ in 0..100 {
            l.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(50));
    }

    #[test]
    fn plain_paths_become_file_urls() {
        let dir = std::env::temp_dir();
        let s = Source::new(dir.to_str().unwrap(), 2.0).unwrap();
        assert_eq!(s.base().scheme(), "file");
        assert!(s.base().path().ends_with('/'));
        assert!(matches!(
            s.get("definitely-not-here.json"),
            Err(FetchError::Status(404, _))
        ));
    }
}
