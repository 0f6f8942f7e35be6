use std::path::{Path, PathBuf};
use std::time::Duration;

use futures::future::try_join_all;
use kitgi_core::{
    Concept, ConceptSet, KnowledgeBundle, Relation, Timestamp, MAX_RELATIONS_PER_CONCEPT,
};
use log::{debug, warn};
use reqwest::{header::RETRY_AFTER, StatusCode, Url};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tokio::sync::{Mutex, Semaphore};
use tokio::time::Instant;

use crate::edges::{select_relations, ApiResponse};
use crate::error::KgError;

/// Environment variable consulted for the endpoint when none is configured.
pub const BASE_URL_ENV: &str = "KITGI_CONCEPTNET_URL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KgSource {
    Live,
    Cache,
    Fixture,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KgQueryResult {
    pub concept: Concept,
    pub relations: Vec<Relation>,
    pub fetched_at: Timestamp,
    pub source: KgSource,
}

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    /// When set, responses come only from `<dir>/<lang>/<surface>.json` and
    /// the network is never touched. Missing files mean no edges.
    pub fixture_dir: Option<PathBuf>,
    /// Edges requested per query; ranking happens client-side.
    pub page_size: usize,
    pub concurrency: usize,
    pub min_interval: Duration,
    pub max_attempts: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
    pub timeout: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            base_url: None,
            cache_dir: None,
            fixture_dir: None,
            page_size: 1000,
            concurrency: 4,
            min_interval: Duration::from_millis(100),
            max_attempts: 3,
            base_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            timeout: Duration::from_secs(30),
        }
    }
}

impl ClientConfig {
    /// Fills an unset endpoint from the environment.
    pub fn with_env(mut self) -> Self {
        if self.base_url.is_none() {
            self.base_url = std::env::var(BASE_URL_ENV).ok().filter(|s| !s.is_empty());
        }
        self
    }
}

pub struct ConceptNetClient {
    config: ClientConfig,
    http: reqwest::Client,
    permits: Semaphore,
    next_slot: Mutex<Instant>,
    cache_writes: Mutex<()>,
}

enum Attempt {
    Done(ApiResponse),
    Retry {
        status: Option<u16>,
        wait: Option<Duration>,
        message: String,
    },
}

impl ConceptNetClient {
    pub fn new(config: ClientConfig) -> Result<Self, KgError> {
        if let Some(dir) = config.fixture_dir.as_ref().filter(|d| !d.is_dir()) {
            return Err(KgError::Io {
                path: dir.clone(),
                source: std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "fixture directory not found",
                ),
            });
        }
        let http = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| KgError::Transport {
                concept: String::new(),
                attempts: 0,
                last_status: None,
                message: e.to_string(),
            })?;
        Ok(ConceptNetClient {
            permits: Semaphore::new(config.concurrency.max(1)),
            next_slot: Mutex::new(Instant::now()),
            cache_writes: Mutex::new(()),
            http,
            config,
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Cache file for a query; the key covers endpoint, language, surface and limit.
    pub fn cache_path(&self, concept: &Concept, limit: usize) -> Option<PathBuf> {
        let dir = self.config.cache_dir.as_ref()?;
        let endpoint = self.config.base_url.as_deref().unwrap_or("");
        let mut h = Sha256::new();
        for part in [
            endpoint,
            concept.lang(),
            concept.surface(),
            &limit.to_string(),
        ] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        Some(dir.join(format!("{}.json", hex::encode(h.finalize()))))
    }

    pub async fn fetch_relations(
        &self,
        concept: &Concept,
        limit: usize,
    ) -> Result<KgQueryResult, KgError> {
        if limit == 0 || limit > MAX_RELATIONS_PER_CONCEPT {
            return Err(KgError::InvalidLimit {
                got: limit,
                max: MAX_RELATIONS_PER_CONCEPT,
            });
        }
        let (response, source) = self.response(concept, limit).await?;
        Ok(KgQueryResult {
            concept: concept.clone(),
            relations: select_relations(concept, &response.edges, limit),
            fetched_at: Timestamp::now(),
            source,
        })
    }

    /// One relation list per concept of `set`, in set order. Fetches run
    /// concurrently within the configured bound.
    pub async fn build_bundle(
        &self,
        set: &ConceptSet,
        limit: usize,
    ) -> Result<KnowledgeBundle, KgError> {
        let results = try_join_all(set.iter().map(|c| async move {
            self.fetch_relations(c, limit)
                .await
                .map_err(|e| KgError::ForConcept {
                    concept: c.to_string(),
                    source: Box::new(e),
                })
        }))
        .await?;
        Ok(results
            .into_iter()
            .map(|r| (r.concept, r.relations))
            .collect())
    }

    async fn response(
        &self,
        concept: &Concept,
        limit: usize,
    ) -> Result<(ApiResponse, KgSource), KgError> {
        if let Some(dir) = &self.config.fixture_dir {
            let path = fixture_path(dir, concept);
            return Ok((read_json(&path)?.unwrap_or_default(), KgSource::Fixture));
        }
        let cache = self.cache_path(concept, limit);
        if let Some(path) = &cache {
            if let Some(hit) = read_json(path)? {
                debug!("cache hit for {concept}");
                return Ok((hit, KgSource::Cache));
            }
        }
        let base = self
            .config
            .base_url
            .as_deref()
            .ok_or_else(|| KgError::NoEndpoint(concept.to_string()))?;
        let response = self.fetch_live(base, concept).await?;
        if let Some(path) = &cache {
            self.write_cache(path, &response).await?;
        }
        Ok((response, KgSource::Live))
    }

    async fn fetch_live(&self, base: &str, concept: &Concept) -> Result<ApiResponse, KgError> {
        let transport = |attempts, last_status, message: String| KgError::Transport {
            concept: concept.to_string(),
            attempts,
            last_status,
            message,
        };
        let mut url = Url::parse(base)
            .map_err(|e| transport(0, None, format!("bad base url {base:?}: {e}")))?;
        url.path_segments_mut()
            .map_err(|_| transport(0, None, format!("base url {base:?} cannot take a path")))?
            .pop_if_empty()
            .extend(["c", concept.lang(), concept.surface()]);
        url.query_pairs_mut()
            .append_pair("limit", &self.config.page_size.to_string());

        let _permit = self
            .permits
            .acquire()
            .await
            .expect("semaphore never closed");
        let attempts = self.config.max_attempts.max(1);
        let mut last = (None, String::new());
        for attempt in 1..=attempts {
            self.pace().await;
            match self.attempt(&url, concept).await? {
                Attempt::Done(r) => return Ok(r),
                Attempt::Retry {
                    status,
                    wait,
                    message,
                } => {
                    warn!("{url}: attempt {attempt}/{attempts} failed: {message}");
                    last = (status, message);
                    if attempt < attempts {
                        let backoff = self.config.base_backoff.saturating_mul(1 << (attempt - 1));
                        tokio::time::sleep(wait.unwrap_or(backoff).min(self.config.max_backoff))
                            .await;
                    }
                }
            }
        }
        Err(transport(attempts, last.0, last.1))
    }

    async fn attempt(&self, url: &Url, concept: &Concept) -> Result<Attempt, KgError> {
        let response = match self.http.get(url.clone()).send().await {
            Ok(r) => r,
            Err(e) => {
                return Ok(Attempt::Retry {
                    status: None,
                    wait: None,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        if status == StatusCode::NOT_FOUND {
            return Ok(Attempt::Done(ApiResponse::default()));
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            let wait = response
                .headers()
                .get(RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Ok(Attempt::Retry {
                status: Some(status.as_u16()),
                wait,
                message: status.to_string(),
            });
        }
        if !status.is_success() {
            return Err(KgError::Transport {
                concept: concept.to_string(),
                attempts: 1,
                last_status: Some(status.as_u16()),
                message: status.to_string(),
            });
        }
        match response.json::<ApiResponse>().await {
            Ok(body) => Ok(Attempt::Done(body)),
            Err(e) if e.is_decode() => Err(KgError::Decode {
                concept: concept.to_string(),
                message: e.to_string(),
            }),
            Err(e) => Ok(Attempt::Retry {
                status: Some(status.as_u16()),
                wait: None,
                message: e.to_string(),
            }),
        }
    }

    /// Global pacing: request starts are at least `min_interval` apart.
    async fn pace(&self) {
        let start = {
            let mut next = self.next_slot.lock().await;
            let start = (*next).max(Instant::now());
            *next = start + self.config.min_interval;
            start
        };
        tokio::time::sleep_until(start).await;
    }

    async fn write_cache(&self, path: &Path, response: &ApiResponse) -> Result<(), KgError> {
        let _guard = self.cache_writes.lock().await;
        let dir = path.parent().expect("cache file has a parent");
        let io = |source| KgError::Io {
            path: path.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        serde_json::to_writer(&mut tmp, response).map_err(|e| io(e.into()))?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

pub fn fixture_path(dir: &Path, concept: &Concept) -> PathBuf {
    dir.join(concept.lang())
        .join(format!("{}.json", concept.surface()))
}

fn read_json(path: &Path) -> Result<Option<ApiResponse>, KgError> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| KgError::Decode {
                concept: path.display().to_string(),
                message: e.to_string(),
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(KgError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}
