use std::collections::BTreeMap;
use std::process::Stdio;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::io::AsyncWriteExt;
use tokio::process::Command;

use crate::error::GenError;

/// Decoding settings sent to completion backends and recorded on every sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams {
            model: "t5-large".to_string(),
            temperature: 0.0,
            max_tokens: 64,
            seed: None,
        }
    }
}

impl DecodeParams {
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::from([
            ("model".to_string(), self.model.clone()),
            ("temperature".to_string(), self.temperature.to_string()),
            ("max_tokens".to_string(), self.max_tokens.to_string()),
        ]);
        if let Some(seed) = self.seed {
            out.insert("seed".to_string(), seed.to_string());
        }
        out
    }
}

/// A text generator. Implementations return the raw completion; callers
/// reduce it to one sentence.
#[async_trait]
pub trait Generator: Send + Sync {
    fn backend_id(&self) -> String;
    fn decode_params(&self) -> BTreeMap<String, String>;
    async fn complete(&self, prompt: &str) -> Result<String, GenError>;
}

/// Deterministic stand-in: echoes the concept line as a sentence.
///
/// Takes the prompt's first line, drops everything through the first `:`
/// and returns `"a <words>."`, so `generate a sentence with: dog pull race`
/// becomes `a dog pull race.`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StubBackend;

impl StubBackend {
    pub fn respond(prompt: &str) -> String {
        let line = prompt.lines().next().unwrap_or("");
        let tail = line.split_once(':').map_or(line, |(_, rest)| rest);
        let words: Vec<&str> = tail.split_whitespace().collect();
        if words.is_empty() {
            String::new()
        } else {
            format!("a {}.", words.join(" "))
        }
    }
}

#[async_trait]
impl Generator for StubBackend {
    fn backend_id(&self) -> String {
        "stub".to_string()
    }

    fn decode_params(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }

    async fn complete(&self, prompt: &str) -> Result<String, GenError> {
        Ok(Self::respond(prompt))
    }
}

/// Generic completion endpoint. Request body:
/// `{"model", "prompt", "max_tokens", "temperature", "seed"}`; the response
/// is read from `text` or else `choices[0].text`.
pub struct HttpBackend {
    endpoint: String,
    params: DecodeParams,
    client: reqwest::Client,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: Option<String>,
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        params: DecodeParams,
        timeout: Duration,
    ) -> Result<Self, GenError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GenError::Transport {
                status: None,
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            endpoint: endpoint.into(),
            params,
            client,
        })
    }
}

#[async_trait]
impl Generator for HttpBackend {
    fn backend_id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn decode_params(&self) -> BTreeMap<String, String> {
        self.params.describe()
    }

    async fn complete(&self, prompt: &str) -> Result<String, GenError> {
        let body = CompletionRequest {
            model: &self.params.model,
            prompt,
            max_tokens: self.params.max_tokens,
            temperature: self.params.temperature,
            seed: self.params.seed,
        };
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                GenError::Timeout
            } else {
                GenError::Transport {
                    status: e.status().map(|s| s.as_u16()),
                    message: e.to_string(),
                }
            }
        };
        let response = self
            .client
            .post(&self.endpoint)
            .json(&body)
            .send()
            .await
            .map_err(transport)?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().await.unwrap_or_default();
            return Err(GenError::Transport {
                status: Some(status.as_u16()),
                message: text,
            });
        }
        let parsed: CompletionResponse = response.json().await.map_err(|e| {
            if e.is_timeout() {
                GenError::Timeout
            } else {
                GenError::Decode(e.to_string())
            }
        })?;
        parsed
            .text
            .or_else(|| parsed.choices.into_iter().next().map(|c| c.text))
            .ok_or_else(|| GenError::Decode("response has neither text nor choices[0].text".into()))
    }
}

/// Runs `sh -c <command>` with the prompt on stdin and reads stdout.
pub struct SubprocessBackend {
    command: String,
    params: DecodeParams,
    timeout: Duration,
}

impl SubprocessBackend {
    pub fn new(command: impl Into<String>, params: DecodeParams, timeout: Duration) -> Self {
        SubprocessBackend {
            command: command.into(),
            params,
            timeout,
        }
    }
}

#[async_trait]
impl Generator for SubprocessBackend {
    fn backend_id(&self) -> String {
        format!("subprocess:{}", self.command)
    }

    fn decode_params(&self) -> BTreeMap<String, String> {
        self.params.describe()
    }

    async fn complete(&self, prompt: &str) -> Result<String, GenError> {
        let spawn_failed = |e: std::io::Error| GenError::BackendFailed {
            exit_code: None,
            output: e.to_string(),
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .env("KITGI_TEMPERATURE", self.params.temperature.to_string())
            .env("KITGI_MAX_TOKENS", self.params.max_tokens.to_string())
            .env(
                "KITGI_SEED",
                self.params.seed.map(|s| s.to_string()).unwrap_or_default(),
            )
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .kill_on_drop(true)
            .spawn()
            .map_err(spawn_failed)?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let input = prompt.as_bytes().to_vec();
        let run = async move {
            // A command that ignores stdin may close it early; that is not a failure.
            let _ = stdin.write_all(&input).await;
            drop(stdin);
            child.wait_with_output().await
        };
        let output = tokio::time::timeout(self.timeout, run)
            .await
            .map_err(|_| GenError::Timeout)?
            .map_err(spawn_failed)?;
        if !output.status.success() {
            let mut captured = String::from_utf8_lossy(&output.stderr).into_owned();
            captured.push_str(&String::from_utf8_lossy(&output.stdout));
            return Err(GenError::BackendFailed {
                exit_code: output.status.code(),
                output: captured,
            });
        }
        Ok(String::from_utf8_lossy(&output.stdout).into_owned())
    }
}
