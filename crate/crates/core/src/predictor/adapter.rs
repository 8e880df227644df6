//! Client side of the line-delimited JSON protocol spoken by external model
//! processes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_query, finalize_candidates, Backend, Candidate, PredictError, Prediction};
use crate::corpus::{DatasetSample, TokenForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub id: String,
    pub masked_input: String,
    pub token_form: TokenForm,
    pub k: usize,
    /// Ground truth, sent only for loopback testing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub id: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    /// Shell command line starting the adapter process.
    pub command: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub send_truth_hint: bool,
    /// Adapter processes run side by side; each gets a contiguous slice of
    /// the samples.
    pub workers: usize,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            timeout: Duration::from_secs(60),
            send_truth_hint: false,
            workers: 1,
        }
    }
}

pub struct ExternalAdapter {
    config: AdapterConfig,
}

impl ExternalAdapter {
    pub fn new(config: AdapterConfig) -> Self {
        Self { config }
    }
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    line_no: usize,
    timeout: Duration,
}

impl Session {
    fn start(command: &str, timeout: Duration) -> Result<Self, PredictError> {
        if command.trim().is_empty() {
            return Err(PredictError::BackendUnavailable(
                "no adapter command configured".into(),
            ));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PredictError::BackendUnavailable(format!("{command}: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            line_no: 0,
            timeout,
        })
    }

    fn exited(&mut self) -> PredictError {
        let status = match self.child.try_wait() {
            Ok(Some(s)) => s.to_string(),
            _ => "closed its output".to_string(),
        };
        PredictError::BackendUnavailable(format!("adapter process {status}"))
    }

    fn exchange(&mut self, request: &AdapterRequest) -> Result<AdapterResponse, PredictError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        let stdin = self.stdin.as_mut().expect("stdin open while session lives");
        if stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .is_err()
        {
            return Err(self.exited());
        }
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(PredictError::BackendUnavailable(e.to_string())),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                return Err(PredictError::AdapterTimeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let _ = self.child.wait();
                return Err(self.exited());
            }
        };
        self.line_no += 1;
        let protocol = |reason: String| PredictError::AdapterProtocolError {
            line: self.line_no,
            reason,
        };
        let response: AdapterResponse =
            serde_json::from_str(&reply).map_err(|e| protocol(e.to_string()))?;
        if response.id != request.id {
            return Err(protocol(format!(
                "expected id {:?}, got {:?}",
                request.id, response.id
            )));
        }
        Ok(response)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl ExternalAdapter {
    fn run_chunk(
        &self,
        samples: &[DatasetSample],
        k: usize,
    ) -> Result<Vec<Prediction>, PredictError> {
        let mut session = Session::start(&self.config.command, self.config.timeout)?;
        samples
            .iter()
            .map(|s| {
                let request = AdapterRequest {
                    id: s.sample_id.clone(),
                    masked_input: s.masked_input.join(" "),
                    token_form: s.token_form,
                    k,
                    truth_hint: self
                        .config
                        .send_truth_hint
                        .then(|| s.truth_assertion.join(" ")),
                };
                let response = session.exchange(&request)?;
                Ok(finalize_candidates(s, response.candidates, k, self.name()))
            })
            .collect()
    }
}

impl Backend for ExternalAdapter {
    fn name(&self) -> &str {
        "adapter"
    }

    fn predict_batch(
        &self,
        samples: &[DatasetSample],
        k: usize,
    ) -> Result<Vec<Prediction>, PredictError> {
        for s in samples {
            check_query(s, k)?;
        }
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let workers = self.config.workers.clamp(1, samples.len());
        let chunk = samples.len().div_ceil(workers);
        let parts: Vec<Vec<Prediction>> = samples
            .par_chunks(chunk)
            .map(|c| self.run_chunk(c, k))
            .collect::<Result<_, _>>()?;
        Ok(parts.into_iter().flatten().collect())
    }
}
