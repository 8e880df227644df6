//! Shell command hooks that compile and run tests in a checkout.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::BugError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionHooks {
    /// Run in a checkout; `{root}` is substituted.
    pub compile_command: String,
    /// Runs one test; `{root}`, `{test_class}` and `{test_method}` are
    /// substituted.
    pub test_command: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Duration::try_from_secs_f64(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Default for ExecutionHooks {
    fn default() -> Self {
        Self {
            compile_command: String::new(),
            test_command: String::new(),
            timeout: Duration::from_secs(600),
        }
    }
}

/// Result of a hook that exited with status 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookRun {
    pub passed: bool,
    pub log: String,
}

impl ExecutionHooks {
    pub fn validate(&self) -> Result<(), BugError> {
        let missing = |template: &str, vars: &[&str]| -> Vec<String> {
            vars.iter()
                .filter(|v| !template.contains(*v))
                .map(|v| v.to_string())
                .collect()
        };
        let mut problems = missing(&self.compile_command, &["{root}"]);
        problems.extend(missing(
            &self.test_command,
            &["{root}", "{test_class}", "{test_method}"],
        ));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BugError::InvalidHooks(format!(
                "missing template variables {}",
                problems.join(", ")
            )))
        }
    }

    pub fn compile(&self, root: &Path) -> Result<HookRun, BugError> {
        let cmd = self
            .compile_command
            .replace("{root}", &root.to_string_lossy());
        run_hook("compile", &cmd, self.timeout)
    }

    pub fn run_test(
        &self,
        root: &Path,
        test_class: &str,
        test_method: &str,
    ) -> Result<HookRun, BugError> {
        let cmd = self
            .test_command
            .replace("{root}", &root.to_string_lossy())
            .replace("{test_class}", test_class)
            .replace("{test_method}", test_method);
        run_hook("test", &cmd, self.timeout)
    }
}

/// Exit status 0 passes, 1 fails; anything else, including death by signal,
/// is a crash.
fn run_hook(step: &str, command: &str, timeout: Duration) -> Result<HookRun, BugError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| BugError::HookCrash {
            step: step.to_string(),
            detail: e.to_string(),
        })?;
    let drain = |mut r: Box<dyn Read + Send>| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            buf
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("piped stdout")));
    let err = drain(Box::new(child.stderr.take().expect("piped stderr")));
    let deadline = Instant::now() + timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(BugError::HookTimeout {
                    step: step.to_string(),
                    timeout,
                });
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                return Err(BugError::HookCrash {
                    step: step.to_string(),
                    detail: e.to_string(),
                })
            }
        }
    };
    let mut log = String::from_utf8_lossy(&out.join().unwrap_or_default()).into_owned();
    log.push_str(&String::from_utf8_lossy(&err.join().unwrap_or_default()));
    match status.code() {
        Some(0) => Ok(HookRun { passed: true, log }),
        Some(1) => Ok(HookRun { passed: false, log }),
        _ => Err(BugError::HookCrash {
            step: step.to_string(),
            detail: format!("{status}: {}", log.trim_end()),
        }),
    }
}
