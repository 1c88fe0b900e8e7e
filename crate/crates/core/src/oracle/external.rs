//! Line-delimited JSON over a child process's stdin and stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError, PropertyRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalOracleConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_timeout() -> f64 {
    60.0
}

impl ExternalOracleConfig {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self { program: program.into(), args, timeout_secs: default_timeout() }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

struct ChildHandle {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Drop for ChildHandle {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One long-lived child; restarted lazily after a timeout kills it.
pub struct ExternalOracle {
    cfg: ExternalOracleConfig,
    handle: Option<ChildHandle>,
}

#[derive(Deserialize)]
struct Reply {
    qed: f64,
    sa: f64,
    ds: f64,
}

impl ExternalOracle {
    pub fn new(cfg: ExternalOracleConfig) -> Self {
        Self { cfg, handle: None }
    }

    fn spawn(&self) -> Result<ChildHandle, OracleError> {
        let mut child = Command::new(&self.cfg.program)
            .args(&self.cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Spawn(e.to_string()))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(l) = line else { break };
                if tx.send(l).is_err() {
                    break;
                }
            }
        });
        Ok(ChildHandle { child, stdin, lines: rx })
    }

    fn request(&mut self, smiles: &str) -> Result<String, OracleError> {
        if self.handle.is_none() {
            self.handle = Some(self.spawn()?);
        }
        let handle = self.handle.as_mut().expect("spawned above");
        let mut line = serde_json::to_string(&serde_json::json!({ "smiles": smiles })).expect("string serializes");
        line.push('\n');
        if handle.stdin.write_all(line.as_bytes()).and_then(|_| handle.stdin.flush()).is_err() {
            self.handle = None;
            return Err(OracleError::ChildExited);
        }
        match handle.lines.recv_timeout(self.cfg.timeout()) {
            Ok(reply) => Ok(reply),
            Err(RecvTimeoutError::Timeout) => {
                self.handle = None;
                Err(OracleError::Timeout(self.cfg.timeout()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.handle = None;
                Err(OracleError::ChildExited)
            }
        }
    }
}

impl Oracle for ExternalOracle {
    fn score(&mut self, smiles: &str) -> Result<PropertyRecord, OracleError> {
        let reply = self.request(smiles)?;
        let r: Reply = serde_json::from_str(&reply).map_err(|e| OracleError::Protocol(format!("{e}: {reply:?}")))?;
        Ok(PropertyRecord { qed: r.qed, sa: r.sa, ds: r.ds }.clamped())
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str, timeout_secs: f64) -> ExternalOracle {
        ExternalOracle::new(ExternalOracleConfig {
            program: "sh".into(),
            args: vec!["-c".into(), script.into()],
            timeout_secs,
        })
    }

    #[test]
    fn echo_stub_passes_through() {
        let mut o = sh(r#"while read l; do echo '{"qed":0.61,"sa":3.25,"ds":-9.5}'; done"#, 10.0);
        for _ in 0..3 {
            assert_eq!(o.score("CCO").unwrap(), PropertyRecord { qed: 0.61, sa: 3.25, ds: -9.5 });
        }
    }

    #[test]
    fn invalid_json_is_protocol_error() {
        let mut o = sh("while read l; do echo nope; done", 10.0);
        assert!(matches!(o.score("CCO"), Err(OracleError::Protocol(_))));
    }

    #[test]
    fn silent_child_times_out() {
        let mut o = sh("sleep 30", 0.2);
        assert!(matches!(o.score("CCO"), Err(OracleError::Timeout(_))));
    }

    #[test]
    fn exiting_child() {
        let mut o = sh("read l; exit 0", 10.0);
        assert_eq!(o.score("CCO"), Err(OracleError::ChildExited));
        assert!(OracleError::ChildExited.is_fatal());
        let mut o = ExternalOracle::new(ExternalOracleConfig::new("/nonexistent/oracle", vec![]));
        assert!(matches!(o.score("C"), Err(OracleError::Spawn(_))));
    }
}
