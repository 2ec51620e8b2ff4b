//! Adapter for cost models that live in another process.
//!
//! The child speaks line-delimited JSON on stdin/stdout:
//!
//! ```text
//! child  -> {"protocol": 1, "metrics": ["latency", ...]}          (handshake)
//! parent -> {"id": 7, "design": {"NumPEs": 28.0, ...}, "workload": "w"}
//! child  -> {"id": 7, "metrics": {"latency": 1.5, ...}, "valid": true}
//! ```
//!
//! Requests on one adapter are strictly serialized.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use dsegym_core::{
    score, DesignPoint, EnvError, Environment, Observation, ParamValue, ParameterSpace, RewardSpec,
    StepResult, WorkloadSpec,
};
use serde::{Deserialize, Serialize};

use crate::synthetic::EnvOptions;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub timeout: Duration,
    /// How many times a timed-out or crashed child is relaunched.
    pub max_restarts: u32,
}

impl AdapterConfig {
    pub fn new(command: Vec<String>, timeout: Duration) -> Self {
        AdapterConfig {
            command,
            timeout,
            max_restarts: 0,
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.command.is_empty() {
            return Err(EnvError::Fixture("empty simulator command".into()));
        }
        if self.timeout.is_zero() {
            return Err(EnvError::Fixture("simulator timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: u32,
    pub metrics: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Request<'a> {
    pub id: u64,
    pub design: &'a BTreeMap<String, ParamValue>,
    pub workload: &'a str,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub metrics: BTreeMap<String, f64>,
    pub valid: bool,
}

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Running {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Owns one simulator child process.
pub struct SimulatorAdapter {
    config: AdapterConfig,
    running: Option<Running>,
    metrics: Vec<String>,
    restarts: u32,
    next_id: u64,
}

impl SimulatorAdapter {
    /// Launches the child and completes the handshake.
    pub fn launch(config: AdapterConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let mut adapter = SimulatorAdapter {
            config,
            running: None,
            metrics: Vec::new(),
            restarts: 0,
            next_id: 0,
        };
        adapter.start()?;
        Ok(adapter)
    }

    /// Metric names announced in the handshake.
    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn start(&mut self) -> Result<(), EnvError> {
        let mut child = Command::new(&self.config.command[0])
            .args(&self.config.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut running = Running {
            child,
            stdin,
            lines: rx,
        };
        let raw = match Self::read_line(&mut running, self.config.timeout) {
            Ok(raw) => raw,
            Err(e) => {
                running.kill();
                return Err(e);
            }
        };
        let handshake: Handshake = match serde_json::from_str(&raw) {
            Ok(h) => h,
            Err(e) => {
                running.kill();
                return Err(EnvError::Protocol {
                    message: format!("bad handshake: {e}"),
                    raw,
                });
            }
        };
        if handshake.protocol != PROTOCOL_VERSION {
            running.kill();
            return Err(EnvError::Protocol {
                message: format!("unsupported protocol version {}", handshake.protocol),
                raw,
            });
        }
        self.metrics = handshake.metrics;
        self.running = Some(running);
        Ok(())
    }

    fn read_line(running: &mut Running, timeout: Duration) -> Result<String, EnvError> {
        match running.lines.recv_timeout(timeout) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err(EnvError::SimulatorTimeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = running.child.wait()?;
                Err(EnvError::SimulatorCrashed(format!("child exited with {status}")))
            }
        }
    }

    /// After a timeout or crash the child is gone; relaunch it if the restart
    /// policy allows.
    fn recover(&mut self) {
        if let Some(r) = self.running.take() {
            r.kill();
        }
        if self.restarts < self.config.max_restarts {
            self.restarts += 1;
            if let Err(e) = self.start() {
                log::warn!("simulator restart failed: {e}");
            }
        }
    }

    /// Sends one request and waits for its response.
    pub fn evaluate(
        &mut self,
        design: &BTreeMap<String, ParamValue>,
        workload: &str,
    ) -> Result<Observation, EnvError> {
        if self.running.is_none() {
            return Err(EnvError::SimulatorCrashed("simulator is not running".into()));
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request { id, design, workload })
            .map_err(|e| EnvError::Fixture(e.to_string()))?;
        line.push('\n');

        let timeout = self.config.timeout;
        let running = self.running.as_mut().expect("checked above");
        let sent = running.stdin.write_all(line.as_bytes()).and_then(|_| running.stdin.flush());
        let outcome = match sent {
            Ok(()) => Self::read_line(running, timeout),
            Err(e) => Err(EnvError::SimulatorCrashed(format!("write failed: {e}"))),
        };
        let raw = match outcome {
            Ok(raw) => raw,
            Err(e) => {
                self.recover();
                return Err(e);
            }
        };
        let response: Response = serde_json::from_str(&raw).map_err(|e| EnvError::Protocol {
            message: format!("malformed response: {e}"),
            raw: raw.clone(),
        })?;
        if response.id != id {
            return Err(EnvError::Protocol {
                message: format!("response id {} does not match request id {id}", response.id),
                raw,
            });
        }
        if !response.valid {
            return Ok(Observation::infeasible());
        }
        Observation::new(response.metrics).map_err(|e| EnvError::Protocol {
            message: e.to_string(),
            raw,
        })
    }
}

impl Drop for SimulatorAdapter {
    fn drop(&mut self) {
        if let Some(r) = self.running.take() {
            r.kill();
        }
    }
}

/// Environment whose cost model is an external simulator process.
pub struct ExternalEnv {
    id: String,
    adapter: SimulatorAdapter,
    space: ParameterSpace,
    workload: WorkloadSpec,
    reward: RewardSpec,
    options: EnvOptions,
    steps: usize,
}

impl ExternalEnv {
    pub fn new(
        id: impl Into<String>,
        config: AdapterConfig,
        space: ParameterSpace,
        workload: WorkloadSpec,
        reward: RewardSpec,
        options: EnvOptions,
    ) -> Result<Self, EnvError> {
        reward.validate()?;
        let adapter = SimulatorAdapter::launch(config)?;
        for m in reward.metrics() {
            if !adapter.metrics().iter().any(|x| x == m) {
                return Err(EnvError::Protocol {
                    message: format!("simulator does not report metric `{m}`"),
                    raw: adapter.metrics().join(","),
                });
            }
        }
        Ok(ExternalEnv {
            id: id.into(),
            adapter,
            space,
            workload,
            reward,
            options: EnvOptions {
                episode_length: options.episode_length.max(1),
                ..options
            },
            steps: 0,
        })
    }
}

impl Environment for ExternalEnv {
    fn id(&self) -> &str {
        &self.id
    }

    fn reset(&mut self) -> Observation {
        self.steps = 0;
        Observation::initial()
    }

    fn step(&mut self, point: &DesignPoint) -> Result<StepResult, EnvError> {
        self.space.validate(point)?;
        if !self.options.step_delay.is_zero() {
            thread::sleep(self.options.step_delay);
        }
        let observation = self.adapter.evaluate(&self.space.to_map(point), &self.workload.id)?;
        let reward = score(&self.reward, &observation)?;
        self.steps += 1;
        let mut info = BTreeMap::new();
        if !observation.valid {
            info.insert("invalid".to_string(), "true".to_string());
        }
        Ok(StepResult {
            observation,
            reward,
            done: self.steps >= self.options.episode_length,
            info,
        })
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn workload(&self) -> &WorkloadSpec {
        &self.workload
    }
}
