//! Components running as child processes speaking the line protocol on
//! stdin/stdout.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::Map;

use super::codec::{value_from_json, value_to_json};
use super::protocol::{Message, PROTOCOL_VERSION};
use super::{Component, ComponentError, EngineError, PortValues};
use crate::model::ComponentDescriptor;

const STDERR_KEEP: usize = 16 * 1024;

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    stderr: Arc<Mutex<String>>,
    drain: Option<JoinHandle<()>>,
}

impl Session {
    fn spawn(command: &[String], descriptor: &ComponentDescriptor) -> Result<Session, EngineError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| EngineError::ArtifactMissing(format!("{}: empty entry command", descriptor.id())))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| EngineError::ArtifactMissing(format!("{}: cannot start {program}: {e}", descriptor.id())))?;
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let mut pipe = child.stderr.take().expect("piped");
        let drain = std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut kept = sink.lock().unwrap_or_else(|e| e.into_inner());
                if kept.len() < STDERR_KEEP {
                    kept.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });
        let mut session = Session {
            stdin: child.stdin.take(),
            stdout: BufReader::new(child.stdout.take().expect("piped")),
            child,
            stderr,
            drain: Some(drain),
        };
        match session.receive()? {
            Message::Hello {
                protocol,
                component,
                version,
            } => {
                let expected = (
                    PROTOCOL_VERSION,
                    descriptor.name.as_str(),
                    descriptor.version.to_string(),
                );
                if (protocol, component.as_str(), version.clone()) != expected {
                    session.kill();
                    return Err(EngineError::HandshakeMismatch(format!(
                        "expected {}@{} protocol {PROTOCOL_VERSION}, child announced {component}@{version} protocol {protocol}",
                        descriptor.name, descriptor.version
                    )));
                }
            }
            other => {
                session.kill();
                return Err(EngineError::Protocol(format!("expected hello, got {}", other.kind())));
            }
        }
        Ok(session)
    }

    fn send(&mut self, message: &Message) -> Result<(), EngineError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| EngineError::Protocol("child input already closed".into()))?;
        stdin
            .write_all(message.to_line().as_bytes())
            .and_then(|()| stdin.flush())
            .map_err(|e| EngineError::Protocol(format!("writing to child: {e}{}", self.stderr_tail())))
    }

    fn receive(&mut self) -> Result<Message, EngineError> {
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| EngineError::Protocol(format!("reading from child: {e}")))?;
        if n == 0 {
            // let the stderr drain finish so the message carries it
            let _ = self.child.wait();
            if let Some(h) = self.drain.take() {
                let _ = h.join();
            }
            return Err(EngineError::Protocol(format!(
                "child closed its output unexpectedly{}",
                self.stderr_tail()
            )));
        }
        Message::parse(&line).map_err(|e| EngineError::Protocol(format!("bad message {:?}: {e}", line.trim_end())))
    }

    fn stderr_tail(&self) -> String {
        let text = self.stderr.lock().unwrap_or_else(|e| e.into_inner());
        let text = text.trim();
        if text.is_empty() {
            String::new()
        } else {
            format!(" (stderr: {text})")
        }
    }

    /// Closes stdin and reaps the child.
    fn finish(mut self, say_close: bool) {
        if say_close {
            let _ = self.send(&Message::Close {});
        }
        self.stdin.take();
        let _ = self.child.wait();
        if let Some(h) = self.drain.take() {
            let _ = h.join();
        }
    }

    fn kill(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A subprocess-backed component. Stateless components get a fresh process
/// per invocation; stateful ones keep one process until closed.
pub(crate) struct SubprocessComponent {
    descriptor: Arc<ComponentDescriptor>,
    command: Vec<String>,
    session: Option<Session>,
}

/// Splits the entry template into words and expands `{artifact}`.
pub(crate) fn command_line(entry: &str, artifact: &std::path::Path) -> Vec<String> {
    let words: Vec<String> = entry
        .split_whitespace()
        .map(|w| w.replace("{artifact}", &artifact.to_string_lossy()))
        .collect();
    if words.is_empty() {
        vec![artifact.to_string_lossy().into_owned()]
    } else {
        words
    }
}

impl SubprocessComponent {
    /// Starts the process and checks its hello against the descriptor.
    pub(crate) fn start(descriptor: Arc<ComponentDescriptor>, artifact: PathBuf) -> Result<Self, EngineError> {
        let entry = descriptor
            .implementation
            .as_ref()
            .map(|i| i.entry.clone())
            .unwrap_or_default();
        let command = command_line(&entry, &artifact);
        let session = Session::spawn(&command, &descriptor)?;
        Ok(SubprocessComponent {
            descriptor,
            command,
            session: Some(session),
        })
    }

    fn exchange(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, EngineError> {
        let session = match self.session.as_mut() {
            Some(s) => s,
            None => self.session.insert(Session::spawn(&self.command, &self.descriptor)?),
        };
        let message = Message::Invoke {
            params: params
                .iter()
                .map(|(k, v)| (k.clone(), value_to_json(v)))
                .collect::<Map<_, _>>(),
            inputs: inputs
                .iter()
                .map(|(k, v)| (k.clone(), value_to_json(v)))
                .collect::<Map<_, _>>(),
        };
        session.send(&message)?;
        let reply = session.receive()?;
        let outputs = match reply {
            Message::Result { outputs } => outputs,
            Message::Error { code, detail } => return Err(EngineError::Component(ComponentError { code, detail })),
            other => return Err(EngineError::Protocol(format!("expected result, got {}", other.kind()))),
        };
        let mut decoded = PortValues::new();
        for (port, json) in outputs {
            let spec = self
                .descriptor
                .provides_ports()
                .find(|p| p.name == port)
                .ok_or_else(|| EngineError::Protocol(format!("child returned unknown output `{port}`")))?;
            let value = value_from_json(&json, &spec.datatype).map_err(|e| EngineError::OutputType {
                port: port.clone(),
                reason: e.to_string(),
            })?;
            decoded.insert(port, value);
        }
        Ok(decoded)
    }
}

impl Component for SubprocessComponent {
    fn invoke(&mut self, inputs: &PortValues, params: &PortValues) -> Result<PortValues, ComponentError> {
        let result = self.exchange(inputs, params);
        if !self.descriptor.behavior.stateful || result.is_err() {
            if let Some(session) = self.session.take() {
                session.finish(false);
            }
        }
        result.map_err(ComponentError::from)
    }

    fn close(&mut self) {
        if let Some(session) = self.session.take() {
            session.finish(self.descriptor.behavior.stateful);
        }
    }
}

impl Drop for SubprocessComponent {
    fn drop(&mut self) {
        if let Some(mut session) = self.session.take() {
            session.kill();
        }
    }
}
