//! JSON-lines transports: a child process's stdin/stdout or a TCP socket.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::{
    Completion, GenerateRequest, Generator, GeneratorFactory, Message, ProtocolError,
    PROTOCOL_VERSION,
};

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(60);

/// A generator on the other end of a byte stream.
pub struct StreamGenerator {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    child: Option<Child>,
    socket: Option<TcpStream>,
}

impl StreamGenerator {
    /// Wraps a connected stream pair and performs the hello handshake.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
    ) -> Result<Self, ProtocolError> {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut gen = Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            socket: None,
        };
        gen.handshake()?;
        Ok(gen)
    }

    /// Spawns `command` (split on whitespace) and talks to it over stdio.
    pub fn spawn(command: &str) -> Result<Self, ProtocolError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| ProtocolError::Backend("empty generator command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        match Self::from_streams(stdout, stdin) {
            Ok(mut gen) => {
                gen.child = Some(child);
                Ok(gen)
            }
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(e)
            }
        }
    }

    pub fn connect(addr: &str) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let handle = stream.try_clone()?;
        let mut gen = Self::from_streams(reader, stream)?;
        gen.socket = Some(handle);
        Ok(gen)
    }

    fn send(&mut self, msg: &Message) -> Result<(), ProtocolError> {
        self.writer.write_all(msg.encode().as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&self, deadline: Option<Instant>) -> Result<Message, ProtocolError> {
        loop {
            let line = match deadline {
                Some(d) => {
                    let wait = d.saturating_duration_since(Instant::now());
                    match self.lines.recv_timeout(wait) {
                        Ok(line) => line,
                        Err(RecvTimeoutError::Timeout) => return Err(ProtocolError::Timeout),
                        Err(RecvTimeoutError::Disconnected) => return Err(ProtocolError::Closed),
                    }
                }
                None => self.lines.recv().map_err(|_| ProtocolError::Closed)?,
            }?;
            if !line.trim().is_empty() {
                return Message::decode(&line);
            }
        }
    }

    fn handshake(&mut self) -> Result<(), ProtocolError> {
        self.send(&Message::Hello {
            version: PROTOCOL_VERSION,
        })?;
        match self.recv(Some(Instant::now() + HANDSHAKE_TIMEOUT))? {
            Message::Hello { version } if version == PROTOCOL_VERSION => Ok(()),
            Message::Hello { version } => Err(ProtocolError::VersionMismatch(version)),
            other => Err(ProtocolError::Unexpected(format!("{other:?} before hello"))),
        }
    }
}

impl Generator for StreamGenerator {
    fn generate(
        &mut self,
        request: &GenerateRequest,
        deadline: Option<Instant>,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<Completion, ProtocolError> {
        self.send(&Message::Generate(request.clone()))?;
        loop {
            match self.recv(deadline)? {
                Message::Chunk { request_id, text } if request_id == request.request_id => {
                    on_chunk(&text)
                }
                Message::Done(done) if done.request_id == request.request_id => {
                    return Ok(Completion {
                        finish_reason: done.finish_reason,
                        matched_stop: done.matched_stop,
                    })
                }
                other => {
                    return Err(ProtocolError::Unexpected(format!(
                        "{other:?} while waiting on `{}`",
                        request.request_id
                    )))
                }
            }
        }
    }
}

impl Drop for StreamGenerator {
    fn drop(&mut self) {
        if let Some(socket) = &self.socket {
            let _ = socket.shutdown(std::net::Shutdown::Both);
        }
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Where to find a generator: `cmd:<program and args>` or `tcp:<host:port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeneratorEndpoint {
    Command(String),
    Tcp(String),
}

impl FromStr for GeneratorEndpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err("empty command after `cmd:`".into());
            }
            Ok(Self::Command(cmd.to_string()))
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            if addr.trim().is_empty() {
                return Err("empty address after `tcp:`".into());
            }
            Ok(Self::Tcp(addr.to_string()))
        } else {
            Err(format!("generator `{s}` must start with `cmd:` or `tcp:`"))
        }
    }
}

impl GeneratorFactory for GeneratorEndpoint {
    fn connect(&self, _qid: &str) -> Result<Box<dyn Generator>, ProtocolError> {
        Ok(match self {
            GeneratorEndpoint::Command(cmd) => Box::new(StreamGenerator::spawn(cmd)?),
            GeneratorEndpoint::Tcp(addr) => Box::new(StreamGenerator::connect(addr)?),
        })
    }
}
