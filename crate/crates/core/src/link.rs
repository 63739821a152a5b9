//! Cloud/edge channel: message schema, framing, transports and the count of
//! supervision messages a run is expected to exchange.
//!
//! Every message is a JSON object `{"kind": ..., "step": ..., "data": [...]}`.
//! Over a byte stream each message travels in a frame prefixed by its
//! length as a 4-byte big-endian integer.

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::ops::Range;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::cloud::CloudNode;
use crate::error::{Error, Result};
use crate::snn::LearningConfig;

/// Frames larger than this are rejected as malformed.
pub const MAX_FRAME_BYTES: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum LinkMessage {
    /// Edge asks for the control signal of `step`.
    SupervisionRequest { step: u64 },
    /// Cloud answers with `u` for `step`.
    ControlSignal { step: u64, u: Vec<f64> },
    /// Edge reports the measured plant state at the start of `step`.
    StateReport { step: u64, x: Vec<f64> },
}

impl LinkMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            LinkMessage::SupervisionRequest { .. } => "request",
            LinkMessage::ControlSignal { .. } => "control",
            LinkMessage::StateReport { .. } => "state",
        }
    }

    pub fn step(&self) -> u64 {
        match self {
            LinkMessage::SupervisionRequest { step }
            | LinkMessage::ControlSignal { step, .. }
            | LinkMessage::StateReport { step, .. } => *step,
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            LinkMessage::SupervisionRequest { .. } => &[],
            LinkMessage::ControlSignal { u, .. } => u,
            LinkMessage::StateReport { x, .. } => x,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire<'a> {
    kind: &'a str,
    step: u64,
    data: Vec<f64>,
}

/// Serializes a message as compact UTF-8 JSON.
///
/// Floats use the shortest representation that parses back to the same
/// value, so `-3.6071` is written as `-3.6071`.
pub fn encode_message(msg: &LinkMessage) -> Vec<u8> {
    let wire = Wire {
        kind: msg.kind(),
        step: msg.step(),
        data: msg.data().to_vec(),
    };
    serde_json::to_vec(&wire).expect("a message always serializes")
}

pub fn decode_message(bytes: &[u8]) -> Result<LinkMessage> {
    let wire: Wire = serde_json::from_slice(bytes)
        .map_err(|e| Error::MalformedMessage(format!("invalid JSON: {e}")))?;
    if wire.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::MalformedMessage("non-finite payload".into()));
    }
    let step = wire.step;
    match wire.kind {
        "request" if wire.data.is_empty() => Ok(LinkMessage::SupervisionRequest { step }),
        "control" if !wire.data.is_empty() => Ok(LinkMessage::ControlSignal { step, u: wire.data }),
        "state" if !wire.data.is_empty() => Ok(LinkMessage::StateReport { step, x: wire.data }),
        "request" | "control" | "state" => Err(Error::MalformedMessage(format!(
            "kind {:?} with {} values",
            wire.kind,
            wire.data.len()
        ))),
        other => Err(Error::MalformedMessage(format!("unknown kind {other:?}"))),
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|n| (*n as usize) <= MAX_FRAME_BYTES)
        .ok_or_else(|| Error::MalformedMessage(format!("frame of {} bytes", payload.len())))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match r.read(&mut prefix[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(Error::MalformedMessage(format!(
                    "stream ended inside a length prefix ({filled} of 4 bytes)"
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(Error::MalformedMessage(format!("frame of {len} bytes")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => {
            Error::MalformedMessage(format!("truncated frame, expected {len} payload bytes"))
        }
        _ => e.into(),
    })?;
    Ok(Some(payload))
}

/// Encodes `msg` into a complete length-prefixed frame.
pub fn frame_message(msg: &LinkMessage) -> Vec<u8> {
    let payload = encode_message(msg);
    let mut out = Vec::with_capacity(payload.len() + 4);
    write_frame(&mut out, &payload).expect("writing to memory");
    out
}

/// Decodes a buffer that must hold exactly one frame.
pub fn unframe_message(bytes: &[u8]) -> Result<LinkMessage> {
    let mut cursor = bytes;
    let payload = read_frame(&mut cursor)?
        .ok_or_else(|| Error::MalformedMessage("empty frame buffer".into()))?;
    if !cursor.is_empty() {
        return Err(Error::MalformedMessage(format!(
            "{} trailing bytes after frame",
            cursor.len()
        )));
    }
    decode_message(&payload)
}

/// Edge-side traffic counters.
///
/// `payload_bytes` counts JSON bytes in both directions, without frame
/// prefixes, so it does not depend on the transport.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub requests: u64,
    pub controls: u64,
    pub states: u64,
    pub payload_bytes: u64,
}

impl LinkStats {
    fn record(&mut self, msg: &LinkMessage, bytes: usize) {
        match msg {
            LinkMessage::SupervisionRequest { .. } => self.requests += 1,
            LinkMessage::ControlSignal { .. } => self.controls += 1,
            LinkMessage::StateReport { .. } => self.states += 1,
        }
        self.payload_bytes += bytes as u64;
    }
}

/// Number of control signals the gate schedule implies.
///
/// Warmup steps, plus post-warmup check steps, plus every step spent in a
/// relearn window (windows may overlap check steps; those are counted once).
pub fn supervision_count(
    total_steps: u64,
    cfg: &LearningConfig,
    relearn_windows: &[Range<u64>],
) -> u64 {
    let warmup = total_steps.min(cfg.warmup_steps);
    let mut steps = BTreeSet::new();
    let interval = cfg.check_interval.max(1);
    let first_check = cfg.warmup_steps.div_ceil(interval) * interval;
    steps.extend((first_check..total_steps).step_by(interval as usize));
    for w in relearn_windows {
        steps.extend(w.start.max(cfg.warmup_steps)..w.end.min(total_steps));
    }
    warmup + steps.len() as u64
}

/// Cloud endpoint living in the same thread as the edge.
#[derive(Debug)]
pub struct InProcLink {
    node: CloudNode,
    outbox: std::collections::VecDeque<Vec<u8>>,
}

/// Cloud endpoint behind a loopback TCP connection served by its own thread.
#[derive(Debug)]
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    server: Option<JoinHandle<Result<Vec<Vec<f64>>>>>,
}

/// How the edge reaches the cloud.
#[derive(Debug)]
pub enum Transport {
    InProc(InProcLink),
    Tcp(TcpLink),
}

/// Edge side of the link with its traffic counters.
#[derive(Debug)]
pub struct EdgeLink {
    transport: Transport,
    stats: LinkStats,
    total_steps: u64,
    last_control: Option<u64>,
}

impl EdgeLink {
    pub fn inproc(node: CloudNode, total_steps: u64) -> Self {
        Self::wrap(
            Transport::InProc(InProcLink {
                node,
                outbox: Default::default(),
            }),
            total_steps,
        )
    }

    /// Binds `addr` (port 0 picks a free port), starts the cloud server
    /// thread and connects to it.
    pub fn tcp(addr: &str, node: CloudNode, total_steps: u64) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let server = std::thread::spawn(move || -> Result<Vec<Vec<f64>>> {
            let (stream, _) = listener.accept()?;
            serve(stream, node, total_steps)
        });
        let stream = TcpStream::connect(local)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        let writer = BufWriter::new(stream);
        Ok(Self::wrap(
            Transport::Tcp(TcpLink {
                reader,
                writer,
                server: Some(server),
            }),
            total_steps,
        ))
    }

    fn wrap(transport: Transport, total_steps: u64) -> Self {
        Self {
            transport,
            stats: LinkStats::default(),
            total_steps,
            last_control: None,
        }
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn send(&mut self, msg: &LinkMessage) -> Result<()> {
        let payload = encode_message(msg);
        self.stats.record(msg, payload.len());
        match &mut self.transport {
            Transport::InProc(link) => {
                let delivered = decode_message(&payload)?;
                if let Some(reply) = link.node.handle(delivered)? {
                    link.outbox.push_back(encode_message(&reply));
                }
                Ok(())
            }
            Transport::Tcp(link) => {
                write_frame(&mut link.writer, &payload)?;
                if matches!(msg, LinkMessage::SupervisionRequest { .. }) {
                    link.writer.flush()?;
                }
                Ok(())
            }
        }
    }

    /// Blocks until the next message from the cloud arrives.
    pub fn recv(&mut self) -> Result<LinkMessage> {
        let payload = match &mut self.transport {
            Transport::InProc(link) => link
                .outbox
                .pop_front()
                .ok_or_else(|| Error::LinkClosed("no reply pending".into()))?,
            Transport::Tcp(link) => match read_frame(&mut link.reader) {
                Ok(Some(p)) => p,
                Ok(None) | Err(Error::Io(_)) => return Err(link.server_failure()),
                Err(e) => return Err(e),
            },
        };
        let msg = decode_message(&payload)?;
        self.stats.record(&msg, payload.len());
        Ok(msg)
    }

    /// One supervision exchange: report `x`, request and receive `u`.
    pub fn supervise(&mut self, step: u64, x: &[f64]) -> Result<Vec<f64>> {
        self.send(&LinkMessage::StateReport { step, x: x.to_vec() })?;
        self.send(&LinkMessage::SupervisionRequest { step })?;
        match self.recv()? {
            LinkMessage::ControlSignal { step: s, u } if s == step => {
                if self.last_control.is_some_and(|prev| s <= prev) {
                    return Err(Error::MalformedMessage(format!(
                        "control for step {s} arrived out of order"
                    )));
                }
                self.last_control = Some(s);
                Ok(u)
            }
            other => Err(Error::MalformedMessage(format!(
                "expected control for step {step}, got {other:?}"
            ))),
        }
    }

    /// Closes the link and returns the cloud's reference trajectory.
    pub fn finish(self) -> Result<(Vec<Vec<f64>>, LinkStats)> {
        let stats = self.stats;
        let trajectory = match self.transport {
            Transport::InProc(link) => link.node.finish(self.total_steps)?,
            Transport::Tcp(mut link) => {
                link.writer.flush()?;
                link.writer.get_ref().shutdown(std::net::Shutdown::Write)?;
                link.join()?
            }
        };
        Ok((trajectory, stats))
    }
}

impl TcpLink {
    fn join(&mut self) -> Result<Vec<Vec<f64>>> {
        let handle = self
            .server
            .take()
            .ok_or_else(|| Error::LinkClosed("cloud server already joined".into()))?;
        handle
            .join()
            .map_err(|_| Error::LinkClosed("cloud server thread panicked".into()))?
    }

    /// The error that made the server hang up, if it reported one.
    fn server_failure(&mut self) -> Error {
        let _ = self.writer.get_ref().shutdown(std::net::Shutdown::Both);
        match self.join() {
            Err(e) => e,
            Ok(_) => Error::LinkClosed("cloud closed the connection".into()),
        }
    }
}

fn serve(stream: TcpStream, mut node: CloudNode, total_steps: u64) -> Result<Vec<Vec<f64>>> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some(payload) = read_frame(&mut reader)? {
        let msg = decode_message(&payload)?;
        if let Some(reply) = node.handle(msg)? {
            write_frame(&mut writer, &encode_message(&reply))?;
            writer.flush()?;
        }
    }
    node.finish(total_steps)
}
