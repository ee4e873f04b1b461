//! Framed, metered duplex channels between the two parties.
//!
//! A frame is `length: u32 LE | tag: u8 | payload`, with `length` covering the
//! tag byte, so `length = payload + 1`. Two wire backends share the framing:
//! TCP sockets and an in-process loopback queue pair for tests.
//!
//! The meter tracks, per protocol tag, payload bytes in both directions,
//! frames, rounds, AND gates and consumed triples/COTs. A round increments
//! when the direction of traffic flips within a tag; a bidirectional
//! [`Channel::exchange`] counts as a single round, which is how batched
//! protocols coalesce a step's traffic.

use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MAX_PAYLOAD: usize = 1 << 30;

/// Protocol identifier carried by every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Tag {
    Control = 0,
    BaseOt = 1,
    Iknp = 2,
    TripleGen = 3,
    CotPad = 4,
    Mill = 5,
    And = 6,
    B2a = 7,
    Relu = 8,
    Trunc = 9,
    Pool = 10,
    Argmax = 11,
    Linconv = 12,
    InputShare = 13,
    LabelOpen = 14,
}

pub const NUM_TAGS: usize = 15;

pub const ALL_TAGS: [Tag; NUM_TAGS] = [
    Tag::Control,
    Tag::BaseOt,
    Tag::Iknp,
    Tag::TripleGen,
    Tag::CotPad,
    Tag::Mill,
    Tag::And,
    Tag::B2a,
    Tag::Relu,
    Tag::Trunc,
    Tag::Pool,
    Tag::Argmax,
    Tag::Linconv,
    Tag::InputShare,
    Tag::LabelOpen,
];

/// What kind of value a frame under this tag may carry. Every tag is
/// classified; the runtime's security-surface check asserts that a session
/// emits nothing outside these classes and opens shares only via
/// `LabelOpening`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameClass {
    /// Key-agreement group elements and public session parameters.
    Handshake,
    /// One-time-padded or PRG-masked strings (OT extension, pads, shares).
    OneTimePadded,
    /// Triple-randomized correction bits and COT corrections.
    CorrectionBits,
    /// RLWE ciphertexts.
    Ciphertext,
    /// The final label opening towards the client.
    LabelOpening,
}

impl Tag {
    pub fn from_u8(v: u8) -> Option<Tag> {
        ALL_TAGS.get(v as usize).copied()
    }

    pub fn class(self) -> FrameClass {
        match self {
            Tag::Control | Tag::BaseOt => FrameClass::Handshake,
            Tag::Iknp | Tag::TripleGen | Tag::CotPad | Tag::InputShare => FrameClass::OneTimePadded,
            Tag::Mill | Tag::And | Tag::B2a | Tag::Relu | Tag::Trunc | Tag::Pool | Tag::Argmax => {
                FrameClass::CorrectionBits
            }
            Tag::Linconv => FrameClass::Ciphertext,
            Tag::LabelOpen => FrameClass::LabelOpening,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounters {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub frames_sent: u64,
    pub frames_received: u64,
    pub rounds: u64,
    pub and_gates: u64,
    pub triples_consumed: u64,
    pub cots: u64,
}

impl TagCounters {
    fn absorb(&mut self, other: &TagCounters) {
        self.bytes_sent += other.bytes_sent;
        self.bytes_received += other.bytes_received;
        self.frames_sent += other.frames_sent;
        self.frames_received += other.frames_received;
        self.rounds += other.rounds;
        self.and_gates += other.and_gates;
        self.triples_consumed += other.triples_consumed;
        self.cots += other.cots;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Send,
    Recv,
}

/// Per-tag traffic and protocol counters. Counters only grow.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionMeter {
    counters: Vec<TagCounters>,
    #[serde(skip)]
    last_dir: Vec<Option<Dir>>,
}

impl SessionMeter {
    pub fn new() -> Self {
        SessionMeter {
            counters: vec![TagCounters::default(); NUM_TAGS],
            last_dir: vec![None; NUM_TAGS],
        }
    }

    pub fn tag(&self, tag: Tag) -> &TagCounters {
        &self.counters[tag as usize]
    }

    pub fn totals(&self) -> TagCounters {
        let mut t = TagCounters::default();
        for c in &self.counters {
            t.absorb(c);
        }
        t
    }

    /// Per-tag counters for tags that saw any traffic or protocol activity.
    pub fn active(&self) -> Vec<(Tag, TagCounters)> {
        ALL_TAGS
            .iter()
            .map(|&t| (t, self.counters[t as usize]))
            .filter(|(_, c)| *c != TagCounters::default())
            .collect()
    }

    pub fn note_and_gates(&mut self, tag: Tag, n: u64) {
        self.counters[tag as usize].and_gates += n;
    }

    pub fn note_triples(&mut self, tag: Tag, n: u64) {
        self.counters[tag as usize].triples_consumed += n;
    }

    pub fn note_cots(&mut self, tag: Tag, n: u64) {
        self.counters[tag as usize].cots += n;
    }

    fn on_send(&mut self, tag: Tag, payload: usize) {
        let i = tag as usize;
        self.counters[i].bytes_sent += payload as u64;
        self.counters[i].frames_sent += 1;
        if self.last_dir[i] != Some(Dir::Send) {
            self.counters[i].rounds += 1;
            self.last_dir[i] = Some(Dir::Send);
        }
    }

    fn on_recv(&mut self, tag: Tag, payload: usize) {
        let i = tag as usize;
        self.counters[i].bytes_received += payload as u64;
        self.counters[i].frames_received += 1;
        if self.last_dir[i] != Some(Dir::Recv) {
            self.counters[i].rounds += 1;
            self.last_dir[i] = Some(Dir::Recv);
        }
    }

    fn on_exchange(&mut self, tag: Tag, sent: usize, received: usize) {
        let i = tag as usize;
        self.counters[i].bytes_sent += sent as u64;
        self.counters[i].bytes_received += received as u64;
        self.counters[i].frames_sent += 1;
        self.counters[i].frames_received += 1;
        self.counters[i].rounds += 1;
        self.last_dir[i] = None;
    }
}

pub trait WireTx: Send {
    fn send_all(&mut self, bytes: &[u8]) -> Result<()>;
    fn flush(&mut self) -> Result<()>;
}

pub trait WireRx: Send {
    fn recv_exact(&mut self, buf: &mut [u8]) -> Result<()>;
}

struct TcpTx(BufWriter<TcpStream>);
struct TcpRx(BufReader<TcpStream>);

impl WireTx for TcpTx {
    fn send_all(&mut self, bytes: &[u8]) -> Result<()> {
        self.0.write_all(bytes)?;
        Ok(())
    }
    fn flush(&mut self) -> Result<()> {
        self.0.flush()?;
        Ok(())
    }
}

impl WireRx for TcpRx {
    fn recv_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Closed
            } else {
                Error::Io(e)
            }
        })
    }
}

struct LoopTx(mpsc::Sender<Vec<u8>>);

struct LoopRx {
    rx: mpsc::Receiver<Vec<u8>>,
    pending: VecDeque<u8>,
}

impl WireTx for LoopTx {
    fn send_all(&mut self, bytes: &[u8]) -> Result<()> {
        self.0.send(bytes.to_vec()).map_err(|_| Error::Closed)
    }
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

impl WireRx for LoopRx {
    fn recv_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            if let Some(b) = self.pending.pop_front() {
                buf[filled] = b;
                filled += 1;
                continue;
            }
            let chunk = self.rx.recv().map_err(|_| Error::Closed)?;
            self.pending.extend(chunk);
        }
        Ok(())
    }
}

/// One end of a reliable ordered duplex link, owned by one protocol session
/// at a time.
pub struct Channel {
    tx: Box<dyn WireTx>,
    rx: Box<dyn WireRx>,
    meter: SessionMeter,
    // TCP needs concurrent write/read in `exchange` to avoid filling both
    // socket buffers; the loopback queue is unbounded.
    spawn_on_exchange: bool,
    sent_hash: Sha256,
    recv_hash: Sha256,
}

impl Channel {
    fn new(tx: Box<dyn WireTx>, rx: Box<dyn WireRx>, spawn_on_exchange: bool) -> Self {
        Channel {
            tx,
            rx,
            meter: SessionMeter::new(),
            spawn_on_exchange,
            sent_hash: Sha256::new(),
            recv_hash: Sha256::new(),
        }
    }

    pub fn send_frame(&mut self, tag: Tag, payload: &[u8]) -> Result<()> {
        let frame = encode_frame(tag, payload)?;
        self.sent_hash.update(&frame);
        self.tx.send_all(&frame)?;
        self.tx.flush()?;
        self.meter.on_send(tag, payload.len());
        Ok(())
    }

    pub fn recv_frame(&mut self, expected: Tag) -> Result<Vec<u8>> {
        let (tag, payload) = self.read_frame()?;
        if tag != expected as u8 {
            return Err(Error::Desync {
                expected: expected as u8,
                got: tag,
            });
        }
        self.meter.on_recv(expected, payload.len());
        Ok(payload)
    }

    /// Receives whatever frame is next; used by servers dispatching on tag.
    pub fn recv_frame_any(&mut self) -> Result<(Tag, Vec<u8>)> {
        let (raw, payload) = self.read_frame()?;
        let tag = Tag::from_u8(raw).ok_or(Error::Desync {
            expected: 0xff,
            got: raw,
        })?;
        self.meter.on_recv(tag, payload.len());
        Ok((tag, payload))
    }

    /// Simultaneous bidirectional step: both parties send one frame under
    /// `tag` and receive the peer's. Metered as one round.
    pub fn exchange(&mut self, tag: Tag, payload: &[u8]) -> Result<Vec<u8>> {
        let frame = encode_frame(tag, payload)?;
        self.sent_hash.update(&frame);
        let reply = if self.spawn_on_exchange {
            let tx = &mut self.tx;
            let rx = &mut self.rx;
            std::thread::scope(|s| -> Result<Vec<u8>> {
                let writer = s.spawn(move || -> Result<()> {
                    tx.send_all(&frame)?;
                    tx.flush()
                });
                let got = read_frame_from(rx.as_mut())?;
                writer.join().expect("exchange writer panicked")?;
                Ok(got)
            })?
        } else {
            self.tx.send_all(&frame)?;
            self.tx.flush()?;
            read_frame_from(self.rx.as_mut())?
        };
        let (raw, got) = reply_parts(reply);
        if raw != tag as u8 {
            return Err(Error::Desync {
                expected: tag as u8,
                got: raw,
            });
        }
        self.recv_hash.update(encode_frame_raw(raw, &got));
        self.meter.on_exchange(tag, payload.len(), got.len());
        Ok(got)
    }

    fn read_frame(&mut self) -> Result<(u8, Vec<u8>)> {
        let raw = read_frame_from(self.rx.as_mut())?;
        let (tag, payload) = reply_parts(raw);
        self.recv_hash.update(encode_frame_raw(tag, &payload));
        Ok((tag, payload))
    }

    pub fn meter(&self) -> &SessionMeter {
        &self.meter
    }

    pub fn meter_mut(&mut self) -> &mut SessionMeter {
        &mut self.meter
    }

    pub fn meter_snapshot(&self) -> SessionMeter {
        self.meter.clone()
    }

    /// Hashes of all sent / received frames so far, for determinism checks.
    pub fn transcript_digests(&self) -> ([u8; 32], [u8; 32]) {
        let s = self.sent_hash.clone().finalize();
        let r = self.recv_hash.clone().finalize();
        (s.into(), r.into())
    }
}

fn encode_frame(tag: Tag, payload: &[u8]) -> Result<Vec<u8>> {
    if payload.len() > MAX_PAYLOAD {
        return Err(Error::domain(format!(
            "payload {} exceeds 2^30 bytes",
            payload.len()
        )));
    }
    Ok(encode_frame_raw(tag as u8, payload))
}

fn encode_frame_raw(tag: u8, payload: &[u8]) -> Vec<u8> {
    let mut frame = Vec::with_capacity(5 + payload.len());
    frame.extend_from_slice(&((payload.len() + 1) as u32).to_le_bytes());
    frame.push(tag);
    frame.extend_from_slice(payload);
    frame
}

// Raw frame bytes past the length word: tag byte then payload.
fn read_frame_from(rx: &mut dyn WireRx) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    rx.recv_exact(&mut len)?;
    let len = u32::from_le_bytes(len) as usize;
    if len == 0 || len > MAX_PAYLOAD + 1 {
        return Err(Error::Encoding(format!("bad frame length {len}")));
    }
    let mut body = vec![0u8; len];
    rx.recv_exact(&mut body)?;
    Ok(body)
}

fn reply_parts(mut body: Vec<u8>) -> (u8, Vec<u8>) {
    let tag = body[0];
    body.rotate_left(1);
    body.pop();
    (tag, body)
}

/// In-memory queue pair with channel semantics identical to TCP.
pub fn loopback_pair() -> (Channel, Channel) {
    let (tx_a, rx_a) = mpsc::channel();
    let (tx_b, rx_b) = mpsc::channel();
    let a = Channel::new(
        Box::new(LoopTx(tx_a)),
        Box::new(LoopRx {
            rx: rx_b,
            pending: VecDeque::new(),
        }),
        false,
    );
    let b = Channel::new(
        Box::new(LoopTx(tx_b)),
        Box::new(LoopRx {
            rx: rx_a,
            pending: VecDeque::new(),
        }),
        false,
    );
    (a, b)
}

fn channel_from_stream(stream: TcpStream) -> Result<Channel> {
    stream.set_nodelay(true)?;
    let rd = stream.try_clone()?;
    Ok(Channel::new(
        Box::new(TcpTx(BufWriter::new(stream))),
        Box::new(TcpRx(BufReader::new(rd))),
        true,
    ))
}

/// Binds `addr` and waits for the peer. No encryption on the wire; the model
/// is semi-honest and TLS can wrap the socket externally if needed.
pub fn listen(addr: &str) -> Result<Channel> {
    let listener = TcpListener::bind(addr)?;
    let (stream, _) = listener.accept()?;
    channel_from_stream(stream)
}

/// Connects to a listening peer, retrying briefly while it comes up.
pub fn connect(addr: &str) -> Result<Channel> {
    let mut last = None;
    for _ in 0..100 {
        match TcpStream::connect(addr) {
            Ok(s) => return channel_from_stream(s),
            Err(e) => {
                last = Some(e);
                std::thread::sleep(Duration::from_millis(100));
            }
        }
    }
    Err(Error::Io(last.unwrap()))
}
