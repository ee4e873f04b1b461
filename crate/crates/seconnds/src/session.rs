//! Two-party session state: role, channel, correlated-randomness supplies and
//! the per-subsystem RNG streams.
//!
//! Every randomness consumer draws from its own labeled stream. Keeping the
//! streams separate means a protocol that consumes a different *amount* of
//! one kind of randomness (say, triples under the log-depth comparison
//! variant) leaves every other stream untouched, which is what makes
//! fixed-seed runs comparable across configuration toggles.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::obliv::{
    exchange_session_id, rot_from_cot_receiver, rot_from_cot_sender, OtReceiver, OtSender,
    PadReceiverPool, PadSenderPool, RotReceiverBatch, RotSenderBatch,
};
use crate::rings::RingParams;
use crate::transport::{Channel, Tag};
use crate::triples::{DealerTripleGen, IknpTripleGen, TripleBackend, TripleBuffer};
use crate::{Error, Result};

/// Party role: `P0` is the server (model holder), `P1` the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    P0,
    P1,
}

impl Party {
    #[inline]
    pub fn index(self) -> u64 {
        match self {
            Party::P0 => 0,
            Party::P1 => 1,
        }
    }

    #[inline]
    pub fn other(self) -> Party {
        match self {
            Party::P0 => Party::P1,
            Party::P1 => Party::P0,
        }
    }

    /// `p` as a bit; `p'` is `!bit()`.
    #[inline]
    pub fn bit(self) -> bool {
        matches!(self, Party::P1)
    }
}

/// Millionaires' circuit shape toggle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MillVariant {
    Linear,
    LogDepth,
}

impl MillVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MillVariant::Linear),
            "logdepth" => Ok(MillVariant::LogDepth),
            other => Err(Error::config(format!("unknown mill variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleBackendKind {
    Iknp,
    Dealer,
}

impl TripleBackendKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iknp" => Ok(TripleBackendKind::Iknp),
            "dealer" => Ok(TripleBackendKind::Dealer),
            other => Err(Error::config(format!("unknown triple backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub ring: RingParams,
    pub triple_backend: TripleBackendKind,
    pub triple_chunk: usize,
    pub triple_buffer: usize,
    pub pad_chunk: usize,
    pub eager_fill: bool,
    pub mill_variant: MillVariant,
    /// Master seed for deterministic runs; dealer backends require it.
    pub seed: Option<u64>,
    /// Must be set to run the trusted-dealer backend outside tests.
    pub allow_insecure: bool,
}

impl SessionConfig {
    pub fn new(ring: RingParams) -> Self {
        SessionConfig {
            ring,
            triple_backend: TripleBackendKind::Iknp,
            triple_chunk: 1 << 18,
            triple_buffer: 1 << 18,
            pad_chunk: 1 << 14,
            eager_fill: true,
            mill_variant: MillVariant::Linear,
            seed: None,
            allow_insecure: false,
        }
    }

    pub fn dealer_for_tests(ring: RingParams, seed: u64) -> Self {
        SessionConfig {
            triple_backend: TripleBackendKind::Dealer,
            triple_chunk: 1 << 14,
            triple_buffer: 1 << 14,
            eager_fill: false,
            seed: Some(seed),
            allow_insecure: true,
            ..SessionConfig::new(ring)
        }
    }

    fn digest(&self) -> [u8; 16] {
        let mut h = Sha256::new();
        h.update(b"seconnds-config");
        h.update([self.ring.bits as u8, self.ring.scale as u8]);
        h.update([matches!(self.triple_backend, TripleBackendKind::Dealer) as u8]);
        h.update((self.triple_chunk as u64).to_le_bytes());
        h.update((self.pad_chunk as u64).to_le_bytes());
        h.update(self.seed.unwrap_or(u64::MAX).to_le_bytes());
        let d = h.finalize();
        d[..16].try_into().unwrap()
    }
}

/// Labeled ChaCha streams derived from a master seed.
pub struct RngStreams {
    master: [u8; 32],
}

impl RngStreams {
    pub fn from_seed(seed: Option<u64>) -> Self {
        let master = match seed {
            Some(s) => {
                let mut h = Sha256::new();
                h.update(b"seconnds-master");
                h.update(s.to_le_bytes());
                h.finalize().into()
            }
            None => {
                let mut bytes = [0u8; 32];
                use rand::RngCore;
                rand::rng().fill_bytes(&mut bytes);
                bytes
            }
        };
        RngStreams { master }
    }

    /// Stream identical on both parties (dealer transcripts).
    pub fn shared(&self, label: &str) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"seconnds-shared");
        h.update(self.master);
        h.update(label.as_bytes());
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    /// Stream private to one party's role.
    pub fn private(&self, label: &str, party: Party) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"seconnds-private");
        h.update(self.master);
        h.update(label.as_bytes());
        h.update([party.index() as u8]);
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    pub fn dealer_seed(&self, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"seconnds-dealer");
        h.update(self.master);
        h.update(label.as_bytes());
        h.finalize().into()
    }
}

#[allow(clippy::large_enum_variant)]
enum PadDirBackend {
    IknpSender(OtSender),
    IknpReceiver(OtReceiver),
    DealerSender(ChaCha20Rng),
    DealerReceiver(ChaCha20Rng),
}

impl PadDirBackend {
    /// Refills `n` pad instances for one direction. Extension directions are
    /// processed in a global order, so both parties drive the same direction
    /// at the same time.
    fn refill(
        &mut self,
        channel: &mut Channel,
        n: usize,
        out: &mut PadSenderPool,
        inn: &mut PadReceiverPool,
    ) -> Result<()> {
        match self {
            PadDirBackend::IknpSender(ext) => {
                let batch = ext.extend(channel, n)?;
                out.push_batch(rot_from_cot_sender(ext.hash_fn(), &batch));
            }
            PadDirBackend::IknpReceiver(ext) => {
                let batch = ext.extend(channel, n)?;
                inn.push_batch(rot_from_cot_receiver(ext.hash_fn(), &batch));
            }
            PadDirBackend::DealerSender(stream) => {
                out.push_batch(RotSenderBatch {
                    pairs: dealer_pad_stream(stream, n).0,
                });
            }
            PadDirBackend::DealerReceiver(stream) => {
                inn.push_batch(RotReceiverBatch {
                    items: dealer_pad_stream(stream, n).1,
                });
            }
        }
        Ok(())
    }
}

fn dealer_pad_stream(stream: &mut ChaCha20Rng, n: usize) -> (Vec<(u128, u128)>, Vec<(bool, u128)>) {
    use rand::Rng;
    let mut pairs = Vec::with_capacity(n);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let p0: u128 = stream.random();
        let p1: u128 = stream.random();
        let chat: bool = stream.random();
        pairs.push((p0, p1));
        items.push((chat, if chat { p1 } else { p0 }));
    }
    (pairs, items)
}

/// The party's COT pad supply: a sender pool (this party masks corrections)
/// and a receiver pool (this party unmasks), each fed by its own extension
/// direction.
pub struct CotPads {
    party: Party,
    pub out: PadSenderPool,
    pub inn: PadReceiverPool,
    out_backend: PadDirBackend,
    in_backend: PadDirBackend,
    chunk: usize,
}

impl CotPads {
    /// Tops up the pools. Directions are always handled in the global order
    /// (P0-sends first), keeping the two parties' refills aligned.
    pub fn ensure(&mut self, channel: &mut Channel, n_out: usize, n_in: usize) -> Result<()> {
        let dirs: [(bool, usize); 2] = match self.party {
            Party::P0 => [(true, n_out), (false, n_in)],
            Party::P1 => [(false, n_in), (true, n_out)],
        };
        for (is_out, need) in dirs {
            let level = if is_out {
                self.out.level()
            } else {
                self.inn.level()
            };
            if level < need {
                let want = (need - level).max(self.chunk).div_ceil(64) * 64;
                let backend = if is_out {
                    &mut self.out_backend
                } else {
                    &mut self.in_backend
                };
                backend.refill(channel, want, &mut self.out, &mut self.inn)?;
            }
        }
        Ok(())
    }
}

/// One protocol session: role, channel, triple buffer, COT pads and RNG
/// streams. One channel is owned by one session at a time.
pub struct Session {
    pub party: Party,
    pub channel: Channel,
    pub ring: RingParams,
    pub mill_variant: MillVariant,
    pub triples: TripleBuffer,
    pub pads: CotPads,
    /// Fresh `m_s` values for the COT-sender role.
    pub msg_rng: ChaCha20Rng,
    /// Canonical re-sharing masks.
    pub reshare_rng: ChaCha20Rng,
    /// Input share splitting.
    pub input_rng: ChaCha20Rng,
    /// HE masks and encryption randomness.
    pub he_rng: ChaCha20Rng,
}

impl Session {
    /// Handshakes the session: agrees on a session id, checks the two
    /// parties' configurations match, sets up the OT machinery (or dealer
    /// streams) and optionally pre-fills the triple buffer.
    pub fn establish(mut channel: Channel, party: Party, cfg: &SessionConfig) -> Result<Session> {
        let streams = RngStreams::from_seed(cfg.seed);
        let mut setup_rng = streams.private("setup", party);
        let sid = exchange_session_id(&mut channel, &mut setup_rng)?;

        let digest = cfg.digest();
        let peer_digest = channel.exchange(Tag::Control, &digest)?;
        if peer_digest != digest {
            return Err(Error::config("session configurations disagree"));
        }

        let (triples, pads) = match cfg.triple_backend {
            TripleBackendKind::Iknp => {
                // Global extension order: pads P0-sends, pads P1-sends,
                // triples ROT-1 (server receives), triples ROT-2.
                let mut rng = streams.private("ot-setup", party);
                let (pads_out, pads_in, trip_recv, trip_send) = match party {
                    Party::P0 => {
                        let out =
                            OtSender::setup(&mut channel, Tag::CotPad, &sid, b"pads0", &mut rng)?;
                        let inn =
                            OtReceiver::setup(&mut channel, Tag::CotPad, &sid, b"pads1", &mut rng)?;
                        let recv = OtReceiver::setup(
                            &mut channel,
                            Tag::TripleGen,
                            &sid,
                            b"rot1",
                            &mut rng,
                        )?;
                        let send =
                            OtSender::setup(&mut channel, Tag::TripleGen, &sid, b"rot2", &mut rng)?;
                        (
                            PadDirBackend::IknpSender(out),
                            PadDirBackend::IknpReceiver(inn),
                            recv,
                            send,
                        )
                    }
                    Party::P1 => {
                        let inn =
                            OtReceiver::setup(&mut channel, Tag::CotPad, &sid, b"pads0", &mut rng)?;
                        let out =
                            OtSender::setup(&mut channel, Tag::CotPad, &sid, b"pads1", &mut rng)?;
                        let send =
                            OtSender::setup(&mut channel, Tag::TripleGen, &sid, b"rot1", &mut rng)?;
                        let recv = OtReceiver::setup(
                            &mut channel,
                            Tag::TripleGen,
                            &sid,
                            b"rot2",
                            &mut rng,
                        )?;
                        (
                            PadDirBackend::IknpSender(out),
                            PadDirBackend::IknpReceiver(inn),
                            recv,
                            send,
                        )
                    }
                };
                let gen = IknpTripleGen::new(party, trip_recv, trip_send);
                let triples = TripleBuffer::new(
                    TripleBackend::Iknp(Box::new(gen)),
                    cfg.triple_buffer,
                    cfg.triple_chunk,
                );
                let pads = CotPads {
                    party,
                    out: PadSenderPool::new(),
                    inn: PadReceiverPool::new(),
                    out_backend: pads_out,
                    in_backend: pads_in,
                    chunk: cfg.pad_chunk,
                };
                (triples, pads)
            }
            TripleBackendKind::Dealer => {
                if !cfg.allow_insecure {
                    return Err(Error::config(
                        "trusted-dealer backend is insecure; pass allow_insecure for tests",
                    ));
                }
                if cfg.seed.is_none() {
                    return Err(Error::config("dealer backend needs a shared seed"));
                }
                let dealer = DealerTripleGen::new(party, streams.dealer_seed("triples"));
                let triples = TripleBuffer::new(
                    TripleBackend::Dealer(dealer),
                    cfg.triple_buffer,
                    cfg.triple_chunk,
                );
                // Pad streams are keyed by direction, not by party, so the
                // two parties expand identical transcripts.
                let (out_label, in_label) = match party {
                    Party::P0 => ("pads0", "pads1"),
                    Party::P1 => ("pads1", "pads0"),
                };
                let pads = CotPads {
                    party,
                    out: PadSenderPool::new(),
                    inn: PadReceiverPool::new(),
                    out_backend: PadDirBackend::DealerSender(ChaCha20Rng::from_seed(
                        streams.dealer_seed(out_label),
                    )),
                    in_backend: PadDirBackend::DealerReceiver(ChaCha20Rng::from_seed(
                        streams.dealer_seed(in_label),
                    )),
                    chunk: cfg.pad_chunk,
                };
                (triples, pads)
            }
        };

        let mut session = Session {
            party,
            channel,
            ring: cfg.ring,
            mill_variant: cfg.mill_variant,
            triples,
            pads,
            msg_rng: streams.private("cot-msg", party),
            reshare_rng: streams.private("reshare", party),
            input_rng: streams.private("input", party),
            he_rng: streams.private("he", party),
        };
        if cfg.eager_fill {
            session.triples.fill(&mut session.channel)?;
        }
        Ok(session)
    }

    /// Takes `n` triples for use under `tag`, metering the consumption.
    pub fn take_triples(&mut self, tag: Tag, n: usize) -> Result<Vec<crate::triples::TripleShare>> {
        let out = self.triples.get(n, &mut self.channel)?;
        self.channel.meter_mut().note_triples(tag, n as u64);
        Ok(out)
    }

    /// Tops up COT pads for a step consuming `n_out` sender-side and `n_in`
    /// receiver-side instances.
    pub fn ensure_pads(&mut self, n_out: usize, n_in: usize) -> Result<()> {
        self.pads.ensure(&mut self.channel, n_out, n_in)
    }
}
