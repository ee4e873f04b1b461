//! Oblivious-transfer foundation: base OT over a prime-order group, IKNP
//! extension into random-choice COT/ROT batches, and chosen-input `COT(2,b)`.
//!
//! Extension roles are swapped relative to base OT: the extension sender runs
//! base OT as receiver, its choice bits becoming the global correlation Δ.
//! Random-choice COT instances satisfy `m_c = m ⊕ c·Δ`; hashing with the
//! session-keyed correlation-robust hash destroys the correlation and yields
//! independent ROT pairs, which back both bit-triple generation and the pads
//! for chosen-input COT.

mod base;
mod iknp;

pub use base::{base_ot_receiver, base_ot_sender};
pub use iknp::{transpose_bits, OtReceiver, OtSender};

use std::collections::VecDeque;

use aes::cipher::{BlockCipherEncrypt, KeyInit};
use aes::Aes128;
use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::bits::{pack_bits, pack_ring, unpack_bits, unpack_ring};
use crate::rings::RingParams;
use crate::transport::{Channel, Tag};
use crate::{Error, Result};

/// Computational security parameter: base OT count, Δ width, ROT string width.
pub const KAPPA: usize = 128;

/// Sender view of a random-choice COT batch: per-instance base strings plus
/// the session-global correlation Δ.
pub struct RcCotSenderBatch {
    pub(crate) delta: u128,
    pub(crate) msgs: Vec<u128>,
    pub(crate) base_index: u64,
}

/// Receiver view: choice bit and `m_c = m ⊕ c·Δ` per instance.
pub struct RcCotReceiverBatch {
    pub(crate) choices: Vec<bool>,
    pub(crate) msgs: Vec<u128>,
    pub(crate) base_index: u64,
}

/// Sender view of hashed ROT pairs.
pub struct RotSenderBatch {
    pub pairs: Vec<(u128, u128)>,
}

/// Receiver view of hashed ROTs: `(c, r_c)`.
pub struct RotReceiverBatch {
    pub items: Vec<(bool, u128)>,
}

#[cfg(any(test, feature = "test-reveal"))]
impl RcCotSenderBatch {
    pub fn reveal_delta(&self) -> u128 {
        self.delta
    }
    pub fn reveal_msgs(&self) -> &[u128] {
        &self.msgs
    }
}

#[cfg(any(test, feature = "test-reveal"))]
impl RcCotReceiverBatch {
    pub fn reveal_choices(&self) -> &[bool] {
        &self.choices
    }
    pub fn reveal_msgs(&self) -> &[u128] {
        &self.msgs
    }
}

impl RcCotSenderBatch {
    pub fn len(&self) -> usize {
        self.msgs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.msgs.is_empty()
    }
}

impl RcCotReceiverBatch {
    pub fn len(&self) -> usize {
        self.msgs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.msgs.is_empty()
    }
}

/// Fixed-key-per-session correlation-robust hash: AES-128 in MMO mode with
/// the instance index folded into the block, so strings cannot be replayed
/// across instances.
#[derive(Clone)]
pub struct CrHash {
    cipher: Aes128,
}

impl CrHash {
    /// Keyed per session and per extension direction; the label keeps the two
    /// directions' instance-index spaces separate.
    pub fn new(session_id: &[u8; 32], label: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(b"seconnds-crhash");
        h.update(session_id);
        h.update(label);
        let digest = h.finalize();
        let key: [u8; 16] = digest[..16].try_into().unwrap();
        CrHash {
            cipher: Aes128::new(&key.into()),
        }
    }

    #[inline]
    pub fn hash(&self, index: u64, x: u128) -> u128 {
        let tweak = (index as u128) | ((index as u128) << 64);
        let t = x ^ tweak;
        let mut block = aes::Block::from(t.to_le_bytes());
        self.cipher.encrypt_block(&mut block);
        u128::from_le_bytes(block.into()) ^ t
    }
}

/// Hashes a sender COT batch into ROT pairs `(H(i,m), H(i,m⊕Δ))`.
pub fn rot_from_cot_sender(hash: &CrHash, batch: &RcCotSenderBatch) -> RotSenderBatch {
    let pairs = crate::par::map_range(batch.msgs.len(), |i| {
        let idx = batch.base_index + i as u64;
        let m = batch.msgs[i];
        (hash.hash(idx, m), hash.hash(idx, m ^ batch.delta))
    });
    RotSenderBatch { pairs }
}

/// Hashes a receiver COT batch into `(c, H(i,m_c))`.
pub fn rot_from_cot_receiver(hash: &CrHash, batch: &RcCotReceiverBatch) -> RotReceiverBatch {
    let items = crate::par::map_range(batch.msgs.len(), |i| {
        let idx = batch.base_index + i as u64;
        (batch.choices[i], hash.hash(idx, batch.msgs[i]))
    });
    RotReceiverBatch { items }
}

/// ROT pads held by a party for its COT-sender role in one direction.
pub struct PadSenderPool {
    pads: VecDeque<(u128, u128)>,
}

/// ROT pads for the COT-receiver role: random choice plus the chosen string.
pub struct PadReceiverPool {
    pads: VecDeque<(bool, u128)>,
}

impl PadSenderPool {
    pub fn new() -> Self {
        PadSenderPool {
            pads: VecDeque::new(),
        }
    }
    pub fn level(&self) -> usize {
        self.pads.len()
    }
    pub fn push_batch(&mut self, batch: RotSenderBatch) {
        self.pads.extend(batch.pairs);
    }
    fn pop(&mut self) -> Result<(u128, u128)> {
        self.pads
            .pop_front()
            .ok_or_else(|| Error::state("COT sender pad pool exhausted"))
    }
}

impl Default for PadSenderPool {
    fn default() -> Self {
        Self::new()
    }
}

impl PadReceiverPool {
    pub fn new() -> Self {
        PadReceiverPool {
            pads: VecDeque::new(),
        }
    }
    pub fn level(&self) -> usize {
        self.pads.len()
    }
    pub fn push_batch(&mut self, batch: RotReceiverBatch) {
        self.pads.extend(batch.items);
    }
    fn pop(&mut self) -> Result<(bool, u128)> {
        self.pads
            .pop_front()
            .ok_or_else(|| Error::state("COT receiver pad pool exhausted"))
    }
}

impl Default for PadReceiverPool {
    fn default() -> Self {
        Self::new()
    }
}

/// Pads a receiver keeps between the two COT steps: `(c_hat, pad)`.
pub type KeptPads = Vec<(bool, u128)>;

/// Receiver half, step 1 of `COT(2,b)`: derandomize the pad choices.
/// Returns the flip bits to transmit and the pads kept for step 2.
pub fn cot_recv_flips(
    pool: &mut PadReceiverPool,
    choices: &[bool],
) -> Result<(Vec<bool>, KeptPads)> {
    let mut flips = Vec::with_capacity(choices.len());
    let mut kept = Vec::with_capacity(choices.len());
    for &c in choices {
        let (chat, pad) = pool.pop()?;
        flips.push(c ^ chat);
        kept.push((chat, pad));
    }
    Ok((flips, kept))
}

/// Sender half of `COT(2,b)`: for each instance draws a fresh `m_s`, then
/// masks the two candidate values `m_s + j·δ` with the pads permuted by the
/// receiver's flip bit. Returns `(m_s values, wire payload)`.
pub fn cot_send_corrections(
    pool: &mut PadSenderPool,
    params: &RingParams,
    deltas: &[u64],
    flips: &[bool],
    msg_rng: &mut ChaCha20Rng,
) -> Result<(Vec<u64>, Vec<u8>)> {
    if deltas.len() != flips.len() {
        return Err(Error::domain("COT delta/flip length mismatch"));
    }
    let mask = params.mask();
    let mut ms = Vec::with_capacity(deltas.len());
    let mut corrections = Vec::with_capacity(deltas.len() * 2);
    for (&delta, &f) in deltas.iter().zip(flips) {
        let (p0, p1) = pool.pop()?;
        let m_s = msg_rng.next_u64() & mask;
        // u_j masks m_s + j*delta with the pad the receiver holds iff c = j.
        let (pad_for_0, pad_for_1) = if f { (p1, p0) } else { (p0, p1) };
        corrections.push(params.sub(m_s, pad_for_0 as u64 & mask));
        corrections.push(params.sub(params.add(m_s, delta), pad_for_1 as u64 & mask));
        ms.push(m_s);
    }
    Ok((ms, pack_ring(&corrections, params.bits)))
}

/// Receiver half, step 2: unmask the correction for the true choice.
pub fn cot_recv_outputs(
    params: &RingParams,
    choices: &[bool],
    kept: &[(bool, u128)],
    payload: &[u8],
) -> Result<Vec<u64>> {
    let corrections = unpack_ring(payload, params.bits, choices.len() * 2);
    let mask = params.mask();
    let mut out = Vec::with_capacity(choices.len());
    for (i, (&c, &(_, pad))) in choices.iter().zip(kept).enumerate() {
        let u = corrections[2 * i + usize::from(c)];
        out.push(params.add(u, pad as u64 & mask));
    }
    Ok(out)
}

/// One-direction batched `COT(2,b)` as the sender. Two rounds: receive flip
/// bits, answer with masked corrections.
pub fn cot_send_batch(
    channel: &mut Channel,
    tag: Tag,
    pool: &mut PadSenderPool,
    params: &RingParams,
    deltas: &[u64],
    msg_rng: &mut ChaCha20Rng,
) -> Result<Vec<u64>> {
    let flips = unpack_bits(&channel.recv_frame(tag)?, deltas.len());
    let (ms, payload) = cot_send_corrections(pool, params, deltas, &flips, msg_rng)?;
    channel.send_frame(tag, &payload)?;
    channel.meter_mut().note_cots(tag, deltas.len() as u64);
    Ok(ms)
}

/// One-direction batched `COT(2,b)` as the receiver.
pub fn cot_recv_batch(
    channel: &mut Channel,
    tag: Tag,
    pool: &mut PadReceiverPool,
    params: &RingParams,
    choices: &[bool],
) -> Result<Vec<u64>> {
    let (flips, kept) = cot_recv_flips(pool, choices)?;
    channel.send_frame(tag, &pack_bits(&flips))?;
    let payload = channel.recv_frame(tag)?;
    channel.meter_mut().note_cots(tag, choices.len() as u64);
    cot_recv_outputs(params, choices, &kept, &payload)
}

/// Both-direction batched `COT(2,b)`: each party is sender for `deltas` and
/// receiver for `choices`, coalesced into two exchange rounds.
#[allow(clippy::too_many_arguments)]
pub fn cot_bidir_batch(
    channel: &mut Channel,
    tag: Tag,
    out_pool: &mut PadSenderPool,
    in_pool: &mut PadReceiverPool,
    params: &RingParams,
    deltas: &[u64],
    choices: &[bool],
    msg_rng: &mut ChaCha20Rng,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let (my_flips, kept) = cot_recv_flips(in_pool, choices)?;
    let peer_flips = unpack_bits(&channel.exchange(tag, &pack_bits(&my_flips))?, deltas.len());
    let (ms, payload) = cot_send_corrections(out_pool, params, deltas, &peer_flips, msg_rng)?;
    let peer_payload = channel.exchange(tag, &payload)?;
    let mr = cot_recv_outputs(params, choices, &kept, &peer_payload)?;
    channel
        .meter_mut()
        .note_cots(tag, (deltas.len() + choices.len()) as u64);
    Ok((ms, mr))
}

/// Fresh session id from both parties' nonces.
pub fn exchange_session_id(channel: &mut Channel, rng: &mut ChaCha20Rng) -> Result<[u8; 32]> {
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce);
    let peer = channel.exchange(Tag::Control, &nonce)?;
    if peer.len() != 16 {
        return Err(Error::Handshake("bad session nonce length".into()));
    }
    // Order-independent digest so both sides derive the same id.
    let (lo, hi) = if nonce.as_slice() <= peer.as_slice() {
        (nonce.to_vec(), peer)
    } else {
        (peer, nonce.to_vec())
    };
    let mut h = Sha256::new();
    h.update(b"seconnds-session");
    h.update(&lo);
    h.update(&hi);
    Ok(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn crhash_distinct_indices_domain_separate() {
        let h = CrHash::new(&[7u8; 32], b"x");
        assert_ne!(h.hash(0, 42), h.hash(1, 42));
    }

    #[test]
    fn crhash_avalanche_spot_check() {
        let h = CrHash::new(&[9u8; 32], b"x");
        for bit in [0u32, 17, 63, 100, 127] {
            let base = h.hash(5, 0xdead_beef);
            let flipped = h.hash(5, 0xdead_beef ^ (1u128 << bit));
            let diff = (base ^ flipped).count_ones();
            assert!(diff > 30, "weak diffusion: {diff} bits for flip at {bit}");
        }
    }

    #[test]
    fn cot_correction_invariant() {
        // Pure pad-level check: m_r - m_s = c*delta for all (c, f) patterns.
        let params = RingParams::new(8, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for case in 0..10_000u64 {
            let delta = rng.next_u64() & params.mask();
            let c = case % 2 == 1;
            let chat = (case / 2) % 2 == 1;
            let p0 = rng.next_u64() as u128;
            let p1 = rng.next_u64() as u128;

            let mut spool = PadSenderPool::new();
            spool.pads.push_back((p0, p1));
            let mut rpool = PadReceiverPool::new();
            rpool.pads.push_back((chat, if chat { p1 } else { p0 }));

            let (flips, kept) = cot_recv_flips(&mut rpool, &[c]).unwrap();
            let (ms, payload) =
                cot_send_corrections(&mut spool, &params, &[delta], &flips, &mut rng).unwrap();
            let mr = cot_recv_outputs(&params, &[c], &kept, &payload).unwrap();
            let expect = if c { params.add(ms[0], delta) } else { ms[0] };
            assert_eq!(mr[0], expect, "case {case}");
        }
    }

    #[test]
    fn cot_zero_delta_gives_ms() {
        let params = RingParams::new(8, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        for c in [false, true] {
            let mut spool = PadSenderPool::new();
            spool.pads.push_back((111, 222));
            let mut rpool = PadReceiverPool::new();
            rpool.pads.push_back((false, 111));
            let (flips, kept) = cot_recv_flips(&mut rpool, &[c]).unwrap();
            let (ms, payload) =
                cot_send_corrections(&mut spool, &params, &[0], &flips, &mut rng).unwrap();
            let mr = cot_recv_outputs(&params, &[c], &kept, &payload).unwrap();
            assert_eq!(mr[0], ms[0]);
        }
    }

    #[test]
    fn pad_exhaustion_is_state_error() {
        let mut pool = PadReceiverPool::new();
        assert!(matches!(
            cot_recv_flips(&mut pool, &[true]),
            Err(Error::State(_))
        ));
    }
}
