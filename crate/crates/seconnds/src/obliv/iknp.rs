//! IKNP-style OT extension. `KAPPA` base ROTs seed per-column PRG streams;
//! each `extend(n)` costs one `n·KAPPA`-bit message receiver→sender plus a
//! 128-column bit-matrix transpose on both sides. Column streams persist
//! across extends, so both parties must extend in lockstep.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::transport::{Channel, Tag};
use crate::{Error, Result};

use super::base::{base_ot_receiver, base_ot_sender};
use super::{CrHash, RcCotReceiverBatch, RcCotSenderBatch, KAPPA};

fn column_prg(pad: u128) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"seconnds-iknp-col");
    h.update(pad.to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Extension sender: holds the global correlation Δ. Its base-OT role is
/// receiver, with Δ as the choice bits.
pub struct OtSender {
    delta: u128,
    col_prgs: Vec<ChaCha20Rng>,
    next_index: u64,
    hash: CrHash,
    tag: Tag,
}

/// Extension receiver: holds both PRG streams per column and samples the
/// random choice bits of each batch.
pub struct OtReceiver {
    col_prgs0: Vec<ChaCha20Rng>,
    col_prgs1: Vec<ChaCha20Rng>,
    choice_rng: ChaCha20Rng,
    next_index: u64,
    hash: CrHash,
    tag: Tag,
}

impl OtSender {
    pub fn setup(
        channel: &mut Channel,
        tag: Tag,
        sid: &[u8; 32],
        label: &[u8],
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        let delta_bits: Vec<bool> = (0..KAPPA).map(|_| rng.random()).collect();
        let pads = base_ot_receiver(channel, sid, &delta_bits, rng)?;
        let mut delta = 0u128;
        for (j, &b) in delta_bits.iter().enumerate() {
            if b {
                delta |= 1 << j;
            }
        }
        Ok(OtSender {
            delta,
            col_prgs: pads.into_iter().map(column_prg).collect(),
            next_index: 0,
            hash: CrHash::new(sid, label),
            tag,
        })
    }

    /// Receives the masked columns for a batch of `n` instances (rounded up
    /// to a multiple of 64) and returns the sender-side COT view.
    pub fn extend(&mut self, channel: &mut Channel, n: usize) -> Result<RcCotSenderBatch> {
        let payload = channel.recv_frame(self.tag)?;
        self.extend_with_payload(&payload, n)
    }

    /// Same as [`OtSender::extend`] with the receiver's message already in
    /// hand (used when the two directions share one exchange).
    pub fn extend_with_payload(&mut self, payload: &[u8], n: usize) -> Result<RcCotSenderBatch> {
        if n == 0 {
            return Err(Error::domain("extension batch must be non-empty"));
        }
        let n_pad = n.div_ceil(64) * 64;
        let col_bytes = n_pad / 8;
        if payload.len() != KAPPA * col_bytes {
            return Err(Error::State(format!(
                "extension size mismatch: got {} bytes, want {}",
                payload.len(),
                KAPPA * col_bytes
            )));
        }
        let mut cols = Vec::with_capacity(KAPPA);
        for j in 0..KAPPA {
            let mut s = vec![0u8; col_bytes];
            self.col_prgs[j].fill_bytes(&mut s);
            if (self.delta >> j) & 1 == 1 {
                let u = &payload[j * col_bytes..(j + 1) * col_bytes];
                for (sb, ub) in s.iter_mut().zip(u) {
                    *sb ^= ub;
                }
            }
            cols.push(s);
        }
        let msgs = transpose_bits(&cols, n_pad);
        let batch = RcCotSenderBatch {
            delta: self.delta,
            msgs,
            base_index: self.next_index,
        };
        self.next_index += n_pad as u64;
        Ok(batch)
    }

    pub fn hash_fn(&self) -> &CrHash {
        &self.hash
    }

    #[cfg(any(test, feature = "test-reveal"))]
    pub fn reveal_delta(&self) -> u128 {
        self.delta
    }
}

impl OtReceiver {
    pub fn setup(
        channel: &mut Channel,
        tag: Tag,
        sid: &[u8; 32],
        label: &[u8],
        rng: &mut ChaCha20Rng,
    ) -> Result<Self> {
        let pairs = base_ot_sender(channel, sid, rng)?;
        let mut choice_seed = [0u8; 32];
        rng.fill_bytes(&mut choice_seed);
        let (prgs0, prgs1) = pairs
            .into_iter()
            .map(|(k0, k1)| (column_prg(k0), column_prg(k1)))
            .unzip();
        Ok(OtReceiver {
            col_prgs0: prgs0,
            col_prgs1: prgs1,
            choice_rng: ChaCha20Rng::from_seed(choice_seed),
            next_index: 0,
            hash: CrHash::new(sid, label),
            tag,
        })
    }

    /// Sends the masked columns for `n` random-choice instances and returns
    /// the receiver-side COT view.
    pub fn extend(&mut self, channel: &mut Channel, n: usize) -> Result<RcCotReceiverBatch> {
        let (payload, batch) = self.extend_prepare(n)?;
        channel.send_frame(self.tag, &payload)?;
        Ok(batch)
    }

    /// Builds the wire message and local view without touching the channel,
    /// so callers can coalesce it into a bidirectional exchange.
    pub fn extend_prepare(&mut self, n: usize) -> Result<(Vec<u8>, RcCotReceiverBatch)> {
        if n == 0 {
            return Err(Error::domain("extension batch must be non-empty"));
        }
        let n_pad = n.div_ceil(64) * 64;
        let col_bytes = n_pad / 8;
        let choices: Vec<bool> = (0..n_pad).map(|_| self.choice_rng.random()).collect();
        let c_bytes = crate::bits::pack_bits(&choices);

        let mut payload = vec![0u8; KAPPA * col_bytes];
        let mut cols0 = Vec::with_capacity(KAPPA);
        for j in 0..KAPPA {
            let mut t0 = vec![0u8; col_bytes];
            self.col_prgs0[j].fill_bytes(&mut t0);
            let u = &mut payload[j * col_bytes..(j + 1) * col_bytes];
            self.col_prgs1[j].fill_bytes(u);
            for ((ub, t0b), cb) in u.iter_mut().zip(&t0).zip(&c_bytes) {
                *ub ^= t0b ^ cb;
            }
            cols0.push(t0);
        }
        let msgs = transpose_bits(&cols0, n_pad);
        let batch = RcCotReceiverBatch {
            choices,
            msgs,
            base_index: self.next_index,
        };
        self.next_index += n_pad as u64;
        Ok((payload, batch))
    }

    pub fn hash_fn(&self) -> &CrHash {
        &self.hash
    }
}

/// Transposes `KAPPA` packed bit columns of `n` bits into `n` row words.
pub fn transpose_bits(cols: &[Vec<u8>], n: usize) -> Vec<u128> {
    assert_eq!(cols.len(), KAPPA);
    let nbytes = n.div_ceil(8);
    let blocks = crate::par::map_range(nbytes, |k| {
        let mut block = [0u128; 8];
        for (j, col) in cols.iter().enumerate() {
            let byte = col[k];
            if byte == 0 {
                continue;
            }
            for (t, row) in block.iter_mut().enumerate() {
                if (byte >> t) & 1 == 1 {
                    *row |= 1 << j;
                }
            }
        }
        block
    });
    let mut rows = Vec::with_capacity(nbytes * 8);
    for b in blocks {
        rows.extend_from_slice(&b);
    }
    rows.truncate(n);
    rows
}
