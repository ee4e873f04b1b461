//! Base OT: a simplest-OT style construction over the Ristretto prime-order
//! group. One key-agreement message each way establishes `KAPPA` independent
//! ROT pairs whose pads are hashes of group elements.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::RngCore;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::transport::{Channel, Tag};
use crate::{Error, Result};

use super::KAPPA;

fn random_scalar(rng: &mut ChaCha20Rng) -> Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

fn pad_from_point(sid: &[u8; 32], index: usize, point: &RistrettoPoint) -> u128 {
    let mut h = Sha256::new();
    h.update(b"seconnds-baseot");
    h.update(sid);
    h.update((index as u64).to_le_bytes());
    h.update(point.compress().as_bytes());
    let d = h.finalize();
    u128::from_le_bytes(d[..16].try_into().unwrap())
}

/// Sender side: outputs `KAPPA` pad pairs `(r_0, r_1)`.
pub fn base_ot_sender(
    channel: &mut Channel,
    sid: &[u8; 32],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<(u128, u128)>> {
    let a = random_scalar(rng);
    let big_a = &a * RISTRETTO_BASEPOINT_TABLE;
    channel.send_frame(Tag::BaseOt, big_a.compress().as_bytes())?;

    let payload = channel.recv_frame(Tag::BaseOt)?;
    if payload.len() != KAPPA * 32 {
        return Err(Error::Handshake(format!(
            "base OT expects {KAPPA} points, got {} bytes",
            payload.len()
        )));
    }
    let a_big_a = big_a * a;
    let mut pads = Vec::with_capacity(KAPPA);
    for i in 0..KAPPA {
        let raw: [u8; 32] = payload[i * 32..(i + 1) * 32].try_into().unwrap();
        let b_point = CompressedRistretto(raw)
            .decompress()
            .ok_or_else(|| Error::Handshake(format!("invalid group element at index {i}")))?;
        let shared = b_point * a;
        pads.push((
            pad_from_point(sid, i, &shared),
            pad_from_point(sid, i, &(shared - a_big_a)),
        ));
    }
    Ok(pads)
}

/// Receiver side with chosen bits: outputs `r_{c_i}` per instance.
pub fn base_ot_receiver(
    channel: &mut Channel,
    sid: &[u8; 32],
    choices: &[bool],
    rng: &mut ChaCha20Rng,
) -> Result<Vec<u128>> {
    assert_eq!(choices.len(), KAPPA);
    let payload = channel.recv_frame(Tag::BaseOt)?;
    if payload.len() != 32 {
        return Err(Error::Handshake("bad base OT first message".into()));
    }
    let big_a = CompressedRistretto(payload.try_into().unwrap())
        .decompress()
        .ok_or_else(|| Error::Handshake("invalid sender group element".into()))?;

    let mut out_msg = Vec::with_capacity(KAPPA * 32);
    let mut pads = Vec::with_capacity(KAPPA);
    for (i, &c) in choices.iter().enumerate() {
        let b = random_scalar(rng);
        let mut point = &b * RISTRETTO_BASEPOINT_TABLE;
        if c {
            point += big_a;
        }
        out_msg.extend_from_slice(point.compress().as_bytes());
        pads.push(pad_from_point(sid, i, &(big_a * b)));
    }
    channel.send_frame(Tag::BaseOt, &out_msg)?;
    Ok(pads)
}
