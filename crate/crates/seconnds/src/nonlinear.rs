//! Secure nonlinear layers on arithmetic shares: dReLU, ReLU, 1-bit
//! approximate truncation, max/average pooling and argmax.
//!
//! dReLU splits each share into its top bit and low part, runs the
//! millionaires' protocol at width `b-1` on the low parts to get the
//! half-ring wrap bit `w`, and outputs `MSB ^ w ^ p'`. ReLU then multiplexes
//! fresh shares of the input or zero through two `COT(2,b)`, one per
//! direction. Truncation divides shares locally and corrects with the
//! arithmetic wrap bit; the result is off by at most one LSB from the
//! unsigned floor `i / 2^s`.

use crate::boolean::{and_batch, b2a_batch};
use crate::compare::{mill_batch, MillConfig};
use crate::obliv::cot_bidir_batch;
use crate::session::{Party, Session};
use crate::transport::Tag;
use crate::{Error, Result};

/// Batched dReLU: shares of `1{signed_view(i) >= 0}` as XOR-shared bits.
pub fn drelu_batch(s: &mut Session, tag: Tag, shares: &[u64]) -> Result<Vec<bool>> {
    let ring = s.ring;
    if ring.bits < 2 {
        return Err(Error::domain("dReLU needs bitwidth >= 2"));
    }
    let half_mask = crate::rings::mask_for(ring.bits - 1);
    let msbs: Vec<bool> = shares.iter().map(|&x| ring.msb(x)).collect();
    let lows: Vec<u64> = shares.iter().map(|&x| x & half_mask).collect();

    // Wrap of the low parts past 2^{b-1}-1, as a width b-1 comparison.
    let mill_inputs: Vec<u64> = match s.party {
        Party::P0 => lows,
        Party::P1 => lows.iter().map(|&l| half_mask - l).collect(),
    };
    let cfg = MillConfig::new(ring.bits - 1, true, s.mill_variant)?;
    let wraps = mill_batch(s, tag, &cfg, &mill_inputs)?;

    let p_is_zero = !s.party.bit();
    Ok(msbs
        .iter()
        .zip(&wraps)
        .map(|(&m, &w)| m ^ w ^ p_is_zero)
        .collect())
}

/// Secure multiplexer: shares of `d * x` from bit shares `d` and arithmetic
/// shares `x`, via two `COT(2,b)` per element (one per direction).
pub fn mux_batch(s: &mut Session, tag: Tag, d: &[bool], x: &[u64]) -> Result<Vec<u64>> {
    if d.len() != x.len() {
        return Err(Error::domain("mux length mismatch"));
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let ring = s.ring;
    let deltas: Vec<u64> = d
        .iter()
        .zip(x)
        .map(|(&db, &xv)| if db { ring.neg(xv) } else { xv })
        .collect();
    s.ensure_pads(n, n)?;
    let (ms, mr) = cot_bidir_batch(
        &mut s.channel,
        tag,
        &mut s.pads.out,
        &mut s.pads.inn,
        &ring,
        &deltas,
        d,
        &mut s.msg_rng,
    )?;
    Ok((0..n)
        .map(|i| {
            let local = if d[i] { x[i] } else { 0 };
            ring.add(local, ring.sub(mr[i], ms[i]))
        })
        .collect())
}

/// Batched ReLU: exact `max(0, signed_view(i))` re-encoded in the ring.
pub fn relu_batch(s: &mut Session, tag: Tag, shares: &[u64]) -> Result<Vec<u64>> {
    let d = drelu_batch(s, tag, shares)?;
    mux_batch(s, tag, &d, shares)
}

/// Arithmetic shares of the full-ring wrap bit `1{s0 + s1 >= 2^b}`.
///
/// With the value known to sit below `2^{b-1}` the wrap collapses to
/// `MSB(s0) | MSB(s1)` and costs a single AND (via De Morgan, each party
/// feeding the complement of its own top bit); otherwise it takes a full
/// width-`b` comparison.
fn wrap_bits_arith(s: &mut Session, tag: Tag, shares: &[u64], msb_known: bool) -> Result<Vec<u64>> {
    let ring = s.ring;
    let p = s.party.bit();
    let wraps: Vec<bool> = if msb_known {
        let not_msbs: Vec<bool> = shares.iter().map(|&x| !ring.msb(x)).collect();
        let zeros = vec![false; shares.len()];
        // Slot routing: party 1 feeds the first operand, party 0 the second.
        let (lhs, rhs) = if p {
            (not_msbs, zeros)
        } else {
            (zeros, not_msbs)
        };
        let nor = and_batch(s, tag, &lhs, &rhs)?;
        // w = !(!m0 & !m1); party 0 flips its share.
        nor.into_iter().map(|z| z ^ !p).collect()
    } else {
        let inputs: Vec<u64> = match s.party {
            Party::P0 => shares.to_vec(),
            Party::P1 => shares.iter().map(|&x| ring.mask() - x).collect(),
        };
        let cfg = MillConfig::new(ring.bits, true, s.mill_variant)?;
        mill_batch(s, tag, &cfg, &inputs)?
    };
    b2a_batch(s, tag, &wraps)
}

/// Batched 1-bit approximate truncation by `2^shift`.
///
/// Result reconstructs to `floor(i / 2^shift)` or one below it, with `i`
/// read as the unsigned ring residue. `msb_known` requires `i < 2^{b-1}`
/// (e.g. post-ReLU) and spends 1 AND + 1 COT instead of `2b-1` ANDs + 1 COT.
pub fn truncate_batch(
    s: &mut Session,
    tag: Tag,
    shares: &[u64],
    shift: u32,
    msb_known: bool,
) -> Result<Vec<u64>> {
    let ring = s.ring;
    if shift == 0 || shift >= ring.bits {
        return Err(Error::domain(format!(
            "shift {shift} out of range 1..{}",
            ring.bits
        )));
    }
    let wrap = wrap_bits_arith(s, tag, shares, msb_known)?;
    let scale = 1u64 << (ring.bits - shift);
    Ok(shares
        .iter()
        .zip(&wrap)
        .map(|(&x, &w)| ring.sub(x >> shift, ring.mul(w, scale)))
        .collect())
}

/// Batched max pooling over uniform windows (`n` windows of `w` elements,
/// row-major). Runs `w-1` ReLU steps, each batched across the windows, and
/// reconstructs to the signed maximum exactly as long as window elements
/// stay within half the signed range.
pub fn maxpool_batch(s: &mut Session, tag: Tag, windows: &[u64], w: usize) -> Result<Vec<u64>> {
    if w == 0 {
        return Err(Error::domain("empty pooling window"));
    }
    if !windows.len().is_multiple_of(w) {
        return Err(Error::domain("window data not a multiple of window size"));
    }
    let n = windows.len() / w;
    let ring = s.ring;
    let mut acc: Vec<u64> = (0..n).map(|j| windows[j * w]).collect();
    for k in 1..w {
        let column: Vec<u64> = (0..n).map(|j| windows[j * w + k]).collect();
        let diffs: Vec<u64> = acc
            .iter()
            .zip(&column)
            .map(|(&o, &v)| ring.sub(o, v))
            .collect();
        let rectified = relu_batch(s, tag, &diffs)?;
        acc = rectified
            .iter()
            .zip(&column)
            .map(|(&r, &v)| ring.add(r, v))
            .collect();
    }
    Ok(acc)
}

/// Batched average pooling with a public window size. Window sums are local;
/// the division is share-local with a wrap correction. Power-of-two windows
/// route through truncation (error at most 1 LSB); other sizes carry a
/// one-sided error in `{-2..0}` LSBs against `floor(sum / w)` on the unsigned
/// residue.
pub fn avgpool_batch(s: &mut Session, tag: Tag, windows: &[u64], w: usize) -> Result<Vec<u64>> {
    if w == 0 {
        return Err(Error::domain("empty pooling window"));
    }
    if !windows.len().is_multiple_of(w) {
        return Err(Error::domain("window data not a multiple of window size"));
    }
    let ring = s.ring;
    let n = windows.len() / w;
    let sums: Vec<u64> = (0..n)
        .map(|j| {
            windows[j * w..(j + 1) * w]
                .iter()
                .fold(0u64, |acc, &v| ring.add(acc, v))
        })
        .collect();
    if w == 1 {
        return Ok(sums);
    }
    if w.is_power_of_two() {
        return truncate_batch(s, tag, &sums, w.trailing_zeros(), false);
    }
    let wrap = wrap_bits_arith(s, tag, &sums, false)?;
    let divisor = w as u64;
    let ring_over_w = ring.mask() / divisor; // floor(2^b / w), 2^b = mask+1 for w not a power of two
    let bias = if s.party == Party::P0 { 1 } else { 0 };
    Ok(sums
        .iter()
        .zip(&wrap)
        .map(|(&x, &wr)| ring.sub(ring.sub(x / divisor, ring.mul(wr, ring_over_w)), bias))
        .collect())
}

/// Tournament argmax over `k` shared values: `k-1` rounds of one dReLU on
/// the running difference plus a two-lane multiplexer that updates both the
/// value and index shares. Ties keep the lower index. Returns index shares;
/// open them to the client only.
pub fn argmax_shares(s: &mut Session, tag: Tag, values: &[u64]) -> Result<(u64, u64)> {
    if values.is_empty() {
        return Err(Error::domain("argmax over empty input"));
    }
    let ring = s.ring;
    let is_p0 = s.party == Party::P0;
    let mut cur_val = values[0];
    let mut cur_idx = 0u64; // shares of the public constant 0
    for (j, &cand) in values.iter().enumerate().skip(1) {
        let val_diff = ring.sub(cur_val, cand);
        // index difference to the public candidate index j: only party 0
        // offsets by the constant
        let idx_diff = if is_p0 {
            ring.sub(cur_idx, j as u64)
        } else {
            cur_idx
        };
        let d = drelu_batch(s, tag, &[val_diff])?;
        let keep = [d[0], d[0]];
        let muxed = mux_batch(s, tag, &keep, &[val_diff, idx_diff])?;
        // keep-current selects the difference; adding the candidate back
        // yields the winner's shares for both lanes
        cur_val = ring.add(muxed[0], cand);
        cur_idx = ring.add(muxed[1], if is_p0 { j as u64 } else { 0 });
    }
    Ok((cur_idx, cur_val))
}

/// Opens index shares toward the client: the server sends its share, the
/// client reconstructs, the server learns nothing.
pub fn open_index_to_client(s: &mut Session, idx_share: u64) -> Result<Option<u64>> {
    let ring = s.ring;
    match s.party {
        Party::P0 => {
            s.channel.send_frame(
                Tag::LabelOpen,
                &crate::bits::pack_ring(&[idx_share], ring.bits),
            )?;
            Ok(None)
        }
        Party::P1 => {
            let payload = s.channel.recv_frame(Tag::LabelOpen)?;
            let peer = crate::bits::unpack_ring(&payload, ring.bits, 1)[0];
            Ok(Some(ring.add(peer, idx_share)))
        }
    }
}

/// Full argmax: tournament plus client-side opening.
pub fn argmax_open(s: &mut Session, tag: Tag, values: &[u64]) -> Result<Option<u64>> {
    let (idx_share, _) = argmax_shares(s, tag, values)?;
    open_index_to_client(s, idx_share)
}
