//! GMW boolean layer: batched AND from Beaver triples, free XOR, B2A share
//! conversion, and canonical re-sharing of arithmetic shares.
//!
//! An AND batch is one exchange round: both parties coalesce all correction
//! bits `e = a ^ x`, `f = b ^ y` into a single frame each way (4 bits per
//! gate on the wire in total), reconstruct `e, f`, and output
//! `z = (p' & e & f) ^ (e & b) ^ (f & a) ^ c`.

use crate::bits::{pack_bits, pack_ring, unpack_bits, unpack_ring};
use crate::session::{Party, Session};
use crate::transport::Tag;
use crate::{Error, Result};

/// Element-wise AND on XOR-shared bit vectors. Consumes one triple per
/// element; all traffic runs under the calling protocol's `tag`.
pub fn and_batch(s: &mut Session, tag: Tag, xs: &[bool], ys: &[bool]) -> Result<Vec<bool>> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "AND batch length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let k = xs.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let triples = s.take_triples(tag, k)?;
    s.channel.meter_mut().note_and_gates(tag, k as u64);

    // e||f correction bits, one frame each way.
    let mut corrections = Vec::with_capacity(2 * k);
    for (i, t) in triples.iter().enumerate() {
        corrections.push(t.a ^ xs[i]);
        corrections.push(t.b ^ ys[i]);
    }
    let peer = unpack_bits(&s.channel.exchange(tag, &pack_bits(&corrections))?, 2 * k);

    let p_is_zero = !s.party.bit();
    let mut out = Vec::with_capacity(k);
    for (i, t) in triples.iter().enumerate() {
        let e = corrections[2 * i] ^ peer[2 * i];
        let f = corrections[2 * i + 1] ^ peer[2 * i + 1];
        let mut z = (e & t.b) ^ (f & t.a) ^ t.c;
        if p_is_zero {
            z ^= e & f;
        }
        out.push(z);
    }
    Ok(out)
}

/// Single AND gate; a convenience wrapper over the batched form.
pub fn and_gate(s: &mut Session, tag: Tag, x: bool, y: bool) -> Result<bool> {
    Ok(and_batch(s, tag, &[x], &[y])?[0])
}

/// Converts XOR-shared bits into additive shares over `Z_{2^b}` with one
/// `COT(2,b)` per bit: party 0 is sender with `delta = -2*<w>_0`, party 1
/// receives with choice `<w>_1`, and
/// `<w>_0 - m_s + <w>_1 + m_r = w_0 + w_1 - 2*w_0*w_1 = w`.
pub fn b2a_batch(s: &mut Session, tag: Tag, bits: &[bool]) -> Result<Vec<u64>> {
    let n = bits.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let ring = s.ring;
    match s.party {
        Party::P0 => {
            s.ensure_pads(n, 0)?;
            let deltas: Vec<u64> = bits
                .iter()
                .map(|&w| ring.neg(if w { 2 } else { 0 }))
                .collect();
            let ms = crate::obliv::cot_send_batch(
                &mut s.channel,
                tag,
                &mut s.pads.out,
                &ring,
                &deltas,
                &mut s.msg_rng,
            )?;
            Ok(bits
                .iter()
                .zip(&ms)
                .map(|(&w, &m)| ring.sub(u64::from(w), m))
                .collect())
        }
        Party::P1 => {
            s.ensure_pads(0, n)?;
            let mr =
                crate::obliv::cot_recv_batch(&mut s.channel, tag, &mut s.pads.inn, &ring, bits)?;
            Ok(bits
                .iter()
                .zip(&mr)
                .map(|(&w, &m)| ring.add(u64::from(w), m))
                .collect())
        }
    }
}

/// Canonically re-shares arithmetic shares: party 0 replaces its share with a
/// fresh draw from its re-share stream and transfers the one-time-padded
/// difference. The reconstructed values are unchanged, but the share split no
/// longer depends on which upstream protocol produced it, so share-local
/// floor operations behave identically across protocol variants.
pub fn reshare(s: &mut Session, tag: Tag, shares: &[u64]) -> Result<Vec<u64>> {
    use rand::RngCore;
    let ring = s.ring;
    match s.party {
        Party::P0 => {
            let fresh: Vec<u64> = shares
                .iter()
                .map(|_| s.reshare_rng.next_u64() & ring.mask())
                .collect();
            let masked: Vec<u64> = shares
                .iter()
                .zip(&fresh)
                .map(|(&x, &r)| ring.sub(x, r))
                .collect();
            s.channel.send_frame(tag, &pack_ring(&masked, ring.bits))?;
            Ok(fresh)
        }
        Party::P1 => {
            let payload = s.channel.recv_frame(tag)?;
            let masked = unpack_ring(&payload, ring.bits, shares.len());
            Ok(shares
                .iter()
                .zip(&masked)
                .map(|(&x, &t)| ring.add(x, t))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_sessions_keep;
    use crate::rings::{reconstruct, RingParams};
    use crate::session::SessionConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn cfg() -> SessionConfig {
        SessionConfig::dealer_for_tests(RingParams::new(8, 0).unwrap(), 99)
    }

    #[test]
    fn and_gate_full_truth_table_all_sharings() {
        // 16 cases: (x, y) in {0,1}^2 with every share splitting.
        for x in [false, true] {
            for y in [false, true] {
                for x0 in [false, true] {
                    for y0 in [false, true] {
                        let (x1, y1) = (x ^ x0, y ^ y0);
                        let ((_, z0), (_, z1)) = run_sessions_keep(
                            &cfg(),
                            |s| and_gate(s, Tag::And, x0, y0).unwrap(),
                            |s| and_gate(s, Tag::And, x1, y1).unwrap(),
                        );
                        assert_eq!(z0 ^ z1, x & y, "x={x} y={y} x0={x0} y0={y0}");
                    }
                }
            }
        }
    }

    #[test]
    fn and_batch_matches_plaintext_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let k = 10_000;
        let xs: Vec<bool> = (0..k).map(|_| rng.random()).collect();
        let ys: Vec<bool> = (0..k).map(|_| rng.random()).collect();
        let x0: Vec<bool> = (0..k).map(|_| rng.random()).collect();
        let y0: Vec<bool> = (0..k).map(|_| rng.random()).collect();
        let x1: Vec<bool> = xs.iter().zip(&x0).map(|(&v, &s)| v ^ s).collect();
        let y1: Vec<bool> = ys.iter().zip(&y0).map(|(&v, &s)| v ^ s).collect();

        let ((s0, z0), (_, z1)) = run_sessions_keep(
            &cfg(),
            move |s| and_batch(s, Tag::And, &x0, &y0).unwrap(),
            move |s| and_batch(s, Tag::And, &x1, &y1).unwrap(),
        );
        for i in 0..k {
            assert_eq!(z0[i] ^ z1[i], xs[i] & ys[i], "gate {i}");
        }
        // one round, k triples, k gates, 2k bits payload each way
        let m = s0.channel.meter().tag(Tag::And);
        assert_eq!(m.rounds, 1);
        assert_eq!(m.and_gates, k as u64);
        assert_eq!(m.triples_consumed, k as u64);
        assert_eq!(m.bytes_sent, (2 * k).div_ceil(8) as u64);
    }

    #[test]
    fn and_gate_communication_is_four_bits_amortized() {
        let k = 8192usize;
        let xs = vec![true; k];
        let ys = vec![false; k];
        let ((s0, _), _) = run_sessions_keep(
            &cfg(),
            {
                let (xs, ys) = (xs.clone(), ys.clone());
                move |s| and_batch(s, Tag::And, &xs, &ys).unwrap()
            },
            move |s| and_batch(s, Tag::And, &xs, &ys).unwrap(),
        );
        let m = s0.channel.meter().tag(Tag::And);
        let total_bits = (m.bytes_sent + m.bytes_received) * 8;
        assert_eq!(total_bits, 4 * k as u64);
    }

    #[test]
    fn annihilator_zero_input() {
        let ((_, z0), (_, z1)) = run_sessions_keep(
            &cfg(),
            |s| and_gate(s, Tag::And, false, true).unwrap(),
            |s| and_gate(s, Tag::And, false, false).unwrap(),
        );
        // x = 0 shared as (0,0); y = 1 shared as (1,0)
        assert!(!(z0 ^ z1));
    }

    #[test]
    fn length_mismatch_rejected() {
        let ((_, r0), _) = run_sessions_keep(
            &cfg(),
            |s| and_batch(s, Tag::And, &[true], &[]).map(|_| ()),
            |_s| (),
        );
        assert!(r0.is_err());
    }

    #[test]
    fn b2a_all_share_patterns() {
        let p = RingParams::new(8, 0).unwrap();
        for w0 in [false, true] {
            for w1 in [false, true] {
                let ((_, a0), (_, a1)) = run_sessions_keep(
                    &cfg(),
                    move |s| b2a_batch(s, Tag::B2a, &[w0]).unwrap(),
                    move |s| b2a_batch(s, Tag::B2a, &[w1]).unwrap(),
                );
                assert_eq!(
                    reconstruct(&p, a0[0], a1[0]),
                    u64::from(w0 ^ w1),
                    "w0={w0} w1={w1}"
                );
            }
        }
    }

    #[test]
    fn b2a_randomized() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let n = 1000;
        let b0: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let b1: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let p = RingParams::new(8, 0).unwrap();
        let expect: Vec<u64> = b0
            .iter()
            .zip(&b1)
            .map(|(&x, &y)| u64::from(x ^ y))
            .collect();
        let ((_, a0), (_, a1)) = run_sessions_keep(
            &cfg(),
            {
                let b0 = b0.clone();
                move |s| b2a_batch(s, Tag::B2a, &b0).unwrap()
            },
            move |s| b2a_batch(s, Tag::B2a, &b1).unwrap(),
        );
        for i in 0..n {
            assert_eq!(reconstruct(&p, a0[i], a1[i]), expect[i], "bit {i}");
        }
    }

    #[test]
    fn xor_is_local() {
        // XOR of shares needs no protocol call at all: verify no traffic.
        let ((s0, _), _) = run_sessions_keep(&cfg(), |_s| (), |_s| ());
        assert_eq!(s0.channel.meter().tag(Tag::And).bytes_sent, 0);
    }

    #[test]
    fn reshare_preserves_values_and_canonicalizes() {
        let p = RingParams::new(8, 0).unwrap();
        let vals = [5u64, 0, 255, 128];
        let shares0 = [7u64, 3, 200, 90];
        let shares1: Vec<u64> = vals
            .iter()
            .zip(&shares0)
            .map(|(&v, &s)| p.sub(v, s))
            .collect();

        let ((_, n0a), (_, n1a)) =
            run_sessions_keep(&cfg(), move |s| reshare(s, Tag::Relu, &shares0).unwrap(), {
                let shares1 = shares1.clone();
                move |s| reshare(s, Tag::Relu, &shares1).unwrap()
            });
        for i in 0..vals.len() {
            assert_eq!(reconstruct(&p, n0a[i], n1a[i]), vals[i]);
        }

        // Different input split, same seed: identical output split.
        let alt0 = [1u64, 100, 50, 250];
        let alt1: Vec<u64> = vals.iter().zip(&alt0).map(|(&v, &s)| p.sub(v, s)).collect();
        let ((_, n0b), (_, n1b)) = run_sessions_keep(
            &cfg(),
            move |s| reshare(s, Tag::Relu, &alt0).unwrap(),
            move |s| reshare(s, Tag::Relu, &alt1).unwrap(),
        );
        assert_eq!(n0a, n0b);
        assert_eq!(n1a, n1b);
    }
}
