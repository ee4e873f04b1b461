//! Negacyclic number-theoretic transform modulo one prime.
//!
//! Works in `Z_q[X]/(X^N + 1)` with `q ≡ 1 (mod 2N)`: powers of a primitive
//! `2N`-th root of unity are folded into the butterflies, so pointwise
//! products in the transformed domain correspond to negacyclic convolution.
//! Forward is Cooley-Tukey with bit-reversed twiddle tables, inverse is
//! Gentleman-Sande with the final `1/N` scaling; `inverse(forward(p)) = p`.

use std::sync::atomic::{AtomicU64, Ordering};

use super::primes::{mulmod, powmod};

/// Global forward-transform counter; lets tests assert that online paths
/// never re-transform preprocessed data.
pub static NTT_FORWARD_COUNT: AtomicU64 = AtomicU64::new(0);

pub struct NttTable {
    pub q: u64,
    pub n: usize,
    psi_rev: Vec<u64>,
    ipsi_rev: Vec<u64>,
    n_inv: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    x.reverse_bits() >> (usize::BITS - bits)
}

impl NttTable {
    pub fn new(n: usize, q: u64) -> Option<Self> {
        if !n.is_power_of_two() || !(q - 1).is_multiple_of(2 * n as u64) {
            return None;
        }
        let psi = find_primitive_2n_root(n, q)?;
        let psi_inv = powmod(psi, q - 2, q);
        let log_n = n.trailing_zeros();
        let mut psi_rev = vec![0u64; n];
        let mut ipsi_rev = vec![0u64; n];
        let mut power = 1u64;
        let mut ipower = 1u64;
        let mut powers = vec![0u64; n];
        let mut ipowers = vec![0u64; n];
        for i in 0..n {
            powers[i] = power;
            ipowers[i] = ipower;
            power = mulmod(power, psi, q);
            ipower = mulmod(ipower, psi_inv, q);
        }
        for i in 0..n {
            psi_rev[i] = powers[bit_reverse(i, log_n)];
            ipsi_rev[i] = ipowers[bit_reverse(i, log_n)];
        }
        let n_inv = powmod(n as u64, q - 2, q);
        Some(NttTable {
            q,
            n,
            psi_rev,
            ipsi_rev,
            n_inv,
        })
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        NTT_FORWARD_COUNT.fetch_add(1, Ordering::Relaxed);
        let (n, q) = (self.n, self.q);
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let s = self.psi_rev[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = mulmod(a[j + t], s, q);
                    a[j] = u + v - if u + v >= q { q } else { 0 };
                    a[j + t] = u + q - v - if u >= v { q } else { 0 };
                }
            }
            m <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let (n, q) = (self.n, self.q);
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let s = self.ipsi_rev[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = u + v - if u + v >= q { q } else { 0 };
                    a[j + t] = mulmod(u + q - v, s, q);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mulmod(*x, self.n_inv, q);
        }
    }
}

fn find_primitive_2n_root(n: usize, q: u64) -> Option<u64> {
    let order = 2 * n as u64;
    let cofactor = (q - 1) / order;
    for g in 2..1000u64 {
        let candidate = powmod(g, cofactor, q);
        // order exactly 2N: candidate^N = -1
        if powmod(candidate, n as u64, q) == q - 1 {
            return Some(candidate);
        }
    }
    None
}

/// Reference negacyclic product, `O(N^2)`; the oracle the transform path is
/// checked against.
pub fn schoolbook_negacyclic(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let n = a.len();
    assert_eq!(b.len(), n);
    let mut out = vec![0u64; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let prod = mulmod(ai, bj, q);
            let k = i + j;
            if k < n {
                out[k] = (out[k] + prod) % q;
            } else {
                // X^N = -1 wraps with a sign flip
                out[k - n] = (out[k - n] + q - prod) % q;
            }
        }
    }
    out
}
