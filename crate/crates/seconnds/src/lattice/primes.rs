//! NTT-friendly prime search and modular helpers.
//!
//! The default parameter chain picks primes `q_j ≡ 1 (mod 2N)` whose product
//! additionally satisfies `Q ≡ 1 (mod 2^b)`. That makes the plaintext-modulus
//! remainder of `Q` equal to one, so the wraparound term a coefficient
//! product picks up beyond `2^b` enters the noise with weight 1 instead of
//! weight `2^b`, which is what keeps one multiply-accumulate level inside the
//! budget at `N = 4096`.

#[inline]
pub fn mulmod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub fn powmod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1u64;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, q);
        }
        base = mulmod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Multiplicative inverse of an odd number modulo `2^t`, `t <= 64`.
fn inv_mod_pow2(x: u64, t: u32) -> u64 {
    debug_assert!(x % 2 == 1);
    // Newton iteration doubles correct bits each round.
    let mut inv = 1u64;
    for _ in 0..6 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(x.wrapping_mul(inv)));
    }
    inv & crate::rings::mask_for(t)
}

/// Finds `count` distinct primes near `2^target_bits`, each `≡ 1 (mod 2n)`,
/// with the product `≡ 1 (mod 2^plain_bits)`.
pub fn find_prime_chain(n: usize, count: usize, target_bits: u32, plain_bits: u32) -> Vec<u64> {
    assert!(count >= 1);
    assert!(n.is_power_of_two());
    let two_n = 2 * n as u64;
    let mut primes: Vec<u64> = Vec::with_capacity(count);

    // When 2^plain_bits divides 2N, every q ≡ 1 (mod 2N) already has
    // q ≡ 1 (mod 2^plain_bits), so all choices are free.
    let free_choices =
        if two_n.trailing_zeros() >= plain_bits { count } else { count - 1 };

    let mut candidate = (1u64 << target_bits) + 1;
    // align to ≡ 1 mod 2N
    candidate += (two_n - ((candidate - 1) % two_n)) % two_n;
    while primes.len() < free_choices {
        if is_prime_u64(candidate) && !primes.contains(&candidate) {
            primes.push(candidate);
        }
        candidate += two_n;
    }
    if free_choices == count {
        return primes;
    }

    // Last prime: ≡ product^{-1} (mod 2^plain_bits). 2N | 2^plain_bits and
    // every prime so far is 1 mod 2N, so the residue is automatically
    // 1 mod 2N as well.
    let pmask = crate::rings::mask_for(plain_bits);
    let product_mod = primes
        .iter()
        .fold(1u64, |acc, &p| acc.wrapping_mul(p) & pmask);
    let residue = inv_mod_pow2(product_mod, plain_bits);
    debug_assert_eq!((residue - 1) % two_n, 0);
    let step = 1u64 << plain_bits;
    let mut last = residue;
    let start = 1u64 << target_bits;
    if last < start {
        last += (start - last).div_ceil(step) * step;
    }
    loop {
        if is_prime_u64(last) && !primes.contains(&last) {
            primes.push(last);
            break;
        }
        last += step;
    }
    primes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miller_rabin_small() {
        let primes = [2u64, 3, 17, 97, 7681, 12289, (1 << 31) - 1];
        for p in primes {
            assert!(is_prime_u64(p), "{p}");
        }
        for c in [1u64, 4, 15, 7680, 12287, (1 << 31) + 1] {
            assert!(!is_prime_u64(c), "{c}");
        }
    }

    #[test]
    fn pow2_inverse() {
        for x in [1u64, 3, 5, 0xdead_beef | 1] {
            for t in [8u32, 37, 64] {
                let inv = inv_mod_pow2(x, t);
                assert_eq!(
                    x.wrapping_mul(inv) & crate::rings::mask_for(t),
                    1,
                    "x={x} t={t}"
                );
            }
        }
    }

    #[test]
    fn chain_for_narrow_plaintexts() {
        // below 2N the congruence is automatic; the chain must still multiply
        // to 1 mod 2^plain_bits
        for plain_bits in [8u32, 12] {
            let primes = find_prime_chain(4096, 2, 54, plain_bits);
            let mask = crate::rings::mask_for(plain_bits);
            let mut prod = 1u64;
            for &p in &primes {
                assert!(is_prime_u64(p));
                assert_eq!((p - 1) % 8192, 0);
                prod = prod.wrapping_mul(p) & mask;
            }
            assert_eq!(prod, 1, "plain_bits={plain_bits}");
        }
    }

    #[test]
    fn chain_for_default_params() {
        let primes = find_prime_chain(4096, 2, 54, 37);
        assert_eq!(primes.len(), 2);
        let mask = crate::rings::mask_for(37);
        let mut prod = 1u64;
        for &p in &primes {
            assert!(is_prime_u64(p));
            assert_eq!((p - 1) % 8192, 0, "{p} not 1 mod 2N");
            assert!((1 << 54..1 << 56).contains(&p));
            prod = prod.wrapping_mul(p) & mask;
        }
        assert_eq!(prod, 1, "product not 1 mod 2^37");
    }
}
