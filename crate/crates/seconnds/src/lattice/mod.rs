//! Minimal symmetric-key RLWE scheme over an RNS modulus, sufficient for
//! coefficient-encoded linear kernels: encrypt, decrypt, ciphertext and
//! plaintext addition, plaintext-ciphertext multiply, and additive masking.
//!
//! A ciphertext is `(a, b)` with `b = a·sk + δ·m + e`, `sk` ternary,
//! `δ = floor(Q / 2^b)`. Decryption rounds `(b - a·sk)/δ` and reduces mod
//! `2^b`. The default modulus chain satisfies `Q ≡ 1 (mod 2^b)`, which keeps
//! plaintext wraparound noise from one multiply-accumulate level negligible.
//! Fresh ciphertexts can carry the `a` polynomial as a 32-byte PRG seed to
//! halve upload size.

mod ntt;
pub mod primes;

pub use ntt::{schoolbook_negacyclic, NttTable, NTT_FORWARD_COUNT};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::rings::mask_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// Ring/encryption parameters plus precomputed NTT tables.
pub struct RlweParams {
    pub n: usize,
    pub primes: Vec<u64>,
    pub plain_bits: u32,
    pub sigma: f64,
    tables: Vec<NttTable>,
    /// Product of the primes.
    pub q_total: u128,
    /// Plaintext scale `floor(Q / 2^plain_bits)`.
    pub delta: u128,
    params_hash: u64,
}

impl RlweParams {
    pub fn new(n: usize, primes: Vec<u64>, plain_bits: u32, sigma: f64) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 {
            return Err(Error::domain(
                "polynomial degree must be a power of two >= 8",
            ));
        }
        if !(2..=44).contains(&plain_bits) {
            return Err(Error::domain("plaintext bits out of range 2..=44"));
        }
        let mut q_total: u128 = 1;
        let mut tables = Vec::with_capacity(primes.len());
        for &q in &primes {
            if q >= 1 << 62 {
                return Err(Error::domain(format!("prime {q} too large")));
            }
            if !primes::is_prime_u64(q) {
                return Err(Error::domain(format!("{q} is not prime")));
            }
            let table = NttTable::new(n, q)
                .ok_or_else(|| Error::domain(format!("{q} is not NTT-friendly for N={n}")))?;
            tables.push(table);
            q_total = q_total
                .checked_mul(q as u128)
                .ok_or_else(|| Error::domain("modulus chain exceeds 128 bits"))?;
        }
        let plain_modulus = 1u128 << plain_bits;
        if q_total % plain_modulus != 1 {
            return Err(Error::domain(
                "modulus product must be 1 mod 2^plain_bits; use primes::find_prime_chain",
            ));
        }
        let delta = q_total / plain_modulus;
        if delta < (1 << 20) {
            return Err(Error::NoiseBudget(
                "plaintext scale too small for any noise".into(),
            ));
        }
        let params_hash = hash_params(n, &primes, plain_bits);
        Ok(RlweParams {
            n,
            primes,
            plain_bits,
            sigma,
            tables,
            q_total,
            delta,
            params_hash,
        })
    }

    /// Default chain: `N = 4096`, two ~54-bit primes, `σ = 3.2`.
    pub fn default_for(plain_bits: u32) -> Result<Self> {
        let primes = primes::find_prime_chain(4096, 2, 54, plain_bits);
        RlweParams::new(4096, primes, plain_bits, 3.2)
    }

    pub fn params_hash(&self) -> u64 {
        self.params_hash
    }

    pub fn table(&self, i: usize) -> &NttTable {
        &self.tables[i]
    }

    pub fn zero_poly(&self, domain: Domain) -> PolyRq {
        PolyRq {
            coeffs: vec![vec![0u64; self.n]; self.primes.len()],
            domain,
        }
    }
}

fn hash_params(n: usize, primes: &[u64], plain_bits: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"seconnds-rlwe-params");
    h.update((n as u64).to_le_bytes());
    h.update((plain_bits as u64).to_le_bytes());
    for &q in primes {
        h.update(q.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Polynomial in RNS form: one residue vector per prime, plus a domain flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyRq {
    pub coeffs: Vec<Vec<u64>>,
    pub domain: Domain,
}

impl PolyRq {
    fn check_domain(&self, want: Domain) -> Result<()> {
        if self.domain != want {
            return Err(Error::state(format!(
                "polynomial in {:?}, need {:?}",
                self.domain, want
            )));
        }
        Ok(())
    }
}

/// Ternary secret key, stored in NTT form per prime for fast multiplies.
pub struct SecretKey {
    pub(crate) ntt: PolyRq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum APart {
    Poly(PolyRq),
    /// PRG seed the receiving side expands into the `a` polynomial.
    Seed([u8; 32]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub a: APart,
    pub b: PolyRq,
}

impl Ciphertext {
    pub fn domain(&self) -> Domain {
        self.b.domain
    }
}

/// Transforms a polynomial into the evaluation domain.
pub fn ntt_forward(params: &RlweParams, p: &mut PolyRq) -> Result<()> {
    p.check_domain(Domain::Coefficient)?;
    crate::par::for_each_mut(&mut p.coeffs, |i, c| params.tables[i].forward(c));
    p.domain = Domain::Ntt;
    Ok(())
}

/// Transforms back to coefficient form; exact inverse of [`ntt_forward`].
pub fn ntt_inverse(params: &RlweParams, p: &mut PolyRq) -> Result<()> {
    p.check_domain(Domain::Ntt)?;
    crate::par::for_each_mut(&mut p.coeffs, |i, c| params.tables[i].inverse(c));
    p.domain = Domain::Coefficient;
    Ok(())
}

pub fn poly_add(params: &RlweParams, a: &mut PolyRq, b: &PolyRq) -> Result<()> {
    if a.domain != b.domain {
        return Err(Error::state("domain mismatch in poly_add"));
    }
    for (i, q) in params.primes.iter().enumerate() {
        for (x, &y) in a.coeffs[i].iter_mut().zip(&b.coeffs[i]) {
            *x += y;
            if *x >= *q {
                *x -= *q;
            }
        }
    }
    Ok(())
}

pub fn poly_mul_pointwise(params: &RlweParams, a: &PolyRq, b: &PolyRq) -> Result<PolyRq> {
    a.check_domain(Domain::Ntt)?;
    b.check_domain(Domain::Ntt)?;
    let coeffs = params
        .primes
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            a.coeffs[i]
                .iter()
                .zip(&b.coeffs[i])
                .map(|(&x, &y)| primes::mulmod(x, y, q))
                .collect()
        })
        .collect();
    Ok(PolyRq {
        coeffs,
        domain: Domain::Ntt,
    })
}

/// Encodes plaintext ring values (`< 2^plain_bits`) as an unscaled
/// coefficient polynomial, e.g. weights entering a multiply.
pub fn encode_plain(params: &RlweParams, values: &[u64]) -> Result<PolyRq> {
    if values.len() > params.n {
        return Err(Error::Encoding(format!(
            "{} values exceed degree {}",
            values.len(),
            params.n
        )));
    }
    let limit = mask_for(params.plain_bits);
    let mut coeffs = Vec::with_capacity(params.primes.len());
    for &q in &params.primes {
        let mut row = vec![0u64; params.n];
        for (i, &v) in values.iter().enumerate() {
            if v > limit {
                return Err(Error::Encoding(format!(
                    "coefficient {v} exceeds plaintext bits"
                )));
            }
            row[i] = v % q;
        }
        coeffs.push(row);
    }
    Ok(PolyRq {
        coeffs,
        domain: Domain::Coefficient,
    })
}

/// Encodes plaintext values scaled by δ, the form that adds onto ciphertext
/// `b` parts (server share injection, output masks).
pub fn encode_plain_scaled(params: &RlweParams, values: &[u64]) -> Result<PolyRq> {
    let mut p = encode_plain(params, values)?;
    for (i, &q) in params.primes.iter().enumerate() {
        let delta_q = (params.delta % q as u128) as u64;
        for x in p.coeffs[i].iter_mut() {
            *x = primes::mulmod(*x, delta_q, q);
        }
    }
    Ok(p)
}

fn sample_uniform(q: u64, rng: &mut ChaCha20Rng) -> u64 {
    let bits = 64 - q.leading_zeros();
    let mask = mask_for(bits);
    loop {
        let v = rng.next_u64() & mask;
        if v < q {
            return v;
        }
    }
}

fn sample_a_from_rng(params: &RlweParams, rng: &mut ChaCha20Rng) -> PolyRq {
    let coeffs = params
        .primes
        .iter()
        .map(|&q| (0..params.n).map(|_| sample_uniform(q, rng)).collect())
        .collect();
    PolyRq {
        coeffs,
        domain: Domain::Coefficient,
    }
}

/// Expands a seed-compressed `a` part.
pub fn expand_a_seed(params: &RlweParams, seed: &[u8; 32]) -> PolyRq {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    sample_a_from_rng(params, &mut rng)
}

/// Uniform ternary secret key.
pub fn keygen(params: &RlweParams, rng: &mut ChaCha20Rng) -> Result<SecretKey> {
    let ternary: Vec<i8> = (0..params.n)
        .map(|_| (rng.next_u32() % 3) as i8 - 1)
        .collect();
    let mut coeffs = Vec::with_capacity(params.primes.len());
    for &q in &params.primes {
        coeffs.push(
            ternary
                .iter()
                .map(|&t| if t < 0 { q - 1 } else { t as u64 })
                .collect::<Vec<u64>>(),
        );
    }
    let mut poly = PolyRq {
        coeffs,
        domain: Domain::Coefficient,
    };
    ntt_forward(params, &mut poly)?;
    Ok(SecretKey { ntt: poly })
}

fn sample_error(params: &RlweParams, rng: &mut ChaCha20Rng) -> Vec<i64> {
    let normal = Normal::new(0.0, params.sigma).expect("sigma");
    (0..params.n)
        .map(|_| normal.sample(rng).round() as i64)
        .collect()
}

/// Symmetric-key encryption of plaintext values (`< 2^plain_bits`). With
/// `seed_a` the `a` polynomial ships as the PRG seed instead of coefficients.
pub fn encrypt_sym(
    params: &RlweParams,
    values: &[u64],
    sk: &SecretKey,
    rng: &mut ChaCha20Rng,
    seed_a: bool,
) -> Result<Ciphertext> {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let a = if seed_a {
        expand_a_seed(params, &seed)
    } else {
        sample_a_from_rng(params, rng)
    };

    // b = a*sk + delta*m + e
    let mut a_ntt = a.clone();
    ntt_forward(params, &mut a_ntt)?;
    let mut b = poly_mul_pointwise(params, &a_ntt, &sk.ntt)?;
    ntt_inverse(params, &mut b)?;
    let scaled = encode_plain_scaled(params, values)?;
    poly_add(params, &mut b, &scaled)?;
    let noise = sample_error(params, rng);
    for (i, &q) in params.primes.iter().enumerate() {
        for (x, &e) in b.coeffs[i].iter_mut().zip(&noise) {
            let e_mod = if e < 0 {
                q - ((-e) as u64 % q)
            } else {
                e as u64 % q
            };
            *x += e_mod;
            if *x >= q {
                *x -= q;
            }
        }
    }
    let a_part = if seed_a {
        APart::Seed(seed)
    } else {
        APart::Poly(a)
    };
    Ok(Ciphertext { a: a_part, b })
}

fn crt_lift(params: &RlweParams, residues: &[u64]) -> u128 {
    // Garner combination; fits u128 as long as Q does.
    let mut x = residues[0] as u128;
    let mut modulus = params.primes[0] as u128;
    for (&r, &q) in residues.iter().zip(&params.primes).skip(1) {
        let m_mod_q = (modulus % q as u128) as u64;
        let inv = primes::powmod(m_mod_q, q - 2, q);
        let x_mod_q = (x % q as u128) as u64;
        let diff = (r % q + q - x_mod_q) % q;
        let t = primes::mulmod(diff, inv, q);
        x += modulus * t as u128;
        modulus *= q as u128;
    }
    x
}

fn phase_poly(params: &RlweParams, ct: &Ciphertext, sk: &SecretKey) -> Result<PolyRq> {
    let mut a = match &ct.a {
        APart::Poly(p) => p.clone(),
        APart::Seed(s) => expand_a_seed(params, s),
    };
    if a.domain == Domain::Coefficient {
        ntt_forward(params, &mut a)?;
    }
    let mut a_sk = poly_mul_pointwise(params, &a, &sk.ntt)?;
    ntt_inverse(params, &mut a_sk)?;
    let mut phase = ct.b.clone();
    if phase.domain == Domain::Ntt {
        ntt_inverse(params, &mut phase)?;
    }
    // phase = b - a*sk, coefficient domain
    for (i, &q) in params.primes.iter().enumerate() {
        for (x, &y) in phase.coeffs[i].iter_mut().zip(&a_sk.coeffs[i]) {
            *x = (*x + q - y) % q;
        }
    }
    Ok(phase)
}

/// Decrypts into plaintext ring values, rounding away the noise.
pub fn decrypt(params: &RlweParams, ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<u64>> {
    Ok(decrypt_with_margin(params, ct, sk)?.0)
}

/// Decrypts and reports the remaining noise margin in bits: how many
/// doublings of the worst coefficient noise would still decode correctly.
/// Non-positive margin means the budget is spent and values are unreliable.
pub fn decrypt_with_margin(
    params: &RlweParams,
    ct: &Ciphertext,
    sk: &SecretKey,
) -> Result<(Vec<u64>, f64)> {
    let phase = phase_poly(params, ct, sk)?;
    let q = params.q_total;
    let half_q = q / 2;
    let delta = params.delta as i128;
    let plain_mod = 1i128 << params.plain_bits;
    let mut out = Vec::with_capacity(params.n);
    let mut worst_noise: i128 = 0;
    for j in 0..params.n {
        let residues: Vec<u64> = (0..params.primes.len())
            .map(|i| phase.coeffs[i][j])
            .collect();
        let lifted = crt_lift(params, &residues);
        let centered: i128 = if lifted > half_q {
            lifted as i128 - q as i128
        } else {
            lifted as i128
        };
        // nearest multiple of delta
        let v = (centered + delta.div_euclid(2)).div_euclid(delta);
        let noise = (centered - v * delta).abs();
        worst_noise = worst_noise.max(noise);
        out.push(v.rem_euclid(plain_mod) as u64);
    }
    let margin = if worst_noise == 0 {
        (params.delta as f64 / 2.0).log2()
    } else {
        ((params.delta as f64 / 2.0) / worst_noise as f64).log2()
    };
    if margin <= 0.0 {
        return Err(Error::NoiseBudget(format!("noise margin {margin:.2} bits")));
    }
    Ok((out, margin))
}

/// Ciphertext + ciphertext, component-wise in matching domains.
pub fn he_add_ct(params: &RlweParams, ct: &mut Ciphertext, other: &Ciphertext) -> Result<()> {
    if ct.domain() != other.domain() {
        return Err(Error::state("ciphertext domain mismatch in add"));
    }
    let (a1, a2) = match (&mut ct.a, &other.a) {
        (APart::Poly(x), APart::Poly(y)) => (x, y),
        _ => {
            return Err(Error::state(
                "seed-compressed ciphertexts must be expanded before add",
            ))
        }
    };
    poly_add(params, a1, a2)?;
    poly_add(params, &mut ct.b, &other.b)
}

/// Ciphertext + plaintext: adds a δ-scaled plaintext polynomial onto `b`.
/// The plaintext must already be in the ciphertext's domain.
pub fn he_add_plain(params: &RlweParams, ct: &mut Ciphertext, pt_scaled: &PolyRq) -> Result<()> {
    poly_add(params, &mut ct.b, pt_scaled)
}

/// Plaintext-ciphertext multiply; both operands in NTT form. The result
/// stays in NTT form for accumulation chains.
pub fn he_pt_mult(params: &RlweParams, ct: &Ciphertext, pt_ntt: &PolyRq) -> Result<Ciphertext> {
    pt_ntt.check_domain(Domain::Ntt)?;
    if ct.domain() != Domain::Ntt {
        return Err(Error::state("ciphertext must be in NTT domain for pt-mult"));
    }
    let a = match &ct.a {
        APart::Poly(p) => p,
        APart::Seed(_) => return Err(Error::state("expand seed before pt-mult")),
    };
    Ok(Ciphertext {
        a: APart::Poly(poly_mul_pointwise(params, a, pt_ntt)?),
        b: poly_mul_pointwise(params, &ct.b, pt_ntt)?,
    })
}

/// Expands a seed-compressed `a` part in place and moves the ciphertext to
/// the NTT domain; the server does this on receipt.
pub fn expand_and_transform(params: &RlweParams, ct: &mut Ciphertext) -> Result<()> {
    if let APart::Seed(s) = &ct.a {
        ct.a = APart::Poly(expand_a_seed(params, s));
    }
    let APart::Poly(a) = &mut ct.a else {
        unreachable!()
    };
    if a.domain == Domain::Coefficient {
        ntt_forward(params, a)?;
    }
    if ct.b.domain == Domain::Coefficient {
        ntt_forward(params, &mut ct.b)?;
    }
    Ok(())
}

/// Adds a uniform plaintext mask; decryption then yields `m + r mod 2^b` and
/// the masking side keeps `-r` as its additive share.
pub fn mask_ciphertext(params: &RlweParams, ct: &mut Ciphertext, r_values: &[u64]) -> Result<()> {
    let mut scaled = encode_plain_scaled(params, r_values)?;
    if ct.domain() == Domain::Ntt {
        ntt_forward(params, &mut scaled)?;
    }
    he_add_plain(params, ct, &scaled)
}

const CT_FLAG_NTT: u8 = 1;
const CT_FLAG_SEED: u8 = 2;

/// Serialization: params hash (8 bytes), flags, `a` (seed or residues),
/// `b` residues; residue arrays are u64 little-endian per prime.
pub fn serialize_ciphertext(params: &RlweParams, ct: &Ciphertext) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 2 * params.primes.len() * params.n * 8);
    out.extend_from_slice(&params.params_hash.to_le_bytes());
    let mut flags = 0u8;
    if ct.domain() == Domain::Ntt {
        flags |= CT_FLAG_NTT;
    }
    if matches!(ct.a, APart::Seed(_)) {
        flags |= CT_FLAG_SEED;
    }
    out.push(flags);
    match &ct.a {
        APart::Seed(s) => out.extend_from_slice(s),
        APart::Poly(p) => {
            for row in &p.coeffs {
                for &c in row {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    for row in &ct.b.coeffs {
        for &c in row {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn deserialize_ciphertext(params: &RlweParams, bytes: &[u8]) -> Result<Ciphertext> {
    let poly_bytes = params.primes.len() * params.n * 8;
    if bytes.len() < 9 {
        return Err(Error::Encoding("short ciphertext".into()));
    }
    let hash = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    if hash != params.params_hash {
        return Err(Error::Encoding("ciphertext parameter hash mismatch".into()));
    }
    let flags = bytes[8];
    let domain = if flags & CT_FLAG_NTT != 0 {
        Domain::Ntt
    } else {
        Domain::Coefficient
    };
    let mut cursor = 9usize;
    let a = if flags & CT_FLAG_SEED != 0 {
        if bytes.len() != 9 + 32 + poly_bytes {
            return Err(Error::Encoding("bad seeded ciphertext length".into()));
        }
        let seed: [u8; 32] = bytes[9..41].try_into().unwrap();
        cursor = 41;
        APart::Seed(seed)
    } else {
        if bytes.len() != 9 + 2 * poly_bytes {
            return Err(Error::Encoding("bad ciphertext length".into()));
        }
        let p = read_poly(params, &bytes[cursor..cursor + poly_bytes], domain)?;
        cursor += poly_bytes;
        APart::Poly(p)
    };
    let b = read_poly(params, &bytes[cursor..cursor + poly_bytes], domain)?;
    Ok(Ciphertext { a, b })
}

fn read_poly(params: &RlweParams, bytes: &[u8], domain: Domain) -> Result<PolyRq> {
    let mut coeffs = Vec::with_capacity(params.primes.len());
    let mut cursor = 0usize;
    for &q in &params.primes {
        let mut row = Vec::with_capacity(params.n);
        for _ in 0..params.n {
            let c = u64::from_le_bytes(bytes[cursor..cursor + 8].try_into().unwrap());
            if c >= q {
                return Err(Error::Encoding("residue out of range".into()));
            }
            row.push(c);
            cursor += 8;
        }
        coeffs.push(row);
    }
    Ok(PolyRq { coeffs, domain })
}
