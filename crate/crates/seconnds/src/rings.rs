//! Ring arithmetic in `Z_{2^b}`, additive/XOR secret sharing, fixed-point
//! tensors, and the `SCNT` tensor file format.
//!
//! Ring values live in unsigned 64-bit words masked to `b` bits after every
//! operation; `b <= 44` leaves headroom so intermediate products never need
//! multiword arithmetic.

use std::io::{Read, Write};

use rand::Rng;

use crate::{Error, Result};

pub const MAX_BITS: u32 = 44;

/// Bit-width and fixed-point scale of the shared ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RingParams {
    pub bits: u32,
    pub scale: u32,
}

impl RingParams {
    pub fn new(bits: u32, scale: u32) -> Result<Self> {
        if !(2..=MAX_BITS).contains(&bits) {
            return Err(Error::domain(format!(
                "bitwidth {bits} out of range 2..=44"
            )));
        }
        if scale >= bits {
            return Err(Error::domain(format!(
                "scale {scale} must be < bitwidth {bits}"
            )));
        }
        Ok(RingParams { bits, scale })
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        mask_for(self.bits)
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x & self.mask()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask()
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask()
    }

    /// Top bit of a ring value: `1` iff `x >= 2^{b-1}`.
    #[inline]
    pub fn msb(&self, x: u64) -> bool {
        (x >> (self.bits - 1)) & 1 == 1
    }

    /// Two's-complement view: `x` if `x < 2^{b-1}`, else `x - 2^b`.
    #[inline]
    pub fn signed_view(&self, x: u64) -> i64 {
        debug_assert!(x <= self.mask());
        if self.msb(x) {
            x as i64 - (1i64 << self.bits)
        } else {
            x as i64
        }
    }

    /// Encodes a signed integer into the ring.
    #[inline]
    pub fn from_signed(&self, v: i64) -> u64 {
        (v as u64) & self.mask()
    }
}

#[inline]
pub fn mask_for(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Splits `x` into two additive shares; share 0 is uniform.
pub fn share_split<R: Rng>(params: &RingParams, x: u64, rng: &mut R) -> Result<(u64, u64)> {
    if x > params.mask() {
        return Err(Error::domain(format!(
            "value {x} exceeds ring 2^{}",
            params.bits
        )));
    }
    let s0 = rng.random::<u64>() & params.mask();
    let s1 = params.sub(x, s0);
    Ok((s0, s1))
}

#[inline]
pub fn reconstruct(params: &RingParams, s0: u64, s1: u64) -> u64 {
    params.add(s0, s1)
}

/// Splits a whole slice, drawing share 0 from `rng`.
pub fn share_split_vec<R: Rng>(
    params: &RingParams,
    xs: &[u64],
    rng: &mut R,
) -> (Vec<u64>, Vec<u64>) {
    let mut s0 = Vec::with_capacity(xs.len());
    let mut s1 = Vec::with_capacity(xs.len());
    for &x in xs {
        let r = rng.random::<u64>() & params.mask();
        s0.push(r);
        s1.push(params.sub(x, r));
    }
    (s0, s1)
}

/// Fixed-point tensor: row-major `Z_{2^b}` elements with a scale exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u64>,
    pub scale: u32,
}

impl QuantTensor {
    pub fn new(dims: Vec<usize>, data: Vec<u64>, scale: u32) -> Result<Self> {
        let expect: usize = dims.iter().product();
        if data.len() != expect {
            return Err(Error::domain(format!(
                "tensor data length {} != product of dims {}",
                data.len(),
                expect
            )));
        }
        Ok(QuantTensor { dims, data, scale })
    }

    pub fn zeros(dims: Vec<usize>, scale: u32) -> Self {
        let n = dims.iter().product();
        QuantTensor {
            dims,
            data: vec![0; n],
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

const SCNT_MAGIC: &[u8; 4] = b"SCNT";
const SCNT_VERSION: u16 = 1;

/// Writes a tensor in the binary `SCNT` format (little-endian):
/// magic, version u16, bitwidth u8, scale u8, ndims u8, dims u32 each,
/// elements u64 each.
pub fn write_scnt<W: Write>(w: &mut W, t: &QuantTensor, bits: u32) -> Result<()> {
    w.write_all(SCNT_MAGIC)?;
    w.write_all(&SCNT_VERSION.to_le_bytes())?;
    w.write_all(&[bits as u8, t.scale as u8, t.dims.len() as u8])?;
    for &d in &t.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &x in &t.data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads an `SCNT` tensor, returning it with the recorded bitwidth.
pub fn read_scnt<R: Read>(r: &mut R) -> Result<(QuantTensor, u32)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SCNT_MAGIC {
        return Err(Error::Encoding(format!("bad SCNT magic {magic:?}")));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)?;
    let version = u16::from_le_bytes(v);
    if version != SCNT_VERSION {
        return Err(Error::Encoding(format!(
            "unsupported SCNT version {version}"
        )));
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head)?;
    let (bits, scale, ndims) = (head[0] as u32, head[1] as u32, head[2] as usize);
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        let mut d = [0u8; 4];
        r.read_exact(&mut d)?;
        dims.push(u32::from_le_bytes(d) as usize);
    }
    let n: usize = dims.iter().product();
    let mask = mask_for(bits);
    let mut data = Vec::with_capacity(n);
    let mut e = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut e)?;
        let x = u64::from_le_bytes(e);
        if x > mask {
            return Err(Error::Encoding(format!(
                "element {x} exceeds {bits}-bit ring"
            )));
        }
        data.push(x);
    }
    Ok((QuantTensor { dims, data, scale }, bits))
}
