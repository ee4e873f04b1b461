//! Bit packing helpers shared by the boolean protocols.

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    assert!(bytes.len() * 8 >= n, "short bit buffer");
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1).collect()
}

/// Packs ring values at `ceil(bits/8)` bytes each, little-endian.
pub fn pack_ring(values: &[u64], bits: u32) -> Vec<u8> {
    let w = (bits as usize).div_ceil(8);
    let mut out = Vec::with_capacity(values.len() * w);
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes()[..w]);
    }
    out
}

pub fn unpack_ring(bytes: &[u8], bits: u32, n: usize) -> Vec<u64> {
    let w = (bits as usize).div_ceil(8);
    assert!(bytes.len() >= n * w, "short ring buffer");
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut word = [0u8; 8];
        word[..w].copy_from_slice(&bytes[i * w..(i + 1) * w]);
        out.push(u64::from_le_bytes(word) & crate::rings::mask_for(bits));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_round_trip() {
        let bits: Vec<bool> = (0..37).map(|i| i % 3 == 0).collect();
        assert_eq!(unpack_bits(&pack_bits(&bits), bits.len()), bits);
    }

    #[test]
    fn ring_round_trip() {
        let vals = vec![0u64, 1, (1 << 37) - 1, 12345678901];
        let packed = pack_ring(&vals, 37);
        assert_eq!(packed.len(), 4 * 5);
        assert_eq!(unpack_ring(&packed, 37, 4), vals);
    }
}
