//! A deterministic desk-scale CNN fixture: conv 4ch 3x3 (pad 1) -> ReLU ->
//! trunc (post-ReLU, MSB known) -> 2x2 max pool -> fc 10 -> argmax, on a
//! 1x8x8 input at 37 bits with a 4-bit scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::rings::{QuantTensor, RingParams};
use crate::runtime::model::{LayerWeights, Model};
use crate::runtime::program::{LayerSpec, SecProgram, Shape};
use crate::session::MillVariant;

pub const TINYNET_BITS: u32 = 37;
pub const TINYNET_SCALE: u32 = 4;

pub fn tinynet_program() -> SecProgram {
    SecProgram {
        bits: TINYNET_BITS,
        scale: TINYNET_SCALE,
        input: Shape::Chw(1, 8, 8),
        layers: vec![
            LayerSpec::Conv {
                out_channels: 4,
                kh: 3,
                kw: 3,
                stride: 1,
                pad: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Trunc {
                shift: TINYNET_SCALE,
                msb_known: true,
            },
            LayerSpec::MaxPool {
                wh: 2,
                ww: 2,
                stride: 2,
            },
            LayerSpec::Fc { out: 10 },
            LayerSpec::Argmax,
        ],
        mill_variant: MillVariant::Linear,
        triple_backend: None,
        triple_chunk: None,
        triple_buffer: None,
        seed_compression: true,
    }
}

fn ring() -> RingParams {
    RingParams::new(TINYNET_BITS, TINYNET_SCALE).unwrap()
}

/// Small integer weights so the logit gaps dwarf the 1-LSB truncation error.
pub fn tinynet_model(seed: u64) -> Model {
    let p = ring();
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let kernel: Vec<u64> = (0..4 * 9)
        .map(|_| p.from_signed(rng.random_range(-8..8)))
        .collect();
    // conv output carries scale 8 before truncation
    let conv_bias: Vec<u64> = (0..4)
        .map(|_| p.from_signed(rng.random_range(-64..64) * 16))
        .collect();
    let fc_w: Vec<u64> = (0..10 * 64)
        .map(|_| p.from_signed(rng.random_range(-8..8)))
        .collect();
    let fc_bias: Vec<u64> = (0..10)
        .map(|_| p.from_signed(rng.random_range(-256..256)))
        .collect();
    Model {
        layers: vec![
            LayerWeights::Conv {
                kernel: QuantTensor::new(vec![4, 1, 3, 3], kernel, TINYNET_SCALE).unwrap(),
                bias: QuantTensor::new(vec![4], conv_bias, 2 * TINYNET_SCALE).unwrap(),
            },
            LayerWeights::None,
            LayerWeights::None,
            LayerWeights::None,
            LayerWeights::Fc {
                weight: QuantTensor::new(vec![10, 64], fc_w, TINYNET_SCALE).unwrap(),
                bias: QuantTensor::new(vec![10], fc_bias, 2 * TINYNET_SCALE).unwrap(),
            },
            LayerWeights::None,
        ],
        hash: seed,
    }
}

pub fn tinynet_input(seed: u64, program: &SecProgram) -> QuantTensor {
    let p = ring();
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_mul(0x517c_c1b7).wrapping_add(3));
    let n = program.input.len();
    let data: Vec<u64> = (0..n)
        .map(|_| p.from_signed(rng.random_range(-128..128)))
        .collect();
    let dims = match program.input {
        Shape::Chw(c, h, w) => vec![c, h, w],
        Shape::Flat(n) => vec![n],
    };
    QuantTensor::new(dims, data, TINYNET_SCALE).unwrap()
}
