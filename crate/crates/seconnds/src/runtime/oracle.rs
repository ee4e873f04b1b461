//! Plaintext fixed-point reference: the same layer graph on clear residues,
//! with exact floor division for truncation, signed max for pooling, and the
//! argmax tie-break toward the lower index.

use crate::linconv::{conv2d_plain, matvec_plain, ConvShape};
use crate::rings::{mask_for, QuantTensor, RingParams};
use crate::runtime::model::{LayerWeights, Model};
use crate::runtime::program::{LayerSpec, SecProgram, Shape};
use crate::{Error, Result};

pub struct OracleOutput {
    pub logits: Vec<u64>,
    pub label: u64,
}

pub fn plaintext_oracle(
    program: &SecProgram,
    model: &Model,
    input: &QuantTensor,
) -> Result<OracleOutput> {
    let ring = RingParams::new(program.bits, program.scale.min(program.bits - 1))?;
    let mask = mask_for(program.bits);
    if input.len() != program.input.len() {
        return Err(Error::domain(format!(
            "input length {} != program input {}",
            input.len(),
            program.input.len()
        )));
    }
    let mut values: Vec<u64> = input.data.iter().map(|&v| v & mask).collect();
    let mut shape = program.input;
    let mut logits = Vec::new();
    let mut label = 0u64;

    for (idx, layer) in program.layers.iter().enumerate() {
        match (layer, &model.layers[idx]) {
            (
                &LayerSpec::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                },
                LayerWeights::Conv { kernel, bias },
            ) => {
                let Shape::Chw(c, h, w) = shape else {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: "conv without CHW".into(),
                    });
                };
                let conv_shape = ConvShape {
                    channels: c,
                    height: h,
                    width: w,
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                };
                let mut out = conv2d_plain(&conv_shape, &values, &kernel.data, program.bits);
                let (oh, ow) = (conv_shape.out_height(), conv_shape.out_width());
                for oc in 0..out_channels {
                    for pos in 0..oh * ow {
                        let i = oc * oh * ow + pos;
                        out[i] = ring.add(out[i], bias.data[oc]);
                    }
                }
                values = out;
                shape = Shape::Chw(out_channels, oh, ow);
            }
            (&LayerSpec::Fc { out }, LayerWeights::Fc { weight, bias }) => {
                let n = shape.len();
                let mut y = matvec_plain(out, n, &weight.data, &values, program.bits);
                for (v, &b) in y.iter_mut().zip(&bias.data) {
                    *v = ring.add(*v, b);
                }
                values = y;
                shape = Shape::Flat(out);
            }
            (LayerSpec::Relu, _) => {
                for v in values.iter_mut() {
                    *v = ring.from_signed(ring.signed_view(*v).max(0));
                }
            }
            (&LayerSpec::Trunc { shift, .. }, _) => {
                for v in values.iter_mut() {
                    *v >>= shift;
                }
            }
            (&LayerSpec::MaxPool { wh, ww, stride }, _) => {
                let (out, new_shape) =
                    pool(&ring, &values, shape, wh, ww, stride, idx, |window| {
                        window
                            .iter()
                            .map(|&v| ring.signed_view(v))
                            .max()
                            .map(|m| ring.from_signed(m))
                            .unwrap()
                    })?;
                values = out;
                shape = new_shape;
            }
            (&LayerSpec::AvgPool { wh, ww, stride }, _) => {
                let w_len = (wh * ww) as u64;
                let (out, new_shape) =
                    pool(&ring, &values, shape, wh, ww, stride, idx, |window| {
                        let sum = window.iter().fold(0u64, |acc, &v| ring.add(acc, v));
                        sum / w_len
                    })?;
                values = out;
                shape = new_shape;
            }
            (LayerSpec::Argmax, _) => {
                logits = values.clone();
                label = argmax_plain(&ring, &values);
                values = vec![label];
                shape = Shape::Flat(1);
            }
            _ => {
                return Err(Error::Validation {
                    layer: idx,
                    msg: "model weights do not match program layer".into(),
                })
            }
        }
    }
    Ok(OracleOutput { logits, label })
}

pub fn argmax_plain(ring: &RingParams, values: &[u64]) -> u64 {
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if ring.signed_view(v) > ring.signed_view(values[best]) {
            best = i;
        }
    }
    best as u64
}

/// Gathers pooling windows (floor mode) and applies `f` per window.
#[allow(clippy::too_many_arguments)]
fn pool<F: Fn(&[u64]) -> u64>(
    _ring: &RingParams,
    values: &[u64],
    shape: Shape,
    wh: usize,
    ww: usize,
    stride: usize,
    layer: usize,
    f: F,
) -> Result<(Vec<u64>, Shape)> {
    let Shape::Chw(c, h, w) = shape else {
        return Err(Error::Validation {
            layer,
            msg: "pooling without CHW".into(),
        });
    };
    let (oh, ow) = ((h - wh) / stride + 1, (w - ww) / stride + 1);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut window = Vec::with_capacity(wh * ww);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                window.clear();
                for i in 0..wh {
                    for j in 0..ww {
                        window.push(values[(ch * h + y * stride + i) * w + x * stride + j]);
                    }
                }
                out.push(f(&window));
            }
        }
    }
    Ok((out, Shape::Chw(c, oh, ow)))
}

/// Gathers pooling windows into a flat `n x (wh*ww)` matrix for the secure
/// path; same traversal order as the oracle.
pub fn gather_windows(
    values: &[u64],
    shape: Shape,
    wh: usize,
    ww: usize,
    stride: usize,
) -> (Vec<u64>, Shape) {
    let Shape::Chw(c, h, w) = shape else {
        panic!("pooling without CHW shape");
    };
    let (oh, ow) = ((h - wh) / stride + 1, (w - ww) / stride + 1);
    let mut out = Vec::with_capacity(c * oh * ow * wh * ww);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                for i in 0..wh {
                    for j in 0..ww {
                        out.push(values[(ch * h + y * stride + i) * w + x * stride + j]);
                    }
                }
            }
        }
    }
    (out, Shape::Chw(c, oh, ow))
}
