//! Model files: magic `SCNM`, version, layer count, then one `SCNT` tensor
//! blob per weight tensor (kernel + bias for each conv/fc layer, in program
//! order).

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::rings::{read_scnt, write_scnt, QuantTensor};
use crate::runtime::program::{LayerSpec, SecProgram, Shape};
use crate::{Error, Result};

const SCNM_MAGIC: &[u8; 4] = b"SCNM";
const SCNM_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerWeights {
    Conv {
        kernel: QuantTensor,
        bias: QuantTensor,
    },
    Fc {
        weight: QuantTensor,
        bias: QuantTensor,
    },
    None,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<LayerWeights>,
    pub hash: u64,
}

pub fn write_scnm<W: Write>(w: &mut W, model: &Model, bits: u32) -> Result<()> {
    w.write_all(SCNM_MAGIC)?;
    w.write_all(&SCNM_VERSION.to_le_bytes())?;
    let tensor_layers = model
        .layers
        .iter()
        .filter(|l| !matches!(l, LayerWeights::None))
        .count() as u32;
    w.write_all(&tensor_layers.to_le_bytes())?;
    for layer in &model.layers {
        match layer {
            LayerWeights::Conv { kernel, bias }
            | LayerWeights::Fc {
                weight: kernel,
                bias,
            } => {
                write_scnt(w, kernel, bits)?;
                write_scnt(w, bias, bits)?;
            }
            LayerWeights::None => {}
        }
    }
    Ok(())
}

/// Reads and validates a model against its program: tensor shapes must chain
/// with the program's layer shapes.
pub fn read_scnm<R: Read>(r: &mut R, program: &SecProgram) -> Result<Model> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    let hash = model_hash(&all);
    let mut cursor = &all[..];

    let mut magic = [0u8; 4];
    cursor.read_exact(&mut magic)?;
    if &magic != SCNM_MAGIC {
        return Err(Error::Encoding(format!("bad SCNM magic {magic:?}")));
    }
    let mut v = [0u8; 2];
    cursor.read_exact(&mut v)?;
    if u16::from_le_bytes(v) != SCNM_VERSION {
        return Err(Error::Encoding("unsupported SCNM version".into()));
    }
    let mut count = [0u8; 4];
    cursor.read_exact(&mut count)?;
    let declared = u32::from_le_bytes(count) as usize;

    let shapes = program.validate()?;
    let mut layers = Vec::with_capacity(program.layers.len());
    let mut read_tensors = 0usize;
    let mut shape = program.input;
    for (idx, layer) in program.layers.iter().enumerate() {
        let weights = match *layer {
            LayerSpec::Conv {
                out_channels,
                kh,
                kw,
                ..
            } => {
                let (kernel, kbits) = read_scnt(&mut cursor)?;
                let (bias, _) = read_scnt(&mut cursor)?;
                read_tensors += 1;
                let Shape::Chw(c, _, _) = shape else {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: "conv without CHW".into(),
                    });
                };
                if kbits != program.bits {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: format!("kernel bitwidth {kbits} != program {}", program.bits),
                    });
                }
                if kernel.dims != vec![out_channels, c, kh, kw] {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: format!(
                            "kernel dims {:?} != expected [{out_channels}, {c}, {kh}, {kw}]",
                            kernel.dims
                        ),
                    });
                }
                if bias.dims != vec![out_channels] {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: format!("bias dims {:?} != [{out_channels}]", bias.dims),
                    });
                }
                LayerWeights::Conv { kernel, bias }
            }
            LayerSpec::Fc { out } => {
                let (weight, _) = read_scnt(&mut cursor)?;
                let (bias, _) = read_scnt(&mut cursor)?;
                read_tensors += 1;
                let in_features = shape.len();
                if weight.dims != vec![out, in_features] {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: format!("fc dims {:?} != [{out}, {in_features}]", weight.dims),
                    });
                }
                if bias.dims != vec![out] {
                    return Err(Error::Validation {
                        layer: idx,
                        msg: format!("fc bias dims {:?} != [{out}]", bias.dims),
                    });
                }
                LayerWeights::Fc { weight, bias }
            }
            _ => LayerWeights::None,
        };
        layers.push(weights);
        shape = shapes[idx];
    }
    if read_tensors != declared {
        return Err(Error::Encoding(format!(
            "model declares {declared} weight layers, program uses {read_tensors}"
        )));
    }
    Ok(Model { layers, hash })
}

pub fn model_hash(bytes: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"seconnds-model");
    h.update(bytes);
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
