//! Program files: a human-readable layer graph shared by both parties, plus
//! shape-chain validation.
//!
//! ```text
//! # header keys, then layer blocks
//! bitwidth 37
//! scale 12
//! input 1x8x8
//! mill linear
//!
//! layer conv
//!   out_channels 4
//!   kernel 3x3
//!   stride 1
//!   pad 1
//! layer relu
//! layer argmax
//! ```

use crate::session::{MillVariant, TripleBackendKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
    },
    Fc {
        out: usize,
    },
    Relu,
    Trunc {
        shift: u32,
        msb_known: bool,
    },
    MaxPool {
        wh: usize,
        ww: usize,
        stride: usize,
    },
    AvgPool {
        wh: usize,
        ww: usize,
        stride: usize,
    },
    Argmax,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Fc { .. } => "fc",
            LayerSpec::Relu => "relu",
            LayerSpec::Trunc { .. } => "trunc",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::AvgPool { .. } => "avgpool",
            LayerSpec::Argmax => "argmax",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Chw(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Chw(c, h, w) => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct SecProgram {
    pub bits: u32,
    pub scale: u32,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub mill_variant: MillVariant,
    pub triple_backend: Option<TripleBackendKind>,
    pub triple_chunk: Option<usize>,
    pub triple_buffer: Option<usize>,
    pub seed_compression: bool,
}

fn parse_pair(v: &str, what: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once('x')
        .ok_or_else(|| Error::config(format!("{what} wants AxB, got {v:?}")))?;
    Ok((
        a.trim()
            .parse()
            .map_err(|_| Error::config(format!("bad {what} {v:?}")))?,
        b.trim()
            .parse()
            .map_err(|_| Error::config(format!("bad {what} {v:?}")))?,
    ))
}

impl SecProgram {
    pub fn parse(text: &str) -> Result<SecProgram> {
        let mut bits = None;
        let mut scale = 0u32;
        let mut input = None;
        let mut mill_variant = MillVariant::Linear;
        let mut triple_backend = None;
        let mut triple_chunk = None;
        let mut triple_buffer = None;
        let mut seed_compression = true;
        let mut layers: Vec<LayerSpec> = Vec::new();
        let mut current: Option<(String, Vec<(String, String)>)> = None;
        let mut blocks: Vec<(String, Vec<(String, String)>)> = Vec::new();

        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once(char::is_whitespace) {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (line, ""),
            };
            if key == "layer" {
                if let Some(block) = current.take() {
                    blocks.push(block);
                }
                current = Some((value.to_string(), Vec::new()));
                continue;
            }
            match &mut current {
                Some((_, kvs)) => kvs.push((key.to_string(), value.to_string())),
                None => match key {
                    "bitwidth" => {
                        bits = Some(value.parse().map_err(|_| Error::config("bad bitwidth"))?)
                    }
                    "scale" => scale = value.parse().map_err(|_| Error::config("bad scale"))?,
                    "input" => {
                        let parts: Vec<&str> = value.split('x').collect();
                        input = Some(match parts.len() {
                            3 => Shape::Chw(
                                parts[0].parse().map_err(|_| Error::config("bad input"))?,
                                parts[1].parse().map_err(|_| Error::config("bad input"))?,
                                parts[2].parse().map_err(|_| Error::config("bad input"))?,
                            ),
                            1 => Shape::Flat(
                                parts[0].parse().map_err(|_| Error::config("bad input"))?,
                            ),
                            _ => return Err(Error::config(format!("bad input shape {value:?}"))),
                        });
                    }
                    "mill" => mill_variant = MillVariant::parse(value)?,
                    "triple_backend" => triple_backend = Some(TripleBackendKind::parse(value)?),
                    "triple_chunk" => {
                        triple_chunk = Some(
                            value
                                .parse()
                                .map_err(|_| Error::config("bad triple_chunk"))?,
                        )
                    }
                    "triple_buffer" => {
                        triple_buffer = Some(
                            value
                                .parse()
                                .map_err(|_| Error::config("bad triple_buffer"))?,
                        )
                    }
                    "seed_compression" => {
                        seed_compression = value
                            .parse()
                            .map_err(|_| Error::config("bad seed_compression"))?
                    }
                    other => return Err(Error::config(format!("unknown header key {other:?}"))),
                },
            }
        }
        if let Some(block) = current.take() {
            blocks.push(block);
        }

        for (name, kvs) in blocks {
            let get = |k: &str| -> Option<&str> {
                kvs.iter()
                    .find(|(key, _)| key == k)
                    .map(|(_, v)| v.as_str())
            };
            let need = |k: &str| -> Result<&str> {
                get(k).ok_or_else(|| Error::config(format!("layer {name} missing {k}")))
            };
            let layer = match name.as_str() {
                "conv" => {
                    let (kh, kw) = parse_pair(need("kernel")?, "kernel")?;
                    LayerSpec::Conv {
                        out_channels: need("out_channels")?
                            .parse()
                            .map_err(|_| Error::config("bad out_channels"))?,
                        kh,
                        kw,
                        stride: get("stride")
                            .unwrap_or("1")
                            .parse()
                            .map_err(|_| Error::config("bad stride"))?,
                        pad: get("pad")
                            .unwrap_or("0")
                            .parse()
                            .map_err(|_| Error::config("bad pad"))?,
                    }
                }
                "fc" => LayerSpec::Fc {
                    out: need("out")?
                        .parse()
                        .map_err(|_| Error::config("bad fc out"))?,
                },
                "relu" => LayerSpec::Relu,
                "trunc" => LayerSpec::Trunc {
                    shift: need("shift")?
                        .parse()
                        .map_err(|_| Error::config("bad shift"))?,
                    msb_known: get("msb_known")
                        .unwrap_or("false")
                        .parse()
                        .map_err(|_| Error::config("bad msb_known"))?,
                },
                "maxpool" | "avgpool" => {
                    let (wh, ww) = parse_pair(need("window")?, "window")?;
                    let stride: usize = get("stride")
                        .map(|s| s.parse())
                        .transpose()
                        .map_err(|_| Error::config("bad stride"))?
                        .unwrap_or(wh);
                    if name == "maxpool" {
                        LayerSpec::MaxPool { wh, ww, stride }
                    } else {
                        LayerSpec::AvgPool { wh, ww, stride }
                    }
                }
                "argmax" => LayerSpec::Argmax,
                other => return Err(Error::config(format!("unknown layer kind {other:?}"))),
            };
            layers.push(layer);
        }

        let program = SecProgram {
            bits: bits.ok_or_else(|| Error::config("program missing bitwidth"))?,
            scale,
            input: input.ok_or_else(|| Error::config("program missing input shape"))?,
            layers,
            mill_variant,
            triple_backend,
            triple_chunk,
            triple_buffer,
            seed_compression,
        };
        program.validate()?;
        Ok(program)
    }

    /// Checks the shape chain and structural rules; returns the output shape
    /// of every layer.
    pub fn validate(&self) -> Result<Vec<Shape>> {
        if self.bits < 2 || self.bits > 44 {
            return Err(Error::Validation {
                layer: 0,
                msg: "bitwidth out of range".into(),
            });
        }
        let argmax_count = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Argmax))
            .count();
        if argmax_count != 1 || !matches!(self.layers.last(), Some(LayerSpec::Argmax)) {
            return Err(Error::Validation {
                layer: self.layers.len().saturating_sub(1),
                msg: "program needs exactly one terminal argmax".into(),
            });
        }
        let mut shape = self.input;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let err = |msg: String| Error::Validation { layer: idx, msg };
            shape = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                } => match shape {
                    Shape::Chw(_, h, w) => {
                        if kh > h + 2 * pad || kw > w + 2 * pad {
                            return Err(err(format!("kernel {kh}x{kw} exceeds padded input")));
                        }
                        if stride == 0 || out_channels == 0 {
                            return Err(err("conv needs positive stride and channels".into()));
                        }
                        Shape::Chw(
                            out_channels,
                            (h + 2 * pad - kh) / stride + 1,
                            (w + 2 * pad - kw) / stride + 1,
                        )
                    }
                    _ => return Err(err("conv needs a CHW input".into())),
                },
                LayerSpec::Fc { out } => {
                    if out == 0 {
                        return Err(err("fc needs positive output".into()));
                    }
                    Shape::Flat(out)
                }
                LayerSpec::Relu => shape,
                LayerSpec::Trunc { shift, .. } => {
                    if shift == 0 || shift >= self.bits {
                        return Err(err(format!("shift {shift} out of range")));
                    }
                    shape
                }
                LayerSpec::MaxPool { wh, ww, stride } | LayerSpec::AvgPool { wh, ww, stride } => {
                    match shape {
                        Shape::Chw(c, h, w) => {
                            if wh == 0 || ww == 0 || stride == 0 {
                                return Err(err("pool window and stride must be positive".into()));
                            }
                            if wh > h || ww > w {
                                return Err(err(format!("window {wh}x{ww} exceeds input")));
                            }
                            Shape::Chw(c, (h - wh) / stride + 1, (w - ww) / stride + 1)
                        }
                        _ => return Err(err("pooling needs a CHW input".into())),
                    }
                }
                LayerSpec::Argmax => Shape::Flat(1),
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("bitwidth {}\n", self.bits));
        out.push_str(&format!("scale {}\n", self.scale));
        match self.input {
            Shape::Chw(c, h, w) => out.push_str(&format!("input {c}x{h}x{w}\n")),
            Shape::Flat(n) => out.push_str(&format!("input {n}\n")),
        }
        out.push_str(&format!(
            "mill {}\n",
            match self.mill_variant {
                MillVariant::Linear => "linear",
                MillVariant::LogDepth => "logdepth",
            }
        ));
        if let Some(kind) = self.triple_backend {
            out.push_str(&format!(
                "triple_backend {}\n",
                match kind {
                    TripleBackendKind::Iknp => "iknp",
                    TripleBackendKind::Dealer => "dealer",
                }
            ));
        }
        if let Some(c) = self.triple_chunk {
            out.push_str(&format!("triple_chunk {c}\n"));
        }
        if let Some(c) = self.triple_buffer {
            out.push_str(&format!("triple_buffer {c}\n"));
        }
        if !self.seed_compression {
            out.push_str("seed_compression false\n");
        }
        for layer in &self.layers {
            out.push('\n');
            match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kh,
                    kw,
                    stride,
                    pad,
                } => {
                    out.push_str("layer conv\n");
                    out.push_str(&format!("  out_channels {out_channels}\n"));
                    out.push_str(&format!("  kernel {kh}x{kw}\n"));
                    out.push_str(&format!("  stride {stride}\n"));
                    out.push_str(&format!("  pad {pad}\n"));
                }
                LayerSpec::Fc { out: o } => {
                    out.push_str("layer fc\n");
                    out.push_str(&format!("  out {o}\n"));
                }
                LayerSpec::Relu => out.push_str("layer relu\n"),
                LayerSpec::Trunc { shift, msb_known } => {
                    out.push_str("layer trunc\n");
                    out.push_str(&format!("  shift {shift}\n"));
                    out.push_str(&format!("  msb_known {msb_known}\n"));
                }
                LayerSpec::MaxPool { wh, ww, stride } => {
                    out.push_str("layer maxpool\n");
                    out.push_str(&format!("  window {wh}x{ww}\n"));
                    out.push_str(&format!("  stride {stride}\n"));
                }
                LayerSpec::AvgPool { wh, ww, stride } => {
                    out.push_str("layer avgpool\n");
                    out.push_str(&format!("  window {wh}x{ww}\n"));
                    out.push_str(&format!("  stride {stride}\n"));
                }
                LayerSpec::Argmax => out.push_str("layer argmax\n"),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "bitwidth 8\ninput 4\nlayer argmax\n"
    }

    #[test]
    fn minimal_program_loads() {
        let p = SecProgram::parse(minimal()).unwrap();
        assert_eq!(p.bits, 8);
        assert_eq!(p.input, Shape::Flat(4));
        assert_eq!(p.layers, vec![LayerSpec::Argmax]);
    }

    #[test]
    fn text_round_trip() {
        let text = "bitwidth 37\nscale 4\ninput 1x8x8\nmill logdepth\n\nlayer conv\n  out_channels 4\n  kernel 3x3\n  stride 1\n  pad 1\nlayer relu\nlayer trunc\n  shift 4\n  msb_known true\nlayer maxpool\n  window 2x2\n  stride 2\nlayer fc\n  out 10\nlayer argmax\n";
        let p = SecProgram::parse(text).unwrap();
        let p2 = SecProgram::parse(&p.to_text()).unwrap();
        assert_eq!(p.layers, p2.layers);
        assert_eq!(p.bits, p2.bits);
        assert_eq!(p.input, p2.input);
        assert_eq!(p.mill_variant, p2.mill_variant);
    }

    #[test]
    fn shape_chain() {
        let text = "bitwidth 37\ninput 1x8x8\nlayer conv\n  out_channels 4\n  kernel 3x3\n  pad 1\nlayer maxpool\n  window 2x2\nlayer fc\n  out 10\nlayer argmax\n";
        let p = SecProgram::parse(text).unwrap();
        let shapes = p.validate().unwrap();
        assert_eq!(shapes[0], Shape::Chw(4, 8, 8));
        assert_eq!(shapes[1], Shape::Chw(4, 4, 4));
        assert_eq!(shapes[2], Shape::Flat(10));
    }

    #[test]
    fn rejects_missing_or_misplaced_argmax() {
        assert!(SecProgram::parse("bitwidth 8\ninput 4\nlayer relu\n").is_err());
        assert!(SecProgram::parse("bitwidth 8\ninput 4\nlayer argmax\nlayer relu\n").is_err());
    }

    #[test]
    fn rejects_kernel_exceeding_input() {
        let text =
            "bitwidth 8\ninput 1x2x2\nlayer conv\n  out_channels 1\n  kernel 3x3\nlayer argmax\n";
        let err = SecProgram::parse(text).unwrap_err();
        assert!(matches!(err, Error::Validation { layer: 0, .. }));
    }

    #[test]
    fn rejects_bad_shift() {
        let text = "bitwidth 8\ninput 4\nlayer trunc\n  shift 9\nlayer argmax\n";
        assert!(SecProgram::parse(text).is_err());
    }
}
