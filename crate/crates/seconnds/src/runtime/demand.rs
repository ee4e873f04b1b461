//! Exact correlated-randomness demand per layer, derived from the protocol
//! budgets, so the triple buffer and pad pools can be pre-sized before the
//! online phase and the numbers audited in the report.
//!
//! Per element: dReLU costs one width-`b-1` comparison; ReLU adds one
//! multiplexer (one COT each direction); truncation costs one AND (MSB
//! known) or a width-`b` comparison, plus one B2A COT; max pooling runs
//! `w-1` ReLU steps per output; argmax runs `k-1` dReLU + double-width
//! multiplexer steps.

use crate::compare::{linear_and_count, logdepth_and_count};
use crate::runtime::program::{LayerSpec, SecProgram};
use crate::session::{MillVariant, Party};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub triples: u64,
    pub cots_out: u64,
    pub cots_in: u64,
}

impl Demand {
    fn add(&mut self, other: Demand) {
        self.triples += other.triples;
        self.cots_out += other.cots_out;
        self.cots_in += other.cots_in;
    }

    fn scaled(self, n: u64) -> Demand {
        Demand {
            triples: self.triples * n,
            cots_out: self.cots_out * n,
            cots_in: self.cots_in * n,
        }
    }
}

fn mill_ands(bits: u32, variant: MillVariant) -> u64 {
    match variant {
        MillVariant::Linear => linear_and_count(bits),
        MillVariant::LogDepth => logdepth_and_count(bits),
    }
}

fn drelu_demand(bits: u32, variant: MillVariant) -> Demand {
    Demand {
        triples: mill_ands(bits - 1, variant),
        cots_out: 0,
        cots_in: 0,
    }
}

fn relu_demand(bits: u32, variant: MillVariant) -> Demand {
    let mut d = drelu_demand(bits, variant);
    d.cots_out += 1;
    d.cots_in += 1;
    d
}

fn trunc_demand(bits: u32, variant: MillVariant, msb_known: bool, party: Party) -> Demand {
    let triples = if msb_known {
        1
    } else {
        mill_ands(bits, variant)
    };
    // B2A: party 0 sends, party 1 receives
    match party {
        Party::P0 => Demand {
            triples,
            cots_out: 1,
            cots_in: 0,
        },
        Party::P1 => Demand {
            triples,
            cots_out: 0,
            cots_in: 1,
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerDemand {
    pub layer: String,
    pub demand: Demand,
}

/// Per-layer and total demand for one inference, as seen by `party`.
pub fn compute_demand(
    program: &SecProgram,
    party: Party,
    variant: MillVariant,
) -> Result<(Vec<LayerDemand>, Demand)> {
    let shapes = program.validate()?;
    let bits = program.bits;
    let mut out = Vec::with_capacity(program.layers.len());
    let mut total = Demand::default();
    let mut shape = program.input;
    for (idx, layer) in program.layers.iter().enumerate() {
        let n = shape.len() as u64;
        let d = match *layer {
            LayerSpec::Conv { .. } | LayerSpec::Fc { .. } => Demand::default(),
            LayerSpec::Relu => relu_demand(bits, variant).scaled(n),
            LayerSpec::Trunc { msb_known, .. } => {
                trunc_demand(bits, variant, msb_known, party).scaled(n)
            }
            LayerSpec::MaxPool { wh, ww, .. } => {
                let outputs = shapes[idx].len() as u64;
                relu_demand(bits, variant).scaled(outputs * (wh * ww - 1) as u64)
            }
            LayerSpec::AvgPool { wh, ww, .. } => {
                let outputs = shapes[idx].len() as u64;
                let w = wh * ww;
                if w == 1 {
                    Demand::default()
                } else {
                    // both power-of-two (via truncate) and general windows
                    // compute the full-ring wrap and one B2A
                    trunc_demand(bits, variant, false, party).scaled(outputs)
                }
            }
            LayerSpec::Argmax => {
                let k = shape.len() as u64;
                let mut d = drelu_demand(bits, variant);
                d.cots_out += 2;
                d.cots_in += 2;
                d.scaled(k.saturating_sub(1))
            }
        };
        out.push(LayerDemand {
            layer: format!("{idx}:{}", layer.name()),
            demand: d,
        });
        total.add(d);
        shape = shapes[idx];
    }
    Ok((out, total))
}
