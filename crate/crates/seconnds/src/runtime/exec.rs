//! Layer-by-layer two-party execution.
//!
//! Both parties run the same loop over the program; linear layers branch on
//! the role (server holds NTT-preprocessed weights, client holds the secret
//! key), nonlinear layers are symmetric. Activations stay additively shared
//! end to end; the only opening is the final label, toward the client.
//!
//! Activations are canonically re-shared before share-local floor operations
//! (truncation, average pooling), so a run's value trajectory depends only
//! on inputs, weights and the dedicated randomness streams, not on which
//! comparison variant produced the preceding shares.

use std::path::PathBuf;
use std::time::Instant;

use crate::boolean::reshare;
use crate::lattice::RlweParams;
use crate::linconv::{
    self, linear_secure_client, linear_secure_server, plan_conv, plan_fc, ConvShape, HeContext,
    PackingPlan, PreprocessedWeights,
};
use crate::nonlinear::{
    argmax_shares, avgpool_batch, maxpool_batch, open_index_to_client, relu_batch, truncate_batch,
};
use crate::rings::{share_split_vec, QuantTensor, RingParams};
use crate::runtime::demand::{compute_demand, Demand};
use crate::runtime::model::{LayerWeights, Model};
use crate::runtime::oracle::gather_windows;
use crate::runtime::program::{LayerSpec, SecProgram, Shape};
use crate::runtime::report::{per_protocol, LayerReport, RunReport};
use crate::session::{Party, Session};
use crate::transport::{Tag, TagCounters};
use crate::{Error, Result};

pub enum RoleData<'a> {
    Server { model: &'a Model },
    Client { input: &'a QuantTensor },
}

#[derive(Default, Clone)]
pub struct ExecOptions {
    pub weight_cache: Option<PathBuf>,
}

pub struct InferenceResult {
    pub label: Option<u64>,
    /// Shares of the values entering argmax; reconstructable in tests.
    pub logit_shares: Vec<u64>,
    pub report: RunReport,
}

fn counters_delta(new: &TagCounters, old: &TagCounters) -> TagCounters {
    TagCounters {
        bytes_sent: new.bytes_sent - old.bytes_sent,
        bytes_received: new.bytes_received - old.bytes_received,
        frames_sent: new.frames_sent - old.frames_sent,
        frames_received: new.frames_received - old.frames_received,
        rounds: new.rounds - old.rounds,
        and_gates: new.and_gates - old.and_gates,
        triples_consumed: new.triples_consumed - old.triples_consumed,
        cots: new.cots - old.cots,
    }
}

/// Runs one inference over an established session. The server passes the
/// model, the client its input tensor.
pub fn run_inference(
    s: &mut Session,
    program: &SecProgram,
    role: RoleData<'_>,
    opts: &ExecOptions,
) -> Result<InferenceResult> {
    let shapes = program.validate()?;
    let ring = RingParams::new(program.bits, program.scale.min(program.bits - 1))?;
    if ring.bits != s.ring.bits {
        return Err(Error::config(
            "session ring does not match program bitwidth",
        ));
    }
    let entry_meter = s.channel.meter_snapshot();
    let entry_totals = entry_meter.totals();
    let entry_label = *entry_meter.tag(Tag::LabelOpen);
    let triples_consumed_entry = s.triples.consumed();

    // ---- offline: demand pre-sizing, HE setup, weight preprocessing ----
    let offline_start = Instant::now();
    let (_, demand) = compute_demand(program, s.party, s.mill_variant)?;
    s.triples.ensure(demand.triples as usize, &mut s.channel)?;
    s.ensure_pads(demand.cots_out as usize, demand.cots_in as usize)?;

    let has_linear = program
        .layers
        .iter()
        .any(|l| matches!(l, LayerSpec::Conv { .. } | LayerSpec::Fc { .. }));
    let he = if has_linear {
        let params = RlweParams::default_for(program.bits)?;
        Some(match &role {
            RoleData::Server { .. } => HeContext::server(params, program.seed_compression)?,
            RoleData::Client { .. } => {
                HeContext::client(params, &mut s.he_rng, program.seed_compression)?
            }
        })
    } else {
        None
    };

    // Server-side plans and NTT-preprocessed weights, cache-backed.
    let mut prepared: Vec<Option<(PackingPlan, PreprocessedWeights)>> = Vec::new();
    if let RoleData::Server { model } = &role {
        let mut shape = program.input;
        for (idx, layer) in program.layers.iter().enumerate() {
            let entry = match (layer, &model.layers[idx]) {
                (
                    &LayerSpec::Conv {
                        out_channels,
                        kh,
                        kw,
                        stride,
                        pad,
                    },
                    LayerWeights::Conv { kernel, .. },
                ) => {
                    let Shape::Chw(c, h, w) = shape else {
                        return Err(Error::Validation {
                            layer: idx,
                            msg: "conv without CHW".into(),
                        });
                    };
                    let he = he.as_ref().expect("linear layer without HE context");
                    let plan = plan_conv(
                        &ConvShape {
                            channels: c,
                            height: h,
                            width: w,
                            out_channels,
                            kh,
                            kw,
                            stride,
                            pad,
                        },
                        he.params.n,
                    )?;
                    let weights =
                        load_or_preprocess(opts, model.hash, idx, &he.params, &plan, &kernel.data)?;
                    Some((plan, weights))
                }
                (&LayerSpec::Fc { out }, LayerWeights::Fc { weight, .. }) => {
                    let he = he.as_ref().expect("linear layer without HE context");
                    let plan = plan_fc(out, shape.len(), he.params.n)?;
                    let weights =
                        load_or_preprocess(opts, model.hash, idx, &he.params, &plan, &weight.data)?;
                    Some((plan, weights))
                }
                _ => None,
            };
            prepared.push(entry);
            shape = shapes[idx];
        }
    }
    let offline_ms = offline_start.elapsed().as_secs_f64() * 1e3;
    let offline_counters = counters_delta(&s.channel.meter().totals(), &entry_totals);

    // ---- input sharing ----
    let online_start = Instant::now();
    let mut layer_reports: Vec<LayerReport> = Vec::new();
    let mut values: Vec<u64> = {
        let before = s.channel.meter().totals();
        let t0 = Instant::now();
        let v = match &role {
            RoleData::Client { input } => {
                if input.len() != program.input.len() {
                    return Err(Error::domain("input tensor does not match program shape"));
                }
                let data: Vec<u64> = input.data.iter().map(|&x| x & ring.mask()).collect();
                let (to_server, kept) = share_split_vec(&ring, &data, &mut s.input_rng);
                s.channel.send_frame(
                    Tag::InputShare,
                    &crate::bits::pack_ring(&to_server, ring.bits),
                )?;
                kept
            }
            RoleData::Server { .. } => {
                let payload = s.channel.recv_frame(Tag::InputShare)?;
                crate::bits::unpack_ring(&payload, ring.bits, program.input.len())
            }
        };
        layer_reports.push(LayerReport {
            layer: "input".into(),
            online_ms: t0.elapsed().as_secs_f64() * 1e3,
            counters: counters_delta(&s.channel.meter().totals(), &before),
        });
        v
    };

    // ---- layers ----
    let mut shape = program.input;
    let mut label = None;
    let mut logit_shares = Vec::new();
    for (idx, layer) in program.layers.iter().enumerate() {
        let before = s.channel.meter().totals();
        let t0 = Instant::now();
        match *layer {
            LayerSpec::Conv {
                out_channels,
                kh,
                kw,
                stride,
                pad,
            } => {
                let he = he.as_ref().unwrap();
                match &role {
                    RoleData::Server { model } => {
                        let (plan, weights) = prepared[idx].as_ref().unwrap();
                        values = linear_secure_server(s, he, plan, weights, &values)?;
                        if let LayerWeights::Conv { bias, .. } = &model.layers[idx] {
                            let Shape::Chw(c, h, w) = shapes[idx] else {
                                unreachable!()
                            };
                            debug_assert_eq!(c, out_channels);
                            for oc in 0..c {
                                for pos in 0..h * w {
                                    let i = oc * h * w + pos;
                                    values[i] = ring.add(values[i], bias.data[oc]);
                                }
                            }
                        }
                    }
                    RoleData::Client { .. } => {
                        let Shape::Chw(c, h, w) = shape else {
                            unreachable!()
                        };
                        let plan = plan_conv(
                            &ConvShape {
                                channels: c,
                                height: h,
                                width: w,
                                out_channels,
                                kh,
                                kw,
                                stride,
                                pad,
                            },
                            he.params.n,
                        )?;
                        values = linear_secure_client(s, he, &plan, &values)?;
                    }
                }
            }
            LayerSpec::Fc { out } => {
                let he = he.as_ref().unwrap();
                match &role {
                    RoleData::Server { model } => {
                        let (plan, weights) = prepared[idx].as_ref().unwrap();
                        values = linear_secure_server(s, he, plan, weights, &values)?;
                        if let LayerWeights::Fc { bias, .. } = &model.layers[idx] {
                            for (v, &b) in values.iter_mut().zip(&bias.data) {
                                *v = ring.add(*v, b);
                            }
                        }
                    }
                    RoleData::Client { .. } => {
                        let plan = plan_fc(out, shape.len(), he.params.n)?;
                        values = linear_secure_client(s, he, &plan, &values)?;
                    }
                }
            }
            LayerSpec::Relu => {
                values = relu_batch(s, Tag::Relu, &values)?;
            }
            LayerSpec::Trunc { shift, msb_known } => {
                values = reshare(s, Tag::Trunc, &values)?;
                values = truncate_batch(s, Tag::Trunc, &values, shift, msb_known)?;
            }
            LayerSpec::MaxPool { wh, ww, stride } => {
                let (windows, _) = gather_windows(&values, shape, wh, ww, stride);
                values = maxpool_batch(s, Tag::Pool, &windows, wh * ww)?;
            }
            LayerSpec::AvgPool { wh, ww, stride } => {
                values = reshare(s, Tag::Pool, &values)?;
                let (windows, _) = gather_windows(&values, shape, wh, ww, stride);
                values = avgpool_batch(s, Tag::Pool, &windows, wh * ww)?;
            }
            LayerSpec::Argmax => {
                logit_shares = values.clone();
                let (idx_share, _) = argmax_shares(s, Tag::Argmax, &values)?;
                label = open_index_to_client(s, idx_share)?;
                values = vec![idx_share];
            }
        }
        shape = shapes[idx];
        layer_reports.push(LayerReport {
            layer: format!("{idx}:{}", layer.name()),
            online_ms: t0.elapsed().as_secs_f64() * 1e3,
            counters: counters_delta(&s.channel.meter().totals(), &before),
        });
    }
    let online_ms = online_start.elapsed().as_secs_f64() * 1e3;

    // Exactly one label opening, toward the client.
    let label_now = *s.channel.meter().tag(Tag::LabelOpen);
    let label_delta = counters_delta(&label_now, &entry_label);
    let expected = match s.party {
        Party::P0 => (1, 0),
        Party::P1 => (0, 1),
    };
    if (label_delta.frames_sent, label_delta.frames_received) != expected {
        return Err(Error::state("label opening surface violated"));
    }

    let report = RunReport {
        party: format!("{:?}", s.party),
        bits: program.bits,
        label,
        offline_ms,
        online_ms,
        layers: layer_reports,
        offline_counters,
        totals: counters_delta(&s.channel.meter().totals(), &entry_totals),
        per_protocol: per_protocol(s.channel.meter(), &entry_meter),
        demand,
        triples_generated: s.triples.generated(),
        triples_consumed: s.triples.consumed() - triples_consumed_entry,
    };
    Ok(InferenceResult {
        label,
        logit_shares,
        report,
    })
}

fn load_or_preprocess(
    opts: &ExecOptions,
    model_hash: u64,
    layer: usize,
    params: &RlweParams,
    plan: &PackingPlan,
    weights: &[u64],
) -> Result<PreprocessedWeights> {
    if let Some(dir) = &opts.weight_cache {
        if let Some(cached) = linconv::load_weight_cache(dir, model_hash, layer, params)? {
            return Ok(cached);
        }
        let fresh = linconv::preprocess_weights(params, plan, weights)?;
        linconv::save_weight_cache(dir, model_hash, layer, params, &fresh)?;
        return Ok(fresh);
    }
    linconv::preprocess_weights(params, plan, weights)
}

/// Demand totals for pre-sizing a session's buffers before calling
/// [`run_inference`] (e.g. to set `triple_buffer` in the config).
pub fn inference_demand(program: &SecProgram, party: Party) -> Result<Demand> {
    Ok(compute_demand(program, party, program.mill_variant)?.1)
}
