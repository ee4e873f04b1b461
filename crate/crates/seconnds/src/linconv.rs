//! Coefficient-packed secure linear layers: conv2d and fully-connected
//! matvec over additively shared tensors, with server weights encoded once
//! and kept in NTT form.
//!
//! Packing places input entry `(c, h, w)` at polynomial coefficient
//! `c·H·W + h·W + w` and mirrors the kernel, so the negacyclic product
//! accumulates each valid-convolution dot product at a designated
//! coefficient with no cross-term collisions. One output channel per
//! polynomial; channels tile when `C·H·W` outgrows the degree. The protocol
//! is one round: the client sends encrypted shares, the server adds its own
//! share, runs the multiply-accumulate chain per output polynomial, masks
//! with a fresh random plaintext and returns; the mask's negation is the
//! server's output share, so reconstruction is exact mod `2^b`.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::RngCore;

use crate::lattice::{
    self, encode_plain, encode_plain_scaled, he_add_ct, he_add_plain, he_pt_mult, mask_ciphertext,
    ntt_forward, ntt_inverse, Ciphertext, Domain, PolyRq, RlweParams, SecretKey,
};
use crate::rings::{mask_for, RingParams};
use crate::session::Session;
use crate::transport::Tag;
use crate::{Error, Result};

/// Forward NTTs applied to weight polynomials; the online path must leave
/// this untouched.
pub static WEIGHT_NTT_COUNT: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static WEIGHT_NTT_LOCAL: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

pub fn weight_ntt_count() -> u64 {
    WEIGHT_NTT_COUNT.load(Ordering::Relaxed)
}

/// Per-thread view of the weight-NTT counter, for tests that run alongside
/// unrelated preprocessing on other threads.
pub fn weight_ntt_count_local() -> u64 {
    WEIGHT_NTT_LOCAL.with(|c| c.get())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kh) / self.stride + 1
    }
    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kw) / self.stride + 1
    }
}

/// Index maps from tensor positions to polynomial coefficients, plus the
/// tile decomposition. The contract is the oracle-checked property that the
/// designated coefficients of the product equal the layer's dot products.
#[derive(Debug, Clone)]
pub enum PackingPlan {
    Conv {
        shape: ConvShape,
        n: usize,
        /// channel slots per tile (zero-padded in the last tile)
        tile_channels: usize,
        tiles: usize,
    },
    Fc {
        rows: usize,
        cols: usize,
        n: usize,
        /// column slots per tile (zero-padded in the last tile)
        tile_cols: usize,
        col_tiles: usize,
        rows_per_poly: usize,
        row_groups: usize,
    },
}

/// Plans a convolution packing for degree `n`.
pub fn plan_conv(shape: &ConvShape, n: usize) -> Result<PackingPlan> {
    if shape.kh > shape.height + 2 * shape.pad || shape.kw > shape.width + 2 * shape.pad {
        return Err(Error::UnsupportedShape(
            "kernel larger than padded input".into(),
        ));
    }
    if shape.stride == 0 {
        return Err(Error::UnsupportedShape("stride must be positive".into()));
    }
    let (hp, wp) = (shape.height + 2 * shape.pad, shape.width + 2 * shape.pad);
    let plane = hp * wp;
    // Highest product index for C_t channels:
    //   (C_t-1)*plane + (hp+kh-2)*wp + (wp+kw-2) <= n-1
    let edge = (hp + shape.kh - 2) * wp + (wp + shape.kw - 2);
    if edge >= n {
        return Err(Error::UnsupportedShape(format!(
            "single-channel window needs {} coefficients, degree is {n}",
            edge + 1
        )));
    }
    let tile_channels = (1 + (n - 1 - edge) / plane).min(shape.channels);
    let tiles = shape.channels.div_ceil(tile_channels);
    Ok(PackingPlan::Conv {
        shape: shape.clone(),
        n,
        tile_channels,
        tiles,
    })
}

/// Plans a matvec packing (`rows x cols` weights times a `cols` vector).
pub fn plan_fc(rows: usize, cols: usize, n: usize) -> Result<PackingPlan> {
    if rows == 0 || cols == 0 {
        return Err(Error::UnsupportedShape("empty matrix".into()));
    }
    let tile_cols = cols.min(n);
    let col_tiles = cols.div_ceil(tile_cols);
    let rows_per_poly = (n / tile_cols).max(1).min(rows);
    let row_groups = rows.div_ceil(rows_per_poly);
    Ok(PackingPlan::Fc {
        rows,
        cols,
        n,
        tile_cols,
        col_tiles,
        rows_per_poly,
        row_groups,
    })
}

impl PackingPlan {
    pub fn input_tiles(&self) -> usize {
        match self {
            PackingPlan::Conv { tiles, .. } => *tiles,
            PackingPlan::Fc { col_tiles, .. } => *col_tiles,
        }
    }

    pub fn output_polys(&self) -> usize {
        match self {
            PackingPlan::Conv { shape, .. } => shape.out_channels,
            PackingPlan::Fc { row_groups, .. } => *row_groups,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            PackingPlan::Conv { shape, .. } => {
                shape.out_channels * shape.out_height() * shape.out_width()
            }
            PackingPlan::Fc { rows, .. } => *rows,
        }
    }

    /// Encodes one tile of a party's input share into polynomial coefficient
    /// values (zero padding applied here).
    pub fn encode_input_tile(&self, share: &[u64], tile: usize) -> Vec<u64> {
        match self {
            PackingPlan::Conv {
                shape,
                n,
                tile_channels,
                ..
            } => {
                let (hp, wp) = (shape.height + 2 * shape.pad, shape.width + 2 * shape.pad);
                let mut values = vec![0u64; *n];
                for c_local in 0..*tile_channels {
                    let c = tile * tile_channels + c_local;
                    if c >= shape.channels {
                        break;
                    }
                    for h in 0..shape.height {
                        for w in 0..shape.width {
                            let idx = c_local * hp * wp + (h + shape.pad) * wp + (w + shape.pad);
                            values[idx] = share[(c * shape.height + h) * shape.width + w];
                        }
                    }
                }
                values
            }
            PackingPlan::Fc {
                cols, n, tile_cols, ..
            } => {
                let mut values = vec![0u64; *n];
                for j_local in 0..*tile_cols {
                    let j = tile * tile_cols + j_local;
                    if j >= *cols {
                        break;
                    }
                    values[j_local] = share[j];
                }
                values
            }
        }
    }

    /// Encodes the mirrored weight polynomial for `(tile, out_poly)`.
    /// Kernel layout is `[out_channels][channels][kh][kw]` row-major; fc
    /// weights are `[rows][cols]`.
    pub fn encode_weight_poly(&self, weights: &[u64], tile: usize, out: usize) -> Vec<u64> {
        match self {
            PackingPlan::Conv {
                shape,
                n,
                tile_channels,
                ..
            } => {
                let (hp, wp) = (shape.height + 2 * shape.pad, shape.width + 2 * shape.pad);
                let mut values = vec![0u64; *n];
                for c_local in 0..*tile_channels {
                    let c = tile * tile_channels + c_local;
                    if c >= shape.channels {
                        break;
                    }
                    for i in 0..shape.kh {
                        for j in 0..shape.kw {
                            let idx = (tile_channels - 1 - c_local) * hp * wp
                                + (shape.kh - 1 - i) * wp
                                + (shape.kw - 1 - j);
                            values[idx] =
                                weights[((out * shape.channels + c) * shape.kh + i) * shape.kw + j];
                        }
                    }
                }
                values
            }
            PackingPlan::Fc {
                rows,
                cols,
                n,
                tile_cols,
                rows_per_poly,
                ..
            } => {
                let mut values = vec![0u64; *n];
                for r_local in 0..*rows_per_poly {
                    let r = out * rows_per_poly + r_local;
                    if r >= *rows {
                        break;
                    }
                    for j_local in 0..*tile_cols {
                        let j = tile * tile_cols + j_local;
                        if j >= *cols {
                            break;
                        }
                        values[r_local * tile_cols + (tile_cols - 1 - j_local)] =
                            weights[r * cols + j];
                    }
                }
                values
            }
        }
    }

    /// The coefficients of an output polynomial that carry live results, in
    /// output-tensor order.
    pub fn harvest_indices(&self, out: usize) -> Vec<(usize, usize)> {
        match self {
            PackingPlan::Conv {
                shape,
                tile_channels,
                ..
            } => {
                let (hp, wp) = (shape.height + 2 * shape.pad, shape.width + 2 * shape.pad);
                let base = (tile_channels - 1) * hp * wp;
                let (oh, ow) = (shape.out_height(), shape.out_width());
                let mut out_positions = Vec::with_capacity(oh * ow);
                for y in 0..oh {
                    for x in 0..ow {
                        let coeff = base
                            + (y * shape.stride + shape.kh - 1) * wp
                            + (x * shape.stride + shape.kw - 1);
                        let tensor_pos = (out * oh + y) * ow + x;
                        out_positions.push((coeff, tensor_pos));
                    }
                }
                out_positions
            }
            PackingPlan::Fc {
                rows,
                tile_cols,
                rows_per_poly,
                ..
            } => {
                let mut out_positions = Vec::new();
                for r_local in 0..*rows_per_poly {
                    let r = out * rows_per_poly + r_local;
                    if r >= *rows {
                        break;
                    }
                    out_positions.push((r_local * tile_cols + tile_cols - 1, r));
                }
                out_positions
            }
        }
    }
}

/// Per-layer preprocessed weights: one NTT-form polynomial per
/// `(input tile, output polynomial)` pair.
pub struct PreprocessedWeights {
    pub polys: Vec<Vec<PolyRq>>,
}

/// Encodes and transforms the weights; the one place weight polynomials go
/// through a forward NTT. Reusable across queries.
pub fn preprocess_weights(
    params: &RlweParams,
    plan: &PackingPlan,
    weights: &[u64],
) -> Result<PreprocessedWeights> {
    let mut polys = Vec::with_capacity(plan.input_tiles());
    for tile in 0..plan.input_tiles() {
        let mut row = Vec::with_capacity(plan.output_polys());
        for out in 0..plan.output_polys() {
            let mut p = encode_plain(params, &plan.encode_weight_poly(weights, tile, out))?;
            ntt_forward(params, &mut p)?;
            WEIGHT_NTT_COUNT.fetch_add(1, Ordering::Relaxed);
            WEIGHT_NTT_LOCAL.with(|c| c.set(c.get() + 1));
            row.push(p);
        }
        polys.push(row);
    }
    Ok(PreprocessedWeights { polys })
}

/// HE-side state for linear layers: the client holds the secret key.
pub struct HeContext {
    pub params: RlweParams,
    pub sk: Option<SecretKey>,
    pub seed_a: bool,
}

impl HeContext {
    pub fn client(
        params: RlweParams,
        rng: &mut rand_chacha::ChaCha20Rng,
        seed_a: bool,
    ) -> Result<Self> {
        let sk = lattice::keygen(&params, rng)?;
        Ok(HeContext {
            params,
            sk: Some(sk),
            seed_a,
        })
    }

    pub fn server(params: RlweParams, seed_a: bool) -> Result<Self> {
        Ok(HeContext {
            params,
            sk: None,
            seed_a,
        })
    }
}

fn concat_frames(parts: Vec<Vec<u8>>) -> Vec<u8> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len() + 4).sum());
    for p in parts {
        out.extend_from_slice(&(p.len() as u32).to_le_bytes());
        out.extend_from_slice(&p);
    }
    out
}

fn split_frames(bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    while cursor < bytes.len() {
        if cursor + 4 > bytes.len() {
            return Err(Error::Encoding("truncated ciphertext bundle".into()));
        }
        let len = u32::from_le_bytes(bytes[cursor..cursor + 4].try_into().unwrap()) as usize;
        cursor += 4;
        if cursor + len > bytes.len() {
            return Err(Error::Encoding("truncated ciphertext bundle".into()));
        }
        out.push(bytes[cursor..cursor + len].to_vec());
        cursor += len;
    }
    Ok(out)
}

/// Client half of a secure linear layer: encrypt input-share tiles, send,
/// decrypt the masked results, harvest designated coefficients.
pub fn linear_secure_client(
    s: &mut Session,
    he: &HeContext,
    plan: &PackingPlan,
    x_share: &[u64],
) -> Result<Vec<u64>> {
    let params = &he.params;
    let sk = he
        .sk
        .as_ref()
        .ok_or_else(|| Error::state("client needs the secret key"))?;
    let mask = mask_for(params.plain_bits);

    let mut frames = Vec::with_capacity(plan.input_tiles());
    for tile in 0..plan.input_tiles() {
        let values = plan.encode_input_tile(x_share, tile);
        let ct = lattice::encrypt_sym(params, &values, sk, &mut s.he_rng, he.seed_a)?;
        frames.push(lattice::serialize_ciphertext(params, &ct));
    }
    s.channel.send_frame(Tag::Linconv, &concat_frames(frames))?;

    let reply = s.channel.recv_frame(Tag::Linconv)?;
    let parts = split_frames(&reply)?;
    if parts.len() != plan.output_polys() {
        return Err(Error::state(format!(
            "expected {} output ciphertexts, got {}",
            plan.output_polys(),
            parts.len()
        )));
    }
    let mut out = vec![0u64; plan.output_len()];
    for (idx, part) in parts.iter().enumerate() {
        let ct = lattice::deserialize_ciphertext(params, part)?;
        let values = lattice::decrypt(params, &ct, sk)?;
        for (coeff, pos) in plan.harvest_indices(idx) {
            out[pos] = values[coeff] & mask;
        }
    }
    Ok(out)
}

/// Server half: add own share homomorphically, run the MAC chains with the
/// NTT-resident weights, mask, respond. Returns `-mask` at the designated
/// coefficients as the server's output share.
pub fn linear_secure_server(
    s: &mut Session,
    he: &HeContext,
    plan: &PackingPlan,
    weights: &PreprocessedWeights,
    x_share: &[u64],
) -> Result<Vec<u64>> {
    let params = &he.params;
    let ring_mask = mask_for(params.plain_bits);

    let bundle = s.channel.recv_frame(Tag::Linconv)?;
    let parts = split_frames(&bundle)?;
    if parts.len() != plan.input_tiles() {
        return Err(Error::state(format!(
            "expected {} input ciphertexts, got {}",
            plan.input_tiles(),
            parts.len()
        )));
    }
    // Expand, transform, and fold in the server's own share per tile.
    let mut cts = Vec::with_capacity(parts.len());
    for (tile, part) in parts.iter().enumerate() {
        let mut ct = lattice::deserialize_ciphertext(params, part)?;
        lattice::expand_and_transform(params, &mut ct)?;
        let own = plan.encode_input_tile(x_share, tile);
        let mut scaled = encode_plain_scaled(params, &own)?;
        ntt_forward(params, &mut scaled)?;
        he_add_plain(params, &mut ct, &scaled)?;
        cts.push(ct);
    }

    // MAC chain per output polynomial, data-parallel across outputs;
    // weights stay in NTT form (asserted, never transformed here).
    for row in &weights.polys {
        for w in row {
            if w.domain != Domain::Ntt {
                return Err(Error::state("weights must be preprocessed into NTT form"));
            }
        }
    }
    let accs: Vec<Result<Ciphertext>> = crate::par::map_range(plan.output_polys(), |out| {
        let mut acc: Option<Ciphertext> = None;
        for (tile, ct) in cts.iter().enumerate() {
            let prod = he_pt_mult(params, ct, &weights.polys[tile][out])?;
            match &mut acc {
                None => acc = Some(prod),
                Some(a) => he_add_ct(params, a, &prod)?,
            }
        }
        Ok(acc.expect("at least one tile"))
    });

    let mut out_share = vec![0u64; plan.output_len()];
    let mut frames = Vec::with_capacity(plan.output_polys());
    for (idx, acc) in accs.into_iter().enumerate() {
        let mut ct = acc?;
        // back to coefficient domain for transport
        if let lattice::APart::Poly(a) = &mut ct.a {
            ntt_inverse(params, a)?;
        }
        ntt_inverse(params, &mut ct.b)?;
        let r: Vec<u64> = (0..params.n)
            .map(|_| s.he_rng.next_u64() & ring_mask)
            .collect();
        mask_ciphertext(params, &mut ct, &r)?;
        for (coeff, pos) in plan.harvest_indices(idx) {
            out_share[pos] = r[coeff].wrapping_neg() & ring_mask;
        }
        frames.push(lattice::serialize_ciphertext(params, &ct));
    }
    s.channel.send_frame(Tag::Linconv, &concat_frames(frames))?;
    Ok(out_share)
}

/// Expected on-wire bytes for one linear layer, for meter checks: input and
/// output ciphertext sizes plus the 4-byte bundle framing per ciphertext.
pub fn expected_comm_bytes(params: &RlweParams, plan: &PackingPlan, seed_a: bool) -> (u64, u64) {
    let poly = params.primes.len() * params.n * 8;
    let ct_in = 9 + if seed_a { 32 + poly } else { 2 * poly };
    let ct_out = 9 + 2 * poly;
    let upload = plan.input_tiles() * (ct_in + 4);
    let download = plan.output_polys() * (ct_out + 4);
    (upload as u64, download as u64)
}

/// Plaintext integer convolution oracle mod `2^b` (valid region, with
/// padding and stride), kernel layout `[oc][c][kh][kw]`.
pub fn conv2d_plain(shape: &ConvShape, x: &[u64], k: &[u64], bits: u32) -> Vec<u64> {
    let mask = mask_for(bits);
    let (oh, ow) = (shape.out_height(), shape.out_width());
    let mut out = vec![0u64; shape.out_channels * oh * ow];
    for oc in 0..shape.out_channels {
        for y in 0..oh {
            for x_pos in 0..ow {
                let mut acc = 0u64;
                for c in 0..shape.channels {
                    for i in 0..shape.kh {
                        for j in 0..shape.kw {
                            let h = y * shape.stride + i;
                            let w = x_pos * shape.stride + j;
                            // padded coordinates back to the raw tensor
                            if h < shape.pad || w < shape.pad {
                                continue;
                            }
                            let (h, w) = (h - shape.pad, w - shape.pad);
                            if h >= shape.height || w >= shape.width {
                                continue;
                            }
                            let xv = x[(c * shape.height + h) * shape.width + w];
                            let kv = k[((oc * shape.channels + c) * shape.kh + i) * shape.kw + j];
                            acc = acc.wrapping_add(xv.wrapping_mul(kv));
                        }
                    }
                }
                out[(oc * oh + y) * ow + x_pos] = acc & mask;
            }
        }
    }
    out
}

/// Plaintext matvec oracle mod `2^b`, weights `[rows][cols]`.
pub fn matvec_plain(rows: usize, cols: usize, w: &[u64], x: &[u64], bits: u32) -> Vec<u64> {
    let mask = mask_for(bits);
    (0..rows)
        .map(|r| {
            let mut acc = 0u64;
            for j in 0..cols {
                acc = acc.wrapping_add(w[r * cols + j].wrapping_mul(x[j]));
            }
            acc & mask
        })
        .collect()
}

/// Writes preprocessed weights to the cache directory, keyed by model hash,
/// layer id and parameter hash.
pub fn save_weight_cache(
    dir: &Path,
    model_hash: u64,
    layer_id: usize,
    params: &RlweParams,
    weights: &PreprocessedWeights,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = cache_path(dir, model_hash, layer_id, params);
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(b"SCWC");
    out.extend_from_slice(&(weights.polys.len() as u32).to_le_bytes());
    out.extend_from_slice(&(weights.polys.first().map_or(0, |r| r.len()) as u32).to_le_bytes());
    for row in &weights.polys {
        for p in row {
            for prime_row in &p.coeffs {
                for &c in prime_row {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_weight_cache(
    dir: &Path,
    model_hash: u64,
    layer_id: usize,
    params: &RlweParams,
) -> Result<Option<PreprocessedWeights>> {
    let path = cache_path(dir, model_hash, layer_id, params);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(_) => return Ok(None),
    };
    if bytes.len() < 12 || &bytes[..4] != b"SCWC" {
        return Ok(None);
    }
    let tiles = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let outs = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let poly_words = params.primes.len() * params.n;
    if bytes.len() != 12 + tiles * outs * poly_words * 8 {
        return Ok(None);
    }
    let mut cursor = 12usize;
    let mut polys = Vec::with_capacity(tiles);
    for _ in 0..tiles {
        let mut row = Vec::with_capacity(outs);
        for _ in 0..outs {
            let mut coeffs = Vec::with_capacity(params.primes.len());
            for _ in 0..params.primes.len() {
                let mut prime_row = Vec::with_capacity(params.n);
                for _ in 0..params.n {
                    prime_row.push(u64::from_le_bytes(
                        bytes[cursor..cursor + 8].try_into().unwrap(),
                    ));
                    cursor += 8;
                }
                coeffs.push(prime_row);
            }
            row.push(PolyRq {
                coeffs,
                domain: Domain::Ntt,
            });
        }
        polys.push(row);
    }
    Ok(Some(PreprocessedWeights { polys }))
}

fn cache_path(
    dir: &Path,
    model_hash: u64,
    layer_id: usize,
    params: &RlweParams,
) -> std::path::PathBuf {
    dir.join(format!(
        "{model_hash:016x}_{layer_id}_{:016x}.wts",
        params.params_hash()
    ))
}

/// Splits a plaintext tensor into additive shares for linear-layer tests.
pub fn share_tensor(
    ring: &RingParams,
    values: &[u64],
    rng: &mut rand_chacha::ChaCha20Rng,
) -> (Vec<u64>, Vec<u64>) {
    crate::rings::share_split_vec(ring, values, rng)
}
