//! Fully Boolean millionaires' protocol on XOR shares.
//!
//! Party 0 holds `x`, party 1 holds `y`, both `b`-bit. Per bit position the
//! parties form shares of `b0 = bit_x ^ g'` and `b1 = bit_y ^ g` locally;
//! equality shares `b0 ^ b1` are free and the inequality shares come from one
//! AND batch over all `b` positions. Combining the per-bit results runs
//! either serially (`b-1` more ANDs, one round each) or as a balanced tree
//! (one AND round per level, extra equality ANDs except for the node at the
//! low end of every level, whose equality result nothing consumes).
//!
//! AND budget: linear `2b-1`; log-depth `b + (b-1) + (b-1-ceil(log2 b))` for
//! `b` a power of two. Rounds: linear `b`; log-depth `1 + ceil(log2 b)`.

use crate::boolean::and_batch;
use crate::session::{MillVariant, Session};
use crate::transport::Tag;
use crate::{Error, Result};

/// Inequality direction: `g = false` computes `x < y`, `g = true` computes
/// `x > y`. Equal inputs yield 0 either way.
#[derive(Debug, Clone, Copy)]
pub struct MillConfig {
    pub bits: u32,
    pub greater: bool,
    pub variant: MillVariant,
}

impl MillConfig {
    pub fn new(bits: u32, greater: bool, variant: MillVariant) -> Result<Self> {
        if bits == 0 || bits > 44 {
            return Err(Error::domain(format!(
                "mill bitwidth {bits} out of range 1..=44"
            )));
        }
        Ok(MillConfig {
            bits,
            greater,
            variant,
        })
    }
}

/// Per-instance leaf shares, bit 0 = LSB: `(equality, inequality)`.
pub struct MillLeaves {
    pub eq: Vec<bool>,
    pub lg: Vec<bool>,
    pub bits: usize,
    pub count: usize,
}

/// Computes leaf shares for a batch of `k` private inputs (one AND round).
pub fn mill_leaves_batch(
    s: &mut Session,
    tag: Tag,
    cfg: &MillConfig,
    inputs: &[u64],
) -> Result<MillLeaves> {
    let b = cfg.bits as usize;
    let limit = crate::rings::mask_for(cfg.bits);
    for &x in inputs {
        if x > limit {
            return Err(Error::domain(format!("mill input {x} exceeds {b} bits")));
        }
    }
    let k = inputs.len();
    let g = cfg.greater;
    let p = s.party.bit();

    // Bit extraction and share generation. Party 0's share of b1 and party
    // 1's share of b0 are zero.
    let mut lhs = Vec::with_capacity(k * b);
    let mut rhs = Vec::with_capacity(k * b);
    for &input in inputs {
        for i in 0..b {
            let bit = (input >> i) & 1 == 1;
            lhs.push((bit ^ !g) & !p);
            rhs.push((bit ^ g) & p);
        }
    }
    let eq: Vec<bool> = lhs.iter().zip(&rhs).map(|(&a, &c)| a ^ c).collect();
    let lg = and_batch(s, tag, &lhs, &rhs)?;
    Ok(MillLeaves {
        eq,
        lg,
        bits: b,
        count: k,
    })
}

/// Serial combining: `lg[i+1] ^= AND(eq[i+1], lg[i])` from the LSB up, one
/// batched AND round per step across all instances.
pub fn mill_linear_batch(
    s: &mut Session,
    tag: Tag,
    cfg: &MillConfig,
    inputs: &[u64],
) -> Result<Vec<bool>> {
    let leaves = mill_leaves_batch(s, tag, cfg, inputs)?;
    let (b, k) = (leaves.bits, leaves.count);
    let mut lg = leaves.lg;
    let eq = leaves.eq;
    for i in 0..b.saturating_sub(1) {
        let eq_step: Vec<bool> = (0..k).map(|inst| eq[inst * b + i + 1]).collect();
        let lg_step: Vec<bool> = (0..k).map(|inst| lg[inst * b + i]).collect();
        let anded = and_batch(s, tag, &eq_step, &lg_step)?;
        for inst in 0..k {
            lg[inst * b + i + 1] ^= anded[inst];
        }
    }
    Ok((0..k).map(|inst| lg[inst * b + b - 1]).collect())
}

/// Static shape of one log-depth combining level.
struct TreeLevel {
    /// Number of nodes entering the level.
    width: usize,
    /// Whether each merge's equality output is ever consumed.
    eq_needed: Vec<bool>,
}

/// Builds the level structure for `b` leaves, marking which equality results
/// can be skipped. An odd node at the high end propagates unchanged.
fn tree_levels(b: usize) -> Vec<TreeLevel> {
    let mut widths = Vec::new();
    let mut m = b;
    while m > 1 {
        widths.push(m);
        m = m.div_ceil(2);
    }
    // Need flags per level, top-down: the root's equality is unused; a merge
    // output's equality is needed iff it later sits at an odd (high) slot or
    // feeds a needed equality.
    let mut needs_above = vec![false]; // the single root node
    let mut levels: Vec<TreeLevel> = Vec::new();
    for &width in widths.iter().rev() {
        let merges = width / 2;
        let mut eq_needed = Vec::with_capacity(merges);
        let mut needs_here = vec![false; width];
        for i in 0..width.div_ceil(2) {
            let need = if 2 * i + 1 < width {
                needs_above[i]
            } else {
                false // propagated node keeps its flags below
            };
            if 2 * i + 1 < width {
                eq_needed.push(need);
                needs_here[2 * i] = need;
                needs_here[2 * i + 1] = true;
            } else {
                needs_here[2 * i] = needs_above[i];
            }
        }
        levels.push(TreeLevel { width, eq_needed });
        needs_above = needs_here;
    }
    levels.reverse();
    levels
}

/// Tree combining per level: `lt = lt_hi ^ (eq_hi & lt_lo)`,
/// `eq = eq_lo & eq_hi`, all ANDs of a level in one round.
pub fn mill_logdepth_batch(
    s: &mut Session,
    tag: Tag,
    cfg: &MillConfig,
    inputs: &[u64],
) -> Result<Vec<bool>> {
    let leaves = mill_leaves_batch(s, tag, cfg, inputs)?;
    let (b, k) = (leaves.bits, leaves.count);
    // node-major [node][instance]
    let mut lt: Vec<Vec<bool>> = (0..b)
        .map(|i| (0..k).map(|inst| leaves.lg[inst * b + i]).collect())
        .collect();
    let mut eq: Vec<Vec<bool>> = (0..b)
        .map(|i| (0..k).map(|inst| leaves.eq[inst * b + i]).collect())
        .collect();

    for level in tree_levels(b) {
        let width = level.width;
        let merges = width / 2;
        let mut xs = Vec::with_capacity((merges + level.eq_needed.len()) * k);
        let mut ys = Vec::with_capacity(xs.capacity());
        for i in 0..merges {
            xs.extend_from_slice(&eq[2 * i + 1]);
            ys.extend_from_slice(&lt[2 * i]);
        }
        for i in 0..merges {
            if level.eq_needed[i] {
                xs.extend_from_slice(&eq[2 * i]);
                ys.extend_from_slice(&eq[2 * i + 1]);
            }
        }
        let anded = and_batch(s, tag, &xs, &ys)?;

        let mut new_lt = Vec::with_capacity(width.div_ceil(2));
        let mut new_eq = Vec::with_capacity(width.div_ceil(2));
        let mut cursor = 0;
        for i in 0..merges {
            let slice = &anded[cursor..cursor + k];
            cursor += k;
            new_lt.push(
                lt[2 * i + 1]
                    .iter()
                    .zip(slice)
                    .map(|(&hi, &a)| hi ^ a)
                    .collect(),
            );
        }
        for i in 0..merges {
            if level.eq_needed[i] {
                new_eq.push(anded[cursor..cursor + k].to_vec());
                cursor += k;
            } else {
                new_eq.push(Vec::new());
            }
        }
        if width % 2 == 1 {
            new_lt.push(lt[width - 1].clone());
            new_eq.push(eq[width - 1].clone());
        }
        lt = new_lt;
        eq = new_eq;
    }
    Ok(lt.remove(0))
}

/// Batched millionaires' comparison, dispatching on the configured variant.
pub fn mill_batch(
    s: &mut Session,
    tag: Tag,
    cfg: &MillConfig,
    inputs: &[u64],
) -> Result<Vec<bool>> {
    match cfg.variant {
        MillVariant::Linear => mill_linear_batch(s, tag, cfg, inputs),
        MillVariant::LogDepth => mill_logdepth_batch(s, tag, cfg, inputs),
    }
}

/// Single comparison.
pub fn mill(s: &mut Session, tag: Tag, cfg: &MillConfig, input: u64) -> Result<bool> {
    Ok(mill_batch(s, tag, cfg, &[input])?[0])
}

/// AND gates consumed per comparison by the linear variant.
pub fn linear_and_count(bits: u32) -> u64 {
    2 * bits as u64 - 1
}

/// AND gates consumed per comparison by the log-depth variant (leaves plus
/// combining, equality skips included).
pub fn logdepth_and_count(bits: u32) -> u64 {
    let b = bits as usize;
    let mut total = b as u64; // leaves
    for level in tree_levels(b) {
        total += (level.width / 2) as u64;
        total += level.eq_needed.iter().filter(|&&n| n).count() as u64;
    }
    total
}

/// Combining rounds of the log-depth variant; total rounds are one more for
/// the leaf batch.
pub fn logdepth_levels(bits: u32) -> u64 {
    tree_levels(bits as usize).len() as u64
}
