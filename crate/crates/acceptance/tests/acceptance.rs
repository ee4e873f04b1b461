//! Acceptance suite: one test per criterion, each printing a `PASS` line
//! with the measured numbers. Run with `cargo test -p acceptance -- --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use seconnds::boolean::reshare;
use seconnds::compare::{linear_and_count, logdepth_and_count, mill_batch, MillConfig};
use seconnds::harness::{run_pair, run_sessions_keep};
use seconnds::lattice::{schoolbook_negacyclic, NttTable, RlweParams};
use seconnds::linconv::{
    self, conv2d_plain, linear_secure_client, linear_secure_server, matvec_plain, plan_conv,
    plan_fc, preprocess_weights, ConvShape, HeContext,
};
use seconnds::nonlinear::{avgpool_batch, maxpool_batch, relu_batch, truncate_batch};
use seconnds::rings::{mask_for, reconstruct, share_split, share_split_vec, RingParams};
use seconnds::runtime::{
    plaintext_oracle, run_inference, tinynet, ExecOptions, InferenceResult, RoleData,
};
use seconnds::session::{MillVariant, Party, Session, SessionConfig, TripleBackendKind};
use seconnds::transport::Tag;
use seconnds::triples::triple_relation_holds;

fn dealer_cfg(bits: u32, seed: u64) -> SessionConfig {
    let mut cfg = SessionConfig::dealer_for_tests(RingParams::new(bits, 0).unwrap(), seed);
    cfg.triple_chunk = 1 << 16;
    cfg.triple_buffer = 1 << 16;
    cfg
}

fn run_mill_pairs(
    bits: u32,
    g: bool,
    variant: MillVariant,
    xs: Vec<u64>,
    ys: Vec<u64>,
    seed: u64,
) -> Vec<bool> {
    let cfg = dealer_cfg(bits.max(2), seed);
    let mc = MillConfig::new(bits, g, variant).unwrap();
    let ((_, o0), (_, o1)) = run_sessions_keep(
        &cfg,
        move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
        move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
    );
    o0.iter().zip(&o1).map(|(&a, &b)| a ^ b).collect()
}

#[test]
fn criterion_01_millionaires_exhaustive() {
    let t0 = Instant::now();
    let mut checked = 0u64;
    for bits in 1..=8u32 {
        let side = 1u64 << bits;
        let mut xs = Vec::with_capacity((side * side) as usize);
        let mut ys = Vec::with_capacity((side * side) as usize);
        for x in 0..side {
            for y in 0..side {
                xs.push(x);
                ys.push(y);
            }
        }
        for g in [false, true] {
            for variant in [MillVariant::Linear, MillVariant::LogDepth] {
                let got =
                    run_mill_pairs(bits, g, variant, xs.clone(), ys.clone(), 1000 + bits as u64);
                for i in 0..xs.len() {
                    let want = if g { xs[i] > ys[i] } else { xs[i] < ys[i] };
                    assert_eq!(
                        got[i], want,
                        "mismatch b={bits} g={g} {variant:?} x={} y={}",
                        xs[i], ys[i]
                    );
                }
                checked += xs.len() as u64;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "exhaustive sweep took {secs:.1}s");
    println!("PASS criterion 1: millionaires' exhaustive b=1..8, {checked} comparisons, 0 mismatches, {secs:.1}s");
}

#[test]
fn criterion_02_linear_comm_under_8b_bits() {
    let bits = 32u32;
    let k = 1usize << 13;
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mask = mask_for(bits);
    let xs: Vec<u64> = (0..k).map(|_| rng.random::<u64>() & mask).collect();
    let ys: Vec<u64> = (0..k).map(|_| rng.random::<u64>() & mask).collect();
    let mc = MillConfig::new(bits, true, MillVariant::Linear).unwrap();
    let ((s0, _), _) = run_sessions_keep(
        &dealer_cfg(bits, 3),
        move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
        move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
    );
    let m = s0.channel.meter().tag(Tag::Mill);
    let bytes_per_cmp = (m.bytes_sent + m.bytes_received) as f64 / k as f64;
    let budget = (8 * bits) as f64 / 8.0; // 8b bits in bytes
    assert!(
        bytes_per_cmp < budget,
        "online bytes/comparison {bytes_per_cmp} !< {budget}"
    );
    println!(
        "PASS criterion 2: batched mill_linear b=32, {bytes_per_cmp:.2} B/comparison < {budget} B (8b bits)"
    );
}

#[test]
fn criterion_03_and_cot_budgets_exact() {
    // mill_linear = 2b-1 ANDs per comparison
    for bits in [8u32, 16, 32, 37] {
        let k = 64usize;
        let mc = MillConfig::new(bits, true, MillVariant::Linear).unwrap();
        let xs = vec![3u64; k];
        let ys = vec![5u64; k];
        let ((s0, _), _) = run_sessions_keep(
            &dealer_cfg(bits, 4),
            move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
            move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
        );
        let m = s0.channel.meter().tag(Tag::Mill);
        assert_eq!(m.and_gates, k as u64 * linear_and_count(bits), "b={bits}");
        assert_eq!(m.triples_consumed, m.and_gates);
    }
    // truncation budgets per element
    let bits = 8u32;
    let p = RingParams::new(bits, 0).unwrap();
    for (msb_known, want_ands) in [(false, 2 * bits as u64 - 1), (true, 1u64)] {
        let n = 16usize;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let values: Vec<u64> = (0..n).map(|_| rng.random_range(0..128u64)).collect();
        let (s0v, s1v) = share_split_vec(&p, &values, &mut rng);
        let ((sess0, _), _) = run_sessions_keep(
            &dealer_cfg(bits, 6),
            move |s| truncate_batch(s, Tag::Trunc, &s0v, 3, msb_known).unwrap(),
            move |s| truncate_batch(s, Tag::Trunc, &s1v, 3, msb_known).unwrap(),
        );
        let m = sess0.channel.meter().tag(Tag::Trunc);
        assert_eq!(m.and_gates, n as u64 * want_ands, "msb_known={msb_known}");
        assert_eq!(m.cots, n as u64, "msb_known={msb_known}");
    }
    println!("PASS criterion 3: AND budgets exact (mill 2b-1; trunc general 2b-1 ANDs + 1 COT, msb-known 1 AND + 1 COT)");
}

#[test]
fn criterion_04_round_formulas() {
    for bits in [4u32, 8, 16, 32] {
        for (variant, want) in [
            (MillVariant::Linear, bits as u64),
            (
                MillVariant::LogDepth,
                1 + (bits as f64).log2().ceil() as u64,
            ),
        ] {
            let mc = MillConfig::new(bits, true, variant).unwrap();
            let xs = vec![1u64; 32];
            let ys = vec![2u64; 32];
            let ((s0, _), _) = run_sessions_keep(
                &dealer_cfg(bits, 7),
                move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
                move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
            );
            assert_eq!(
                s0.channel.meter().tag(Tag::Mill).rounds,
                want,
                "b={bits} {variant:?}"
            );
        }
    }
    println!("PASS criterion 4: rounds exact (linear = b; log-depth = 1 + ceil(log2 b)) for b in {{4,8,16,32}}");
}

#[test]
fn criterion_05_iknp_triple_audit_one_million() {
    let t0 = Instant::now();
    let n = 1_000_000usize;
    let mut cfg = SessionConfig::new(RingParams::new(32, 0).unwrap());
    cfg.triple_backend = TripleBackendKind::Iknp;
    cfg.triple_chunk = 1 << 18;
    cfg.triple_buffer = 1 << 18;
    cfg.eager_fill = false;
    cfg.seed = Some(55);

    let (t_a, t_b) = run_pair(
        |ch| {
            let mut s = Session::establish(ch, Party::P0, &cfg).expect("P0");
            s.take_triples(Tag::TripleGen, n).unwrap()
        },
        |ch| {
            let mut s = Session::establish(ch, Party::P1, &cfg).expect("P1");
            s.take_triples(Tag::TripleGen, n).unwrap()
        },
    );
    let mut failures = 0u64;
    for (x, y) in t_a.iter().zip(&t_b) {
        if !triple_relation_holds(x, y) {
            failures += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    assert_eq!(failures, 0);
    assert!(secs < 300.0, "triple audit took {secs:.1}s");
    println!("PASS criterion 5: {n} IKNP triples audited, 0 violations, {secs:.1}s");
}

#[test]
fn criterion_06_relu_maxpool_exact() {
    for bits in [8u32, 37] {
        let p = RingParams::new(bits, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(60 + bits as u64);
        let n = 10_000usize;
        let values: Vec<u64> = (0..n).map(|_| rng.random::<u64>() & p.mask()).collect();
        let (v0, v1) = share_split_vec(&p, &values, &mut rng);
        let ((_, o0), (_, o1)) = run_sessions_keep(
            &dealer_cfg(bits, 8),
            move |s| relu_batch(s, Tag::Relu, &v0).unwrap(),
            move |s| relu_batch(s, Tag::Relu, &v1).unwrap(),
        );
        for i in 0..n {
            let want = p.from_signed(p.signed_view(values[i]).max(0));
            assert_eq!(reconstruct(&p, o0[i], o1[i]), want, "relu b={bits} i={i}");
        }

        // max pooling windows of 4, values within half the signed range
        let w = 4usize;
        let windows = n / w * w;
        let range = 1i64 << (bits - 2);
        let vals: Vec<u64> = (0..windows)
            .map(|_| p.from_signed(rng.random_range(-range..range)))
            .collect();
        let (w0, w1) = share_split_vec(&p, &vals, &mut rng);
        let ((_, m0), (_, m1)) = run_sessions_keep(
            &dealer_cfg(bits, 9),
            move |s| maxpool_batch(s, Tag::Pool, &w0, w).unwrap(),
            move |s| maxpool_batch(s, Tag::Pool, &w1, w).unwrap(),
        );
        for j in 0..windows / w {
            let want = vals[j * w..(j + 1) * w]
                .iter()
                .map(|&v| p.signed_view(v))
                .max()
                .unwrap();
            assert_eq!(
                p.signed_view(reconstruct(&p, m0[j], m1[j])),
                want,
                "maxpool b={bits} window {j}"
            );
        }
    }
    println!("PASS criterion 6: ReLU and MaxPool exact on 10^4-element suites at b in {{8,37}}");
}

#[test]
fn criterion_07_truncation_error_bounds() {
    // exhaustive at b=8, both wrap paths, shifts 1..=6
    let bits = 8u32;
    let p = RingParams::new(bits, 0).unwrap();
    for msb_known in [false, true] {
        let values: Vec<u64> = if msb_known {
            (0..128).collect()
        } else {
            (0..256).collect()
        };
        for shift in 1..=6u32 {
            let mut rng = ChaCha20Rng::seed_from_u64(70 + shift as u64);
            let (v0, v1) = share_split_vec(&p, &values, &mut rng);
            let ((_, o0), (_, o1)) = run_sessions_keep(
                &dealer_cfg(bits, 10 + shift as u64),
                move |s| truncate_batch(s, Tag::Trunc, &v0, shift, msb_known).unwrap(),
                move |s| truncate_batch(s, Tag::Trunc, &v1, shift, msb_known).unwrap(),
            );
            for (i, &v) in values.iter().enumerate() {
                let got = reconstruct(&p, o0[i], o1[i]);
                let err = p.signed_view(p.sub(got, v >> shift));
                assert!(
                    (-1..=0).contains(&err),
                    "b=8 v={v} shift={shift} msb={msb_known} err={err}"
                );
            }
        }
    }

    // randomized at b=37
    let bits = 37u32;
    let p = RingParams::new(bits, 0).unwrap();
    let n = 100_000usize;
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let values: Vec<u64> = (0..n).map(|_| rng.random::<u64>() & p.mask()).collect();
    let (v0, v1) = share_split_vec(&p, &values, &mut rng);
    let shift = 12u32;
    let ((_, o0), (_, o1)) = run_sessions_keep(
        &dealer_cfg(bits, 11),
        move |s| truncate_batch(s, Tag::Trunc, &v0, shift, false).unwrap(),
        move |s| truncate_batch(s, Tag::Trunc, &v1, shift, false).unwrap(),
    );
    let mut hist = [0u64; 2];
    for (i, &v) in values.iter().enumerate() {
        let got = reconstruct(&p, o0[i], o1[i]);
        let err = p.signed_view(p.sub(got, v >> shift));
        assert!((-1..=0).contains(&err), "b=37 i={i} err={err}");
        hist[(-err) as usize] += 1;
    }

    // avgpool error in {-2..0}
    let bits = 8u32;
    let p8 = RingParams::new(bits, 0).unwrap();
    let mut worst = 0i64;
    for w in [3usize, 5, 9] {
        let trials = 100_000 / w;
        let vals: Vec<u64> = (0..trials * w)
            .map(|_| rng.random_range(0..16u64))
            .collect();
        let (a0, a1) = share_split_vec(&p8, &vals, &mut rng);
        let ((_, q0), (_, q1)) = run_sessions_keep(
            &dealer_cfg(bits, 12 + w as u64),
            move |s| avgpool_batch(s, Tag::Pool, &a0, w).unwrap(),
            move |s| avgpool_batch(s, Tag::Pool, &a1, w).unwrap(),
        );
        for j in 0..trials {
            let sum: u64 = vals[j * w..(j + 1) * w].iter().sum::<u64>() & p8.mask();
            let got = reconstruct(&p8, q0[j], q1[j]);
            let err = p8.signed_view(p8.sub(got, sum / w as u64));
            assert!((-2..=0).contains(&err), "avgpool w={w} err={err}");
            worst = worst.min(err);
        }
    }
    println!(
        "PASS criterion 7: trunc error in {{-1,0}} (b=8 exhaustive x6 shifts, b=37 x10^5: {} exact, {} off-by-one); avgpool error in {{-2..0}} (worst {worst})",
        hist[0], hist[1]
    );
}

#[test]
fn criterion_08_ntt_schoolbook_equivalence() {
    // exhaustive monomial grid at N=8, q=17
    let t = NttTable::new(8, 17).unwrap();
    let mut checked = 0u64;
    for i in 0..8usize {
        for j in 0..8usize {
            for c1 in 1..17u64 {
                for c2 in 1..17u64 {
                    let mut a = vec![0u64; 8];
                    let mut b = vec![0u64; 8];
                    a[i] = c1;
                    b[j] = c2;
                    let mut fa = a.clone();
                    let mut fb = b.clone();
                    t.forward(&mut fa);
                    t.forward(&mut fb);
                    let mut fc: Vec<u64> = fa
                        .iter()
                        .zip(&fb)
                        .map(|(&x, &y)| ((x as u128 * y as u128) % 17) as u64)
                        .collect();
                    t.inverse(&mut fc);
                    assert_eq!(
                        fc,
                        schoolbook_negacyclic(&a, &b, 17),
                        "i={i} j={j} c1={c1} c2={c2}"
                    );
                    checked += 1;
                }
            }
        }
    }

    // randomized at N=4096 over the default prime chain
    let params = RlweParams::default_for(37).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(88);
    for trial in 0..3 {
        for (pi, &q) in params.primes.iter().enumerate() {
            let table = params.table(pi);
            let a: Vec<u64> = (0..params.n).map(|_| rng.random::<u64>() % q).collect();
            let b: Vec<u64> = (0..params.n).map(|_| rng.random::<u64>() % q).collect();
            let mut fa = a.clone();
            let mut fb = b.clone();
            table.forward(&mut fa);
            table.forward(&mut fb);
            let mut fc: Vec<u64> = fa
                .iter()
                .zip(&fb)
                .map(|(&x, &y)| ((x as u128 * y as u128) % q as u128) as u64)
                .collect();
            table.inverse(&mut fc);
            assert_eq!(
                fc,
                schoolbook_negacyclic(&a, &b, q),
                "trial {trial} prime {pi}"
            );
        }
    }
    println!("PASS criterion 8: NTT = schoolbook negacyclic ({checked} exhaustive monomial pairs at N=8/q=17; 3x2 random at N=4096), 0 mismatches");
}

#[test]
fn criterion_09_secure_linear_exactness_50_shapes() {
    let ring = RingParams::new(37, 12).unwrap();
    let mask = ring.mask();
    let mut rng = ChaCha20Rng::seed_from_u64(99);

    // conv shapes
    let mut conv_shapes = Vec::new();
    for i in 0..35 {
        let channels = rng.random_range(1..=4);
        let kh = rng.random_range(1..=3);
        let kw = rng.random_range(1..=3);
        let height = rng.random_range(kh..=kh + 7);
        let width = rng.random_range(kw..=kw + 7);
        let shape = ConvShape {
            channels,
            height,
            width,
            out_channels: rng.random_range(1..=4),
            kh,
            kw,
            stride: rng.random_range(1..=2),
            pad: rng.random_range(0..=1),
        };
        let _ = i;
        conv_shapes.push(shape);
    }
    // one deliberately multi-input-tile conv
    conv_shapes.push(ConvShape {
        channels: 32,
        height: 12,
        width: 12,
        out_channels: 2,
        kh: 3,
        kw: 3,
        stride: 1,
        pad: 0,
    });

    // fc shapes, including one tiled matvec
    let mut fc_shapes: Vec<(usize, usize)> = (0..13)
        .map(|_| (rng.random_range(1..=32), rng.random_range(1..=128)))
        .collect();
    fc_shapes.push((1000, 512));

    let params_probe = RlweParams::default_for(37).unwrap();
    {
        let plan = plan_conv(&conv_shapes[35], params_probe.n).unwrap();
        assert!(plan.input_tiles() >= 2, "multi-tile case should tile");
    }

    let mut shapes_checked = 0;
    for (i, shape) in conv_shapes.iter().enumerate() {
        let x_len = shape.channels * shape.height * shape.width;
        let k_len = shape.out_channels * shape.channels * shape.kh * shape.kw;
        let x: Vec<u64> = (0..x_len).map(|_| rng.random::<u64>() & mask).collect();
        let k: Vec<u64> = (0..k_len).map(|_| rng.random::<u64>() & mask).collect();
        let (x0, x1) = share_split_vec(&ring, &x, &mut rng);
        let shape_s = shape.clone();
        let shape_c = shape.clone();
        let k_server = k.clone();
        let seed = 200 + i as u64;
        let ((_, y0), (_, y1)) = run_sessions_keep(
            &dealer_cfg(37, seed),
            move |s| {
                let he = HeContext::server(RlweParams::default_for(37).unwrap(), true).unwrap();
                let plan = plan_conv(&shape_s, he.params.n).unwrap();
                let weights = preprocess_weights(&he.params, &plan, &k_server).unwrap();
                let before = linconv::weight_ntt_count_local();
                let out = linear_secure_server(s, &he, &plan, &weights, &x0).unwrap();
                assert_eq!(
                    linconv::weight_ntt_count_local(),
                    before,
                    "online weight NTT detected"
                );
                out
            },
            move |s| {
                let he = HeContext::client(
                    RlweParams::default_for(37).unwrap(),
                    &mut ChaCha20Rng::seed_from_u64(seed),
                    true,
                )
                .unwrap();
                let plan = plan_conv(&shape_c, he.params.n).unwrap();
                linear_secure_client(s, &he, &plan, &x1).unwrap()
            },
        );
        let got: Vec<u64> = y0
            .iter()
            .zip(&y1)
            .map(|(&a, &b)| a.wrapping_add(b) & mask)
            .collect();
        assert_eq!(
            got,
            conv2d_plain(shape, &x, &k, 37),
            "conv shape {i}: {shape:?}"
        );
        shapes_checked += 1;
    }

    for (i, &(rows, cols)) in fc_shapes.iter().enumerate() {
        let w: Vec<u64> = (0..rows * cols)
            .map(|_| rng.random::<u64>() & mask)
            .collect();
        let x: Vec<u64> = (0..cols).map(|_| rng.random::<u64>() & mask).collect();
        let (x0, x1) = share_split_vec(&ring, &x, &mut rng);
        let w_server = w.clone();
        let seed = 300 + i as u64;
        let ((_, y0), (_, y1)) = run_sessions_keep(
            &dealer_cfg(37, seed),
            move |s| {
                let he = HeContext::server(RlweParams::default_for(37).unwrap(), true).unwrap();
                let plan = plan_fc(rows, cols, he.params.n).unwrap();
                let weights = preprocess_weights(&he.params, &plan, &w_server).unwrap();
                linear_secure_server(s, &he, &plan, &weights, &x0).unwrap()
            },
            move |s| {
                let he = HeContext::client(
                    RlweParams::default_for(37).unwrap(),
                    &mut ChaCha20Rng::seed_from_u64(seed),
                    true,
                )
                .unwrap();
                let plan = plan_fc(rows, cols, he.params.n).unwrap();
                linear_secure_client(s, &he, &plan, &x1).unwrap()
            },
        );
        let got: Vec<u64> = y0
            .iter()
            .zip(&y1)
            .map(|(&a, &b)| a.wrapping_add(b) & mask)
            .collect();
        assert_eq!(
            got,
            matvec_plain(rows, cols, &w, &x, 37),
            "fc shape {rows}x{cols}"
        );
        shapes_checked += 1;
    }
    assert!(shapes_checked >= 50);
    println!("PASS criterion 9: secure linear exact on {shapes_checked} shapes; online weight-NTT count 0");
}

struct TinyRun {
    label_client: u64,
    logits: Vec<u64>,
    report_p0: seconnds::runtime::RunReport,
}

fn tinynet_once(
    variant: MillVariant,
    seed: u64,
    input_seed: u64,
    backend: TripleBackendKind,
) -> TinyRun {
    let mut program = tinynet::tinynet_program();
    program.mill_variant = variant;
    let model = tinynet::tinynet_model(7);
    let input = tinynet::tinynet_input(input_seed, &program);
    let ring = RingParams::new(program.bits, program.scale).unwrap();
    let mut cfg = SessionConfig::dealer_for_tests(ring, seed);
    cfg.mill_variant = variant;
    if backend == TripleBackendKind::Iknp {
        cfg.triple_backend = TripleBackendKind::Iknp;
        cfg.triple_chunk = 1 << 16;
        cfg.triple_buffer = 1 << 16;
        cfg.allow_insecure = false;
    }
    let opts = ExecOptions::default();
    let program_c = program.clone();
    let ((_, r0), (_, r1)): ((Session, InferenceResult), (Session, InferenceResult)) =
        run_sessions_keep(
            &cfg,
            {
                let program = program.clone();
                let opts = opts.clone();
                move |s| {
                    run_inference(s, &program, RoleData::Server { model: &model }, &opts).unwrap()
                }
            },
            {
                let opts = opts.clone();
                move |s| {
                    run_inference(s, &program_c, RoleData::Client { input: &input }, &opts).unwrap()
                }
            },
        );
    let logits: Vec<u64> = r0
        .logit_shares
        .iter()
        .zip(&r1.logit_shares)
        .map(|(&a, &b)| ring.add(a, b))
        .collect();
    TinyRun {
        label_client: r1.label.expect("client label"),
        logits,
        report_p0: r0.report,
    }
}

#[test]
fn criterion_10_tinynet_end_to_end() {
    let program = tinynet::tinynet_program();
    let model = tinynet::tinynet_model(7);
    let ring = RingParams::new(program.bits, program.scale).unwrap();

    // structural truncation bound: 1 LSB per truncated element, amplified by
    // the fc row with the largest absolute-weight sum
    let bound = match &model.layers[4] {
        seconnds::runtime::LayerWeights::Fc { weight, .. } => (0..10)
            .map(|r| {
                (0..64)
                    .map(|j| ring.signed_view(weight.data[r * 64 + j]).unsigned_abs())
                    .sum::<u64>()
            })
            .max()
            .unwrap(),
        _ => panic!("fc layer expected"),
    };

    let mut max_dev = 0u64;
    let mut mape_num = 0.0f64;
    let mut mape_den = 0usize;
    for i in 0..100u64 {
        let input = tinynet::tinynet_input(i, &program);
        let oracle = plaintext_oracle(&program, &model, &input).unwrap();
        let run = tinynet_once(MillVariant::Linear, 500 + i, i, TripleBackendKind::Dealer);
        assert_eq!(
            run.label_client, oracle.label,
            "label mismatch on input {i}"
        );
        for (j, (&got, &want)) in run.logits.iter().zip(&oracle.logits).enumerate() {
            let dev = ring.signed_view(ring.sub(got, want)).unsigned_abs();
            assert!(
                dev <= bound,
                "input {i} logit {j}: deviation {dev} > bound {bound}"
            );
            max_dev = max_dev.max(dev);
            let denom = ring.signed_view(want).unsigned_abs();
            if denom > 0 {
                mape_num += dev as f64 / denom as f64;
                mape_den += 1;
            }
        }
    }
    let mape = 100.0 * mape_num / mape_den as f64;

    // one full inference on the OT-extension backend for the wall-clock budget
    let t0 = Instant::now();
    let run = tinynet_once(MillVariant::Linear, 999, 0, TripleBackendKind::Iknp);
    let secs = t0.elapsed().as_secs_f64();
    let oracle = plaintext_oracle(&program, &model, &tinynet::tinynet_input(0, &program)).unwrap();
    assert_eq!(run.label_client, oracle.label);
    assert!(secs < 60.0, "IKNP-backed inference took {secs:.1}s");
    println!(
        "PASS criterion 10: 100/100 TinyNet labels match oracle; max logit deviation {max_dev} <= bound {bound}; MAPE {mape:.4}%; IKNP e2e {secs:.2}s < 60s"
    );
}

#[test]
fn criterion_11_variant_toggle_bitwise_equal() {
    let mut labels = 0;
    for i in 0..20u64 {
        let lin = tinynet_once(MillVariant::Linear, 800 + i, i, TripleBackendKind::Dealer);
        let log = tinynet_once(MillVariant::LogDepth, 800 + i, i, TripleBackendKind::Dealer);
        assert_eq!(
            lin.label_client, log.label_client,
            "label differs on input {i}"
        );
        assert_eq!(lin.logits, log.logits, "logits differ bitwise on input {i}");
        // the two variants really did different work
        assert_ne!(
            lin.report_p0.totals.rounds, log.report_p0.totals.rounds,
            "variants should differ in round structure"
        );
        labels += 1;
    }
    println!("PASS criterion 11: mill variant toggle produced bit-identical labels and logits on {labels} TinyNet inputs");
}

#[test]
fn logdepth_and_count_formula_is_metered() {
    // supporting check for the criterion-3/4 family: the closed-form count
    // for the log-depth variant matches the meter for power-of-two widths
    for bits in [4u32, 8, 16, 32] {
        let k = 16usize;
        let mc = MillConfig::new(bits, false, MillVariant::LogDepth).unwrap();
        let xs = vec![1u64; k];
        let ys = vec![3u64; k];
        let ((s0, _), _) = run_sessions_keep(
            &dealer_cfg(bits, 13),
            move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
            move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
        );
        let m = s0.channel.meter().tag(Tag::Mill);
        assert_eq!(m.and_gates, k as u64 * logdepth_and_count(bits));
        let b = bits as u64;
        let log = (bits as f64).log2().ceil() as u64;
        assert_eq!(logdepth_and_count(bits), b + (b - 1) + (b - 1 - log));
    }
    println!("PASS supplement: log-depth AND count = b + (b-1) + (b-1-ceil(log b)) as metered");
}

#[test]
fn reshare_is_used_before_floor_ops() {
    // guard: a seeded run reaches identical trunc inputs whichever variant
    // produced the upstream shares; checked indirectly by criterion 11, and
    // directly here on the reshare primitive
    let p = RingParams::new(16, 0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    let values: Vec<u64> = (0..64).map(|_| rng.random::<u64>() & p.mask()).collect();
    let (a0, a1) = share_split(&p, values[0], &mut rng).unwrap();
    let (b0, b1) = (p.add(a0, 5), p.sub(a1, 5));
    let cfg = dealer_cfg(16, 15);
    let ((_, x0), (_, x1)) = run_sessions_keep(
        &cfg,
        move |s| reshare(s, Tag::Trunc, &[a0]).unwrap(),
        move |s| reshare(s, Tag::Trunc, &[a1]).unwrap(),
    );
    let ((_, y0), (_, y1)) = run_sessions_keep(
        &cfg,
        move |s| reshare(s, Tag::Trunc, &[b0]).unwrap(),
        move |s| reshare(s, Tag::Trunc, &[b1]).unwrap(),
    );
    assert_eq!(
        (x0, x1),
        (y0, y1),
        "canonical re-share should erase the input split"
    );
}
