use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use seconnds::compare::{mill_batch, MillConfig};
use seconnds::harness::run_sessions_keep;
use seconnds::lattice::RlweParams;
use seconnds::linconv::{
    linear_secure_client, linear_secure_server, plan_conv, preprocess_weights, ConvShape, HeContext,
};
use seconnds::nonlinear::{maxpool_batch, relu_batch, truncate_batch};
use seconnds::rings::{share_split_vec, write_scnt, RingParams};
use seconnds::runtime::{
    self, load_input, load_model, load_program, plaintext_oracle, run_inference, ExecOptions,
    RoleData,
};
use seconnds::session::{MillVariant, Party, Session, SessionConfig, TripleBackendKind};
use seconnds::transport::{self, Tag};
use seconnds::{Error, Result};

#[derive(Parser)]
#[command(
    name = "seconnds",
    version,
    about = "Two-party secure inference for tiny quantized CNNs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Server,
    Client,
}

#[derive(Clone, Copy, ValueEnum)]
enum MillArg {
    Linear,
    Logdepth,
}

impl MillArg {
    fn to_variant(self) -> MillVariant {
        match self {
            MillArg::Linear => MillVariant::Linear,
            MillArg::Logdepth => MillVariant::LogDepth,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TriplesArg {
    Iknp,
    Dealer,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchOp {
    Mill,
    Relu,
    Trunc,
    Maxpool,
    Conv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one secure inference as one of the two parties.
    Run {
        #[arg(long, value_enum)]
        role: Role,
        #[arg(long)]
        program: PathBuf,
        /// Server only: model weights.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Client only: input tensor.
        #[arg(long)]
        input: Option<PathBuf>,
        /// host:port — the server listens, the client connects.
        #[arg(long)]
        addr: String,
        #[arg(long, value_enum)]
        mill: Option<MillArg>,
        #[arg(long, value_enum)]
        triples: Option<TriplesArg>,
        /// Write the run report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Permit the trusted-dealer backend (it shares the transcript!).
        #[arg(long)]
        insecure: bool,
        /// Skip the eager triple-buffer fill after connecting.
        #[arg(long)]
        no_eager: bool,
        /// Deterministic seed; defaults to env SECONNDS_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for NTT-preprocessed weight caching (server).
        #[arg(long)]
        weight_cache: Option<PathBuf>,
    },
    /// Evaluate the plaintext fixed-point oracle.
    Oracle {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Loopback micro-benchmarks of individual protocols.
    Bench {
        #[arg(value_enum)]
        op: BenchOp,
        #[arg(long, default_value_t = 32)]
        bits: u32,
        #[arg(long, default_value_t = 1024)]
        count: usize,
        #[arg(long, value_enum, default_value = "linear")]
        mill: MillArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate the bundled TinyNet fixture (program, model, input).
    GenTinynet {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var("SECONNDS_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run {
            role,
            program,
            model,
            input,
            addr,
            mill,
            triples,
            report,
            insecure,
            no_eager,
            seed,
            weight_cache,
        } => {
            let program = load_program(&program)?;
            let seed = seed.or_else(env_seed);
            let mut cfg = runtime::session_config_for(&program, seed)?;
            if let Some(m) = mill {
                cfg.mill_variant = m.to_variant();
            }
            if let Some(t) = triples {
                cfg.triple_backend = match t {
                    TriplesArg::Iknp => TripleBackendKind::Iknp,
                    TriplesArg::Dealer => TripleBackendKind::Dealer,
                };
            }
            cfg.allow_insecure = insecure;
            cfg.eager_fill = !no_eager;
            if cfg.triple_backend == TripleBackendKind::Dealer && cfg.seed.is_none() {
                return Err(Error::config(
                    "dealer backend needs --seed or SECONNDS_SEED",
                ));
            }

            let opts = ExecOptions { weight_cache };
            let result = match role {
                Role::Server => {
                    let model_path = model.ok_or_else(|| Error::config("server needs --model"))?;
                    let model = load_model(&model_path, &program)?;
                    eprintln!("listening on {addr}");
                    let channel = transport::listen(&addr)?;
                    let mut session = Session::establish(channel, Party::P0, &cfg)?;
                    run_inference(
                        &mut session,
                        &program,
                        RoleData::Server { model: &model },
                        &opts,
                    )?
                }
                Role::Client => {
                    let input_path = input.ok_or_else(|| Error::config("client needs --input"))?;
                    let tensor = load_input(&input_path)?;
                    let channel = transport::connect(&addr)?;
                    let mut session = Session::establish(channel, Party::P1, &cfg)?;
                    run_inference(
                        &mut session,
                        &program,
                        RoleData::Client { input: &tensor },
                        &opts,
                    )?
                }
            };
            print!("{}", result.report.to_text());
            if let Some(label) = result.label {
                println!("inference label: {label}");
            }
            if let Some(path) = report {
                std::fs::write(path, result.report.to_json())?;
            }
            Ok(())
        }
        Cmd::Oracle {
            program,
            model,
            input,
        } => {
            let program = load_program(&program)?;
            let model = load_model(&model, &program)?;
            let input = load_input(&input)?;
            let out = plaintext_oracle(&program, &model, &input)?;
            let ring = RingParams::new(program.bits, 0)?;
            println!("logits (signed view):");
            for (i, &l) in out.logits.iter().enumerate() {
                println!("  [{i}] {}", ring.signed_view(l));
            }
            println!("label: {}", out.label);
            Ok(())
        }
        Cmd::Bench {
            op,
            bits,
            count,
            mill,
            seed,
        } => bench(
            op,
            bits,
            count,
            mill.to_variant(),
            seed.or_else(env_seed).unwrap_or(7),
        ),
        Cmd::GenTinynet { out, seed } => {
            use seconnds::runtime::tinynet;
            std::fs::create_dir_all(&out)?;
            let program = tinynet::tinynet_program();
            std::fs::write(out.join("tinynet.prg"), program.to_text())?;
            let model = tinynet::tinynet_model(seed);
            let mut buf = Vec::new();
            runtime::write_scnm(&mut buf, &model, program.bits)?;
            std::fs::write(out.join("tinynet.scnm"), buf)?;
            let input = tinynet::tinynet_input(seed, &program);
            let mut buf = Vec::new();
            write_scnt(&mut buf, &input, program.bits)?;
            std::fs::write(out.join("input.scnt"), buf)?;
            println!(
                "wrote tinynet.prg, tinynet.scnm, input.scnt to {}",
                out.display()
            );
            Ok(())
        }
    }
}

fn bench(op: BenchOp, bits: u32, count: usize, variant: MillVariant, seed: u64) -> Result<()> {
    let ring = RingParams::new(bits, 0)?;
    let mut cfg = SessionConfig::dealer_for_tests(ring, seed);
    cfg.mill_variant = variant;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t0 = Instant::now();
    let (meter, triples) = match op {
        BenchOp::Mill => {
            let xs: Vec<u64> = (0..count)
                .map(|_| rng.random::<u64>() & ring.mask())
                .collect();
            let ys: Vec<u64> = (0..count)
                .map(|_| rng.random::<u64>() & ring.mask())
                .collect();
            let mc = MillConfig::new(bits, true, variant)?;
            let ((s0, _), _) = run_sessions_keep(
                &cfg,
                move |s| mill_batch(s, Tag::Mill, &mc, &xs).unwrap(),
                move |s| mill_batch(s, Tag::Mill, &mc, &ys).unwrap(),
            );
            (*s0.channel.meter().tag(Tag::Mill), s0.triples.consumed())
        }
        BenchOp::Relu | BenchOp::Trunc | BenchOp::Maxpool => {
            let values: Vec<u64> = (0..count)
                .map(|_| rng.random::<u64>() & ring.mask())
                .collect();
            let (v0, v1) = share_split_vec(&ring, &values, &mut rng);
            let tag = match op {
                BenchOp::Relu => Tag::Relu,
                BenchOp::Trunc => Tag::Trunc,
                _ => Tag::Pool,
            };
            let run = move |s: &mut Session, shares: Vec<u64>| match op {
                BenchOp::Relu => relu_batch(s, tag, &shares).unwrap(),
                BenchOp::Trunc => truncate_batch(s, tag, &shares, 4.min(bits - 1), false).unwrap(),
                _ => maxpool_batch(s, tag, &shares, 4).unwrap(),
            };
            let ((s0, _), _) = run_sessions_keep(
                &cfg,
                move |s| run(s, v0),
                move |s| match op {
                    BenchOp::Relu => relu_batch(s, tag, &v1).unwrap(),
                    BenchOp::Trunc => truncate_batch(s, tag, &v1, 4.min(bits - 1), false).unwrap(),
                    _ => maxpool_batch(s, tag, &v1, 4).unwrap(),
                },
            );
            (*s0.channel.meter().tag(tag), s0.triples.consumed())
        }
        BenchOp::Conv => {
            let shape = ConvShape {
                channels: 4,
                height: 8,
                width: 8,
                out_channels: 4,
                kh: 3,
                kw: 3,
                stride: 1,
                pad: 1,
            };
            let x: Vec<u64> = (0..4 * 64)
                .map(|_| rng.random::<u64>() & ring.mask())
                .collect();
            let k: Vec<u64> = (0..4 * 4 * 9)
                .map(|_| rng.random::<u64>() & 0xffff)
                .collect();
            let (x0, x1) = share_split_vec(&ring, &x, &mut rng);
            let reps = count.max(1);
            let plan_bits = bits;
            let ((s0, _), _) = run_sessions_keep(
                &cfg,
                {
                    let shape = shape.clone();
                    move |s| {
                        let he =
                            HeContext::server(RlweParams::default_for(plan_bits).unwrap(), true)
                                .unwrap();
                        let plan = plan_conv(&shape, he.params.n).unwrap();
                        let w = preprocess_weights(&he.params, &plan, &k).unwrap();
                        for _ in 0..reps {
                            linear_secure_server(s, &he, &plan, &w, &x0).unwrap();
                        }
                    }
                },
                {
                    let shape = shape.clone();
                    move |s| {
                        let he = HeContext::client(
                            RlweParams::default_for(plan_bits).unwrap(),
                            &mut ChaCha20Rng::seed_from_u64(seed ^ 5),
                            true,
                        )
                        .unwrap();
                        let plan = plan_conv(&shape, he.params.n).unwrap();
                        for _ in 0..reps {
                            linear_secure_client(s, &he, &plan, &x1).unwrap();
                        }
                    }
                },
            );
            (*s0.channel.meter().tag(Tag::Linconv), s0.triples.consumed())
        }
    };
    let elapsed = t0.elapsed();
    println!(
        "bench {:?}: bits={bits} count={count} variant={variant:?} wall={:.1} ms",
        op,
        elapsed.as_secs_f64() * 1e3
    );
    println!(
        "  bytes sent {} recv {} | rounds {} | ANDs {} | triples consumed {} | COTs {}",
        meter.bytes_sent, meter.bytes_received, meter.rounds, meter.and_gates, triples, meter.cots
    );
    Ok(())
}
