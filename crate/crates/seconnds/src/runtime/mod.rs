//! Program/model loading, two-party layer-by-layer execution, the plaintext
//! oracle, and run reports.

pub mod demand;
pub mod exec;
pub mod model;
pub mod oracle;
pub mod program;
pub mod report;
pub mod tinynet;

pub use demand::{compute_demand, Demand};
pub use exec::{inference_demand, run_inference, ExecOptions, InferenceResult, RoleData};
pub use model::{read_scnm, write_scnm, LayerWeights, Model};
pub use oracle::{plaintext_oracle, OracleOutput};
pub use program::{LayerSpec, SecProgram, Shape};
pub use report::{check_security_surface, LayerReport, RunReport};

use std::path::Path;

use crate::rings::QuantTensor;
use crate::session::{SessionConfig, TripleBackendKind};
use crate::{Error, Result};

pub fn load_program(path: &Path) -> Result<SecProgram> {
    let text = std::fs::read_to_string(path)?;
    SecProgram::parse(&text)
}

pub fn load_model(path: &Path, program: &SecProgram) -> Result<Model> {
    let mut file = std::fs::File::open(path)?;
    read_scnm(&mut file, program)
}

pub fn load_input(path: &Path) -> Result<QuantTensor> {
    let mut file = std::fs::File::open(path)?;
    let (tensor, _bits) = crate::rings::read_scnt(&mut file)?;
    Ok(tensor)
}

/// Builds a session config from a program's header keys, CLI overrides
/// applied by the caller afterwards.
pub fn session_config_for(program: &SecProgram, seed: Option<u64>) -> Result<SessionConfig> {
    let ring = crate::rings::RingParams::new(
        program.bits,
        program.scale.min(program.bits.saturating_sub(1)),
    )?;
    let mut cfg = SessionConfig::new(ring);
    cfg.mill_variant = program.mill_variant;
    cfg.seed = seed;
    if let Some(kind) = program.triple_backend {
        cfg.triple_backend = kind;
    }
    if let Some(chunk) = program.triple_chunk {
        cfg.triple_chunk = chunk;
    }
    if let Some(buffer) = program.triple_buffer {
        cfg.triple_buffer = buffer;
    }
    if cfg.triple_backend == TripleBackendKind::Dealer && cfg.seed.is_none() {
        return Err(Error::config(
            "dealer backend needs SECONNDS_SEED or --seed",
        ));
    }
    Ok(cfg)
}
