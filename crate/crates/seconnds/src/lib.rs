//! Two-party secure inference for tiny quantized CNNs.
//!
//! The stack, bottom to top:
//!
//! * [`rings`] — arithmetic and XOR secret sharing over `Z_{2^b}`, fixed-point
//!   tensors, and the `SCNT` tensor file format.
//! * [`transport`] — framed, metered duplex channels (TCP or in-process
//!   loopback) shared by every protocol.
//! * [`obliv`] — base OT over Ristretto, IKNP-style OT extension into
//!   random-choice COT/ROT batches, and chosen-input `COT(2,b)`.
//! * [`triples`] — offline Beaver bit-triple generation from paired ROTs with
//!   a self-refilling chunked buffer, plus an insecure trusted-dealer backend
//!   for tests and benchmarks.
//! * [`boolean`] — GMW AND gates from triples, free XOR, and B2A conversion.
//! * [`compare`] — the fully Boolean millionaires' protocol, in linear-round
//!   and log-depth variants.
//! * [`nonlinear`] — ReLU, approximate truncation, max/avg pooling and argmax
//!   built from comparisons and COT multiplexers.
//! * [`lattice`] — negacyclic NTT and a minimal symmetric-key RLWE scheme.
//! * [`linconv`] — coefficient-packed secure convolution and matvec with
//!   NTT-preprocessed server weights.
//! * [`runtime`] — program/model files, layer-by-layer two-party execution,
//!   the plaintext fixed-point oracle, and run reports.
//!
//! Values cross the wire only as ciphertexts, one-time-padded strings,
//! triple-randomized correction bits, or the final label opening; the
//! [`transport::Tag`] registry classifies every frame accordingly.

pub(crate) mod bits;
pub mod boolean;
pub mod compare;
pub mod harness;
pub mod lattice;
pub mod linconv;
pub mod nonlinear;
pub mod obliv;
pub(crate) mod par;
pub mod rings;
pub mod runtime;
pub mod session;
pub mod transport;
pub mod triples;

mod error;

pub use error::{Error, Result};
pub use session::{Party, Session};
