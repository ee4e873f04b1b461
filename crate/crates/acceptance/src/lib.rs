//! Carrier crate for the acceptance suite; see `tests/acceptance.rs`.
//! Each test prints one `PASS criterion N` line with its measured numbers.
