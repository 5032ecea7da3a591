//! Acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p atomic-mimo-validation`. Positional arguments filter
//! criteria by name, e.g. `cargo test -p atomic-mimo-validation -- c7`.
