//! Holds the `acceptance` test target; there is no library code.
//!
//! `cargo test -p voisim-acceptance` runs every criterion;
//! `cargo test -p voisim-acceptance -- 3 8` runs a subset.
