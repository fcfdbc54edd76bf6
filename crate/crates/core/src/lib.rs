//! Sub-packetized, access-optimal regenerating codes over GF(2^w).
//!
//! A code with parameters `(n, k, alpha)` stores a file of `k * alpha`
//! symbols on `k` systematic and `r = n - k` parity nodes, `alpha` symbols
//! each. Any `k` nodes reconstruct the file, and a single failed systematic
//! node is repaired from all `n - 1` survivors while reading roughly
//! `alpha / r` symbols from each.
//!
//! ```
//! use gsrc::layout::CodeParams;
//! use gsrc::repair::average_repair_bandwidth;
//! use gsrc::layout::build_layout;
//!
//! let params = CodeParams::new(5, 3, 4, 4, 7).unwrap();
//! let layout = build_layout(&params).unwrap();
//! assert_eq!(average_repair_bandwidth(&layout).unwrap(), 2u64.into());
//! ```

pub mod bench;
pub mod codec;
pub mod error;
pub mod galois;
pub mod layout;
pub mod repair;

pub use error::{Error, Result};
