// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Quadrature tables keep their published digits.
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod cli;
pub mod config;
pub mod dyson;
pub mod error;
pub mod incoming;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod quasifree;
pub mod selfenergy;
pub mod sfunc;
pub mod suites;
pub mod transport;

pub use error::{Error, Result};
