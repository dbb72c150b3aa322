// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod format;
pub mod hilbert;
pub mod scenarios;
pub mod discrimination;
pub mod optimize;
pub mod montecarlo;
pub mod imaging;
pub mod cli;
