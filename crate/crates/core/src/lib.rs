//! Link adaptation and proportional-fair scheduling with HARQ Chase combining
//! in an interference-limited multi-cell downlink.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cfmath;
pub mod channel;
pub mod dlt;
pub mod geometry;
pub mod mac;
pub mod policies;
pub mod sim;
