//! Energy-efficient dynamic channel access for clustered cognitive radio
//! sensor networks: sensing and energy models, the intra-cluster time
//! allocation LP, the inter-cluster power/time alternation, a period-driven
//! simulator and its experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod inter;
pub mod intra;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod output;
pub mod phase;
pub mod sim;
pub mod spectrum;

pub use error::{Error, Result};
