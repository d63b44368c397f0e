//! Design, simulation and analysis toolkit for microring photon-pair sources.
//!
//! The modules follow the workflow: size a ring and its couplings
//! ([`resonator`]), predict pair rates ([`sfwm`]), lay the comb onto the
//! telecom grid ([`comb_grid`]), produce synthetic detector data
//! ([`tag_sim`]) and extract figures of merit from time tags ([`analysis`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod comb_grid;
pub mod error;
pub mod fit;
pub mod resonator;
pub mod sfwm;
pub mod tag_sim;
pub mod units;

pub use error::{Error, Result};
