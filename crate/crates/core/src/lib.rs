//! Asymptotic TPP–FDP tradeoff diagram of the Lasso under random Gaussian
//! designs, and finite-sample path simulations that check it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod boundaries;
pub mod error;
pub mod io;
pub mod lasso;
pub mod region;
pub mod roots;
pub mod scalar_math;
pub mod simulate;
pub mod state_evolution;

pub use error::{Error, Result};
