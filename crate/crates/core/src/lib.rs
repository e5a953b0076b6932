//! Intrinsic ridge regression for manifold-valued time series.

pub mod bezier;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod export;
pub mod fitting;
pub mod forecast;
pub mod hurdat;
pub mod manifold;
pub mod optim;
pub mod ridge;
pub mod synthetic;

pub use error::{Error, Result};
