//! Functionally generated portfolios with stock characteristics.
//!
//! The crate simulates equity markets, builds portfolios from generating
//! functions of market weights and auxiliary characteristics, checks the
//! master-equation decomposition and relative-arbitrage bounds along paths,
//! and backtests the strategies on panel data.

pub mod backtest;
pub mod characteristics;
pub mod data_io;
pub mod decomposition;
pub mod error;
pub mod generating_functions;
pub mod linalg;
pub mod market_sim;
pub mod matrix;
pub mod rng;

pub use error::{Result, SptError};
pub use matrix::SeriesMatrix;
