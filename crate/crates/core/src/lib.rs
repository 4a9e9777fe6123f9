pub mod backtest;
pub mod error;
pub mod gp;
pub mod hedge;
pub mod kernels;
pub mod linalg;
pub mod marketdata;
pub mod synthetic;

pub use error::{Error, Result};
