//! Discrete-time queues analyzed through generating functions: exact
//! stationary distributions by series arithmetic, tail asymptotics from
//! kernel roots, and an iterative probabilistic oracle to check both.

pub mod error;
pub mod kernel;
pub mod models;
pub mod oracle;
pub mod pgf;
pub mod series;

pub use error::{Error, Result};
pub use pgf::Pgf;
pub use series::TruncatedSeries;
