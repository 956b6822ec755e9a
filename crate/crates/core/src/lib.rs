pub mod classical;
pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod fit;
pub mod io;
pub mod nls;
pub mod ode;
pub mod propagator;
pub mod report;
pub mod run;
pub mod scenario;
pub mod sigma;

pub use error::{Error, Result};
