//! Optimal discrimination of quantum processes under restricted strategy classes.

pub mod error;
pub mod conic;
pub mod hermitian;
pub mod process;
pub mod model;
pub mod strategy;
pub mod dual;
pub mod instances;
pub mod primal;
pub mod certification;
pub mod robustness;

pub use error::{Error, Result};
pub use hermitian::{Hermitian, SystemLayout, C64};
