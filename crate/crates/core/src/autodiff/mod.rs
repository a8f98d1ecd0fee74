//! Reverse-mode automatic differentiation over dense matrices, limited to
//! the operators the estimators need, plus Adam and the parameter
//! checkpoint format.

mod adam;
mod params;
mod tape;

pub use adam::{Adam, AdamSettings};
pub use params::{Param, ParamRecord, ParamStore};
pub use tape::{Gradients, Tape, Var};
