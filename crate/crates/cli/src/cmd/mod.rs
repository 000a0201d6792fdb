pub mod check;
pub mod convert;
pub mod eval;
pub mod sample;
pub mod train;
