//! Asymptotic and transfinite dimension computations on finite metric models.

pub mod covers;
pub mod metric;
pub mod ordinal;
pub mod partition;
pub mod roe;
pub mod selftest;
pub mod setfamily;
