//! Matrix cocycles over mixing subshifts of finite type.
//!
//! The base system lives in [`sft`], operator arithmetic in [`linops`], the
//! cocycle itself in [`cocycle`], norms on `R^d` in [`normspace`], invariant
//! norm families in [`invariant`] and the periodic-data verdict engine in
//! [`analysis`].

pub mod linops;
pub mod sft;
pub mod cocycle;
pub mod normspace;
pub mod invariant;
pub mod analysis;
