// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod dense;
pub mod error;
pub mod forecast;
pub mod import;
pub mod kernels;
pub mod model;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod star;
pub mod synth;
pub mod trainer;
pub mod variational;

pub use error::{GgpError, Result};
