//! LSTM emulation of nonlinear guitar amplifiers.
//!
//! The pipeline: synthesize a guitar-like excitation, run it through a
//! reference amplifier ([`amp`]), window the pair into training tensors
//! ([`dataset`]), fit a stacked LSTM with truncated BPTT ([`train`]) and run
//! the result block by block ([`realtime`]).

pub mod amp;
pub mod dataset;
pub mod error;
pub mod hypersearch;
pub mod model;
pub mod realtime;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
