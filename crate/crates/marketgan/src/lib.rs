//! Adversarial multi-step forecasting of stock-index returns.
//!
//! The crate turns raw index prices and daily news headlines into aligned
//! feature windows, trains a GRU encoder-decoder generator against a
//! critic that scores whole return sequences, and deploys the generator
//! with a rolling forecast-averaging strategy. Everything numeric runs on
//! a small deterministic reverse-mode autodiff engine, so runs with the
//! same seed and inputs reproduce bit-for-bit.

pub mod autodiff;
pub mod cli;
pub mod deploy;
pub mod marketdata;
pub mod newstext;
pub mod networks;
pub mod synthetic;
pub mod training;
