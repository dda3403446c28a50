//! Dependability evaluation of architecture models written in a subset of
//! AADL and annotated with error models.
//!
//! The pipeline: parse declarations, resolve an instance model, bind error
//! automata, compose the stochastic transition system, eliminate vanishing
//! states and solve the resulting CTMC (or simulate the composed system).

pub mod annex;
pub mod binding;
pub mod errlib;
pub mod error;
pub mod instance;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod patterns;
pub mod pipeline;
pub mod sim;
pub mod solver;
pub mod statespace;
pub mod validate;

pub use error::{Error, Result};
