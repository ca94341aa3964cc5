//! Analysis of finite weighted digraphs: access-class structure, spectral
//! data, the residual matrix of the growth series, and the limit
//! distributions (Boltzmann and uniform) on paths, including the limit
//! cocycle Markov kernel, convergence criteria and exact samplers.
//!
//! The crate is `no_std` (with `alloc`); file IO and the command-line front
//! end live in the companion `pathlim` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod fixtures;
pub mod graph;
pub mod limits;
pub mod matrix;
pub mod oracle;
pub mod residual;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod structure;
