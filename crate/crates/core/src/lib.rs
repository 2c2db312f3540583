//! Zero-noise extrapolation for quantum error-correction circuits.

pub mod blossom;
pub mod circuit;
pub mod codes;
pub mod decoder;
pub mod estimator;
pub mod experiment;
pub mod noise;
pub mod pauli;
pub mod scaling;
pub mod sim;
pub mod zne;
