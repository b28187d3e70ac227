#![allow(dead_code)]

pub use coopfb::numerics::ComplexMatrix;

pub mod oracles;
