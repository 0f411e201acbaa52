pub mod bridges;
pub mod clusters;
pub mod coupling;
pub mod error;
pub mod experiment;
pub mod gff;
pub mod green;
pub mod interlacement;
pub mod loopsoup;
pub mod network;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod stats;
