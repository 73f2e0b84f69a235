pub mod error;
pub mod flow;
pub mod grid;
pub mod jordan;
pub mod numeric;
pub mod shift;
pub mod calculus;
pub mod diffeo;
pub mod recovery;
pub mod sampling;
pub mod maps;
pub mod report;
pub mod selftest;
pub mod cli;
