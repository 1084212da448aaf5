//! Tree builder random walks: leaf laws, a compressed growing tree, three
//! simulation engines, observables, and exact reference computations.

pub mod count;
pub mod laws;
pub mod oracles;
pub mod rng;
pub mod tree;
pub mod engine;
pub mod observables;
