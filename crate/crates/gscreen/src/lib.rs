pub mod baselines;
pub mod exponents;
pub mod graphs;
pub mod io;
pub mod model;
pub mod selector;
