pub mod cst;
pub mod cass;
pub mod featurize;
pub mod simindex;
pub mod evalkit;
pub mod bofnet;
pub mod cli;
