pub mod abstraction;
pub mod bugs;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod java;
pub mod predictor;
