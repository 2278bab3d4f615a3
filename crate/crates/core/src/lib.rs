pub mod encapsulation;
pub mod label;
pub mod syntax;
pub mod uts;
pub mod engine;
pub mod proteus;
pub mod creol;
pub mod checks;
pub mod cli;
