pub mod bench;
pub mod cli;
pub mod divergence;
pub mod error;
mod homotopy;
pub mod ioformat;
pub mod mm;
pub mod operator;
pub mod oracle;
pub mod path;
pub mod problem;
pub mod regpath;
pub mod schur;
pub mod srpath;
pub mod synth;

pub use error::{Result, UotError};
