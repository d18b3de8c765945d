pub mod cli;
pub mod dist;
pub mod error;
pub mod forecast;
pub mod hmm;
pub mod io;
pub mod optim;
pub mod pulse;

pub mod report;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
