pub mod calibration;
pub mod error;
pub mod ingest;
pub mod mp;
pub mod oracle;
pub mod sim;
pub mod spectra;
pub mod tw;

pub use error::{Error, Result};
