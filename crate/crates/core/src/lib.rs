pub mod dispersion;
pub mod cli;
pub mod error;
pub mod io;
pub mod kinetic;
pub mod quadrature;
pub mod rates;
pub mod spectral;
pub mod synthesis;
pub mod sim;
pub mod wigner;

pub use dispersion::{Dispersion, Wavenumber};
pub use error::{Error, Result};
