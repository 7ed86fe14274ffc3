//! Concrete propagators: the scalar test equation and linear RSWE.

pub mod dahlquist;
pub mod rswe;
pub mod spectral;

pub use dahlquist::{CoarseScheme, DahlquistConfig, DahlquistPropagator, FineScheme};
pub use rswe::{CoarseMode, RsweConfig, RsweModel, RswePropagator};
pub use spectral::SpectralGrid;
