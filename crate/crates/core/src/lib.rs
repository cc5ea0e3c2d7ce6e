//! Signal-aware direction-of-arrival estimation for uniform linear
//! microphone arrays.
//!
//! The crate covers the whole loop: STFT analysis ([`signal`]), array
//! geometry and steering ([`geometry`]), reverberant scene simulation with
//! ground truth ([`simulate`]), oracle and band-selection attention masks
//! ([`attention`]), attention-weighted SRP-PHAT and MUSIC estimators
//! ([`estimate`]), and the evaluation protocol ([`eval`]).

pub mod attention;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod geometry;
pub mod signal;
pub mod simulate;

pub use error::{Error, Result};
pub use geometry::{ArrayConfig, ArrayGeometry, DoaGrid, SteeringMatrix};
pub use signal::{istft, stft, Spectrogram, StftConfig, TimeSignal, Window};
