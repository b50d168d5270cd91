//! Simulation and analysis of Hong-Ou-Mandel interference between heralded
//! photons from two independent pair sources.
//!
//! - [`fock`]: truncated multimode Fock states and the beamsplitter.
//! - [`spectral`]: Gaussian pump/filter overlap, maximum visibilities, dip
//!   envelope and a quadrature cross-check.
//! - [`source`], [`detector`]: pair statistics, heralding, threshold detection.
//! - [`experiment`]: coincidence probabilities, multi-pair visibility, rates.
//! - [`montecarlo`]: pulse-by-pulse counting simulation.
//! - [`dipfit`]: least-squares dip fitting.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod dipfit;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod montecarlo;
pub mod source;
pub mod spectral;

pub use detector::ThresholdDetector;
pub use error::{Error, Result};
pub use experiment::{run_exact, CoincidenceReport, DetectorSet, ExperimentConfig};
pub use fock::{BeamSplitter, FockOccupation, PureState};
pub use source::{HeraldedState, PairSource, PairStatistics};
pub use spectral::{GaussianFilter, PumpPulse, WavelengthTriple};
