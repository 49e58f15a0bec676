//! Decoherence model for a qubit stored in the two clock states of a single
//! optically trapped alkali atom.
//!
//! The coherence of such a qubit decays through two independent channels:
//!
//! * a Gaussian channel, `exp(-σ²t²/2)`, set by the shot-to-shot spread σ of
//!   the differential light shift (DLS) between the qubit states;
//! * an exponential channel, `exp(-Rt)`, set by the rate R at which trap noise
//!   kicks the atom out of its motional (phonon) state. Any such jump destroys
//!   the coherence.
//!
//! The crate is organised along that model:
//!
//! * [`trap`]: atomic/trap parameters, DLS mean and spread, thermal phonon
//!   occupation.
//! * [`spectrum`] and [`phonon`]: noise spectra and the phonon jumping rates
//!   they drive.
//! * [`coherence`]: the combined decay, T2, lifetime correction, Ramsey
//!   temperature relation, scattering limit, Monte-Carlo checks.
//! * [`pulse`]: Ramsey/echo/CPMG sequences and their filter functions.
//! * [`noise`]: time-series to PSD conversion and dBc helpers.
//! * [`fit`]: least-squares extraction of decay parameters from data.
//! * [`oracle`]: independent reference computations used for validation.
//! * [`reproduction`]: the headline-number reproduction table.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod constants;
pub mod error;
pub mod fit;
pub mod montecarlo;
pub mod noise;
pub mod oracle;
pub mod phonon;
pub mod presets;
pub mod pulse;
pub mod reproduction;
pub mod spectrum;
pub mod trap;

pub use coherence::{CoherencePoint, CoherenceSeries, DecayParams};
pub use error::{Error, Result};
pub use fit::FitResult;
pub use phonon::{AxisNoise, AxisRates, TrapNoise};
pub use pulse::PulseSequence;
pub use spectrum::{NoiseSpectrum, SpectrumKind};
pub use trap::{AtomSpecies, PhononDistribution, TrapConfig};
