//! Secret-key-rate toolkit for measurement-device-independent QKD, in both
//! the original (Z/X) and the reference-frame-independent (Z/X/Y) flavours.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: closed-form gains and error gains of weak coherent pulses
//!   through a lossy channel into a two-detector-pair Bell-state measurement.
//! * [`decoy`]: analytic two-decoy bounds on the single-photon yield and
//!   error yield, for the symmetric three-intensity and the biased
//!   four-intensity protocols.
//! * [`security`]: binary entropy, the RFI correlation quantity `C`, Eve's
//!   information and the key-rate formula.
//! * [`finitekey`]: Chernoff intervals on measured counts and their
//!   propagation through the decoy estimator.
//! * [`pipeline`]: glue that turns any observable source (model table or
//!   bounded counts) into an auditable [`security::KeyRateReport`].
//! * [`optimizer`]: multi-start coordinate search over intensities and
//!   sampling probabilities.
//! * [`scan`]: flat configuration files, counts files, sweeps and CSV.
//! * [`oracle`]: brute-force reference computations used by the test suites.

pub mod bessel;
pub mod decoy;
pub mod error;
pub mod finitekey;
pub mod model;
pub mod observables;
pub mod optimizer;
pub mod oracle;
pub mod pipeline;
pub mod protocol;
pub mod scan;
pub mod security;

pub use error::{Error, Result};
