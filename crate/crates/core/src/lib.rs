//! Simulation and analysis of a cavity-enhanced, below-threshold photon-pair
//! source emitting in Hermite-Gaussian transverse modes.
//!
//! * [`spatial_modes`]: LG/HG fields, overlaps, petal projection and the
//!   joint orientation law of the OAM-conserving pair state.
//! * [`cavity`]: resonator timing, finesse, reflection and PDH error signal.
//! * [`biphoton`]: analytic g2(τ) with comb, detector blur and brightness.
//! * [`event_sim`]: Monte Carlo time-tag generation and the tag file format.
//! * [`correlator`]: coincidence histograms, normalization and envelope fit.
//! * [`cli`]: scenario configuration, orchestration and file output.

pub mod biphoton;
pub mod cavity;
pub mod cli;
pub mod correlator;
pub mod event_sim;
pub mod seed;
pub mod spatial_modes;
