//! Numerical simulator for one-dimensional electron ghost imaging mediated by
//! surface plasmon polaritons (SPPs).
//!
//! Lengths are in nanometres throughout; wavevectors in rad/nm.
//!
//! * [`scene`]: slab geometry and objects
//! * [`config`]: TOML run configuration
//! * [`fields`]: complex field grids, the swift-electron source, plane-wave decomposition
//! * [`propagation`]: angular-spectrum propagation and the reverse field from a bucket point
//! * [`joint`]: superposition integrals, post-selection, gated/ungated images, resolution sweeps
//! * [`coincidence`]: time-tagged event simulation and coincidence filtering
//! * [`beamshape`]: PINEM coupling, vortex rings, OAM analysis

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamshape;
pub mod coincidence;
pub mod config;
pub mod constants;
pub mod error;
pub mod fields;
pub mod joint;
pub mod propagation;
pub mod scene;

pub use num_complex::Complex64;

pub use beamshape::{
    oam_analyze, phase_circulation, pinem_beta, ring_vortex_scene, transmission, BetaMap, EzVolume,
    OamSpectrum, RingParams, RingVortex, ZSampling,
};
pub use coincidence::{
    correlate, gated_accumulate, simulate_events, Coincidence, CoincidenceReport,
    CoincidenceSummary, Correlator, Event, EventKind, EventLog, EventStream, RateConfig,
};
pub use config::RunConfig;
pub use error::{Error, ErrorKind, Result};
pub use fields::{
    decompose_source, render_component, swift_electron_field, ComplexField2D, PlaneWaveComponent,
    SourceParams,
};
pub use joint::{
    detected_subset_image, electron_image, forward_bucket_intensity, gated_image_sum, ghost_scan,
    postselect, resolution_sweep, superposition_integral, transmitted_image, ungated_image,
    ElectronTerm, ImagePlane, ImageProfile, ImagingOptics, JointState, PostselectedElectron,
    ResolutionParams, ResolutionPoint,
};
pub use propagation::{apply_transfer, propagate, time_reversed_field, Boundary, Propagator};
pub use scene::{build_transfer, validate_scene, Grid, ObjectSpec, SlabScene};
