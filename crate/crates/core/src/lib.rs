//! Quantum-annealer emulation with ensemble error mitigation.
//!
//! The crate models Ising Hamiltonians ([`model`]), builds benchmark
//! instances ([`topology`]), quantizes them for a limited-precision device
//! ([`precision`]), runs them on a simulated annealer with systematic
//! programming bias ([`anneal`]), mitigates that bias with perturbed
//! ensembles, greedy post-processing and gauge transforms ([`mitigate`]),
//! and scores the results ([`metrics`]).

pub mod anneal;
pub mod error;
pub mod metrics;
pub mod mitigate;
pub mod model;
pub mod precision;
pub mod samples;
pub mod seed;
pub mod topology;

pub use anneal::{program, run_trials_curve, sample, DeviceModel, ProgrammedQmi};
pub use error::{Error, Result};
pub use metrics::{
    energy_histogram, energy_residual, estimate_ground, exact_ground, relative_er, Effort,
    ErReport, GroundMethod, GroundTruth,
};
pub use mitigate::{
    make_ensemble, run_baseline, run_equal, run_equal_plus, run_scheme, run_sqc, run_srt, sqc,
    srt_transform, srt_untransform, Ensemble, MitigationResult, RunOptions, Scheme,
};
pub use model::{flip_delta, IsingModel, SpinConfig};
pub use precision::{normalize, prepare, quantization_error, quantize, DeviceRanges, Qmi};
pub use samples::{Sample, SampleSet};
pub use topology::{
    cast_maxcut, chimera_graph, cut_value, random_chimera_instance, sk_maxcut_graph,
    ChimeraSpec, Graph,
};
