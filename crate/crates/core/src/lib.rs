//! Spectral and quantum modelling of an inter-modal four-wave-mixing photon
//! pair source pumped by a delayed, dual-mode pulse.

pub mod config;
pub mod dispersion;
pub mod efficiency;
pub mod error;
pub mod jsa;
pub mod pump;
pub mod quad;
pub mod quantum;
pub mod reproduce;
pub mod spectral;
pub mod tomography;
pub mod units;

pub use config::RunConfig;
pub use dispersion::{calibrate, CalibrationTargets, DispersionModel, ModeId};
pub use efficiency::{
    detected_heralding, infer_excess_loss, infer_intrinsic, intrinsic_heralding, EfficiencyReport,
    GenerationProfile, LossBudget, LossElement,
};
pub use error::{Error, Result};
pub use jsa::{
    brightness, compute_jsa, compute_jsa_with, phase_mismatch, sweep_delay, CoveragePolicy, DelaySweep,
    FrequencyGrid, JointSpectralAmplitude, JsaOptions, SourceGeometry,
};
pub use pump::{delayed_envelope, DelayedSplit, PumpPulse, PumpShape};
pub use reproduce::{run_all, CriterionOutcome};
pub use spectral::{
    apply_filter, heralded_rho, jsi_of, jsi_overlap, jsi_purity, schmidt_decompose, signal_axis_fwhm_nm,
    HeraldedSpectralState, JointSpectralIntensity, SchmidtDecomposition, Side,
};
pub use tomography::{
    fidelity, indistinguishability_from_rho, mle_reconstruct, model_state, simulate_counts, MeasurementRecord,
    TwoQubitState,
};
