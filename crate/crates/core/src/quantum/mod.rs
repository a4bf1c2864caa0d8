//! Photon statistics and interference: a truncated Fock-space oracle plus the
//! closed forms it checks.

pub mod detect;
pub mod fock;
pub mod interference;
pub mod squeezer;
pub mod stats;

pub use detect::{click_probabilities, port_probabilities, DetectorKind, DetectorModel, DetectorPort};
pub use fock::{FockBasis, FockEnsemble, FockState};
pub use interference::{
    heralded_hom, heralded_hom_oracle, hom_from_overlap, reversed_hom_fringe, reversed_hom_oracle,
    HomResult, InterferometerSetting, MultiphotonNoise,
};
pub use squeezer::{tmsv, tmsv_on, MultimodeSqueezer, PairSource};
pub use stats::{
    g2_heralded, g2_unheralded, g2_unheralded_oracle, mean_pairs_for_heralded_g2, squeezing_from_rates,
    RateMeasurement, SqueezingEstimate,
};
