//! Benchmark fixtures shared by the criterion targets.

use sfwm_core::{DispersionModel, JointSpectralAmplitude, RunConfig};

/// Default configuration with an `n`×`n` grid and its calibrated model.
pub fn setup(n: usize) -> (RunConfig, DispersionModel) {
    let mut cfg = RunConfig::default();
    cfg.grid = cfg.grid.with_size(n);
    let model = cfg.dispersion_model().expect("default calibration");
    (cfg, model)
}

pub fn delayed_jsa(cfg: &RunConfig, model: &DispersionModel) -> JointSpectralAmplitude {
    sfwm_core::compute_jsa_with(model, &cfg.pump, &cfg.split, &cfg.geometry, &cfg.grid, &cfg.jsa)
        .expect("default JSA")
}
