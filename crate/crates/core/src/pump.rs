//! Pulsed pump: spectral envelope, power scaling and the delayed dual-mode split.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::dispersion::ModeId;
use crate::error::{Error, Result};
use crate::quad::simpson;
use crate::units::{bandwidth_nm_to_omega, db_to_transmission, energy_conserving_pump_nm, nm_to_omega};

/// acosh(√2): sech²(x) = 1/2.
const SECH2_HALF_MAX_X: f64 = 0.881_373_587_019_543;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PumpShape {
    #[default]
    Gaussian,
    Sech2,
}

/// Transform-limited pump pulse. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpPulse {
    pub lambda0_nm: f64,
    /// Intensity FWHM in nm.
    pub fwhm_nm: f64,
    pub shape: PumpShape,
    /// Off-chip average power, W.
    pub avg_power: f64,
    pub rep_rate: f64,
    /// Input coupling loss, dB (positive).
    pub coupling_loss_db: f64,
    /// Full width of an optional square spectral window, nm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefilter_nm: Option<f64>,
}

impl Default for PumpPulse {
    fn default() -> Self {
        Self {
            lambda0_nm: energy_conserving_pump_nm(1588.0, 1516.0),
            fwhm_nm: 4.5,
            shape: PumpShape::Gaussian,
            avg_power: 0.5e-3,
            rep_rate: 50e6,
            coupling_loss_db: 6.6,
            prefilter_nm: None,
        }
    }
}

impl PumpPulse {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda0_nm.is_finite() && self.lambda0_nm > 0.0) {
            return bad(format!("pump wavelength must be positive, got {}", self.lambda0_nm));
        }
        if !(self.fwhm_nm.is_finite() && self.fwhm_nm > 0.0) {
            return bad(format!("pump bandwidth must be positive, got {}", self.fwhm_nm));
        }
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return bad(format!("repetition rate must be positive, got {}", self.rep_rate));
        }
        if !(self.avg_power.is_finite() && self.avg_power >= 0.0) {
            return bad(format!("average power must be non-negative, got {}", self.avg_power));
        }
        if !(self.coupling_loss_db.is_finite() && self.coupling_loss_db >= 0.0) {
            return bad(format!("coupling loss must be >= 0 dB, got {}", self.coupling_loss_db));
        }
        if let Some(w) = self.prefilter_nm {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("prefilter width must be positive, got {w}"));
            }
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        nm_to_omega(self.lambda0_nm)
    }

    /// Intensity FWHM in rad/s.
    pub fn fwhm_omega(&self) -> f64 {
        bandwidth_nm_to_omega(self.lambda0_nm, self.fwhm_nm)
    }

    /// Width parameter of the amplitude: σ of the Gaussian intensity, or w of
    /// sech(Δ/w).
    fn width(&self) -> f64 {
        let f = self.fwhm_omega();
        match self.shape {
            PumpShape::Gaussian => f / (2.0 * (2.0 * 2f64.ln()).sqrt()),
            PumpShape::Sech2 => f / (2.0 * SECH2_HALF_MAX_X),
        }
    }

    /// Standard deviation of the (unfiltered) intensity spectrum, rad/s.
    pub fn intensity_sigma(&self) -> f64 {
        match self.shape {
            PumpShape::Gaussian => self.width(),
            PumpShape::Sech2 => PI * self.width() / (2.0 * 3f64.sqrt()),
        }
    }

    /// Half-width of the square prefilter in rad/s, if any.
    pub fn prefilter_half_width(&self) -> Option<f64> {
        self.prefilter_nm
            .map(|w| 0.5 * bandwidth_nm_to_omega(self.lambda0_nm, w))
    }

    /// Half-width of the spectral support used for quadrature: four intensity
    /// standard deviations, clipped to the prefilter.
    pub fn support_half_width(&self) -> f64 {
        let s = 4.0 * self.intensity_sigma();
        match self.prefilter_half_width() {
            Some(a) => s.min(a),
            None => s,
        }
    }

    /// Fraction of unfiltered spectral energy inside the prefilter window.
    fn filter_fraction(&self) -> f64 {
        match self.prefilter_half_width() {
            None => 1.0,
            Some(a) => match self.shape {
                PumpShape::Gaussian => erf(a / (2f64.sqrt() * self.width())),
                PumpShape::Sech2 => (a / self.width()).tanh(),
            },
        }
    }

    /// Real envelope as a function of detuning Δ = ω − ω0, normalized to
    /// ∫|E|² dω = 1.
    pub fn envelope_detuned(&self, delta: f64) -> f64 {
        self.envelope_fn()(delta)
    }

    /// [`Self::envelope_detuned`] with all shape constants precomputed.
    pub fn envelope_fn(&self) -> impl Fn(f64) -> f64 + Send + Sync {
        let w = self.width();
        let cutoff = self.prefilter_half_width().unwrap_or(f64::INFINITY);
        let shape = self.shape;
        let scale = match shape {
            PumpShape::Gaussian => (2.0 * PI * w * w).powf(-0.25),
            PumpShape::Sech2 => 1.0 / (2.0 * w).sqrt(),
        } / self.filter_fraction().sqrt();
        move |delta: f64| {
            if delta.abs() > cutoff {
                return 0.0;
            }
            scale
                * match shape {
                    PumpShape::Gaussian => (-delta * delta / (4.0 * w * w)).exp(),
                    PumpShape::Sech2 => 1.0 / (delta / w).cosh(),
                }
        }
    }

    pub fn envelope(&self, omega: f64) -> Complex64 {
        Complex64::new(self.envelope_detuned(omega - self.omega0()), 0.0)
    }

    /// Pulse energy divided by peak instantaneous power for the
    /// transform-limited pulse: 2π / (∫E dω)².
    pub fn effective_duration(&self) -> f64 {
        let area = match (self.prefilter_nm, self.shape) {
            (None, PumpShape::Gaussian) => {
                let s = self.width();
                (2.0 * PI * s * s).powf(-0.25) * (4.0 * PI * s * s).sqrt()
            }
            (None, PumpShape::Sech2) => {
                let w = self.width();
                PI * w / (2.0 * w).sqrt()
            }
            (Some(_), _) => {
                let a = self.support_half_width();
                simpson(self.envelope_fn(), -a, a, 4001)
            }
        };
        2.0 * PI / (area * area)
    }

    /// On-chip peak power, W.
    pub fn peak_power(&self) -> f64 {
        let on_chip = self.avg_power * db_to_transmission(-self.coupling_loss_db);
        on_chip / (self.rep_rate * self.effective_duration())
    }
}

/// Splitting of the pump between the two waveguide modes, with the TM0 copy
/// delayed by `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayedSplit {
    /// Delay of the TM0 copy, s.
    pub tau: f64,
    /// Power fraction sent to the TM0 arm.
    pub split_ratio: f64,
}

impl Default for DelayedSplit {
    fn default() -> Self {
        Self {
            tau: 1.46e-12,
            split_ratio: 0.5,
        }
    }
}

impl DelayedSplit {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay must be >= 0, got {}", self.tau)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        Ok(())
    }

    pub fn arm_amplitude(&self, arm: ModeId) -> f64 {
        match arm {
            ModeId::TM0 => self.split_ratio.sqrt(),
            ModeId::TM1 => (1.0 - self.split_ratio).sqrt(),
        }
    }
}

/// Pump amplitude in one arm. The TM0 copy carries the delay as the linear
/// spectral phase (ω − ω0)τ; the constant ω0τ is dropped.
pub fn delayed_envelope(pulse: &PumpPulse, split: &DelayedSplit, arm: ModeId, omega: f64) -> Complex64 {
    let delta = omega - pulse.omega0();
    let amp = split.arm_amplitude(arm) * pulse.envelope_detuned(delta);
    match arm {
        ModeId::TM0 => Complex64::from_polar(amp, delta * split.tau),
        ModeId::TM1 => Complex64::new(amp, 0.0),
    }
}
