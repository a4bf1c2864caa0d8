//! Per-mode Taylor model of the waveguide propagation constant and its
//! calibration against phase-matching observables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{energy_conserving_pump_nm, nm_to_omega, omega_to_nm};

/// Half-maximum point of sinc²: sin²(x)/x² = 1/2.
pub(crate) const SINC2_HALF_MAX_X: f64 = 1.391_557_378_251_55;

/// Relative half-width of the frequency window in which the expansion is trusted.
pub const VALIDITY_WINDOW: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeId {
    TM0,
    TM1,
}

impl ModeId {
    pub const ALL: [ModeId; 2] = [ModeId::TM0, ModeId::TM1];
}

impl std::fmt::Display for ModeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeId::TM0 => f.write_str("TM0"),
            ModeId::TM1 => f.write_str("TM1"),
        }
    }
}

/// β(ω) = β0 + β1Δω + β2Δω²/2 + β3Δω³/6 per mode, Δω = ω − ω_ref.
///
/// Units: rad/m, s/m, s²/m, s³/m and rad/s for `omega_ref`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionModel {
    pub beta0_tm0: f64,
    pub beta1_tm0: f64,
    pub beta2_tm0: f64,
    #[serde(default)]
    pub beta3_tm0: f64,
    pub beta0_tm1: f64,
    pub beta1_tm1: f64,
    pub beta2_tm1: f64,
    #[serde(default)]
    pub beta3_tm1: f64,
    pub omega_ref: f64,
}

impl DispersionModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.beta0_tm0,
            self.beta1_tm0,
            self.beta2_tm0,
            self.beta3_tm0,
            self.beta0_tm1,
            self.beta1_tm1,
            self.beta2_tm1,
            self.beta3_tm1,
            self.omega_ref,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if self.omega_ref <= 0.0 {
            return Err(Error::InvalidModel("omega_ref must be positive".into()));
        }
        if self.beta1_tm0 <= 0.0 || self.beta1_tm1 <= 0.0 {
            return Err(Error::InvalidModel("beta1 must be positive in both modes".into()));
        }
        if self.beta1_tm1 <= self.beta1_tm0 {
            return Err(Error::InvalidModel(format!(
                "beta1_tm1 ({:e}) must exceed beta1_tm0 ({:e}): TM0 is the faster mode",
                self.beta1_tm1, self.beta1_tm0
            )));
        }
        Ok(())
    }

    /// Taylor coefficients [β0, β1, β2, β3] of one mode.
    pub fn coefficients(&self, mode: ModeId) -> [f64; 4] {
        match mode {
            ModeId::TM0 => [self.beta0_tm0, self.beta1_tm0, self.beta2_tm0, self.beta3_tm0],
            ModeId::TM1 => [self.beta0_tm1, self.beta1_tm1, self.beta2_tm1, self.beta3_tm1],
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (
            self.omega_ref * (1.0 - VALIDITY_WINDOW),
            self.omega_ref * (1.0 + VALIDITY_WINDOW),
        )
    }

    pub fn check_omega(&self, quantity: &'static str, omega: f64) -> Result<()> {
        let (lo, hi) = self.window();
        if omega.is_finite() && omega >= lo && omega <= hi {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity,
                value: omega,
                lo,
                hi,
            })
        }
    }

    pub fn beta(&self, mode: ModeId, omega: f64) -> Result<f64> {
        self.check_omega("omega", omega)?;
        Ok(self.beta_unchecked(mode, omega))
    }

    /// [`Self::beta`] without the validity-window check.
    #[inline]
    pub fn beta_unchecked(&self, mode: ModeId, omega: f64) -> f64 {
        let [b0, b1, b2, b3] = self.coefficients(mode);
        let d = omega - self.omega_ref;
        b0 + d * (b1 + d * (b2 / 2.0 + d * b3 / 6.0))
    }

    /// Inverse group velocity dβ/dω.
    pub fn group_delay(&self, mode: ModeId, omega: f64) -> Result<f64> {
        self.check_omega("omega", omega)?;
        let [_, b1, b2, b3] = self.coefficients(mode);
        let d = omega - self.omega_ref;
        Ok(b1 + d * (b2 + d * b3 / 2.0))
    }

    /// Group-velocity mismatch Δβ₁ = β1(TM1) − β1(TM0).
    pub fn walk_off(&self) -> Result<f64> {
        let w = self.beta1_tm1 - self.beta1_tm0;
        if w > 0.0 && w.is_finite() {
            Ok(w)
        } else {
            Err(Error::InvalidModel(format!("walk-off must be positive, got {w:e} s/m")))
        }
    }

    /// Adds a common offset to both β0 values.
    pub fn shift_beta0(&self, offset: f64) -> Self {
        Self {
            beta0_tm0: self.beta0_tm0 + offset,
            beta0_tm1: self.beta0_tm1 + offset,
            ..*self
        }
    }
}

/// Δβ for pump photons at `omega_p0` (TM0) and `omega_p1` (TM1) creating a TM1
/// signal and a TM0 idler, without window checks.
#[inline]
pub(crate) fn delta_beta_unchecked(
    m: &DispersionModel,
    omega_p0: f64,
    omega_p1: f64,
    omega_s: f64,
    omega_i: f64,
) -> f64 {
    m.beta_unchecked(ModeId::TM0, omega_p0) + m.beta_unchecked(ModeId::TM1, omega_p1)
        - m.beta_unchecked(ModeId::TM1, omega_s)
        - m.beta_unchecked(ModeId::TM0, omega_i)
}

/// Observable targets the surrogate is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationTargets {
    /// Nominal pump wavelength. The exact operating point is the
    /// energy-conserving pump of `signal_nm` and `idler_nm`; the difference is
    /// reported by [`OperatingPoint::pump_detuning`].
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    /// Target Δβ₁ in s/m.
    pub walk_off: f64,
    /// FWHM of the sinc² band along the signal axis at fixed idler.
    pub pm_fwhm_nm: f64,
    pub length: f64,
    /// Absolute TM0 group delay; does not enter any phase mismatch.
    pub beta1_tm0: f64,
    /// Gauge value for both β0.
    pub beta0: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        let length = 0.011;
        Self {
            pump_nm: energy_conserving_pump_nm(1588.0, 1516.0),
            signal_nm: 1588.0,
            idler_nm: 1516.0,
            walk_off: 2.0 * 1.46e-12 / length,
            pm_fwhm_nm: 4.0,
            length,
            beta1_tm0: 1.3e-8,
            beta0: 1e7,
        }
    }
}

/// Exact centre of the calibrated four-wave configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_i: f64,
    /// Nominal minus exact pump angular frequency, rad/s.
    pub pump_detuning: f64,
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("pump_nm", self.pump_nm),
            ("signal_nm", self.signal_nm),
            ("idler_nm", self.idler_nm),
            ("walk_off", self.walk_off),
            ("pm_fwhm_nm", self.pm_fwhm_nm),
            ("length", self.length),
            ("beta1_tm0", self.beta1_tm0),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("calibration target {name} must be positive, got {v}")));
            }
        }
        if self.signal_nm <= self.idler_nm {
            return Err(Error::InvalidParameter(
                "signal (TM1) must be the long-wavelength photon".into(),
            ));
        }
        Ok(())
    }

    pub fn operating_point(&self) -> OperatingPoint {
        let omega_s = nm_to_omega(self.signal_nm);
        let omega_i = nm_to_omega(self.idler_nm);
        let omega_p = 0.5 * (omega_s + omega_i);
        OperatingPoint {
            pump_nm: omega_to_nm(omega_p),
            signal_nm: self.signal_nm,
            idler_nm: self.idler_nm,
            omega_p,
            omega_s,
            omega_i,
            pump_detuning: nm_to_omega(self.pump_nm) - omega_p,
        }
    }
}

const B2_SCALE: f64 = 1e-24;
const B3_SCALE: f64 = 1e-37;
const B2_BOUND: f64 = 1e-23;
const B3_BOUND: f64 = 1e-36;

fn assemble(t: &CalibrationTargets, op: &OperatingPoint, x: [f64; 3]) -> DispersionModel {
    DispersionModel {
        beta0_tm0: t.beta0,
        beta1_tm0: t.beta1_tm0,
        beta2_tm0: x[0] * B2_SCALE,
        beta3_tm0: x[1] * B3_SCALE,
        beta0_tm1: t.beta0,
        beta1_tm1: t.beta1_tm0 + t.walk_off,
        beta2_tm1: x[0] * B2_SCALE,
        beta3_tm1: x[2] * B3_SCALE,
        omega_ref: op.omega_p,
    }
}

/// Signal-axis FWHM (nm) of sinc²(ΔβL/2) at fixed idler, with both pump photons
/// at the energy-conserving midpoint.
pub fn pm_fwhm_nm(model: &DispersionModel, omega_s0: f64, omega_i0: f64, length: f64) -> Result<f64> {
    let x = |ws: f64| {
        let wp = 0.5 * (ws + omega_i0);
        delta_beta_unchecked(model, wp, wp, ws, omega_i0) * length / 2.0
    };
    let x0 = x(omega_s0);
    if x0.abs() >= SINC2_HALF_MAX_X {
        return Err(Error::Calibration {
            reason: "signal centre is not inside the phase-matching band".into(),
            residuals: vec![x0],
        });
    }
    let edge = |dir: f64| -> Result<f64> {
        let mut step = 1e11;
        let mut inner = omega_s0;
        let mut outer = omega_s0 + dir * step;
        while x(outer).abs() < SINC2_HALF_MAX_X {
            inner = outer;
            step *= 2.0;
            outer = omega_s0 + dir * step;
            if step > 0.05 * omega_s0 {
                return Err(Error::Calibration {
                    reason: "phase-matching band has no half-maximum edge".into(),
                    residuals: vec![],
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if mid == inner || mid == outer {
                break;
            }
            if x(mid).abs() < SINC2_HALF_MAX_X {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    let hi = edge(1.0)?;
    let lo = edge(-1.0)?;
    Ok(omega_to_nm(lo) - omega_to_nm(hi))
}

fn residuals(t: &CalibrationTargets, op: &OperatingPoint, x: [f64; 3]) -> Result<[f64; 3]> {
    let m = assemble(t, op, x);
    let w = t.walk_off;
    let centre = delta_beta_unchecked(&m, op.omega_p, op.omega_p, op.omega_s, op.omega_i);
    let fwhm = pm_fwhm_nm(&m, op.omega_s, op.omega_i, t.length)?;
    // Group-delay matching for a factorable joint spectrum: the signal and
    // idler group delays straddle the mean pump delay with product −(Δβ₁/2)².
    let kp = 0.5 * (m.beta1_tm0 + m.beta1_tm1);
    let ks = kp - group_delay_unchecked(&m, ModeId::TM1, op.omega_s);
    let ki = kp - group_delay_unchecked(&m, ModeId::TM0, op.omega_i);
    Ok([
        centre * t.length,
        fwhm / t.pm_fwhm_nm - 1.0,
        (ks * ki) / (w * w) + 0.25,
    ])
}

fn group_delay_unchecked(m: &DispersionModel, mode: ModeId, omega: f64) -> f64 {
    let [_, b1, b2, b3] = m.coefficients(mode);
    let d = omega - m.omega_ref;
    b1 + d * (b2 + d * b3 / 2.0)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_row_slice(&[
        a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2], a[2][0], a[2][1], a[2][2],
    ]);
    let v = nalgebra::Vector3::new(b[0], b[1], b[2]);
    m.lu().solve(&v).map(|s| [s[0], s[1], s[2]])
}

/// Fits a common β2 and per-mode β3 so that the centre configuration is
/// phase-matched, the sinc band has the target width and the group delays
/// satisfy the factorability condition. β1 values are fixed by the walk-off.
pub fn calibrate(targets: &CalibrationTargets) -> Result<DispersionModel> {
    targets.validate()?;
    let op = targets.operating_point();
    if op.pump_detuning.abs() > 1e-2 * op.omega_p {
        return Err(Error::InvalidParameter(format!(
            "pump {} nm is far from the energy-conserving {:.3} nm",
            targets.pump_nm, op.pump_nm
        )));
    }
    if op.pump_detuning.abs() > 1e-4 * op.omega_p {
        log::warn!(
            "nominal pump {} nm is not energy-conserving for ({}, {}) nm; calibrating at {:.3} nm",
            targets.pump_nm,
            targets.signal_nm,
            targets.idler_nm,
            op.pump_nm
        );
    }
    // Start from the β3 = 0 solution of the centre condition.
    let d = op.omega_i - op.omega_p;
    let mut x = [targets.walk_off / d / B2_SCALE, 0.0, 0.0];
    let mut r = residuals(targets, &op, x)?;
    let norm = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _ in 0..100 {
        if norm(&r) < 1e-14 {
            break;
        }
        let mut jac = [[0.0; 3]; 3];
        for k in 0..3 {
            let h = 1e-6 * x[k].abs().max(1.0);
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let rp = residuals(targets, &op, xp)?;
            let rm = residuals(targets, &op, xm)?;
            for i in 0..3 {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let step = solve3(jac, [-r[0], -r[1], -r[2]]).ok_or_else(|| Error::Calibration {
            reason: "singular Jacobian".into(),
            residuals: r.to_vec(),
        })?;
        // Damped update: halve until the residual decreases.
        let mut lambda = 1.0;
        loop {
            let trial = [x[0] + lambda * step[0], x[1] + lambda * step[1], x[2] + lambda * step[2]];
            if let Ok(rt) = residuals(targets, &op, trial) {
                if norm(&rt) < norm(&r) {
                    x = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                break;
            }
        }
        if lambda < 1e-6 {
            // No further decrease possible: residuals are at the noise floor
            // of the band-edge bisection, or the iteration stalled.
            break;
        }
    }
    if norm(&r) > 1e-9 {
        return Err(Error::Calibration {
            reason: "Newton iteration did not converge".into(),
            residuals: r.to_vec(),
        });
    }
    let model = assemble(targets, &op, x);
    if model.beta2_tm0.abs() > B2_BOUND
        || model.beta3_tm0.abs() > B3_BOUND
        || model.beta3_tm1.abs() > B3_BOUND
    {
        return Err(Error::Calibration {
            reason: format!(
                "solution outside bounds |beta2| <= {B2_BOUND:e}, |beta3| <= {B3_BOUND:e}: beta2 = {:e}, beta3 = ({:e}, {:e})",
                model.beta2_tm0, model.beta3_tm0, model.beta3_tm1
            ),
            residuals: r.to_vec(),
        });
    }
    model.validate()?;
    log::debug!("calibrated dispersion model: {model:?}, residuals {r:?}");
    Ok(model)
}

/// Reads the observable targets back off a model; inverse of [`calibrate`].
pub fn measure_targets(
    model: &DispersionModel,
    signal_nm: f64,
    idler_nm: f64,
    length: f64,
) -> Result<CalibrationTargets> {
    let omega_s = nm_to_omega(signal_nm);
    let omega_i = nm_to_omega(idler_nm);
    Ok(CalibrationTargets {
        pump_nm: omega_to_nm(model.omega_ref),
        signal_nm,
        idler_nm,
        walk_off: model.walk_off()?,
        pm_fwhm_nm: pm_fwhm_nm(model, omega_s, omega_i, length)?,
        length,
        beta1_tm0: model.beta1_tm0,
        beta0: model.beta0_tm0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> DispersionModel {
        calibrate(&CalibrationTargets::default()).unwrap()
    }

    #[test]
    fn beta_at_reference_is_beta0() {
        let m = model();
        assert_eq!(m.beta(ModeId::TM0, m.omega_ref).unwrap(), m.beta0_tm0);
        assert_eq!(m.beta(ModeId::TM1, m.omega_ref).unwrap(), m.beta0_tm1);
    }

    #[test]
    fn linear_model_scales_with_detuning() {
        let m = DispersionModel {
            beta0_tm0: 5.0,
            beta1_tm0: 1e-8,
            beta2_tm0: 0.0,
            beta3_tm0: 0.0,
            beta0_tm1: 5.0,
            beta1_tm1: 1.02e-8,
            beta2_tm1: 0.0,
            beta3_tm1: 0.0,
            omega_ref: 1.2e15,
        };
        let a = m.beta(ModeId::TM0, m.omega_ref + 1e12).unwrap() - 5.0;
        let b = m.beta(ModeId::TM0, m.omega_ref + 2e12).unwrap() - 5.0;
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
        assert_relative_eq!(m.walk_off().unwrap(), 2.0e-10, max_relative = 1e-9);
    }

    #[test]
    fn beta_matches_scalar_polynomial() {
        let m = model();
        let omega = m.omega_ref + crate::units::bandwidth_nm_to_omega(1550.0, 4.5);
        let d = omega - m.omega_ref;
        let direct = m.beta0_tm0
            + m.beta1_tm0 * d
            + 0.5 * m.beta2_tm0 * d.powi(2)
            + m.beta3_tm0 * d.powi(3) / 6.0;
        assert_relative_eq!(m.beta(ModeId::TM0, omega).unwrap(), direct, max_relative = 1e-14);
    }

    #[test]
    fn outside_window_is_domain_error() {
        let m = model();
        let err = m.beta(ModeId::TM1, m.omega_ref * 1.2).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(err.to_string().contains("validity window"));
    }

    #[test]
    fn equal_group_delays_are_rejected() {
        let mut m = model();
        m.beta1_tm1 = m.beta1_tm0;
        assert!(matches!(m.walk_off(), Err(Error::InvalidModel(_))));
        assert!(m.validate().is_err());
    }

    #[test]
    fn calibrated_walk_off_and_band() {
        let t = CalibrationTargets::default();
        let m = calibrate(&t).unwrap();
        let expected = 2.0 * 1.46e-12 / 0.011;
        assert_relative_eq!(m.walk_off().unwrap(), expected, max_relative = 0.01);
        assert!((expected - 2.65e-10).abs() < 0.01e-10);
        let op = t.operating_point();
        let fwhm = pm_fwhm_nm(&m, op.omega_s, op.omega_i, t.length).unwrap();
        assert!((fwhm - 4.0).abs() < 0.4);
        let db = delta_beta_unchecked(&m, op.omega_p, op.omega_p, op.omega_s, op.omega_i);
        assert!(db.abs() < 1e-6);
        assert!(m.beta2_tm0.abs() <= 1e-23);
    }

    #[test]
    fn finite_difference_reproduces_beta1() {
        let m = model();
        let h = 1e9;
        for mode in ModeId::ALL {
            let fd = (m.beta(mode, m.omega_ref + h).unwrap() - m.beta(mode, m.omega_ref - h).unwrap())
                / (2.0 * h);
            assert_relative_eq!(fd, m.coefficients(mode)[1], max_relative = 1e-6);
        }
    }

    #[test]
    fn calibration_round_trip() {
        let t = CalibrationTargets::default();
        let m = calibrate(&t).unwrap();
        let back = measure_targets(&m, t.signal_nm, t.idler_nm, t.length).unwrap();
        let m2 = calibrate(&back).unwrap();
        for (a, b) in [
            (m.beta2_tm0, m2.beta2_tm0),
            (m.beta3_tm0, m2.beta3_tm0),
            (m.beta3_tm1, m2.beta3_tm1),
            (m.beta1_tm1, m2.beta1_tm1),
            (m.omega_ref, m2.omega_ref),
        ] {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn operating_point_conserves_energy() {
        let op = CalibrationTargets::default().operating_point();
        assert_relative_eq!(2.0 / op.pump_nm, 1.0 / op.signal_nm + 1.0 / op.idler_nm, max_relative = 1e-12);
        assert!(op.pump_detuning.abs() < 1e6);
    }

    #[test]
    fn config_keys_round_trip() {
        let m = model();
        let text = toml::to_string(&m).unwrap();
        for key in ["beta0_tm0", "beta1_tm0", "beta2_tm1", "beta3_tm1", "omega_ref"] {
            assert!(text.contains(key));
        }
        let back: DispersionModel = toml::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
