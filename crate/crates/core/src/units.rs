//! Physical constants and wavelength/frequency conversions.
//!
//! Wavelengths are vacuum wavelengths in nanometres, frequencies are angular
//! frequencies in rad/s.

use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Angular frequency of a vacuum wavelength given in nm.
pub fn nm_to_omega(nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (nm * 1e-9)
}

pub fn omega_to_nm(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

/// Converts a (small) wavelength interval around `center_nm` to rad/s:
/// Δω = 2πcΔλ/λ².
pub fn bandwidth_nm_to_omega(center_nm: f64, width_nm: f64) -> f64 {
    let lambda = center_nm * 1e-9;
    2.0 * PI * SPEED_OF_LIGHT * width_nm * 1e-9 / (lambda * lambda)
}

pub fn bandwidth_omega_to_nm(center_nm: f64, d_omega: f64) -> f64 {
    let lambda = center_nm * 1e-9;
    d_omega * lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT) * 1e9
}

/// Pump wavelength for which degenerate pumping is exactly energy-conserving
/// with the given signal and idler: 2/λp = 1/λs + 1/λi.
pub fn energy_conserving_pump_nm(signal_nm: f64, idler_nm: f64) -> f64 {
    2.0 / (1.0 / signal_nm + 1.0 / idler_nm)
}

/// dB (≤ 0 for a loss) to power transmission.
pub fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn transmission_to_db(t: f64) -> f64 {
    10.0 * t.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn round_trips() {
        assert_relative_eq!(omega_to_nm(nm_to_omega(1588.0)), 1588.0, max_relative = 1e-14);
        assert_relative_eq!(transmission_to_db(db_to_transmission(-6.6)), -6.6, max_relative = 1e-14);
    }

    #[test]
    fn pump_bandwidth_conversion() {
        // 2πcΔλ/λ² for 4.5 nm at 1550 nm
        let expected = 2.0 * PI * 299_792_458.0 * 4.5e-9 / (1550e-9f64).powi(2);
        let got = bandwidth_nm_to_omega(1550.0, 4.5);
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert!((got - 3.53e12).abs() < 0.01e12);
    }

    #[test]
    fn energy_conservation_of_default_wavelengths() {
        let p = energy_conserving_pump_nm(1588.0, 1516.0);
        let lhs = 2.0 / p;
        assert_relative_eq!(lhs, 1.0 / 1588.0 + 1.0 / 1516.0, max_relative = 1e-15);
        assert!((p - 1551.17).abs() < 0.01);
    }
}
