//! Reversed-HOM and heralded-HOM fringes, closed form and Fock oracle.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::detect::{joint_click, port_probabilities, DetectorModel, DetectorPort};
use super::fock::{FockBasis, FockState};
use super::squeezer::{tmsv_on, PairSource};
use crate::error::{Error, Result};
use crate::spectral::HeraldedSpectralState;

pub const REVERSED_HOM_DEFINITION: &str =
    "C(phi) = (1 - V cos 2phi) / 2; coincidence between signal output 1 and idler output 2";
pub const HERALDED_HOM_DEFINITION: &str =
    "P_cc(theta) = T^2 + R^2 - 2 V T R, T = cos^2(theta/2), R = 1 - T, V = Tr(rho1 rho2)";

/// Phases of the two-source interferometer, reduced to [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterferometerSetting {
    pub phi1: f64,
    pub phi2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl InterferometerSetting {
    pub fn new(phi1: f64, phi2: f64, theta1: f64, theta2: f64) -> Self {
        let m = |x: f64| x.rem_euclid(TAU);
        Self {
            phi1: m(phi1),
            phi2: m(phi2),
            theta1: m(theta1),
            theta2: m(theta2),
        }
    }

    pub fn mzi_transmissivity(theta: f64) -> f64 {
        (theta / 2.0).cos().powi(2)
    }
}

/// Closed-form reversed-HOM coincidence curve.
pub fn reversed_hom_fringe(visibility: f64, phis: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::InvalidParameter(format!("visibility must lie in [0, 1], got {visibility}")));
    }
    Ok(phis.iter().map(|p| 0.5 * (1.0 - visibility * (2.0 * p).cos())).collect())
}

/// Photon pair shared coherently between two identical sources, modes
/// [s1, s2, i1, i2]: (|1,0,1,0⟩ + |0,1,0,1⟩)/√2. Both second-source modes
/// pick up φ (φ1 = φ2 = φ), then signals and idlers meet on 50:50 splitters.
/// Returns the probability of one photon in s-output 1 and one in i-output 2.
pub fn reversed_hom_oracle(phis: &[f64]) -> Result<Vec<f64>> {
    let basis = FockBasis::new(4, 2)?;
    let one = Complex64::new(1.0, 0.0);
    let pair = FockState::from_terms(basis, &[(vec![1, 0, 1, 0], one), (vec![0, 1, 0, 1], one)])?;
    phis.par_iter()
        .map(|&phi| {
            let s = pair
                .phase_shift(1, phi)?
                .phase_shift(3, phi)?
                .beamsplitter(0, 1, 0.5, 0.0)?
                .beamsplitter(2, 3, 0.5, 0.0)?;
            Ok(s.amplitude(&[1, 0, 0, 1]).norm_sqr())
        })
        .collect()
}

/// Least-squares fit of y = a + Σ_k (b_k cos kx + c_k sin kx) at one harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub harmonic: u32,
    pub offset: f64,
    pub amplitude: f64,
    pub visibility: f64,
    pub period: f64,
    pub rms_residual: f64,
}

fn lstsq(design: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>> {
    let yv = DVector::from_column_slice(y);
    let svd = design.clone().svd(true, true);
    svd.solve(&yv, 1e-12)
        .map_err(|e| Error::Numeric(format!("least-squares fit failed: {e}")))
}

pub fn fit_harmonic(x: &[f64], y: &[f64], harmonic: u32) -> Result<FringeFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::InvalidParameter("fringe fit needs at least 4 matched points".into()));
    }
    let k = harmonic as f64;
    let design = DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (k * x[i]).cos(),
        _ => (k * x[i]).sin(),
    });
    let c = lstsq(&design, y)?;
    let fitted = &design * &c;
    let rms = (fitted
        .iter()
        .zip(y)
        .map(|(f, v)| (f - v).powi(2))
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();
    let amplitude = c[1].hypot(c[2]);
    Ok(FringeFit {
        harmonic,
        offset: c[0],
        amplitude,
        visibility: amplitude / c[0],
        period: TAU / k,
        rms_residual: rms,
    })
}

/// Best-fitting harmonic among 1..=3, giving the fringe period.
pub fn fit_fringe(x: &[f64], y: &[f64]) -> Result<FringeFit> {
    let mut best: Option<FringeFit> = None;
    for h in 1..=3 {
        let f = fit_harmonic(x, y, h)?;
        if best.map_or(true, |b| f.rms_residual < b.rms_residual - 1e-15) {
            best = Some(f);
        }
    }
    Ok(best.expect("three candidates"))
}

/// Multiphoton contamination for the heralded-HOM oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiphotonNoise {
    /// Mean pair number per pulse and source.
    pub mean_pairs: f64,
    pub herald: DetectorModel,
    pub signal: DetectorModel,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomResult {
    pub thetas: Vec<f64>,
    /// Coincidence probability per θ (ideal: normalized to the distinguishable level).
    pub coincidences: Vec<f64>,
    /// Tr(ρ1ρ2).
    pub overlap: f64,
    pub fitted_visibility: f64,
    pub definition: &'static str,
}

/// Fits P = A(T² + R²) − 2B·TR and returns V = B/A.
pub fn fit_hom_visibility(thetas: &[f64], p: &[f64]) -> Result<f64> {
    let design = DMatrix::from_fn(thetas.len(), 2, |i, j| {
        let t = InterferometerSetting::mzi_transmissivity(thetas[i]);
        let r = 1.0 - t;
        if j == 0 {
            t * t + r * r
        } else {
            -2.0 * t * r
        }
    });
    let c = lstsq(&design, p)?;
    if c[0] <= 0.0 {
        return Err(Error::Numeric("HOM fit has non-positive baseline".into()));
    }
    Ok(c[1] / c[0])
}

/// Fourfold (two heralds, both MZI outputs) click probability for two
/// two-mode squeezers whose signal photons overlap with |⟨ψ1|ψ2⟩|² =
/// `overlap`. Modes: [1A, 1B, 2A, 2B, i1, i2]; the B modes hold the part of
/// each signal orthogonal to the other source.
pub fn heralded_hom_oracle(overlap: f64, thetas: &[f64], noise: &MultiphotonNoise) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap must lie in [0, 1], got {overlap}")));
    }
    let basis = FockBasis::new(6, noise.cutoff)?;
    let r = noise.mean_pairs.sqrt().asinh();
    let sources = [
        PairSource { signal: 0, idler: 4, r, phase: 0.0 },
        PairSource { signal: 2, idler: 5, r, phase: 0.0 },
    ];
    let state = tmsv_on(basis, &sources)?.beamsplitter(2, 3, overlap, 0.0)?;
    let ports = [
        DetectorPort::new(&[0, 1], noise.signal),
        DetectorPort::new(&[2, 3], noise.signal),
        DetectorPort::new(&[4], noise.herald),
        DetectorPort::new(&[5], noise.herald),
    ];
    thetas
        .par_iter()
        .map(|&theta| {
            let t = InterferometerSetting::mzi_transmissivity(theta);
            let s = state.beamsplitter(0, 2, t, 0.0)?.beamsplitter(1, 3, t, 0.0)?;
            let d = port_probabilities(&s, &ports)?;
            Ok(joint_click(&d, &[0, 1, 2, 3]))
        })
        .collect()
}

/// Heralded HOM between two single-photon spectral states, optionally with
/// multiphoton noise from the Fock oracle.
pub fn heralded_hom(
    rho1: &HeraldedSpectralState,
    rho2: &HeraldedSpectralState,
    thetas: &[f64],
    noise: Option<&MultiphotonNoise>,
) -> Result<HomResult> {
    let v = rho1.overlap(rho2)?.clamp(0.0, 1.0);
    hom_from_overlap(v, thetas, noise)
}

pub fn hom_from_overlap(v: f64, thetas: &[f64], noise: Option<&MultiphotonNoise>) -> Result<HomResult> {
    let coincidences = match noise {
        None => thetas
            .iter()
            .map(|&th| {
                let t = InterferometerSetting::mzi_transmissivity(th);
                let r = 1.0 - t;
                t * t + r * r - 2.0 * v * t * r
            })
            .collect(),
        Some(n) => heralded_hom_oracle(v, thetas, n)?,
    };
    let fitted_visibility = fit_hom_visibility(thetas, &coincidences)?;
    Ok(HomResult {
        thetas: thetas.to_vec(),
        coincidences,
        overlap: v,
        fitted_visibility,
        definition: HERALDED_HOM_DEFINITION,
    })
}

/// `n` evenly spaced phases over [0, span].
pub fn phase_grid(n: usize, span: f64) -> Vec<f64> {
    crate::quad::linspace(0.0, span, n)
}

pub fn default_theta_grid() -> Vec<f64> {
    phase_grid(25, TAU)
}

pub fn default_phi_grid() -> Vec<f64> {
    phase_grid(33, 2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversed_fringe_closed_form() {
        let c = reversed_hom_fringe(1.0, &[0.0, PI / 2.0]).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert!((c[1] - 1.0).abs() < 1e-15);
        let c = reversed_hom_fringe(0.987, &[0.0, PI / 2.0]).unwrap();
        assert!((c[0] / c[1] - 0.013 / 1.987).abs() < 1e-12);
        assert!(reversed_hom_fringe(1.1, &[0.0]).is_err());
    }

    #[test]
    fn reversed_oracle_matches_closed_form() {
        let phis = default_phi_grid();
        let o = reversed_hom_oracle(&phis).unwrap();
        let c = reversed_hom_fringe(1.0, &phis).unwrap();
        // Oracle fringe is half the normalized curve (postselected pair probability).
        for (a, b) in o.iter().zip(&c) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        let fit = fit_fringe(&phis, &o).unwrap();
        assert_eq!(fit.harmonic, 2);
        assert!((fit.period - PI).abs() < 1e-12);
        assert!((fit.visibility - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ideal_hom() {
        let th = default_theta_grid();
        let r = hom_from_overlap(1.0, &th, None).unwrap();
        let t = InterferometerSetting::mzi_transmissivity(PI / 2.0);
        assert!((t - 0.5).abs() < 1e-15);
        assert!((r.fitted_visibility - 1.0).abs() < 1e-12);
        let mid = th.iter().position(|t| (t - PI / 2.0).abs() < 1e-12).unwrap();
        assert!(r.coincidences[mid].abs() < 1e-15);
        let half = hom_from_overlap(0.6, &th, None).unwrap();
        assert!((half.fitted_visibility - 0.6).abs() < 1e-12);
    }

    #[test]
    fn oracle_recovers_overlap_at_small_mu() {
        let th = default_theta_grid();
        for v in [1.0, 0.9, 0.7] {
            let noise = MultiphotonNoise {
                mean_pairs: 1e-4,
                herald: DetectorModel::threshold(0.5),
                signal: DetectorModel::threshold(0.5),
                cutoff: 6,
            };
            let r = hom_from_overlap(v, &th, Some(&noise)).unwrap();
            assert!((r.fitted_visibility / v - 1.0).abs() < 0.02, "{v}: {}", r.fitted_visibility);
        }
    }

    #[test]
    fn hom_at_pi_over_two_is_zero_for_identical_photons() {
        let noise = MultiphotonNoise {
            mean_pairs: 1e-6,
            herald: DetectorModel::threshold(1.0),
            signal: DetectorModel::number_resolving(1.0),
            cutoff: 4,
        };
        let p = heralded_hom_oracle(1.0, &[PI / 2.0, 0.0], &noise).unwrap();
        assert!(p[0] < 1e-9 * p[1].max(1e-300) + 1e-20);
    }

    #[test]
    fn setting_reduces_phases() {
        let s = InterferometerSetting::new(-0.5, 7.0, TAU, 0.1);
        assert!((s.phi1 - (TAU - 0.5)).abs() < 1e-12);
        assert!((s.phi2 - (7.0 - TAU)).abs() < 1e-12);
        assert_eq!(s.theta1, 0.0);
    }
}
