//! Schmidt analysis, phase-blind JSI estimators, spectral filters and heralded
//! single-photon states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::{FrequencyGrid, JointSpectralAmplitude};
use crate::units::omega_to_nm;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtDecomposition {
    /// λ_n, non-increasing, Σλ_n = 1.
    pub coefficients: Vec<f64>,
    pub purity: f64,
    pub schmidt_number: f64,
}

impl SchmidtDecomposition {
    /// From arbitrary non-negative weights (normalized here).
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("Schmidt weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("Schmidt weights sum to zero".into()));
        }
        let mut coefficients: Vec<f64> = weights.iter().map(|w| w / total).collect();
        coefficients.sort_by(|a, b| b.total_cmp(a));
        let purity: f64 = coefficients.iter().map(|l| l * l).sum();
        Ok(Self {
            coefficients,
            purity,
            schmidt_number: 1.0 / purity,
        })
    }

    pub fn top(&self, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.coefficients.iter().take(n).copied().collect();
        v.resize(n, 0.0);
        v
    }
}

fn singular_values<T>(m: DMatrix<T>) -> Result<Vec<f64>>
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    let (r, c) = m.shape();
    let max_abs = m.iter().map(|v| v.clone().modulus()).fold(0.0, f64::max);
    let svd = m.try_svd(false, false, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "SVD did not converge on a {r}x{c} matrix (max |entry| {max_abs:.3e})"
        ))
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

fn decompose_matrix<T>(m: DMatrix<T>) -> Result<SchmidtDecomposition>
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    let sv = singular_values(m)?;
    SchmidtDecomposition::from_weights(&sv.iter().map(|s| s * s).collect::<Vec<_>>())
}

pub fn schmidt_decompose(jsa: &JointSpectralAmplitude) -> Result<SchmidtDecomposition> {
    decompose_matrix(jsa.values.clone())
}

/// |F|² normalized to unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralIntensity {
    pub grid: FrequencyGrid,
    pub values: DMatrix<f64>,
}

pub fn jsi_of(jsa: &JointSpectralAmplitude) -> JointSpectralIntensity {
    let mut values = jsa.values.map(|v| v.norm_sqr());
    let total = values.sum();
    values /= total;
    JointSpectralIntensity {
        grid: jsa.grid,
        values,
    }
}

/// Schmidt purity of √JSI, i.e. of the amplitude with its phase discarded.
pub fn jsi_purity(jsi: &JointSpectralIntensity) -> Result<f64> {
    Ok(decompose_matrix(jsi.values.map(f64::sqrt))?.purity)
}

/// (Σ√(J1·J2))², the squared Bhattacharyya coefficient.
pub fn jsi_overlap(a: &JointSpectralIntensity, b: &JointSpectralIntensity) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("JSIs are defined on different grids".into()));
    }
    let s: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x * y).sqrt())
        .sum();
    Ok((s * s).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Signal,
    Idler,
}

/// Reduced spectral state of one photon, on the grid axis of that photon.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedSpectralState {
    pub side: Side,
    pub grid: FrequencyGrid,
    pub rho: DMatrix<Complex64>,
}

impl HeraldedSpectralState {
    pub fn purity(&self) -> f64 {
        trace_product(&self.rho, &self.rho)
    }

    /// Tr(ρ₁ρ₂).
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        if self.side != other.side || self.grid != other.grid {
            return Err(Error::GridMismatch("heralded states live on different bases".into()));
        }
        Ok(trace_product(&self.rho, &other.rho))
    }
}

fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Signal: ρ ∝ FF†. Idler: ρ ∝ FᵀF*.
pub fn heralded_rho(jsa: &JointSpectralAmplitude, side: Side) -> HeraldedSpectralState {
    let f = &jsa.values;
    let mut rho = match side {
        Side::Signal => f * f.adjoint(),
        Side::Idler => f.transpose() * f.conjugate(),
    };
    let tr = rho.trace().re;
    rho /= Complex64::new(tr, 0.0);
    HeraldedSpectralState {
        side,
        grid: jsa.grid,
        rho,
    }
}

/// FWHM in nm of the JSI along the signal axis, through the JSI maximum.
/// Half-maximum crossings are interpolated linearly between grid points.
pub fn signal_axis_fwhm_nm(jsa: &JointSpectralAmplitude) -> Result<f64> {
    let (ps, pi) = jsa.peak_index();
    let nm = jsa.grid.signal_nm();
    let y: Vec<f64> = (0..nm.len()).map(|i| jsa.values[(i, pi)].norm_sqr()).collect();
    let half = 0.5 * y[ps];
    let crossing = |range: &mut dyn Iterator<Item = usize>, step: isize| -> Result<f64> {
        for i in range {
            let j = (i as isize + step) as usize;
            if y[j] < half {
                let t = (y[i] - half) / (y[i] - y[j]);
                return Ok(nm[i] + t * (nm[j] - nm[i]));
            }
        }
        Err(Error::GridCoverage {
            edge_ratio: 0.5,
            limit: 0.5,
        })
    };
    let lo = crossing(&mut (1..=ps).rev(), -1)?;
    let hi = crossing(&mut (ps..nm.len() - 1), 1)?;
    Ok((hi - lo).abs())
}

/// Flat-top band-pass filter on each axis. Returns the renormalized JSA and
/// the fraction of Σ|F|² transmitted.
pub fn apply_filter(
    jsa: &JointSpectralAmplitude,
    signal_band_nm: [f64; 2],
    idler_band_nm: [f64; 2],
) -> Result<(JointSpectralAmplitude, f64)> {
    let g = &jsa.grid;
    for (name, band, range) in [
        ("signal", signal_band_nm, g.signal_range_nm),
        ("idler", idler_band_nm, g.idler_range_nm),
    ] {
        // Small slack for bands given at exactly the grid edge.
        let tol = 1e-9 * range[1];
        if !(band[0] < band[1] && band[0] >= range[0] - tol && band[1] <= range[1] + tol) {
            return Err(Error::InvalidParameter(format!(
                "{name} filter band {band:?} nm is not inside the grid range {range:?} nm"
            )));
        }
    }
    let inside = |omegas: Vec<f64>, band: [f64; 2]| -> Vec<bool> {
        omegas
            .into_iter()
            .map(|w| {
                let nm = omega_to_nm(w);
                let tol = 1e-9 * band[1];
                nm >= band[0] - tol && nm <= band[1] + tol
            })
            .collect()
    };
    let keep_s = inside(g.signal_omegas(), signal_band_nm);
    let keep_i = inside(g.idler_omegas(), idler_band_nm);
    let total: f64 = jsa.values.iter().map(|v| v.norm_sqr()).sum();
    let values = DMatrix::from_fn(g.n_signal, g.n_idler, |a, b| {
        if keep_s[a] && keep_i[b] {
            jsa.values[(a, b)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let kept: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    let fraction = kept / total;
    if kept <= 0.0 {
        return Err(Error::Numeric("filter transmits nothing".into()));
    }
    let mut out = JointSpectralAmplitude::from_values(*g, values)?;
    out.norm_constant = jsa.norm_constant * fraction.sqrt();
    out.pump_peak_power = jsa.pump_peak_power;
    Ok((out, fraction))
}

/// Centred band of the given full width.
pub fn band(center_nm: f64, width_nm: f64) -> [f64; 2] {
    [center_nm - 0.5 * width_nm, center_nm + 0.5 * width_nm]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{calibrate, CalibrationTargets};
    use crate::jsa::{compute_jsa, SourceGeometry};
    use crate::pump::{DelayedSplit, PumpPulse};
    use proptest::prelude::*;

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn grid(n: usize) -> FrequencyGrid {
        FrequencyGrid::default().with_size(n)
    }

    fn delayed(n: usize) -> JointSpectralAmplitude {
        let m = calibrate(&CalibrationTargets::default()).unwrap();
        compute_jsa(&m, &PumpPulse::default(), &DelayedSplit::default(), &SourceGeometry::default(), &grid(n)).unwrap()
    }

    fn separable(n: usize) -> JointSpectralAmplitude {
        let v = DMatrix::from_fn(n, n, |a, b| {
            let x = a as f64 / n as f64 - 0.5;
            let y = b as f64 / n as f64 - 0.4;
            Complex64::from_polar((-(x * x) * 30.0).exp() * (-(y * y) * 50.0).exp(), 3.0 * x - y)
        });
        JointSpectralAmplitude::from_values(grid(n), v).unwrap()
    }

    #[test]
    fn separable_is_pure() {
        let s = schmidt_decompose(&separable(32)).unwrap();
        assert!((s.purity - 1.0).abs() < 1e-9);
        assert!((s.schmidt_number - 1.0).abs() < 1e-9);
        let rho = heralded_rho(&separable(32), Side::Signal);
        assert!((rho.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_equal_modes() {
        let n = 16;
        let mut v = DMatrix::zeros(n, n);
        v[(2, 3)] = Complex64::new(1.0, 0.0);
        v[(7, 9)] = Complex64::new(0.0, -1.0);
        let s = schmidt_decompose(&JointSpectralAmplitude::from_values(grid(n), v).unwrap()).unwrap();
        assert!((s.purity - 0.5).abs() < 1e-12);
        assert_eq!(s.top(3).len(), 3);
    }

    #[test]
    fn jsi_normalization_and_phase_blindness() {
        let j = delayed(64);
        let a = jsi_of(&j);
        assert!((a.values.sum() - 1.0).abs() < 1e-12);
        let mut rotated = j.clone();
        rotated.values.iter_mut().enumerate().for_each(|(k, v)| *v *= Complex64::from_polar(1.0, k as f64 * 0.37));
        let b = jsi_of(&rotated);
        assert!((a.values.clone() - b.values).abs().max() < 1e-15);
        for (x, y) in a.values.iter().zip(j.values.iter()) {
            assert!((x - y.norm_sqr() / j.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).abs() < 1e-15);
        }
    }

    #[test]
    fn jsi_purity_equals_schmidt_purity_for_flat_phase() {
        let j = delayed(64);
        let flat = JointSpectralAmplitude::from_values(j.grid, j.values.map(|v| Complex64::new(v.norm(), 0.0))).unwrap();
        let p = schmidt_decompose(&flat).unwrap().purity;
        let q = jsi_purity(&jsi_of(&flat)).unwrap();
        assert!((p - q).abs() < 1e-6);
        assert!(jsi_purity(&jsi_of(&separable(32))).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn overlap_basic_cases() {
        let a = jsi_of(&delayed(64));
        assert!((jsi_overlap(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let n = 16;
        let mut x = DMatrix::zeros(n, n);
        let mut y = DMatrix::zeros(n, n);
        x[(1, 1)] = Complex64::new(1.0, 0.0);
        y[(5, 5)] = Complex64::new(1.0, 0.0);
        let jx = jsi_of(&JointSpectralAmplitude::from_values(grid(n), x).unwrap());
        let jy = jsi_of(&JointSpectralAmplitude::from_values(grid(n), y).unwrap());
        assert_eq!(jsi_overlap(&jx, &jy).unwrap(), 0.0);
        let other = jsi_of(&delayed(32));
        assert!(jsi_overlap(&a, &other).is_err());
    }

    #[test]
    fn overlap_of_shifted_sources_matches_inner_product() {
        let n = 96;
        let pump_for = |signal_nm: f64| {
            let t = CalibrationTargets {
                signal_nm,
                pump_nm: crate::units::energy_conserving_pump_nm(signal_nm, 1516.0),
                ..Default::default()
            };
            let m = calibrate(&t).unwrap();
            let p = PumpPulse { lambda0_nm: t.pump_nm, ..Default::default() };
            compute_jsa(&m, &p, &DelayedSplit::default(), &SourceGeometry::default(), &grid(n)).unwrap()
        };
        let a = pump_for(1588.0);
        let b = pump_for(1588.5);
        let got = jsi_overlap(&jsi_of(&a), &jsi_of(&b)).unwrap();
        // |⟨|F1|, |F2|⟩|² from the unit-norm amplitudes, summed cell by cell.
        let mut ip = 0.0;
        for i in 0..n {
            for j in 0..n {
                ip += a.values[(i, j)].norm() * b.values[(i, j)].norm();
            }
        }
        ip *= a.grid.cell_area();
        assert!((got - ip * ip).abs() < 1e-9, "{got} vs {}", ip * ip);
        assert!(got < 0.999 && got > 0.5);
        assert_eq!(got, jsi_overlap(&jsi_of(&b), &jsi_of(&a)).unwrap());
    }

    #[test]
    fn heralded_purities_match_schmidt() {
        let j = delayed(64);
        let p = schmidt_decompose(&j).unwrap().purity;
        let s = heralded_rho(&j, Side::Signal);
        let i = heralded_rho(&j, Side::Idler);
        assert!((s.rho.trace().re - 1.0).abs() < 1e-9);
        assert!((s.purity() - p).abs() < 1e-9);
        assert!((i.purity() - p).abs() < 1e-9);
        assert!(s.purity() >= 0.99);
        assert!((s.overlap(&s).unwrap() - s.purity()).abs() < 1e-15);
        assert!(s.overlap(&i).is_err());
        let herm = max_diff(&s.rho, &s.rho.adjoint());
        assert!(herm < 1e-12);
    }

    #[test]
    fn filter_behaviour() {
        let j = delayed(96);
        let g = j.grid;
        let (_, full) = apply_filter(&j, g.signal_range_nm, g.idler_range_nm).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
        let (f12, wide) = apply_filter(&j, band(1588.0, 12.0), band(1516.0, 12.0)).unwrap();
        assert!(wide > 0.99);
        assert!((f12.norm() - 1.0).abs() < 1e-9);
        let (_, narrow) = apply_filter(&j, band(1588.0, 2.0), band(1516.0, 2.0)).unwrap();
        assert!(narrow < wide);
        let mut last = 0.0;
        for w in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let (_, fr) = apply_filter(&j, band(1588.0, w), band(1516.0, w)).unwrap();
            assert!(fr >= last);
            last = fr;
        }
        let (twice, again) = apply_filter(&f12, band(1588.0, 12.0), band(1516.0, 12.0)).unwrap();
        assert!((again - 1.0).abs() < 1e-12);
        let scale = f12.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_diff(&twice.values, &f12.values) < 1e-12 * scale);
        assert!(apply_filter(&j, [1570.0, 1590.0], band(1516.0, 12.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn schmidt_is_invariant_under_local_phases(
            seed in prop::collection::vec(-1.0f64..1.0, 24 * 20 * 2),
            phi in prop::collection::vec(0.0f64..6.3, 24),
            psi in prop::collection::vec(0.0f64..6.3, 20),
        ) {
            let g = FrequencyGrid { n_signal: 24, n_idler: 20, ..FrequencyGrid::default() };
            let v = DMatrix::from_fn(24, 20, |a, b| Complex64::new(seed[2 * (a * 20 + b)], seed[2 * (a * 20 + b) + 1]));
            let j = JointSpectralAmplitude::from_values(g, v.clone()).unwrap();
            let u = DMatrix::from_fn(24, 20, |a, b| v[(a, b)] * Complex64::from_polar(1.0, phi[a] + psi[b]));
            let k = JointSpectralAmplitude::from_values(g, u).unwrap();
            let x = schmidt_decompose(&j).unwrap();
            let y = schmidt_decompose(&k).unwrap();
            for (p, q) in x.coefficients.iter().zip(&y.coefficients) {
                prop_assert!((p - q).abs() < 1e-9);
            }
            prop_assert!((x.purity - y.purity).abs() < 1e-9);
            prop_assert!(x.purity > 0.0 && x.purity <= 1.0 + 1e-12);
        }
    }
}
