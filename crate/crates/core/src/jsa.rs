//! Joint spectral amplitude of inter-modal SFWM driven by a delayed dual-mode
//! pump, and the delay sweep.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{delta_beta_unchecked, DispersionModel, ModeId};
use crate::error::{Error, Result};
use crate::pump::{DelayedSplit, PumpPulse, PumpShape};
use crate::quad::{linspace, simpson_weights};
use crate::units::{nm_to_omega, omega_to_nm};

/// Signal × idler grid, uniform in angular frequency. Index 0 is the lowest
/// frequency (longest wavelength) on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyGrid {
    pub signal_range_nm: [f64; 2],
    pub idler_range_nm: [f64; 2],
    pub n_signal: usize,
    pub n_idler: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            signal_range_nm: [1576.0, 1600.0],
            idler_range_nm: [1504.0, 1528.0],
            n_signal: 512,
            n_idler: 512,
        }
    }
}

impl FrequencyGrid {
    pub fn with_size(self, n: usize) -> Self {
        Self {
            n_signal: n,
            n_idler: n,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("signal", self.signal_range_nm), ("idler", self.idler_range_nm)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[1] > r[0]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} range must be increasing and positive, got {r:?}"
                )));
            }
        }
        if self.n_signal < 16 || self.n_idler < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 16 points per axis, got {}x{}",
                self.n_signal, self.n_idler
            )));
        }
        Ok(())
    }

    fn axis(range: [f64; 2], n: usize) -> Vec<f64> {
        linspace(nm_to_omega(range[1]), nm_to_omega(range[0]), n)
    }

    pub fn signal_omegas(&self) -> Vec<f64> {
        Self::axis(self.signal_range_nm, self.n_signal)
    }

    pub fn idler_omegas(&self) -> Vec<f64> {
        Self::axis(self.idler_range_nm, self.n_idler)
    }

    pub fn signal_nm(&self) -> Vec<f64> {
        self.signal_omegas().into_iter().map(omega_to_nm).collect()
    }

    pub fn idler_nm(&self) -> Vec<f64> {
        self.idler_omegas().into_iter().map(omega_to_nm).collect()
    }

    pub fn d_omega_signal(&self) -> f64 {
        let [a, b] = self.signal_range_nm;
        (nm_to_omega(a) - nm_to_omega(b)) / (self.n_signal - 1) as f64
    }

    pub fn d_omega_idler(&self) -> f64 {
        let [a, b] = self.idler_range_nm;
        (nm_to_omega(a) - nm_to_omega(b)) / (self.n_idler - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.d_omega_signal() * self.d_omega_idler()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceGeometry {
    /// m
    pub length: f64,
    pub linear_loss_db_per_cm: f64,
}

impl Default for SourceGeometry {
    fn default() -> Self {
        Self {
            length: 0.011,
            linear_loss_db_per_cm: 0.5,
        }
    }
}

impl SourceGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidParameter(format!("length must be positive, got {}", self.length)));
        }
        if !(self.linear_loss_db_per_cm.is_finite() && self.linear_loss_db_per_cm >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "linear loss must be >= 0 dB/cm, got {}",
                self.linear_loss_db_per_cm
            )));
        }
        Ok(())
    }

    /// Loss coefficient in dB/m.
    pub fn alpha_db_per_m(&self) -> f64 {
        self.linear_loss_db_per_cm * 100.0
    }
}

/// Normalized JSA, `values[(signal, idler)]`, with Σ|F|²ΔωsΔωi = 1.
#[derive(Debug, Clone)]
pub struct JointSpectralAmplitude {
    pub grid: FrequencyGrid,
    pub values: DMatrix<Complex64>,
    /// √(Σ|F_raw|²ΔωsΔωi) of the un-normalized amplitude.
    pub norm_constant: f64,
    /// Largest boundary intensity relative to the peak.
    pub edge_ratio: f64,
    /// On-chip pump peak power the amplitude was generated with, W.
    pub pump_peak_power: f64,
}

impl JointSpectralAmplitude {
    /// Wraps an arbitrary matrix, normalizing it on `grid`.
    pub fn from_values(grid: FrequencyGrid, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != grid.n_signal || values.ncols() != grid.n_idler {
            return Err(Error::GridMismatch(format!(
                "matrix is {}x{}, grid is {}x{}",
                values.nrows(),
                values.ncols(),
                grid.n_signal,
                grid.n_idler
            )));
        }
        let mut jsa = Self {
            grid,
            values,
            norm_constant: 1.0,
            edge_ratio: 0.0,
            pump_peak_power: 1.0,
        };
        jsa.normalize()?;
        jsa.edge_ratio = edge_ratio(&jsa.values);
        Ok(jsa)
    }

    fn normalize(&mut self) -> Result<()> {
        let z = self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area();
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::Numeric(format!("JSA has zero or non-finite norm ({z})")));
        }
        let s = z.sqrt();
        self.values.iter_mut().for_each(|v| *v /= s);
        self.norm_constant *= s;
        Ok(())
    }

    /// Σ|F|²ΔωsΔωi.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// Grid indices of the intensity maximum.
    pub fn peak_index(&self) -> (usize, usize) {
        let mut best = (0, 0, -1.0);
        for j in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                let v = self.values[(i, j)].norm_sqr();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        (best.0, best.1)
    }

    /// (signal, idler) wavelengths of the intensity maximum, nm.
    pub fn peak_nm(&self) -> (f64, f64) {
        let (i, j) = self.peak_index();
        (
            omega_to_nm(self.grid.signal_omegas()[i]),
            omega_to_nm(self.grid.idler_omegas()[j]),
        )
    }
}

fn edge_ratio(values: &DMatrix<Complex64>) -> f64 {
    let (n, m) = values.shape();
    let peak = values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mut edge: f64 = 0.0;
    for i in 0..n {
        edge = edge.max(values[(i, 0)].norm_sqr()).max(values[(i, m - 1)].norm_sqr());
    }
    for j in 0..m {
        edge = edge.max(values[(0, j)].norm_sqr()).max(values[(n - 1, j)].norm_sqr());
    }
    if peak > 0.0 {
        edge / peak
    } else {
        0.0
    }
}

/// How a JSA whose support reaches the grid boundary is treated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoveragePolicy {
    pub warn_above: f64,
    /// `inf` disables the error.
    pub error_above: f64,
}

impl Default for CoveragePolicy {
    fn default() -> Self {
        Self {
            warn_above: 1e-4,
            error_above: 1e-2,
        }
    }
}

impl CoveragePolicy {
    /// Warn only; used where truncated spectra are expected, e.g. delay sweeps.
    pub fn lenient() -> Self {
        Self {
            error_above: f64::INFINITY,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JsaOptions {
    /// Simpson nodes over the pump frequency (odd).
    pub quad_nodes: usize,
    pub coverage: CoveragePolicy,
}

impl Default for JsaOptions {
    fn default() -> Self {
        Self {
            quad_nodes: 241,
            coverage: CoveragePolicy::default(),
        }
    }
}

/// Δβ = β(TM0, ωp0) + β(TM1, ωp1) − β(TM1, ωs) − β(TM0, ωi), rad/m.
pub fn phase_mismatch(
    model: &DispersionModel,
    omega_p0: f64,
    omega_p1: f64,
    omega_s: f64,
    omega_i: f64,
) -> Result<f64> {
    for (q, w) in [
        ("omega_p0", omega_p0),
        ("omega_p1", omega_p1),
        ("omega_s", omega_s),
        ("omega_i", omega_i),
    ] {
        model.check_omega(q, w)?;
    }
    Ok(delta_beta_unchecked(model, omega_p0, omega_p1, omega_s, omega_i))
}

/// L·sinc(x)·e^{ix} with x = ΔβL/2.
#[inline]
fn pm_kernel(delta_beta: f64, length: f64) -> Complex64 {
    let x = 0.5 * delta_beta * length;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        return Complex64::new(length * (1.0 - 2.0 * x2 / 3.0), length * x * (1.0 - x2 / 3.0));
    }
    let (s, c) = x.sin_cos();
    let f = length / x;
    Complex64::new(f * s * c, f * s * s)
}

/// Cubic β(ω) − β0 as a function of Δω.
#[derive(Clone, Copy)]
struct Poly([f64; 3]);

impl Poly {
    fn of(model: &DispersionModel, mode: ModeId) -> Self {
        let [_, b1, b2, b3] = model.coefficients(mode);
        Poly([b1, b2 / 2.0, b3 / 6.0])
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        d * (self.0[0] + d * (self.0[1] + d * self.0[2]))
    }
}

pub fn compute_jsa(
    model: &DispersionModel,
    pump: &PumpPulse,
    split: &DelayedSplit,
    geom: &SourceGeometry,
    grid: &FrequencyGrid,
) -> Result<JointSpectralAmplitude> {
    compute_jsa_with(model, pump, split, geom, grid, &JsaOptions::default())
}

/// F(ωs, ωi) = ∫dω E₀(ω)e^{i(ω−ω₀)τ} E₁(ωs+ωi−ω) L sinc(ΔβL/2) e^{iΔβL/2},
/// Simpson quadrature over ω = (ωs+ωi)/2 + u, then normalized.
pub fn compute_jsa_with(
    model: &DispersionModel,
    pump: &PumpPulse,
    split: &DelayedSplit,
    geom: &SourceGeometry,
    grid: &FrequencyGrid,
    opts: &JsaOptions,
) -> Result<JointSpectralAmplitude> {
    model.validate()?;
    pump.validate()?;
    split.validate()?;
    geom.validate()?;
    grid.validate()?;
    if opts.quad_nodes < 201 || opts.quad_nodes % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs an odd node count >= 201, got {}",
            opts.quad_nodes
        )));
    }

    let ws = grid.signal_omegas();
    let wi = grid.idler_omegas();
    let h = pump.support_half_width();
    let (s_lo, s_hi) = (ws[0] + wi[0], ws[ws.len() - 1] + wi[wi.len() - 1]);
    for (q, w) in [
        ("signal frequency", ws[0]),
        ("signal frequency", ws[ws.len() - 1]),
        ("idler frequency", wi[0]),
        ("idler frequency", wi[wi.len() - 1]),
        ("pump frequency", 0.5 * s_lo - h),
        ("pump frequency", 0.5 * s_hi + h),
    ] {
        model.check_omega(q, w)?;
    }

    let nq = opts.quad_nodes;
    let u = linspace(-h, h, nq);
    let w = simpson_weights(nq, 2.0 * h / (nq - 1) as f64);
    let tau = split.tau;
    let arms = split.arm_amplitude(ModeId::TM0) * split.arm_amplitude(ModeId::TM1);
    let gaussian = pump.shape == PumpShape::Gaussian && pump.prefilter_nm.is_none();
    let sigma = pump.intensity_sigma();
    let envelope = pump.envelope_fn();
    let e0 = envelope(0.0);
    // Per-node weight, delay phase and (for the separable Gaussian case) the
    // u-dependent envelope factor.
    let node: Vec<Complex64> = u
        .iter()
        .zip(&w)
        .map(|(&uq, &wq)| {
            let env = if gaussian {
                e0 * e0 * (-uq * uq / (2.0 * sigma * sigma)).exp()
            } else {
                1.0
            };
            Complex64::from_polar(arms * wq * env, uq * tau)
        })
        .collect();

    let p0 = Poly::of(model, ModeId::TM0);
    let p1 = Poly::of(model, ModeId::TM1);
    let wref = model.omega_ref;
    let w0 = pump.omega0();
    let length = geom.length;
    let idler_terms: Vec<f64> = wi.iter().map(|&x| p0.eval(x - wref)).collect();

    let rows: Vec<Vec<Complex64>> = ws
        .par_iter()
        .map(|&s| {
            let signal_term = p1.eval(s - wref);
            wi.iter()
                .zip(&idler_terms)
                .map(|(&i, &idler_term)| {
                    let half = 0.5 * (s + i);
                    let c = half - wref;
                    let cp = half - w0;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (q, &uq) in u.iter().enumerate() {
                        let db = p0.eval(c + uq) + p1.eval(c - uq) - signal_term - idler_term;
                        let env = if gaussian {
                            1.0
                        } else {
                            envelope(cp + uq) * envelope(cp - uq)
                        };
                        acc += node[q] * (env * pm_kernel(db, length));
                    }
                    let common = if gaussian {
                        (-cp * cp / (2.0 * sigma * sigma)).exp()
                    } else {
                        1.0
                    };
                    acc * Complex64::from_polar(common, cp * tau)
                })
                .collect()
        })
        .collect();

    let values = DMatrix::from_fn(grid.n_signal, grid.n_idler, |a, b| rows[a][b]);
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numeric("non-finite JSA entry".into()));
    }
    let mut jsa = JointSpectralAmplitude {
        grid: *grid,
        values,
        norm_constant: 1.0,
        edge_ratio: 0.0,
        pump_peak_power: pump.peak_power(),
    };
    jsa.normalize()?;
    jsa.edge_ratio = edge_ratio(&jsa.values);
    let ratio = jsa.edge_ratio;
    if ratio > opts.coverage.error_above {
        return Err(Error::GridCoverage {
            edge_ratio: ratio,
            limit: opts.coverage.error_above,
        });
    }
    if ratio > opts.coverage.warn_above {
        log::warn!(
            "JSA reaches the grid boundary: edge intensity {ratio:.3e} of peak (tau = {:.3} ps)",
            tau * 1e12
        );
    }
    Ok(jsa)
}

/// Relative pair-generation weight: norm_constant² × peak power².
pub fn brightness(jsa: &JointSpectralAmplitude) -> f64 {
    jsa.norm_constant * jsa.norm_constant * jsa.pump_peak_power * jsa.pump_peak_power
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayPoint {
    /// s
    pub tau: f64,
    pub purity: f64,
    pub brightness: f64,
    pub edge_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySweep {
    pub points: Vec<DelayPoint>,
    pub argmax_purity: usize,
    pub argmax_brightness: usize,
}

impl DelaySweep {
    pub fn tau_at_max_purity(&self) -> f64 {
        self.points[self.argmax_purity].tau
    }

    pub fn tau_at_max_brightness(&self) -> f64 {
        self.points[self.argmax_brightness].tau
    }

    pub fn step(&self) -> f64 {
        if self.points.len() > 1 {
            self.points[1].tau - self.points[0].tau
        } else {
            0.0
        }
    }
}

/// Evaluates purity and brightness on `n_steps` delays spanning `tau_range`.
/// The split ratio is taken from `split`; its delay is overridden.
#[allow(clippy::too_many_arguments)]
pub fn sweep_delay(
    model: &DispersionModel,
    pump: &PumpPulse,
    split: &DelayedSplit,
    geom: &SourceGeometry,
    grid: &FrequencyGrid,
    tau_range: [f64; 2],
    n_steps: usize,
    opts: &JsaOptions,
) -> Result<DelaySweep> {
    let max_tau = 10.0 * model.walk_off()? * geom.length;
    if !(tau_range[0] >= 0.0 && tau_range[1] > tau_range[0] && tau_range[1] <= max_tau) {
        return Err(Error::InvalidParameter(format!(
            "delay range {tau_range:?} must be increasing within [0, {max_tau:e}] s"
        )));
    }
    if n_steps < 8 {
        return Err(Error::InvalidParameter(format!("sweep needs at least 8 steps, got {n_steps}")));
    }
    let mut points = Vec::with_capacity(n_steps);
    for tau in linspace(tau_range[0], tau_range[1], n_steps) {
        let s = DelayedSplit { tau, ..*split };
        let jsa = compute_jsa_with(model, pump, &s, geom, grid, opts)?;
        let purity = crate::spectral::schmidt_decompose(&jsa)?.purity;
        points.push(DelayPoint {
            tau,
            purity,
            brightness: brightness(&jsa),
            edge_ratio: jsa.edge_ratio,
        });
    }
    let argmax = |f: fn(&DelayPoint) -> f64| {
        points
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, p)| if f(p) > best.1 { (k, f(p)) } else { best })
            .0
    };
    let argmax_purity = argmax(|p| p.purity);
    let argmax_brightness = argmax(|p| p.brightness);
    Ok(DelaySweep {
        points,
        argmax_purity,
        argmax_brightness,
    })
}
