//! Truncated multi-mode Fock space: pure states, Kraus-branch ensembles and
//! exact two-mode linear optics.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_MODES: usize = 6;
pub const MAX_CUTOFF: usize = 40;
/// Largest basis dimension the dense oracle will build.
pub const MAX_DIM: usize = 10_000;

/// All occupation tuples of `n_modes` modes with total photon number ≤ `cutoff`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    pub n_modes: usize,
    pub cutoff: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockBasis {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Arc<Self>> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::InvalidParameter(format!(
                "Fock oracle supports 1..={MAX_MODES} modes, got {n_modes}"
            )));
        }
        if cutoff > MAX_CUTOFF {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoff is limited to {MAX_CUTOFF} photons, got {cutoff}"
            )));
        }
        let dim = binomial(n_modes + cutoff, n_modes);
        if dim > MAX_DIM as f64 {
            return Err(Error::InvalidParameter(format!(
                "Fock basis with {n_modes} modes and cutoff {cutoff} has {dim} states (limit {MAX_DIM})"
            )));
        }
        let mut states = Vec::new();
        let mut cur = vec![0u8; n_modes];
        fn fill(mode: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if mode == cur.len() {
                out.push(cur.clone());
                return;
            }
            for n in 0..=left {
                cur[mode] = n as u8;
                fill(mode + 1, left - n, cur, out);
            }
            cur[mode] = 0;
        }
        fill(0, cutoff, &mut cur, &mut states);
        let index = states.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
        Ok(Arc::new(Self {
            n_modes,
            cutoff,
            states,
            index,
        }))
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, k: usize) -> &[u8] {
        &self.states[k]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u8]> {
        self.states.iter().map(|s| s.as_slice())
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        0.0
    } else {
        factorial(n) / (factorial(k) * factorial(n - k))
    }
}

/// ⟨k, N−k|U|n, N−n⟩ for the two-mode unitary `u` acting on creation operators
/// as a_j† → Σ_k u[k][j] a_k†. Indexed `[k][n]`.
fn two_mode_block(u: [[Complex64; 2]; 2], total: usize) -> Vec<Vec<Complex64>> {
    let mut out = vec![vec![Complex64::new(0.0, 0.0); total + 1]; total + 1];
    for n in 0..=total {
        let m = total - n;
        let pref_in = (factorial(n) * factorial(m)).sqrt();
        for (k, row) in out.iter_mut().enumerate() {
            let pref = (factorial(k) * factorial(total - k)).sqrt() / pref_in;
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..=n.min(k) {
                let q = k - p;
                if q > m {
                    continue;
                }
                acc += binomial(n, p)
                    * binomial(m, q)
                    * u[0][0].powu(p as u32)
                    * u[1][0].powu((n - p) as u32)
                    * u[0][1].powu(q as u32)
                    * u[1][1].powu((m - q) as u32);
            }
            row[n] = acc * pref;
        }
    }
    out
}

/// [[√T, −e^{−iφ}√R], [e^{iφ}√R, √T]].
pub fn beamsplitter_matrix(transmissivity: f64, phase: f64) -> [[Complex64; 2]; 2] {
    let t = Complex64::new(transmissivity.sqrt(), 0.0);
    let r = (1.0 - transmissivity).sqrt();
    [
        [t, -Complex64::from_polar(r, -phase)],
        [Complex64::from_polar(r, phase), t],
    ]
}

/// Normalized pure state on a truncated basis.
#[derive(Debug, Clone)]
pub struct FockState {
    pub basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
    /// Probability discarded when the state was truncated to the basis.
    pub truncation_weight: f64,
}

impl FockState {
    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            basis,
            amplitudes,
            truncation_weight: 0.0,
        }
    }

    /// Superposition of occupation tuples, normalized.
    pub fn from_terms(basis: Arc<FockBasis>, terms: &[(Vec<u8>, Complex64)]) -> Result<Self> {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        for (occ, a) in terms {
            if occ.len() != basis.n_modes {
                return Err(Error::InvalidParameter(format!(
                    "occupation {occ:?} does not have {} modes",
                    basis.n_modes
                )));
            }
            let k = basis.index_of(occ).ok_or_else(|| Error::Cutoff {
                cutoff: basis.cutoff,
                weight: a.norm_sqr(),
                suggested: occ.iter().map(|&n| n as usize).sum(),
            })?;
            amplitudes[k] += a;
        }
        let mut s = Self {
            basis,
            amplitudes,
            truncation_weight: 0.0,
        };
        s.normalize()?;
        Ok(s)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numeric("cannot normalize a zero Fock state".into()));
        }
        let s = n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a /= s);
        Ok(())
    }

    pub fn amplitude(&self, occ: &[u8]) -> Complex64 {
        self.basis
            .index_of(occ)
            .map_or(Complex64::new(0.0, 0.0), |k| self.amplitudes[k])
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.basis.n_modes {
            return Err(Error::InvalidParameter(format!(
                "mode {mode} out of range for {} modes",
                self.basis.n_modes
            )));
        }
        Ok(())
    }

    /// Applies an arbitrary two-mode unitary on modes (i, j).
    pub fn two_mode(&self, i: usize, j: usize, u: [[Complex64; 2]; 2]) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::InvalidParameter("beamsplitter needs two distinct modes".into()));
        }
        let blocks: Vec<_> = (0..=self.basis.cutoff).map(|n| two_mode_block(u, n)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.basis.dim()];
        let mut occ = vec![0u8; self.basis.n_modes];
        for (k, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            occ.copy_from_slice(self.basis.state(k));
            let (n, m) = (occ[i] as usize, occ[j] as usize);
            let total = n + m;
            for (kk, row) in blocks[total].iter().enumerate() {
                let c = row[n];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                occ[i] = kk as u8;
                occ[j] = (total - kk) as u8;
                // Photon number in the pair is conserved, so the target is in the basis.
                let idx = self.basis.index_of(&occ).expect("photon number conserved");
                out[idx] += c * a;
            }
        }
        Ok(Self {
            basis: self.basis.clone(),
            amplitudes: out,
            truncation_weight: self.truncation_weight,
        })
    }

    pub fn beamsplitter(&self, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::InvalidParameter(format!(
                "transmissivity must lie in [0, 1], got {transmissivity}"
            )));
        }
        self.two_mode(i, j, beamsplitter_matrix(transmissivity, phase))
    }

    /// Multiplies each component by e^{i n φ}, n the occupation of `mode`.
    pub fn phase_shift(&self, mode: usize, phase: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a * Complex64::from_polar(1.0, phase * self.basis.state(k)[mode] as f64))
            .collect();
        Ok(Self {
            basis: self.basis.clone(),
            amplitudes,
            truncation_weight: self.truncation_weight,
        })
    }

    /// |amplitude|² per basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn mean_number(&self, mode: usize) -> f64 {
        mean_number(&self.basis, &self.probabilities(), mode)
    }

    pub fn into_ensemble(self) -> FockEnsemble {
        FockEnsemble {
            basis: self.basis.clone(),
            members: vec![(1.0, self)],
        }
    }
}

fn mean_number(basis: &FockBasis, probs: &[f64], mode: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| p * basis.state(k)[mode] as f64)
        .sum()
}

/// Mixed state as a weighted list of normalized pure states.
#[derive(Debug, Clone)]
pub struct FockEnsemble {
    pub basis: Arc<FockBasis>,
    pub members: Vec<(f64, FockState)>,
}

impl FockEnsemble {
    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|(w, _)| w).sum()
    }

    fn map<F: Fn(&FockState) -> Result<FockState>>(&self, f: F) -> Result<Self> {
        Ok(Self {
            basis: self.basis.clone(),
            members: self
                .members
                .iter()
                .map(|(w, s)| f(s).map(|t| (*w, t)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn beamsplitter(&self, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<Self> {
        self.map(|s| s.beamsplitter(i, j, transmissivity, phase))
    }

    pub fn phase_shift(&self, mode: usize, phase: f64) -> Result<Self> {
        self.map(|s| s.phase_shift(mode, phase))
    }

    /// Pure loss of transmission `eta` on `mode`, expanded into Kraus
    /// branches K_l|n⟩ = √(C(n,l) η^{n−l} (1−η)^l) |n−l⟩, l photons lost.
    pub fn attenuate(&self, mode: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!("transmission must lie in [0, 1], got {eta}")));
        }
        let basis = &self.basis;
        let mut members = Vec::new();
        for (w, s) in &self.members {
            s.check_mode(mode)?;
            for lost in 0..=basis.cutoff {
                let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
                let mut occ = vec![0u8; basis.n_modes];
                for (k, a) in s.amplitudes.iter().enumerate() {
                    let n = basis.state(k)[mode] as usize;
                    if n < lost {
                        continue;
                    }
                    let kraus = (binomial(n, lost)
                        * eta.powi((n - lost) as i32)
                        * (1.0 - eta).powi(lost as i32))
                    .sqrt();
                    if kraus == 0.0 {
                        continue;
                    }
                    occ.copy_from_slice(basis.state(k));
                    occ[mode] = (n - lost) as u8;
                    amps[basis.index_of(&occ).expect("fewer photons")] += a * kraus;
                }
                let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                if p > 0.0 {
                    let sp = p.sqrt();
                    amps.iter_mut().for_each(|a| *a /= sp);
                    members.push((
                        w * p,
                        FockState {
                            basis: basis.clone(),
                            amplitudes: amps,
                            truncation_weight: s.truncation_weight,
                        },
                    ));
                }
            }
        }
        Ok(Self {
            basis: basis.clone(),
            members,
        })
    }

    /// Partial trace over `traced` modes: one member per occupation of the
    /// traced modes, ⟨e|ψ⟩ renormalized.
    pub fn trace_out(&self, traced: &[usize]) -> Result<Self> {
        let n = self.basis.n_modes;
        if traced.iter().any(|&m| m >= n) || traced.len() >= n {
            return Err(Error::InvalidParameter(format!("cannot trace out {traced:?} of {n} modes")));
        }
        let kept: Vec<usize> = (0..n).filter(|m| !traced.contains(m)).collect();
        let basis = FockBasis::new(kept.len(), self.basis.cutoff)?;
        let mut members = Vec::new();
        for (w, s) in &self.members {
            let mut groups: Vec<(Vec<u8>, Vec<Complex64>)> = Vec::new();
            let mut lookup: HashMap<Vec<u8>, usize> = HashMap::new();
            for (k, a) in s.amplitudes.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let occ = s.basis.state(k);
                let env: Vec<u8> = traced.iter().map(|&m| occ[m]).collect();
                let sys: Vec<u8> = kept.iter().map(|&m| occ[m]).collect();
                let g = *lookup.entry(env.clone()).or_insert_with(|| {
                    groups.push((env, vec![Complex64::new(0.0, 0.0); basis.dim()]));
                    groups.len() - 1
                });
                groups[g].1[basis.index_of(&sys).expect("subset of basis")] += a;
            }
            for (_, mut amps) in groups {
                let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                if p > 0.0 {
                    let sp = p.sqrt();
                    amps.iter_mut().for_each(|a| *a /= sp);
                    members.push((
                        w * p,
                        FockState {
                            basis: basis.clone(),
                            amplitudes: amps,
                            truncation_weight: s.truncation_weight,
                        },
                    ));
                }
            }
        }
        Ok(Self { basis, members })
    }

    /// Appends `extra` vacuum modes after the existing ones.
    pub fn with_vacuum_modes(&self, extra: usize) -> Result<Self> {
        let basis = FockBasis::new(self.basis.n_modes + extra, self.basis.cutoff)?;
        let mut members = Vec::with_capacity(self.members.len());
        for (w, s) in &self.members {
            let mut amps = vec![Complex64::new(0.0, 0.0); basis.dim()];
            let mut occ = vec![0u8; basis.n_modes];
            for (k, a) in s.amplitudes.iter().enumerate() {
                occ[..self.basis.n_modes].copy_from_slice(s.basis.state(k));
                amps[basis.index_of(&occ).expect("same total")] = *a;
            }
            members.push((
                *w,
                FockState {
                    basis: basis.clone(),
                    amplitudes: amps,
                    truncation_weight: s.truncation_weight,
                },
            ));
        }
        Ok(Self { basis, members })
    }

    /// Occupation probabilities per basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.basis.dim()];
        for (w, s) in &self.members {
            for (k, a) in s.amplitudes.iter().enumerate() {
                p[k] += w * a.norm_sqr();
            }
        }
        p
    }

    pub fn mean_number(&self, mode: usize) -> f64 {
        mean_number(&self.basis, &self.probabilities(), mode)
    }
}

/// Anything with occupation-number statistics on a Fock basis.
pub trait OccupationStatistics {
    fn basis(&self) -> &FockBasis;
    fn occupation_probabilities(&self) -> Vec<f64>;
}

impl OccupationStatistics for FockState {
    fn basis(&self) -> &FockBasis {
        &self.basis
    }
    fn occupation_probabilities(&self) -> Vec<f64> {
        self.probabilities()
    }
}

impl OccupationStatistics for FockEnsemble {
    fn basis(&self) -> &FockBasis {
        &self.basis
    }
    fn occupation_probabilities(&self) -> Vec<f64> {
        self.probabilities()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn basis_size() {
        // C(n + cutoff, n)
        assert_eq!(FockBasis::new(4, 6).unwrap().dim(), 210);
        assert_eq!(FockBasis::new(6, 8).unwrap().dim(), 3003);
        assert!(FockBasis::new(7, 2).is_err());
        assert!(FockBasis::new(6, 12).is_err());
    }

    #[test]
    fn identity_beamsplitter() {
        let b = FockBasis::new(2, 4).unwrap();
        let s = FockState::from_terms(b, &[(vec![1, 2], c(0.6)), (vec![3, 0], Complex64::new(0.0, 0.8))]).unwrap();
        let t = s.beamsplitter(0, 1, 1.0, 0.3).unwrap();
        for (x, y) in s.amplitudes.iter().zip(&t.amplitudes) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let b = FockBasis::new(2, 2).unwrap();
        let s = FockState::from_terms(b, &[(vec![1, 1], c(1.0))]).unwrap();
        let out = s.beamsplitter(0, 1, 0.5, 0.0).unwrap();
        assert!(out.amplitude(&[1, 1]).norm() < 1e-15);
        assert!((out.amplitude(&[2, 0]).norm_sqr() - 0.5).abs() < 1e-12);
    }

    /// Permanent of the 2×2 submatrix gives the |1,1⟩→|1,1⟩ amplitude.
    #[test]
    fn coincidence_matches_permanent() {
        let b = FockBasis::new(2, 2).unwrap();
        let s = FockState::from_terms(b, &[(vec![1, 1], c(1.0))]).unwrap();
        for theta in [0.0, 0.3, 1.0, std::f64::consts::FRAC_PI_2, 2.5] {
            let t = (theta / 2.0f64).cos().powi(2);
            let phase = 0.7;
            let u = beamsplitter_matrix(t, phase);
            let perm = u[0][0] * u[1][1] + u[0][1] * u[1][0];
            let out = s.beamsplitter(0, 1, t, phase).unwrap();
            assert!((out.amplitude(&[1, 1]) - perm).norm() < 1e-12);
            let p = out.amplitude(&[1, 1]).norm_sqr();
            assert!((p - (2.0 * t - 1.0).powi(2)).abs() < 1e-12);
            assert!((p - theta.cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_kraus_branches() {
        let b = FockBasis::new(1, 3).unwrap();
        let s = FockState::from_terms(b, &[(vec![1], c(1.0))]).unwrap().into_ensemble();
        let l = s.attenuate(0, 0.8).unwrap();
        assert!((l.mean_number(0) - 0.8).abs() < 1e-12);
        assert!((l.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_out_of_two_mode_state() {
        let b = FockBasis::new(2, 2).unwrap();
        let s = FockState::from_terms(b, &[(vec![0, 0], c(0.8)), (vec![1, 1], c(0.6))]).unwrap();
        let r = s.into_ensemble().trace_out(&[1]).unwrap();
        let p = r.probabilities();
        assert!((p[r.basis.index_of(&[0]).unwrap()] - 0.64).abs() < 1e-12);
        assert!((p[r.basis.index_of(&[1]).unwrap()] - 0.36).abs() < 1e-12);
    }

    fn random_state(seed: &[f64], n_modes: usize, cutoff: usize) -> FockState {
        let b = FockBasis::new(n_modes, cutoff).unwrap();
        let terms: Vec<_> = b
            .states()
            .enumerate()
            .map(|(k, occ)| (occ.to_vec(), Complex64::new(seed[(2 * k) % seed.len()], seed[(2 * k + 1) % seed.len()])))
            .collect();
        FockState::from_terms(b, &terms).unwrap()
    }

    fn photon_number_distribution(s: &FockState) -> Vec<f64> {
        let mut d = vec![0.0; s.basis.cutoff + 1];
        for (k, p) in s.probabilities().iter().enumerate() {
            d[s.basis.state(k).iter().map(|&n| n as usize).sum::<usize>()] += p;
        }
        d
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn linear_optics_preserve_norm_and_number(
            seed in prop::collection::vec(-1.0f64..1.0, 16..64),
            t in 0.0f64..1.0,
            phase in -7.0f64..7.0,
            i in 0usize..4,
            j in 0usize..4,
        ) {
            prop_assume!(i != j);
            let s = random_state(&seed, 4, 4);
            let out = s.beamsplitter(i, j, t, phase).unwrap().phase_shift(j, phase).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
            let a = photon_number_distribution(&s);
            let b = photon_number_distribution(&out);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
