//! Detector models and exact click statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fock::OccupationStatistics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    #[default]
    Threshold,
    NumberResolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    #[serde(default)]
    pub kind: DetectorKind,
    /// Probability of a dark count per gate.
    #[serde(default)]
    pub dark_count_prob: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::threshold(0.8)
    }
}

impl DetectorModel {
    pub fn threshold(efficiency: f64) -> Self {
        Self {
            efficiency,
            kind: DetectorKind::Threshold,
            dark_count_prob: 0.0,
        }
    }

    pub fn number_resolving(efficiency: f64) -> Self {
        Self {
            efficiency,
            kind: DetectorKind::NumberResolving,
            dark_count_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter(format!(
                "detector efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        if !(0.0..1.0).contains(&self.dark_count_prob) {
            return Err(Error::InvalidParameter(format!(
                "dark-count probability must lie in [0, 1), got {}",
                self.dark_count_prob
            )));
        }
        Ok(())
    }

    /// Outcome distribution for `n` incident photons: index = reported count
    /// (threshold: 0 = no click, 1 = click).
    pub fn outcome_distribution(&self, n: usize) -> Vec<f64> {
        let eta = self.efficiency;
        // Binomial loss.
        let mut detected = vec![0.0; n + 1];
        for (k, d) in detected.iter_mut().enumerate() {
            *d = binom(n, k) * eta.powi(k as i32) * (1.0 - eta).powi((n - k) as i32);
        }
        let dark = self.dark_count_prob;
        match self.kind {
            DetectorKind::Threshold => {
                let none = detected[0] * (1.0 - dark);
                vec![none, 1.0 - none]
            }
            DetectorKind::NumberResolving => {
                let mut out = vec![0.0; n + 2];
                for (k, p) in detected.iter().enumerate() {
                    out[k] += p * (1.0 - dark);
                    out[k + 1] += p * dark;
                }
                if dark == 0.0 {
                    out.pop();
                }
                out
            }
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// One detector watching the summed photon number of several modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPort {
    pub modes: Vec<usize>,
    pub detector: DetectorModel,
}

impl DetectorPort {
    pub fn new(modes: &[usize], detector: DetectorModel) -> Self {
        Self {
            modes: modes.to_vec(),
            detector,
        }
    }
}

/// Outcome pattern (one entry per port) → probability. Modes not covered by a
/// port are traced over.
pub type ClickDistribution = BTreeMap<Vec<u8>, f64>;

pub fn port_probabilities<S: OccupationStatistics + ?Sized>(
    state: &S,
    ports: &[DetectorPort],
) -> Result<ClickDistribution> {
    let basis = state.basis();
    for p in ports {
        p.detector.validate()?;
        if p.modes.is_empty() || p.modes.iter().any(|&m| m >= basis.n_modes) {
            return Err(Error::InvalidParameter(format!(
                "detector port {:?} does not address valid modes",
                p.modes
            )));
        }
    }
    // Cache outcome distributions per (port, photon number).
    let tables: Vec<Vec<Vec<f64>>> = ports
        .iter()
        .map(|p| (0..=basis.cutoff).map(|n| p.detector.outcome_distribution(n)).collect())
        .collect();
    let mut out = ClickDistribution::new();
    let probs = state.occupation_probabilities();
    for (k, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let occ = basis.state(k);
        let per_port: Vec<&Vec<f64>> = ports
            .iter()
            .zip(&tables)
            .map(|(port, t)| &t[port.modes.iter().map(|&m| occ[m] as usize).sum::<usize>()])
            .collect();
        // Cartesian product over ports.
        let mut pattern = vec![0u8; ports.len()];
        fn recurse(
            idx: usize,
            weight: f64,
            per_port: &[&Vec<f64>],
            pattern: &mut Vec<u8>,
            out: &mut ClickDistribution,
        ) {
            if weight == 0.0 {
                return;
            }
            if idx == per_port.len() {
                *out.entry(pattern.clone()).or_insert(0.0) += weight;
                return;
            }
            for (o, q) in per_port[idx].iter().enumerate() {
                pattern[idx] = o as u8;
                recurse(idx + 1, weight * q, per_port, pattern, out);
            }
        }
        recurse(0, p, &per_port, &mut pattern, &mut out);
    }
    Ok(out)
}

/// One detector per mode (`None` leaves the mode unmeasured).
pub fn click_probabilities<S: OccupationStatistics + ?Sized>(
    state: &S,
    detectors: &[Option<DetectorModel>],
) -> Result<ClickDistribution> {
    if detectors.len() != state.basis().n_modes {
        return Err(Error::InvalidParameter(format!(
            "{} detectors given for {} modes",
            detectors.len(),
            state.basis().n_modes
        )));
    }
    let ports: Vec<DetectorPort> = detectors
        .iter()
        .enumerate()
        .filter_map(|(m, d)| d.map(|d| DetectorPort::new(&[m], d)))
        .collect();
    port_probabilities(state, &ports)
}

/// Probability that every listed port reports a non-zero outcome.
pub fn joint_click(dist: &ClickDistribution, ports: &[usize]) -> f64 {
    dist.iter()
        .filter(|(pat, _)| ports.iter().all(|&k| pat[k] > 0))
        .map(|(_, p)| p)
        .sum()
}

/// ⟨Π n_k⟩ over the listed ports (reported counts).
pub fn count_moment(dist: &ClickDistribution, ports: &[usize]) -> f64 {
    dist.iter()
        .map(|(pat, p)| p * ports.iter().map(|&k| pat[k] as f64).product::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::fock::{FockBasis, FockState};
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn vacuum_never_clicks() {
        let b = FockBasis::new(3, 2).unwrap();
        let d = click_probabilities(&FockState::vacuum(b), &[Some(DetectorModel::threshold(0.9)); 3]).unwrap();
        assert_eq!(d.get(&vec![0, 0, 0]).copied(), Some(1.0));
    }

    #[test]
    fn single_photon_click_probability() {
        let b = FockBasis::new(1, 1).unwrap();
        let s = FockState::from_terms(b, &[(vec![1], Complex64::new(1.0, 0.0))]).unwrap();
        let d = click_probabilities(&s, &[Some(DetectorModel::threshold(0.8))]).unwrap();
        assert!((joint_click(&d, &[0]) - 0.8).abs() < 1e-15);
        let dark = DetectorModel { dark_count_prob: 0.1, ..DetectorModel::threshold(0.8) };
        let d = click_probabilities(&s, &[Some(dark)]).unwrap();
        assert!((joint_click(&d, &[0]) - (1.0 - 0.2 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn pnr_outcomes_are_binomial() {
        let d = DetectorModel::number_resolving(0.5).outcome_distribution(2);
        assert_eq!(d, vec![0.25, 0.5, 0.25]);
        assert!(DetectorModel::threshold(1.5).validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        /// Uniform loss commutes with a beamsplitter.
        #[test]
        fn loss_commutes_with_beamsplitter(
            a in prop::collection::vec(-1.0f64..1.0, 20),
            t in 0.0f64..1.0,
            eta in 0.05f64..1.0,
        ) {
            let b = FockBasis::new(2, 3).unwrap();
            let terms: Vec<_> = b.states().enumerate()
                .map(|(k, o)| (o.to_vec(), Complex64::new(a[2 * k % 20], a[(2 * k + 1) % 20])))
                .collect();
            let s = FockState::from_terms(b, &terms).unwrap().into_ensemble();
            let before = s.attenuate(0, eta).unwrap().attenuate(1, eta).unwrap().beamsplitter(0, 1, t, 0.4).unwrap();
            let after = s.beamsplitter(0, 1, t, 0.4).unwrap();
            let ideal = Some(DetectorModel::threshold(1.0));
            let lossy = Some(DetectorModel::threshold(eta));
            let p = click_probabilities(&before, &[ideal, ideal]).unwrap();
            let q = click_probabilities(&after, &[lossy, lossy]).unwrap();
            for (k, v) in &p {
                prop_assert!((v - q.get(k).copied().unwrap_or(0.0)).abs() < 1e-9);
            }
        }
    }
}
