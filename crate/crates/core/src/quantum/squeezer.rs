//! Multimode two-mode squeezed vacuum in the Schmidt basis.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::fock::{FockBasis, FockState, MAX_CUTOFF};
use crate::error::{Error, Result};
use crate::spectral::SchmidtDecomposition;

/// Largest truncation weight accepted when building a squeezed state.
pub const MAX_TRUNCATION_WEIGHT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultimodeSqueezer {
    /// Global squeezing parameter r.
    pub r: f64,
    /// Schmidt weights λ_n, non-increasing, Σλ_n = 1.
    pub lambdas: Vec<f64>,
}

impl MultimodeSqueezer {
    pub fn new(r: f64, weights: &[f64]) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!("squeezing must be >= 0, got {r}")));
        }
        let s = SchmidtDecomposition::from_weights(weights)?;
        Ok(Self {
            r,
            lambdas: s.coefficients,
        })
    }

    pub fn single_mode(r: f64) -> Result<Self> {
        Self::new(r, &[1.0])
    }

    /// Single Schmidt mode with sinh²r = `mu` mean pairs.
    pub fn with_mean_pairs(mu: f64, weights: &[f64]) -> Result<Self> {
        Self::new(mu.sqrt().asinh(), weights)
    }

    /// Single Schmidt mode with |tanh r|² = `t2`.
    pub fn with_tanh2(t2: f64, weights: &[f64]) -> Result<Self> {
        if !(0.0..1.0).contains(&t2) {
            return Err(Error::InvalidParameter(format!("|tanh r|^2 must lie in [0, 1), got {t2}")));
        }
        Self::new(t2.sqrt().atanh(), weights)
    }

    pub fn from_schmidt(r: f64, s: &SchmidtDecomposition) -> Result<Self> {
        Self::new(r, &s.coefficients)
    }

    /// Keeps the `k` largest Schmidt weights, renormalized.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        let kept: Vec<f64> = self.lambdas.iter().take(k).copied().collect();
        Self::new(self.r, &kept)
    }

    /// Per-mode squeezing r_n = r·√λ_n.
    pub fn mode_squeezing(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| self.r * l.sqrt()).collect()
    }

    pub fn purity(&self) -> f64 {
        self.lambdas.iter().map(|l| l * l).sum()
    }

    /// Total mean pair number Σ sinh²r_n.
    pub fn mean_pairs(&self) -> f64 {
        self.mode_squeezing().iter().map(|r| r.sinh().powi(2)).sum()
    }

    pub fn tanh2(&self) -> f64 {
        self.r.tanh().powi(2)
    }
}

/// Probability that more than `max_pairs` pairs are emitted in total by
/// independent modes with |tanh r_n|² = x_n.
pub fn pair_tail_weight(squeezings: &[f64], max_pairs: usize) -> f64 {
    let mut dist = vec![1.0];
    for r in squeezings {
        let x = r.tanh().powi(2);
        let mode: Vec<f64> = (0..=max_pairs).map(|m| (1.0 - x) * x.powi(m as i32)).collect();
        let mut next = vec![0.0; max_pairs + 1];
        for (a, pa) in dist.iter().enumerate() {
            for (b, pb) in mode.iter().enumerate() {
                if a + b <= max_pairs {
                    next[a + b] += pa * pb;
                }
            }
        }
        dist = next;
    }
    (1.0 - dist.iter().sum::<f64>()).max(0.0)
}

/// One two-mode squeezer acting on modes (`signal`, `idler`).
#[derive(Debug, Clone, Copy)]
pub struct PairSource {
    pub signal: usize,
    pub idler: usize,
    pub r: f64,
    /// Pump phase; the m-pair term carries e^{imφ}.
    pub phase: f64,
}

/// Product of two-mode squeezed vacua Σ_m (e^{iφ}tanh r)^m / cosh r |m, m⟩,
/// truncated to the basis and renormalized.
pub fn tmsv_on(basis: Arc<FockBasis>, sources: &[PairSource]) -> Result<FockState> {
    let mut used = vec![false; basis.n_modes];
    for s in sources {
        for m in [s.signal, s.idler] {
            if m >= basis.n_modes || used[m] {
                return Err(Error::InvalidParameter(format!("pair sources overlap or exceed the modes at {m}")));
            }
            used[m] = true;
        }
    }
    let max_pairs = basis.cutoff / 2;
    let rs: Vec<f64> = sources.iter().map(|s| s.r).collect();
    let weight = pair_tail_weight(&rs, max_pairs);
    if weight >= MAX_TRUNCATION_WEIGHT {
        let suggested = (basis.cutoff..=MAX_CUTOFF)
            .step_by(2)
            .find(|&c| pair_tail_weight(&rs, c / 2) < MAX_TRUNCATION_WEIGHT)
            .unwrap_or(MAX_CUTOFF);
        return Err(Error::Cutoff {
            cutoff: basis.cutoff,
            weight,
            suggested,
        });
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
    let mut occ = vec![0u8; basis.n_modes];
    let mut counts = vec![0usize; sources.len()];
    loop {
        if 2 * counts.iter().sum::<usize>() <= basis.cutoff {
            let mut a = Complex64::new(1.0, 0.0);
            occ.iter_mut().for_each(|o| *o = 0);
            for (s, &m) in sources.iter().zip(&counts) {
                let t = s.r.tanh();
                a *= Complex64::from_polar(t.powi(m as i32) / s.r.cosh(), s.phase * m as f64);
                occ[s.signal] = m as u8;
                occ[s.idler] = m as u8;
            }
            amplitudes[basis.index_of(&occ).expect("within cutoff")] = a;
        }
        // Odometer over pair counts.
        let mut k = 0;
        loop {
            if k == counts.len() {
                let mut st = FockState {
                    basis,
                    amplitudes,
                    truncation_weight: weight,
                };
                let n = st.norm_sqr().sqrt();
                st.amplitudes.iter_mut().for_each(|a| *a /= n);
                return Ok(st);
            }
            counts[k] += 1;
            if 2 * counts[k] <= basis.cutoff {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}

/// TMSV over all Schmidt modes: modes `0..K` are signals, `K..2K` idlers.
pub fn tmsv(squeezer: &MultimodeSqueezer, cutoff: usize) -> Result<FockState> {
    let k = squeezer.lambdas.len();
    let basis = FockBasis::new(2 * k, cutoff)?;
    let sources: Vec<PairSource> = squeezer
        .mode_squeezing()
        .into_iter()
        .enumerate()
        .map(|(n, r)| PairSource {
            signal: n,
            idler: k + n,
            r,
            phase: 0.0,
        })
        .collect();
    tmsv_on(basis, &sources)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_squeezing_is_vacuum() {
        let s = tmsv(&MultimodeSqueezer::single_mode(0.0).unwrap(), 4).unwrap();
        assert_eq!(s.amplitude(&[0, 0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn pair_ratio_at_top_squeezing() {
        let sq = MultimodeSqueezer::with_tanh2(0.2, &[1.0]).unwrap();
        let s = tmsv(&sq, 12).unwrap();
        let ratio = s.amplitude(&[1, 1]).norm_sqr() / s.amplitude(&[0, 0]).norm_sqr();
        assert!((ratio - 0.2).abs() < 1e-9);
    }

    #[test]
    fn cutoff_error_suggests_larger_cutoff() {
        let sq = MultimodeSqueezer::with_tanh2(0.2, &[1.0]).unwrap();
        match tmsv(&sq, 2) {
            Err(Error::Cutoff { suggested, weight, .. }) => {
                assert!(suggested > 2);
                assert!(weight > 1e-4);
                assert!(tmsv(&sq, suggested).is_ok());
            }
            other => panic!("expected cutoff error, got {other:?}"),
        }
    }

    /// Two equal Schmidt modes: total pair number distribution by enumerating
    /// (m1, m2) products of geometric laws.
    #[test]
    fn two_mode_distribution_matches_enumeration() {
        let sq = MultimodeSqueezer::new(0.3, &[0.5, 0.5]).unwrap();
        let s = tmsv(&sq, 8).unwrap();
        let x = (0.3 * 0.5f64.sqrt()).tanh().powi(2);
        let mut expected = [0.0; 5];
        for m1 in 0..=4usize {
            for m2 in 0..=(4 - m1) {
                expected[m1 + m2] += (1.0 - x).powi(2) * x.powi((m1 + m2) as i32);
            }
        }
        let z: f64 = expected.iter().sum();
        let mut got = [0.0; 5];
        for (k, p) in s.probabilities().iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let occ = s.basis.state(k);
            assert_eq!(occ[0], occ[2]);
            assert_eq!(occ[1], occ[3]);
            got[(occ[0] + occ[1]) as usize] += p;
        }
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e / z).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_squeezing_convention() {
        let sq = MultimodeSqueezer::new(0.4, &[0.75, 0.25]).unwrap();
        let r = sq.mode_squeezing();
        assert!((r[0] - 0.4 * 0.75f64.sqrt()).abs() < 1e-15);
        assert!((r[1] - 0.2).abs() < 1e-15);
        assert!(MultimodeSqueezer::new(-0.1, &[1.0]).is_err());
    }
}
