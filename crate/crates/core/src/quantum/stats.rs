//! Photon statistics: unheralded and heralded g², and squeezing estimated from
//! count rates.

use serde::Serialize;

use super::detect::{count_moment, joint_click, port_probabilities, DetectorModel, DetectorPort};
use super::fock::FockBasis;
use super::squeezer::{tmsv, tmsv_on, MultimodeSqueezer, PairSource, MAX_TRUNCATION_WEIGHT};
use crate::error::{Error, Result};

pub const G2_UNHERALDED_DEFINITION: &str =
    "g2_u = <n_A n_B> / (<n_A><n_B>) on the signal arm split 50:50; closed form 1 + sum(lambda_n^2)";
pub const G2_HERALDED_DEFINITION: &str =
    "g2_h = P(A,B,H) P(H) / (P(A,H) P(B,H)); H idler click, A/B outputs of a 50:50 split of the signal arm";
pub const SQUEEZING_DEFINITION: &str =
    "g_si = C/A = 1 + P + 1/mu for a multimode two-mode squeezed state with purity P; |tanh xi|^2 = mu/(1+mu)";

/// Closed form 1 + Σλ_n².
pub fn g2_unheralded(squeezer: &MultimodeSqueezer) -> f64 {
    1.0 + squeezer.purity()
}

/// Fock-oracle unheralded g²: the idlers are traced out, each signal Schmidt
/// mode is split 50:50 and the two outputs are read by ideal
/// photon-number-resolving bucket detectors.
pub fn g2_unheralded_oracle(squeezer: &MultimodeSqueezer, cutoff: usize) -> Result<f64> {
    let k = squeezer.lambdas.len();
    if k > 3 {
        return Err(Error::InvalidParameter(format!(
            "oracle handles at most 3 Schmidt modes, got {k}"
        )));
    }
    let state = tmsv(squeezer, cutoff)?;
    let idlers: Vec<usize> = (k..2 * k).collect();
    let mut signal = state.into_ensemble().trace_out(&idlers)?.with_vacuum_modes(k)?;
    for n in 0..k {
        signal = signal.beamsplitter(n, k + n, 0.5, 0.0)?;
    }
    let a: Vec<usize> = (0..k).collect();
    let b: Vec<usize> = (k..2 * k).collect();
    let pnr = DetectorModel::number_resolving(1.0);
    let dist = port_probabilities(&signal, &[DetectorPort::new(&a, pnr), DetectorPort::new(&b, pnr)])?;
    let nab = count_moment(&dist, &[0, 1]);
    let na = count_moment(&dist, &[0]);
    let nb = count_moment(&dist, &[1]);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Numeric("no signal photons: g2 undefined".into()));
    }
    Ok(nab / (na * nb))
}

/// Fock-oracle heralded g². Modes: signals `0..K`, idlers `K..2K`, split
/// companions `2K..3K`.
pub fn g2_heralded(
    squeezer: &MultimodeSqueezer,
    herald: &DetectorModel,
    signal_detector: &DetectorModel,
    cutoff: usize,
) -> Result<f64> {
    if cutoff < 6 {
        return Err(Error::Cutoff {
            cutoff,
            weight: f64::NAN,
            suggested: 6,
        });
    }
    let k = squeezer.lambdas.len();
    if 3 * k > super::fock::MAX_MODES {
        return Err(Error::InvalidParameter(format!(
            "heralded oracle handles at most 2 Schmidt modes, got {k}"
        )));
    }
    let basis = FockBasis::new(3 * k, cutoff)?;
    let sources: Vec<PairSource> = squeezer
        .mode_squeezing()
        .into_iter()
        .enumerate()
        .map(|(n, r)| PairSource { signal: n, idler: k + n, r, phase: 0.0 })
        .collect();
    let mut state = tmsv_on(basis, &sources)?;
    for n in 0..k {
        state = state.beamsplitter(n, 2 * k + n, 0.5, 0.0)?;
    }
    let a: Vec<usize> = (0..k).collect();
    let h: Vec<usize> = (k..2 * k).collect();
    let b: Vec<usize> = (2 * k..3 * k).collect();
    let dist = port_probabilities(
        &state,
        &[
            DetectorPort::new(&a, *signal_detector),
            DetectorPort::new(&b, *signal_detector),
            DetectorPort::new(&h, *herald),
        ],
    )?;
    let pabh = joint_click(&dist, &[0, 1, 2]);
    let pah = joint_click(&dist, &[0, 2]);
    let pbh = joint_click(&dist, &[1, 2]);
    let ph = joint_click(&dist, &[2]);
    if pah == 0.0 || pbh == 0.0 {
        return Err(Error::Numeric("no heralded signal clicks: g2 undefined".into()));
    }
    Ok(pabh * ph / (pah * pbh))
}

/// Single-mode heralded g² at mean pair number μ.
pub fn g2_heralded_at(mu: f64, herald: &DetectorModel, signal_detector: &DetectorModel, cutoff: usize) -> Result<f64> {
    g2_heralded(&MultimodeSqueezer::with_mean_pairs(mu, &[1.0])?, herald, signal_detector, cutoff)
}

/// Mean pair number at which the single-mode heralded g² equals `target`,
/// by bisection in log μ.
pub fn mean_pairs_for_heralded_g2(
    target: f64,
    herald: &DetectorModel,
    signal_detector: &DetectorModel,
    cutoff: usize,
) -> Result<f64> {
    let f = |mu: f64| g2_heralded_at(mu, herald, signal_detector, cutoff).map(|g| g - target);
    // Largest μ whose single-mode pair tail stays within the truncation limit.
    let x_max = MAX_TRUNCATION_WEIGHT.powf(1.0 / (cutoff / 2 + 1) as f64);
    let (mut lo, mut hi) = (1e-7f64, (0.999 * x_max / (1.0 - x_max)).min(0.3));
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Estimation(format!(
            "heralded g2 = {target} not reachable for mean pair numbers in [{lo}, {hi}]"
        )));
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Count rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateMeasurement {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    pub rep_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezingEstimate {
    pub g_si: f64,
    pub mean_pairs: f64,
    pub tanh2: f64,
    pub purity: f64,
    pub convention: &'static str,
}

/// Mean pair number per pulse from the signal–idler cross-correlation,
/// corrected for a source of spectral purity `purity`:
/// g_si = 1 + P + 1/μ. The estimate falls as g_si grows.
pub fn squeezing_from_rates(rates: &RateMeasurement, purity: f64) -> Result<SqueezingEstimate> {
    let all = [
        rates.singles_signal,
        rates.singles_idler,
        rates.coincidences,
        rates.accidentals,
        rates.rep_rate,
    ];
    if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || rates.rep_rate == 0.0 {
        return Err(Error::InvalidParameter("rates must be finite and non-negative".into()));
    }
    if !(purity > 0.0 && purity <= 1.0) {
        return Err(Error::InvalidParameter(format!("purity must lie in (0, 1], got {purity}")));
    }
    if rates.coincidences < rates.accidentals {
        return Err(Error::Estimation(format!(
            "coincidences ({}) below accidentals ({})",
            rates.coincidences, rates.accidentals
        )));
    }
    let g_si = if rates.accidentals == 0.0 {
        f64::INFINITY
    } else {
        rates.coincidences / rates.accidentals
    };
    if g_si <= 1.0 + purity {
        return Err(Error::Estimation(format!(
            "cross-correlation g_si = {g_si:.4} <= 1 + purity; no pair signal"
        )));
    }
    let mean_pairs = 1.0 / (g_si - 1.0 - purity);
    Ok(SqueezingEstimate {
        g_si,
        mean_pairs,
        tanh2: mean_pairs / (1.0 + mean_pairs),
        purity,
        convention: SQUEEZING_DEFINITION,
    })
}

/// Rates produced by a single-mode source with the given detectors; the
/// accidentals are the product of singles (uncorrelated pulses).
pub fn synthetic_rates(
    squeezer: &MultimodeSqueezer,
    signal_detector: &DetectorModel,
    idler_detector: &DetectorModel,
    rep_rate: f64,
    cutoff: usize,
) -> Result<RateMeasurement> {
    let k = squeezer.lambdas.len();
    let state = tmsv(squeezer, cutoff)?;
    let s: Vec<usize> = (0..k).collect();
    let i: Vec<usize> = (k..2 * k).collect();
    let dist = port_probabilities(
        &state,
        &[DetectorPort::new(&s, *signal_detector), DetectorPort::new(&i, *idler_detector)],
    )?;
    let ps = joint_click(&dist, &[0]);
    let pi = joint_click(&dist, &[1]);
    let psi = joint_click(&dist, &[0, 1]);
    Ok(RateMeasurement {
        singles_signal: ps * rep_rate,
        singles_idler: pi * rep_rate,
        coincidences: psi * rep_rate,
        accidentals: ps * pi * rep_rate,
        rep_rate,
    })
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(g2_unheralded(&MultimodeSqueezer::single_mode(0.1).unwrap()), 2.0);
        assert_eq!(g2_unheralded(&MultimodeSqueezer::new(0.1, &[0.5, 0.5]).unwrap()), 1.5);
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        for weights in [vec![1.0], vec![0.5, 0.5], vec![0.7, 0.2, 0.1]] {
            for t2 in [0.001, 0.01, 0.05] {
                let sq = MultimodeSqueezer::with_tanh2(t2, &weights).unwrap();
                let o = g2_unheralded_oracle(&sq, 8).unwrap();
                let c = g2_unheralded(&sq);
                assert!((o / c - 1.0).abs() < 0.02, "{weights:?} {t2}: {o} vs {c}");
            }
        }
    }

    #[test]
    fn heralded_g2_vanishes_at_low_squeezing() {
        let d = DetectorModel::threshold(0.5);
        let g = g2_heralded_at(1e-5, &d, &d, 6).unwrap();
        assert!(g < 1e-3);
        assert!(g2_heralded_at(1e-3, &d, &d, 4).is_err());
    }

    #[test]
    fn operating_point_is_below_top_squeezing() {
        let d = DetectorModel::threshold(0.126);
        let mu = mean_pairs_for_heralded_g2(0.053, &d, &d, 6).unwrap();
        let g = g2_heralded_at(mu, &d, &d, 6).unwrap();
        assert!((g - 0.053).abs() < 1e-9);
        assert!(mu / (1.0 + mu) < 0.2);
    }

    #[test]
    fn squeezing_estimator() {
        let zero = RateMeasurement {
            singles_signal: 1e5,
            singles_idler: 1e5,
            coincidences: 100.0,
            accidentals: 0.0,
            rep_rate: 5e7,
        };
        assert_eq!(squeezing_from_rates(&zero, 1.0).unwrap().tanh2, 0.0);
        let mut last = f64::INFINITY;
        for c in [100.0, 200.0, 400.0, 800.0] {
            let r = RateMeasurement { coincidences: c, accidentals: 10.0, ..zero };
            let est = squeezing_from_rates(&r, 1.0).unwrap();
            assert!(est.tanh2 < last);
            last = est.tanh2;
        }
        let bad = RateMeasurement { coincidences: 10.0, accidentals: 10.0, ..zero };
        assert!(matches!(squeezing_from_rates(&bad, 1.0), Err(Error::Estimation(_))));
    }

    #[test]
    fn squeezing_round_trip_through_oracle() {
        let sq = MultimodeSqueezer::with_tanh2(0.1, &[1.0]).unwrap();
        let d = DetectorModel::threshold(0.126);
        let rates = synthetic_rates(&sq, &d, &d, 50e6, 8).unwrap();
        let est = squeezing_from_rates(&rates, 1.0).unwrap();
        assert!((est.tanh2 / 0.1 - 1.0).abs() < 0.05, "{}", est.tanh2);
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 3.0];
        assert!((fit_slope(&x, &[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-15);
    }
}
