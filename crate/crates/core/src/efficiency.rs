//! Heralding-efficiency accounting: distributed on-chip loss, spectral filter
//! fraction and off-chip channel loss, forward and inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::SourceGeometry;
use crate::pump::{DelayedSplit, PumpPulse};
use crate::quad::simpson;
use crate::units::{db_to_transmission, transmission_to_db};

/// One channel element; `transmission_db` ≤ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossElement {
    pub label: String,
    pub transmission_db: f64,
    /// Set for terms solved from other measurements rather than characterised.
    #[serde(default)]
    pub inferred: bool,
}

impl LossElement {
    pub fn new(label: impl Into<String>, transmission_db: f64) -> Result<Self> {
        let e = Self {
            label: label.into(),
            transmission_db,
            inferred: false,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn from_transmission(label: impl Into<String>, t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidParameter(format!("transmission must lie in (0, 1], got {t}")));
        }
        Self::new(label, transmission_to_db(t))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmission_db.is_finite() && self.transmission_db <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "loss element '{}' must have transmission_db <= 0, got {}",
                self.label, self.transmission_db
            )));
        }
        Ok(())
    }

    pub fn transmission(&self) -> f64 {
        db_to_transmission(self.transmission_db)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    #[serde(default)]
    pub elements: Vec<LossElement>,
}

impl LossBudget {
    pub fn new(elements: Vec<LossElement>) -> Result<Self> {
        let b = Self { elements };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.elements.iter().try_for_each(LossElement::validate)
    }

    pub fn channel_transmission(&self) -> f64 {
        self.elements.iter().map(LossElement::transmission).product()
    }

    pub fn with(mut self, element: LossElement) -> Self {
        self.elements.push(element);
        self
    }

    /// Grating coupler at −6.6 dB and an 80% efficient detector.
    pub fn characterised_default() -> Self {
        Self {
            elements: vec![
                LossElement {
                    label: "grating coupler".into(),
                    transmission_db: -6.6,
                    inferred: false,
                },
                LossElement {
                    label: "detector".into(),
                    transmission_db: transmission_to_db(0.80),
                    inferred: false,
                },
            ],
        }
    }
}

/// Normalized density of pair-generation position along the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenerationProfile {
    Uniform,
    /// Triangle peaking where the delayed pulses fully overlap, in metres.
    PumpOverlap { peak: f64, half_width: f64 },
}

impl GenerationProfile {
    /// Overlap triangle of two pulses of duration `pump.effective_duration()`
    /// sliding past each other at walk-off `walk_off` (s/m) after delay τ.
    pub fn pump_overlap(pump: &PumpPulse, split: &DelayedSplit, walk_off: f64) -> Result<Self> {
        pump.validate()?;
        split.validate()?;
        if !(walk_off.is_finite() && walk_off != 0.0) {
            return Err(Error::InvalidParameter(format!("walk-off must be non-zero, got {walk_off}")));
        }
        Ok(Self::PumpOverlap {
            peak: split.tau / walk_off.abs(),
            half_width: pump.effective_duration() / walk_off.abs(),
        })
    }

    fn density(&self, z: f64) -> f64 {
        match *self {
            Self::Uniform => 1.0,
            Self::PumpOverlap { peak, half_width } => (1.0 - (z - peak).abs() / half_width).max(0.0),
        }
    }

    fn kinks(&self, length: f64) -> Vec<f64> {
        let mut k = vec![0.0, length];
        if let Self::PumpOverlap { peak, half_width } = *self {
            k.extend([peak - half_width, peak, peak + half_width]);
        }
        k.retain(|z| (0.0..=length).contains(z));
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    fn validate(&self) -> Result<()> {
        if let Self::PumpOverlap { peak, half_width } = *self {
            if !(peak.is_finite() && half_width.is_finite() && half_width > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "overlap profile needs finite peak and positive half-width, got ({peak}, {half_width})"
                )));
            }
        }
        Ok(())
    }
}

/// ∫ p(z)·10^(−α(L−z)/10) dz / ∫ p(z) dz, Simpson on each smooth piece with
/// `nodes` points per piece.
pub fn intrinsic_heralding_with(geom: &SourceGeometry, profile: &GenerationProfile, nodes: usize) -> Result<f64> {
    geom.validate()?;
    profile.validate()?;
    let n = (nodes.max(3)) | 1;
    let alpha = geom.alpha_db_per_m();
    let l = geom.length;
    let (mut num, mut den) = (0.0, 0.0);
    for w in profile.kinks(l).windows(2) {
        num += simpson(|z| profile.density(z) * 10f64.powf(-alpha * (l - z) / 10.0), w[0], w[1], n);
        den += simpson(|z| profile.density(z), w[0], w[1], n);
    }
    if den <= 0.0 {
        return Err(Error::InvalidParameter("generation profile has no weight inside the waveguide".into()));
    }
    Ok(num / den)
}

pub fn intrinsic_heralding(geom: &SourceGeometry, profile: &GenerationProfile) -> Result<f64> {
    intrinsic_heralding_with(geom, profile, 401)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownEntry {
    pub label: String,
    pub transmission_db: f64,
    pub transmission: f64,
    pub inferred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub intrinsic: f64,
    pub filter_fraction: f64,
    pub channel: f64,
    pub detected: f64,
    pub breakdown: Vec<BreakdownEntry>,
}

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")));
    }
    Ok(())
}

pub fn detected_heralding(intrinsic: f64, filter_fraction: f64, budget: &LossBudget) -> Result<EfficiencyReport> {
    check_fraction("intrinsic efficiency", intrinsic)?;
    check_fraction("filter fraction", filter_fraction)?;
    budget.validate()?;
    let mut breakdown = vec![
        BreakdownEntry {
            label: "on-chip propagation".into(),
            transmission_db: transmission_to_db(intrinsic),
            transmission: intrinsic,
            inferred: false,
        },
        BreakdownEntry {
            label: "spectral filter fraction".into(),
            transmission_db: transmission_to_db(filter_fraction),
            transmission: filter_fraction,
            inferred: false,
        },
    ];
    breakdown.extend(budget.elements.iter().map(|e| BreakdownEntry {
        label: e.label.clone(),
        transmission_db: e.transmission_db,
        transmission: e.transmission(),
        inferred: e.inferred,
    }));
    let channel = budget.channel_transmission();
    Ok(EfficiencyReport {
        intrinsic,
        filter_fraction,
        channel,
        detected: intrinsic * filter_fraction * channel,
        breakdown,
    })
}

/// Inverse of [`detected_heralding`].
pub fn infer_intrinsic(measured_detected: f64, filter_fraction: f64, budget: &LossBudget) -> Result<f64> {
    check_fraction("measured efficiency", measured_detected)?;
    check_fraction("filter fraction", filter_fraction)?;
    budget.validate()?;
    let eta = measured_detected / (filter_fraction * budget.channel_transmission());
    if eta > 1.0 {
        return Err(Error::InconsistentBudget(format!(
            "measured efficiency {measured_detected} exceeds the channel transmission; inferred intrinsic {eta:.4} > 1"
        )));
    }
    Ok(eta)
}

/// Uncharacterised loss that reconciles a known intrinsic efficiency with a
/// measured detected efficiency, as an inferred budget element.
pub fn infer_excess_loss(
    intrinsic: f64,
    measured_detected: f64,
    filter_fraction: f64,
    budget: &LossBudget,
    label: &str,
) -> Result<LossElement> {
    let predicted = detected_heralding(intrinsic, filter_fraction, budget)?.detected;
    check_fraction("measured efficiency", measured_detected)?;
    if measured_detected > predicted {
        return Err(Error::InconsistentBudget(format!(
            "measured efficiency {measured_detected} exceeds the budget prediction {predicted:.4}"
        )));
    }
    Ok(LossElement {
        label: label.to_string(),
        transmission_db: transmission_to_db(measured_detected / predicted),
        inferred: true,
    })
}
