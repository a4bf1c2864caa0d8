//! Two-qubit state tomography: model states, simulated Pauli measurements and
//! maximum-likelihood reconstruction.

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Density matrix in the basis |00⟩, |01⟩, |10⟩, |11⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<C>,
}

impl TwoQubitState {
    pub fn new(rho: Matrix4<C>) -> Result<Self> {
        let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::InvalidParameter(format!("density matrix not Hermitian (deviation {herm:.3e})")));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > 1e-9 {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} != 1")));
        }
        let min = rho.symmetric_eigenvalues().min();
        if min < -1e-10 {
            return Err(Error::InvalidParameter(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(Self { rho })
    }

    pub fn pure(psi: &Vector4<C>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let v = psi / C::new(n, 0.0);
        Self::new(v * v.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity() * C::new(0.25, 0.0),
        }
    }

    pub fn matrix(&self) -> &Matrix4<C> {
        &self.rho
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// (1 − p)ρ + p·I/4.
    pub fn depolarized(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing probability {p} outside [0, 1]")));
        }
        Self::new(self.rho * C::new(1.0 - p, 0.0) + Self::maximally_mixed().rho * C::new(p, 0.0))
    }
}

/// (|00⟩ + |11⟩)/√2.
pub fn phi_plus() -> Vector4<C> {
    let a = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Vector4::new(a, ZERO, ZERO, a)
}

/// ½[|00⟩⟨00| + |11⟩⟨11| + V(|00⟩⟨11| + |11⟩⟨00|)].
pub fn model_state(v: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("indistinguishability must lie in [0, 1], got {v}")));
    }
    let mut rho = Matrix4::zeros();
    rho[(0, 0)] = C::new(0.5, 0.0);
    rho[(3, 3)] = C::new(0.5, 0.0);
    rho[(0, 3)] = C::new(0.5 * v, 0.0);
    rho[(3, 0)] = C::new(0.5 * v, 0.0);
    TwoQubitState::new(rho)
}

pub fn fidelity(state: &TwoQubitState, reference: &Vector4<C>) -> f64 {
    (reference.adjoint() * state.rho * reference)[(0, 0)].re / reference.norm_squared()
}

/// 2|ρ_{00,11}|.
pub fn indistinguishability_from_rho(state: &TwoQubitState) -> f64 {
    2.0 * state.rho[(0, 3)].norm()
}

pub fn trace_distance(a: &TwoQubitState, b: &TwoQubitState) -> f64 {
    0.5 * (a.rho - b.rho).symmetric_eigenvalues().iter().map(|e| e.abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Eigenvectors for outcomes +1 and −1.
    fn eigenvectors(self) -> [[C; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Pauli::X => [[C::new(h, 0.0), C::new(h, 0.0)], [C::new(h, 0.0), C::new(-h, 0.0)]],
            Pauli::Y => [[C::new(h, 0.0), C::new(0.0, h)], [C::new(h, 0.0), C::new(0.0, -h)]],
            Pauli::Z => [[ONE, ZERO], [ZERO, ONE]],
        }
    }
}

/// Local measurement bases on qubits 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting(pub Pauli, pub Pauli);

impl Setting {
    /// Projectors for outcomes (++, +−, −+, −−).
    pub fn projectors(&self) -> [Matrix4<C>; 4] {
        let a = self.0.eigenvectors();
        let b = self.1.eigenvectors();
        let mut out = [Matrix4::zeros(); 4];
        for (k, p) in out.iter_mut().enumerate() {
            let (u, w) = (a[k / 2], b[k % 2]);
            let v = Vector4::new(u[0] * w[0], u[0] * w[1], u[1] * w[0], u[1] * w[1]);
            *p = v * v.adjoint();
        }
        out
    }

    pub fn label(&self) -> String {
        format!("{:?}{:?}", self.0, self.1)
    }
}

/// All nine Pauli pairs.
pub fn pauli_settings() -> Vec<Setting> {
    let p = [Pauli::X, Pauli::Y, Pauli::Z];
    p.iter().flat_map(|&a| p.iter().map(move |&b| Setting(a, b))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting: Setting,
    pub counts: [u64; 4],
}

pub fn born_probabilities(state: &TwoQubitState, setting: &Setting) -> [f64; 4] {
    let p = setting.projectors();
    std::array::from_fn(|k| (p[k] * state.rho).trace().re.max(0.0))
}

/// Multinomial draws of `shots` events per setting.
pub fn simulate_counts(state: &TwoQubitState, settings: &[Setting], shots: u64, seed: u64) -> Result<Vec<MeasurementRecord>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    settings
        .iter()
        .map(|s| {
            let p = born_probabilities(state, s);
            let mut counts = [0u64; 4];
            let (mut left, mut mass) = (shots, p.iter().sum::<f64>());
            for k in 0..3 {
                let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let n = Binomial::new(left, q)
                    .map_err(|e| Error::Numeric(format!("binomial draw failed: {e}")))?
                    .sample(&mut rng);
                counts[k] = n;
                left -= n;
                mass -= p[k];
            }
            counts[3] = left;
            Ok(MeasurementRecord { setting: *s, counts })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Σ n_j ln p_j over all outcomes.
    pub log_likelihood: f64,
    pub last_improvement: f64,
    /// Iterations that fell back to a diluted step.
    pub diluted_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub state: TwoQubitState,
    pub diagnostics: MleDiagnostics,
}

/// Real 16-vector of Pauli-basis components of an operator.
fn pauli_components(op: &Matrix4<C>) -> [f64; 16] {
    let s: [[C; 4]; 4] = [
        [ONE, ZERO, ZERO, ONE],
        [ZERO, ONE, ONE, ZERO],
        [ZERO, C::new(0.0, -1.0), C::new(0.0, 1.0), ZERO],
        [ONE, ZERO, ZERO, -ONE],
    ];
    let mut out = [0.0; 16];
    for a in 0..4 {
        for b in 0..4 {
            let m = |i: usize, j: usize| s[a][2 * (i / 2) + j / 2] * s[b][2 * (i % 2) + j % 2];
            let mut tr = ZERO;
            for i in 0..4 {
                for j in 0..4 {
                    tr += m(i, j) * op[(j, i)];
                }
            }
            out[4 * a + b] = tr.re;
        }
    }
    out
}

fn check_informationally_complete(settings: &[Setting]) -> Result<()> {
    let rows: Vec<[f64; 16]> = settings
        .iter()
        .flat_map(|s| s.projectors().map(|p| pauli_components(&p)))
        .collect();
    if rows.is_empty() {
        return Err(Error::NotInformationallyComplete("no measurement records".into()));
    }
    let m = DMatrix::from_fn(rows.len(), 16, |i, j| rows[i][j]);
    let rank = m.svd(false, false).rank(1e-9);
    if rank < 16 {
        return Err(Error::NotInformationallyComplete(format!(
            "measurement operators span {rank} of 16 dimensions"
        )));
    }
    Ok(())
}

pub fn mle_reconstruct(records: &[MeasurementRecord], opts: &MleOptions) -> Result<Reconstruction> {
    let data: Vec<(Setting, [f64; 4])> = records
        .iter()
        .map(|r| (r.setting, r.counts.map(|c| c as f64)))
        .collect();
    mle_reconstruct_weighted(&data, opts)
}

/// MLE from non-negative real-valued tallies (e.g. exact probabilities).
pub fn mle_reconstruct_weighted(data: &[(Setting, [f64; 4])], opts: &MleOptions) -> Result<Reconstruction> {
    let settings: Vec<Setting> = data.iter().map(|d| d.0).collect();
    check_informationally_complete(&settings)?;
    let mut ops = Vec::new();
    let mut weights = Vec::new();
    for (s, c) in data {
        if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("counts must be finite and non-negative".into()));
        }
        for (p, &n) in s.projectors().into_iter().zip(c) {
            if n > 0.0 {
                ops.push(p);
                weights.push(n);
            }
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("no counts recorded".into()));
    }
    let loglik = |rho: &Matrix4<C>| -> f64 {
        ops.iter()
            .zip(&weights)
            .map(|(p, n)| n * (p * rho).trace().re.max(1e-300).ln())
            .sum::<f64>()
    };
    let r_op = |rho: &Matrix4<C>| -> Matrix4<C> {
        let mut r = Matrix4::zeros();
        for (p, n) in ops.iter().zip(&weights) {
            let pr = (p * rho).trace().re.max(1e-300);
            r += p * C::new(n / pr, 0.0);
        }
        r / C::new(total, 0.0)
    };
    let settle = |m: Matrix4<C>| -> Matrix4<C> {
        let h = (m + m.adjoint()) * C::new(0.5, 0.0);
        let tr = h.trace().re;
        h / C::new(tr, 0.0)
    };

    let mut rho = TwoQubitState::maximally_mixed().rho;
    let mut ll = loglik(&rho);
    let mut diag = MleDiagnostics {
        iterations: 0,
        converged: false,
        log_likelihood: ll,
        last_improvement: f64::INFINITY,
        diluted_steps: 0,
    };
    let id = Matrix4::<C>::identity();
    while diag.iterations < opts.max_iterations {
        diag.iterations += 1;
        let r = r_op(&rho);
        let mut next = settle(r * rho * r);
        let mut next_ll = loglik(&next);
        if next_ll < ll {
            // Diluted step (I + εR)ρ(I + εR) increases the likelihood for small ε.
            let mut eps = 1.0;
            diag.diluted_steps += 1;
            loop {
                let g = (id + r * C::new(eps, 0.0)) / C::new(1.0 + eps, 0.0);
                next = settle(g * rho * g);
                next_ll = loglik(&next);
                if next_ll >= ll || eps < 1e-12 {
                    break;
                }
                eps *= 0.5;
            }
            if next_ll < ll {
                next = rho;
                next_ll = ll;
            }
        }
        assert!(next_ll >= ll, "likelihood decreased during MLE iteration");
        let improvement = next_ll - ll;
        rho = next;
        ll = next_ll;
        diag.last_improvement = improvement;
        if improvement < opts.tolerance {
            diag.converged = true;
            break;
        }
    }
    diag.log_likelihood = ll;
    if !diag.converged {
        log::warn!(
            "MLE stopped after {} iterations without converging (last improvement {:.3e})",
            diag.iterations,
            diag.last_improvement
        );
    }
    Ok(Reconstruction {
        state: TwoQubitState::new(rho)?,
        diagnostics: diag,
    })
}

/// Expected (noiseless, real-valued) counts for `shots` events per setting.
pub fn exact_tallies(state: &TwoQubitState, settings: &[Setting], shots: f64) -> Vec<(Setting, [f64; 4])> {
    settings
        .iter()
        .map(|s| (*s, born_probabilities(state, s).map(|p| p * shots)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn model_state_limits() {
        let pure = model_state(1.0).unwrap();
        let proj = TwoQubitState::pure(&phi_plus()).unwrap();
        assert!(trace_distance(&pure, &proj) < 1e-15);
        assert!((fidelity(&model_state(0.0).unwrap(), &phi_plus()) - 0.5).abs() < 1e-15);
        assert!((fidelity(&model_state(0.982).unwrap(), &phi_plus()) - 0.991).abs() < 1e-12);
        assert!((indistinguishability_from_rho(&model_state(0.37).unwrap()) - 0.37).abs() < 1e-15);
        assert!(model_state(1.01).is_err());
    }

    #[test]
    fn fidelity_references() {
        assert!((fidelity(&TwoQubitState::maximally_mixed(), &phi_plus()) - 0.25).abs() < 1e-15);
        let p = TwoQubitState::pure(&phi_plus()).unwrap();
        assert!((fidelity(&p, &phi_plus()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projectors_resolve_identity() {
        for s in pauli_settings() {
            let sum: Matrix4<C> = s.projectors().iter().sum();
            assert!((sum - Matrix4::identity()).norm() < 1e-14);
        }
    }

    #[test]
    fn zz_counts_of_phi_plus_are_correlated() {
        let p = TwoQubitState::pure(&phi_plus()).unwrap();
        let r = simulate_counts(&p, &[Setting(Pauli::Z, Pauli::Z)], 1000, 1).unwrap();
        assert_eq!(r[0].counts[1], 0);
        assert_eq!(r[0].counts[2], 0);
        assert_eq!(r[0].counts[0] + r[0].counts[3], 1000);
    }

    #[test]
    fn mixed_state_counts_are_uniform() {
        let r = simulate_counts(&TwoQubitState::maximally_mixed(), &pauli_settings(), 40_000, 3).unwrap();
        for rec in r {
            for c in rec.counts {
                assert!((c as f64 - 10_000.0).abs() < 500.0);
            }
        }
    }

    #[test]
    fn counts_are_deterministic_under_seed() {
        let s = model_state(0.9).unwrap();
        let a = simulate_counts(&s, &pauli_settings(), 500, 42).unwrap();
        let b = simulate_counts(&s, &pauli_settings(), 500, 42).unwrap();
        let c = simulate_counts(&s, &pauli_settings(), 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn exact_probabilities_recover_full_rank_state() {
        let truth = model_state(0.8).unwrap().depolarized(0.1).unwrap();
        let r = mle_reconstruct_weighted(&exact_tallies(&truth, &pauli_settings(), 1e6), &MleOptions::default()).unwrap();
        assert!(trace_distance(&r.state, &truth) < 1e-6, "{}", trace_distance(&r.state, &truth));
    }

    #[test]
    fn incomplete_settings_are_rejected() {
        let s = model_state(0.9).unwrap();
        let rec = simulate_counts(&s, &[Setting(Pauli::Z, Pauli::Z), Setting(Pauli::X, Pauli::X)], 100, 0).unwrap();
        assert!(matches!(
            mle_reconstruct(&rec, &MleOptions::default()),
            Err(Error::NotInformationallyComplete(_))
        ));
    }

    #[test]
    fn depolarized_fidelity() {
        let truth = TwoQubitState::pure(&phi_plus()).unwrap().depolarized(0.05).unwrap();
        let rec = simulate_counts(&truth, &pauli_settings(), 10_000, 11).unwrap();
        let r = mle_reconstruct(&rec, &MleOptions::default()).unwrap();
        let expected = (1.0 - 0.05) + 0.05 / 4.0;
        assert!((fidelity(&r.state, &phi_plus()) - expected).abs() < 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn reconstruction_is_always_physical(counts in proptest::collection::vec(proptest::array::uniform4(0u64..50), 9)) {
            let rec: Vec<MeasurementRecord> = pauli_settings()
                .into_iter()
                .zip(counts)
                .map(|(setting, counts)| MeasurementRecord { setting, counts })
                .collect();
            prop_assume!(rec.iter().any(|r| r.counts.iter().sum::<u64>() > 0));
            let opts = MleOptions { max_iterations: 500, ..Default::default() };
            let r = mle_reconstruct(&rec, &opts).unwrap();
            let m = r.state.matrix();
            prop_assert!((m - m.adjoint()).norm() < 1e-12);
            prop_assert!((m.trace().re - 1.0).abs() < 1e-9);
            prop_assert!(m.symmetric_eigenvalues().min() > -1e-10);
        }
    }
}
