use std::f64::consts::PI;
use std::time::Instant;

use serde_json::{json, Value};
use sfwm_core::dispersion::measure_targets;
use sfwm_core::quantum::interference::{fit_fringe, phase_grid, HERALDED_HOM_DEFINITION, REVERSED_HOM_DEFINITION};
use sfwm_core::quantum::stats::{
    fit_slope, g2_heralded_at, g2_unheralded, g2_unheralded_oracle, mean_pairs_for_heralded_g2, squeezing_from_rates,
    synthetic_rates, G2_HERALDED_DEFINITION, G2_UNHERALDED_DEFINITION,
};
use sfwm_core::quantum::{hom_from_overlap, reversed_hom_fringe, reversed_hom_oracle, MultimodeSqueezer, MultiphotonNoise};
use sfwm_core::reproduce::{run_criterion, Context};
use sfwm_core::spectral::band;
use sfwm_core::tomography::{pauli_settings, phi_plus, MleOptions};
use sfwm_core::units::transmission_to_db;
use sfwm_core::{
    apply_filter, compute_jsa_with, detected_heralding, fidelity, heralded_rho, indistinguishability_from_rho,
    infer_excess_loss, infer_intrinsic, intrinsic_heralding, jsi_of, jsi_purity, mle_reconstruct, model_state,
    schmidt_decompose, signal_axis_fwhm_nm, simulate_counts, sweep_delay, CalibrationTargets, CoveragePolicy,
    DispersionModel, GenerationProfile, JointSpectralAmplitude, JsaOptions, RunConfig, Side,
};

use crate::artifacts::Outputs;
use crate::{say, CliError, Command};

type Res = Result<Value, CliError>;

fn timed<T>(out: &mut Outputs, phase: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let v = f();
    out.timings.insert(phase.to_string(), t.elapsed().as_secs_f64());
    v
}

fn model(cfg: &RunConfig, out: &mut Outputs) -> Result<DispersionModel, CliError> {
    Ok(timed(out, "calibrate", || cfg.dispersion_model())?)
}

fn delayed_jsa(cfg: &RunConfig, m: &DispersionModel, out: &mut Outputs) -> Result<JointSpectralAmplitude, CliError> {
    Ok(timed(out, "jsa", || {
        compute_jsa_with(m, &cfg.pump, &cfg.split, &cfg.geometry, &cfg.grid, &cfg.jsa)
    })?)
}

pub fn dispatch(name: &str, cmd: &Command, cfg: &RunConfig, out: &mut Outputs) -> Res {
    log::info!("running {name}");
    match cmd {
        Command::Calibrate => calibrate(cfg, out),
        Command::Jsa(_) => jsa(cfg, out),
        Command::Purity(_) => purity(cfg, out),
        Command::SweepDelay { .. } => sweep(cfg, out),
        Command::G2 { .. } => g2(cfg, out),
        Command::Hom { .. } => hom(cfg, out),
        Command::ReversedHom { .. } => reversed_hom(cfg, out),
        Command::Tomography { .. } => tomography(cfg, out),
        Command::Efficiency { .. } => efficiency(cfg, out),
        Command::ReproducePaper => reproduce(cfg, out),
    }
}

fn calibrate(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let targets = cfg.dispersion.targets.unwrap_or(CalibrationTargets {
        length: cfg.geometry.length,
        ..Default::default()
    });
    let measured = measure_targets(&m, targets.signal_nm, targets.idler_nm, targets.length)?;
    Ok(json!({
        "model": m,
        "targets": targets,
        "measured": measured,
        "operating_point": targets.operating_point(),
    }))
}

fn jsa(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let f = delayed_jsa(cfg, &m, out)?;
    out.write_jsi("jsi", &f)?;
    let (ps, pi) = f.peak_nm();
    Ok(json!({
        "tau_ps": cfg.split.tau * 1e12,
        "peak_signal_nm": ps,
        "peak_idler_nm": pi,
        "signal_fwhm_nm": signal_axis_fwhm_nm(&f)?,
        "edge_ratio": f.edge_ratio,
        "brightness": sfwm_core::brightness(&f),
        "grid": f.grid,
        "files": ["jsi.csv", "jsi.pgm"],
    }))
}

fn purity(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let f = delayed_jsa(cfg, &m, out)?;
    let s = timed(out, "svd", || schmidt_decompose(&f))?;
    let fl = &cfg.filter;
    let (filtered, fraction) = apply_filter(
        &f,
        band(fl.signal_center_nm, fl.width_nm),
        band(fl.idler_center_nm, fl.width_nm),
    )?;
    let sf = schmidt_decompose(&filtered)?;
    let (hs, hi) = timed(out, "heralded", || {
        (heralded_rho(&f, Side::Signal).purity(), heralded_rho(&f, Side::Idler).purity())
    });
    let rows: Vec<Vec<f64>> = s.coefficients.iter().take(50).enumerate().map(|(n, l)| vec![n as f64, *l]).collect();
    out.write_table("schmidt.csv", &["mode", "lambda"], &rows)?;
    Ok(json!({
        "tau_ps": cfg.split.tau * 1e12,
        "schmidt_purity": s.purity,
        "schmidt_number": s.schmidt_number,
        "schmidt_coefficients": s.top(10),
        "jsi_purity": jsi_purity(&jsi_of(&f))?,
        "heralded_signal_purity": hs,
        "heralded_idler_purity": hi,
        "filter_fraction": fraction,
        "filtered_schmidt_purity": sf.purity,
        "edge_ratio": f.edge_ratio,
    }))
}

fn lenient(cfg: &RunConfig) -> JsaOptions {
    JsaOptions {
        coverage: CoveragePolicy::lenient(),
        ..cfg.jsa
    }
}

fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let sw = timed(out, "sweep", || {
        sweep_delay(
            &m,
            &cfg.pump,
            &cfg.split,
            &cfg.geometry,
            &cfg.grid,
            [cfg.sweep.tau_min, cfg.sweep.tau_max],
            cfg.sweep.steps,
            &lenient(cfg),
        )
    })?;
    let rows: Vec<Vec<f64>> = sw
        .points
        .iter()
        .map(|p| vec![p.tau * 1e12, p.purity, p.brightness, p.edge_ratio])
        .collect();
    out.write_table("sweep.csv", &["tau_ps", "purity", "brightness", "edge_ratio"], &rows)?;
    Ok(json!({
        "step_ps": sw.step() * 1e12,
        "tau_max_purity_ps": sw.tau_at_max_purity() * 1e12,
        "tau_max_brightness_ps": sw.tau_at_max_brightness() * 1e12,
        "max_purity": sw.points[sw.argmax_purity].purity,
        "points": sw.points,
    }))
}

fn g2(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let f = delayed_jsa(cfg, &m, out)?;
    let s = schmidt_decompose(&f)?;
    let o = &cfg.oracle;
    let d = &cfg.detectors;
    let weights = s.top(o.schmidt_modes.min(3));
    let sq = MultimodeSqueezer::with_tanh2(o.tanh2, &weights)?;
    let oracle = timed(out, "unheralded_oracle", || g2_unheralded_oracle(&sq, o.cutoff))?;
    let mus = sfwm_core::quad::linspace(o.mu_min, o.mu_max, o.mu_points);
    let gh = timed(out, "heralded_oracle", || {
        mus.iter()
            .map(|&mu| g2_heralded_at(mu, &d.herald, &d.signal, o.cutoff))
            .collect::<sfwm_core::Result<Vec<f64>>>()
    })?;
    let rows: Vec<Vec<f64>> = mus.iter().zip(&gh).map(|(a, b)| vec![*a, *b]).collect();
    out.write_table("g2_heralded.csv", &["mean_pairs", "g2_heralded"], &rows)?;
    let mu_op = mean_pairs_for_heralded_g2(o.heralded_g2, &d.herald, &d.signal, 6)?;
    let rates = synthetic_rates(&sq, &d.signal, &d.herald, cfg.pump.rep_rate, o.cutoff)?;
    let est = squeezing_from_rates(&rates, sq.purity())?;
    Ok(json!({
        "schmidt_weights": weights,
        "tanh2": o.tanh2,
        "g2_unheralded_closed_form": g2_unheralded(&sq),
        "g2_unheralded_oracle": oracle,
        "purity": sq.purity(),
        "g2_heralded": rows,
        "g2_heralded_slope": fit_slope(&mus, &gh),
        "mean_pairs_at_target_g2_heralded": mu_op,
        "target_g2_heralded": o.heralded_g2,
        "synthetic_rates": rates,
        "squeezing_estimate": est,
        "definitions": {
            "g2_unheralded": G2_UNHERALDED_DEFINITION,
            "g2_heralded": G2_HERALDED_DEFINITION,
        },
    }))
}

fn hom(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let m = model(cfg, out)?;
    let f1 = delayed_jsa(cfg, &m, out)?;
    let f2 = compute_jsa_with(&m, &cfg.pump, &cfg.split, &cfg.geometry, &cfg.grid, &cfg.jsa)?;
    let v = heralded_rho(&f1, Side::Signal).overlap(&heralded_rho(&f2, Side::Signal))?;
    let d = &cfg.detectors;
    let noise = if cfg.interference.multiphoton {
        let mu = mean_pairs_for_heralded_g2(cfg.oracle.heralded_g2, &d.herald, &d.signal, 6)?;
        Some(MultiphotonNoise {
            mean_pairs: mu,
            herald: d.herald,
            signal: d.signal,
            cutoff: cfg.oracle.cutoff,
        })
    } else {
        None
    };
    let thetas = phase_grid(cfg.interference.theta_points, 2.0 * PI);
    let r = timed(out, "hom", || hom_from_overlap(v.clamp(0.0, 1.0), &thetas, noise.as_ref()))?;
    let rows: Vec<Vec<f64>> = r.thetas.iter().zip(&r.coincidences).map(|(t, c)| vec![*t, *c]).collect();
    out.write_table("hom.csv", &["theta", "coincidence"], &rows)?;
    Ok(json!({
        "overlap": v,
        "fitted_visibility": r.fitted_visibility,
        "multiphoton": noise,
        "definition": HERALDED_HOM_DEFINITION,
    }))
}

fn reversed_hom(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let phis = phase_grid(cfg.interference.phi_points, 2.0 * PI);
    let v = cfg.interference.reversed_visibility;
    let closed = reversed_hom_fringe(v, &phis)?;
    let oracle = reversed_hom_oracle(&phis)?;
    let fit_closed = fit_fringe(&phis, &closed)?;
    let fit_oracle = fit_fringe(&phis, &oracle)?;
    let rows: Vec<Vec<f64>> = (0..phis.len()).map(|k| vec![phis[k], closed[k], oracle[k]]).collect();
    out.write_table("reversed_hom.csv", &["phi", "closed_form", "oracle"], &rows)?;
    let min = closed.iter().copied().fold(f64::INFINITY, f64::min);
    let max = closed.iter().copied().fold(0.0, f64::max);
    Ok(json!({
        "visibility": v,
        "closed_form_fit": fit_closed,
        "closed_form_min_max_ratio": min / max,
        "oracle_fit": fit_oracle,
        "definition": REVERSED_HOM_DEFINITION,
    }))
}

fn tomography(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let t = &cfg.tomography;
    let truth = model_state(t.v)?;
    let records = simulate_counts(&truth, &pauli_settings(), t.shots, cfg.seed)?;
    let opts = MleOptions {
        tolerance: t.tolerance,
        max_iterations: t.max_iterations,
    };
    let rec = timed(out, "mle", || mle_reconstruct(&records, &opts))?;
    let m = rec.state.matrix();
    let re: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| m[(i, j)].re).collect()).collect();
    let im: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| m[(i, j)].im).collect()).collect();
    let basis = ["00", "01", "10", "11"];
    out.write_table("rho_real.csv", &basis, &re)?;
    out.write_table("rho_imag.csv", &basis, &im)?;
    let counts: Vec<Value> = records
        .iter()
        .map(|r| json!({ "setting": r.setting.label(), "counts": r.counts }))
        .collect();
    Ok(json!({
        "v": t.v,
        "shots": t.shots,
        "seed": cfg.seed,
        "rho_real": re,
        "rho_imag": im,
        "fidelity": fidelity(&rec.state, &phi_plus()),
        "model_fidelity": fidelity(&truth, &phi_plus()),
        "v_hat": indistinguishability_from_rho(&rec.state),
        "iterations": rec.diagnostics.iterations,
        "diagnostics": rec.diagnostics,
        "records": counts,
    }))
}

fn efficiency(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let e = &cfg.efficiency;
    let m = model(cfg, out)?;
    let profile = match e.profile {
        Some(p) => p,
        None => GenerationProfile::pump_overlap(&cfg.pump, &cfg.split, m.walk_off()?)?,
    };
    let intrinsic = intrinsic_heralding(&cfg.geometry, &profile)?;
    let ff = match e.filter_fraction {
        Some(f) => f,
        None => {
            let f = delayed_jsa(cfg, &m, out)?;
            let fl = &cfg.filter;
            apply_filter(&f, band(fl.signal_center_nm, fl.width_nm), band(fl.idler_center_nm, fl.width_nm))?.1
        }
    };
    let characterised = detected_heralding(intrinsic, ff, &e.budget)?;
    let excess = infer_excess_loss(e.reference_intrinsic, e.measured_detected, ff, &e.budget, "excess (inferred)")?;
    let full = e.budget.clone().with(excess.clone());
    let inferred = infer_intrinsic(e.measured_detected, ff, &full)?;
    let without_excess = match infer_intrinsic(e.measured_detected, ff, &e.budget) {
        Ok(v) => json!(v),
        Err(err) => json!({ "error": err.to_string() }),
    };
    Ok(json!({
        "generation_profile": profile,
        "intrinsic_predicted": intrinsic,
        "filter_fraction": ff,
        "characterised_report": characterised,
        "excess_loss": excess,
        "excess_loss_db": -excess.transmission_db,
        "report_with_excess": detected_heralding(e.reference_intrinsic, ff, &full)?,
        "measured_detected": e.measured_detected,
        "inferred_intrinsic": inferred,
        "inferred_intrinsic_without_excess": without_excess,
        "detector_db": transmission_to_db(cfg.detectors.signal.efficiency),
    }))
}

fn reproduce(cfg: &RunConfig, out: &mut Outputs) -> Res {
    let ctx = timed(out, "setup", || Context::new(cfg.clone()))?;
    let mut outcomes = Vec::new();
    for id in 1..=11u8 {
        let o = run_criterion(&ctx, id);
        say(&o.summary_line());
        out.timings.insert(format!("criterion_{id:02}"), o.seconds);
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    say(&format!("{passed}/{} criteria passed", outcomes.len()));
    Ok(json!({
        "passed": passed,
        "total": outcomes.len(),
        "all_passed": passed == outcomes.len(),
        "criteria": outcomes,
    }))
}
