use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    CriticalConfig, Experiment, ObservablesConfig, Picture, PoincareConfig, QuantumConfig,
    RunConfig, ScanConfig, Sink, TwoLevelConfig,
};
use crate::classical::{
    chaos_scan, critical_points, eom_rhs, poincare_section_until, ClassicalState, SectionPoint,
};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve, rabi_solution, two_level_parameters, CoefficientVector, TimeSeries,
};
use crate::observables::{boundary_population, observe, ObservableSample};
use crate::ode::Tolerances;
use crate::output::{fmt_f64, header, Mark, Plot};
use crate::params::ModelParameters;
use crate::quantum::{energy, Basis, BasisIndex};

/// Reference values the computed ones are compared against in warnings.
const REFERENCE_DETUNING: f64 = 0.82;
const BOUNDARY_WARN: f64 = 1e-3;
const NORM_WARN: f64 = 1e-9;

pub(super) fn execute(config: &RunConfig, sink: &mut Sink) -> Result<()> {
    let p = config.params;
    match &config.experiment {
        Experiment::ClassicalPoincare(c) => poincare(&p, c, sink),
        Experiment::ClassicalCritical(c) => critical(&p, c, sink),
        Experiment::ChaosScan(c) => scan(&p, c, sink),
        Experiment::QuantumEvolve(q) => quantum_evolve(&p, q, sink),
        Experiment::QuantumObservables(o) => quantum_observables(&p, o, sink),
        Experiment::TwoLevelOracle(t) => two_level(&p, t, sink),
    }
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

#[derive(Serialize)]
struct SectionSummary {
    n0: f64,
    file: String,
    crossings: usize,
    n_min: f64,
    n_max: f64,
}

fn poincare(p: &ModelParameters, c: &PoincareConfig, sink: &mut Sink) -> Result<()> {
    let tol = Tolerances::new(c.rel_tol, c.abs_tol);
    let results: Vec<(Vec<SectionPoint>, Option<Error>)> = c
        .grid
        .states()
        .par_iter()
        .map(
            |s| match poincare_section_until(s, p, c.crossings, tol, c.tau_max) {
                Ok(points) => (points, None),
                Err(aborted) => (aborted.points, Some(aborted.source)),
            },
        )
        .collect();
    let mut plot = Plot::new(
        &format!("Poincaré section θ = π/2, W = {} cm⁻¹", p.w),
        "ψ mod 2π",
        "n",
    );
    let mut summaries = Vec::new();
    let mut failure = None;
    for (i, ((points, err), n0)) in results.into_iter().zip(&c.grid.initial_n).enumerate() {
        let file = format!("section_{i:02}.csv");
        sink.csv(
            &file,
            &header(&["tau", "psi_mod", "n"]),
            points
                .iter()
                .map(|s| vec![fmt_f64(s.tau), fmt_f64(s.psi_mod), fmt_f64(s.n)]),
        )?;
        let (n_min, n_max) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.n), hi.max(s.n))
            });
        plot = plot.with(
            &format!("n₀ = {n0}"),
            points.iter().map(|s| (s.psi_mod, s.n)).collect(),
            Mark::Points,
        );
        summaries.push(SectionSummary {
            n0: *n0,
            file,
            crossings: points.len(),
            n_min,
            n_max,
        });
        if let (Some(e), None) = (err, &failure) {
            failure = Some(Error::Domain(format!("trajectory n0 = {n0}: {e}")));
        }
    }
    sink.note("trajectories", &summaries);
    if let Some(e) = failure {
        return Err(e);
    }
    sink.plot("sections.svg", &plot)
}

fn critical(p: &ModelParameters, c: &CriticalConfig, sink: &mut Sink) -> Result<()> {
    let mut rows = Vec::new();
    let mut pi_roots = Vec::new();
    for &branch in &c.branches {
        for n in critical_points(p, branch)? {
            let rhs = eom_rhs(&ClassicalState::new(n, branch.psi(), 0.0, FRAC_PI_2), p)?;
            let inf = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if branch.psi() == PI {
                pi_roots.push(n);
            }
            rows.push((branch, n, inf));
        }
    }
    sink.csv(
        "critical_points.csv",
        &header(&["psi", "n", "rhs_inf_norm"]),
        rows.iter()
            .map(|(b, n, r)| vec![fmt_f64(b.psi()), fmt_f64(*n), fmt_f64(*r)]),
    )?;
    if let Some(reference) = c.reference_n {
        for n in &pi_roots {
            if (n - reference).abs() > 0.1 {
                sink.warn(format!(
                    "resonance centre at ψ = π computed as n = {n:.4} (W = {}, k = {}); reference value is n ≈ {reference}",
                    p.w, p.k
                ));
            }
        }
    }
    sink.note("roots_psi_pi", &pi_roots);
    sink.note(
        "max_rhs_inf_norm",
        rows.iter().fold(0.0f64, |m, r| m.max(r.2)),
    );
    Ok(())
}

fn scan(p: &ModelParameters, c: &ScanConfig, sink: &mut Sink) -> Result<()> {
    let initials = c.grid.states();
    let threshold = match c.threshold {
        Some(t) => t,
        None => {
            let base = chaos_scan(p, &[0.0], &initials, &c.lyapunov, f64::INFINITY)?;
            let row = &base.rows[0];
            let baseline = row
                .cells
                .iter()
                .filter_map(|r| r.as_ref().ok())
                .fold(None, |m: Option<f64>, x| {
                    Some(m.map_or(x.abs(), |m| m.max(x.abs())))
                })
                .ok_or_else(|| Error::Domain("every W = 0 baseline trajectory failed".into()))?;
            sink.note("baseline_exponent", baseline);
            c.baseline_factor * baseline
        }
    };
    let result = chaos_scan(p, &c.w_grid, &initials, &c.lyapunov, threshold)?;
    sink.csv(
        "chaos_scan.csv",
        &header(&["W", "max_lyapunov", "onset_flag"]),
        result.rows.iter().map(|r| {
            vec![
                fmt_f64(r.w),
                fmt_f64(r.max_exponent.unwrap_or(f64::NAN)),
                flag(r.above_threshold),
            ]
        }),
    )?;
    let mut cells = Vec::new();
    for r in &result.rows {
        for (cell, n0) in r.cells.iter().zip(&c.grid.initial_n) {
            let (value, err) = match cell {
                Ok(v) => (*v, String::new()),
                Err(e) => (f64::NAN, e.clone()),
            };
            if !err.is_empty() {
                sink.warn(format!(
                    "lyapunov cell W = {}, n0 = {n0} failed: {err}",
                    r.w
                ));
            }
            cells.push(vec![fmt_f64(r.w), fmt_f64(*n0), fmt_f64(value), err]);
        }
    }
    sink.csv(
        "chaos_cells.csv",
        &header(&["W", "n0", "lyapunov", "error"]),
        cells,
    )?;
    sink.note("threshold", threshold);
    sink.note("onset_w", result.onset_w);
    let (lo, hi) = c
        .w_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &w| {
            (a.min(w), b.max(w))
        });
    let plot = Plot::new("Largest Lyapunov exponent", "W (cm⁻¹)", "max λ")
        .with(
            "max λ",
            result
                .rows
                .iter()
                .map(|r| (r.w, r.max_exponent.unwrap_or(f64::NAN)))
                .collect(),
            Mark::Line,
        )
        .with("λ_c", vec![(lo, threshold), (hi, threshold)], Mark::Line);
    sink.plot("chaos_scan.svg", &plot)
}

fn file_for(stem: &str, w: f64, sweep: bool) -> String {
    if sweep {
        format!("{stem}_W{w}.csv")
    } else {
        format!("{stem}.csv")
    }
}

fn state_label(s: BasisIndex) -> String {
    format!("|{} {} {}⟩", s.n, s.l, s.m)
}

fn write_timeseries(
    sink: &mut Sink,
    name: &str,
    ts: &TimeSeries,
    tracked: &[BasisIndex],
) -> Result<()> {
    let mut cols = vec!["tau".to_string(), "total_norm".to_string()];
    cols.extend(tracked.iter().map(|s| format!("P_{s}")));
    cols.push("boundary_population".into());
    let pos: Vec<usize> = tracked
        .iter()
        .map(|s| ts.basis.index_of(*s).expect("validated"))
        .collect();
    let rows = ts.samples.iter().map(|d| {
        let mut row = vec![fmt_f64(d.tau), fmt_f64(d.norm_sqr())];
        row.extend(pos.iter().map(|&i| fmt_f64(d.values[i].norm_sqr())));
        row.push(fmt_f64(boundary_population(d)));
        row
    });
    sink.csv(name, &cols, rows)
}

fn write_spectrum(sink: &mut Sink, basis: &Basis, p: &ModelParameters) -> Result<()> {
    let mut levels: Vec<(u32, u32)> = basis.states().iter().map(|s| (s.n, s.l)).collect();
    levels.sort_unstable();
    levels.dedup();
    sink.csv(
        "spectrum.csv",
        &header(&["n", "l", "E_nl_cm1"]),
        levels
            .iter()
            .map(|&(n, l)| vec![n.to_string(), l.to_string(), fmt_f64(energy(n, l, p))]),
    )
}

/// Flags the |100⟩ → |211⟩ detuning against the reference value.
fn detuning_flag(sink: &mut Sink, p: &ModelParameters) {
    let (a, b) = (
        BasisIndex { n: 1, l: 0, m: 0 },
        BasisIndex { n: 2, l: 1, m: 1 },
    );
    if let Ok(tl) = two_level_parameters(a, b, p) {
        sink.note("detuning_100_211_cm1", tl.omega_r);
        if (tl.omega_r.abs() - REFERENCE_DETUNING).abs() > 1e-6 {
            sink.warn(format!(
                "detuning of |1 0 0⟩ → |2 1 1⟩ computed as {:.6} cm⁻¹; reference value is {REFERENCE_DETUNING} cm⁻¹",
                tl.omega_r
            ));
        }
    }
}

#[derive(Serialize)]
struct RunHealth {
    w: f64,
    max_norm_drift: f64,
    max_k_drift: f64,
    max_boundary_population: f64,
    accepted_steps: usize,
    rejected_steps: usize,
}

fn health(sink: &mut Sink, w: f64, ts: &TimeSeries, obs: &[ObservableSample]) -> RunHealth {
    let k0 = obs[0].k_mean;
    let h = RunHealth {
        w,
        max_norm_drift: obs
            .iter()
            .map(|o| (o.total_norm - 1.0).abs())
            .fold(0.0, f64::max),
        max_k_drift: obs
            .iter()
            .map(|o| (o.k_mean - k0).abs())
            .fold(0.0, f64::max),
        max_boundary_population: obs
            .iter()
            .map(|o| o.boundary_population)
            .fold(0.0, f64::max),
        accepted_steps: ts.stats.accepted,
        rejected_steps: ts.stats.rejected,
    };
    if h.max_boundary_population > BOUNDARY_WARN {
        sink.warn(format!(
            "W = {w}: population on the truncation boundary reaches {:.3e}; raise n_max/l_max",
            h.max_boundary_population
        ));
    }
    if h.max_norm_drift > NORM_WARN {
        sink.warn(format!("W = {w}: norm drifts by {:.3e}", h.max_norm_drift));
    }
    h
}

type SweepRun = (f64, TimeSeries, Vec<ObservableSample>);

fn sweep(p: &ModelParameters, q: &QuantumConfig) -> Result<(Arc<Basis>, Vec<SweepRun>)> {
    let basis = Arc::new(q.basis(p)?);
    let d0 = q.initial_vector(basis.clone())?;
    let runs = q
        .drives(p)
        .par_iter()
        .map(|&w| {
            let ts = evolve(
                &d0,
                &p.with_drive(w),
                q.tau_end,
                q.tolerances(),
                q.sample_dt,
            )?;
            let obs = ts
                .samples
                .iter()
                .map(|d| observe(d, &q.tracked))
                .collect::<Result<Vec<_>>>()?;
            Ok((w, ts, obs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((basis, runs))
}

fn quantum_evolve(p: &ModelParameters, q: &QuantumConfig, sink: &mut Sink) -> Result<()> {
    let (basis, runs) = sweep(p, q)?;
    let is_sweep = runs.len() > 1;
    write_spectrum(sink, &basis, p)?;
    let mut plot = Plot::new("Populations", "τ", "probability");
    let mut healths = Vec::new();
    for (w, ts, obs) in &runs {
        write_timeseries(sink, &file_for("populations", *w, is_sweep), ts, &q.tracked)?;
        let tag = if is_sweep {
            format!(", W = {w}")
        } else {
            String::new()
        };
        plot = plot.with(
            &format!("total{tag}"),
            obs.iter().map(|o| (o.tau, o.total_norm)).collect(),
            Mark::Line,
        );
        for (j, s) in q.tracked.iter().enumerate() {
            let pts = obs.iter().map(|o| (o.tau, o.populations[j])).collect();
            plot = plot.with(&format!("{}{tag}", state_label(*s)), pts, Mark::Line);
        }
        healths.push(health(sink, *w, ts, obs));
    }
    sink.note("runs", &healths);
    detuning_flag(sink, p);
    sink.plot("populations.svg", &plot)
}

fn quantum_observables(p: &ModelParameters, o: &ObservablesConfig, sink: &mut Sink) -> Result<()> {
    let q = &o.run;
    let (basis, runs) = sweep(p, q)?;
    let is_sweep = runs.len() > 1;
    write_spectrum(sink, &basis, p)?;
    let mut healths = Vec::new();
    for (w, ts, obs) in &runs {
        write_timeseries(sink, &file_for("populations", *w, is_sweep), ts, &q.tracked)?;
        let cols = header(&[
            "tau",
            "total_norm",
            "n_mean",
            "x_mean",
            "p_mean",
            "re_phase",
            "im_phase",
            "arg_phase",
            "phase_valid",
            "k_mean",
        ]);
        let rows = obs.iter().map(|s| {
            vec![
                fmt_f64(s.tau),
                fmt_f64(s.total_norm),
                fmt_f64(s.n_mean),
                fmt_f64(s.x_mean),
                fmt_f64(s.p_mean),
                fmt_f64(s.phase_mean.re),
                fmt_f64(s.phase_mean.im),
                fmt_f64(s.arg_phase),
                flag(s.phase_valid),
                fmt_f64(s.k_mean),
            ]
        });
        let file = file_for("observables", *w, is_sweep);
        sink.csv(&file, &cols, rows)?;
        let stem = file.trim_end_matches(".csv");
        if matches!(o.picture, Picture::Xp | Picture::Both) {
            let plot = Plot::new(&format!("⟨X⟩ against ⟨P⟩, W = {w} cm⁻¹"), "⟨X⟩", "⟨P⟩").with(
                "(⟨X⟩, ⟨P⟩)",
                obs.iter().map(|s| (s.x_mean, s.p_mean)).collect(),
                Mark::Line,
            );
            sink.plot(&format!("{stem}_xp.svg"), &plot)?;
        }
        if matches!(o.picture, Picture::NumberPhase | Picture::Both) {
            let gap = |s: &ObservableSample, v: f64| if s.phase_valid { v } else { f64::NAN };
            let polar = obs
                .iter()
                .map(|s| {
                    (
                        gap(s, s.n_mean * s.arg_phase.cos()),
                        gap(s, s.n_mean * s.arg_phase.sin()),
                    )
                })
                .collect();
            let plot = Plot::new(
                &format!("⟨n⟩ and arg⟨e^(iϑ)⟩, W = {w} cm⁻¹"),
                "⟨n⟩ cos arg",
                "⟨n⟩ sin arg",
            )
            .with("polar", polar, Mark::Line);
            sink.plot(&format!("{stem}_number_phase.svg"), &plot)?;
            let plot = Plot::new(&format!("Number and phase, W = {w} cm⁻¹"), "τ", "value")
                .with(
                    "⟨n⟩",
                    obs.iter().map(|s| (s.tau, s.n_mean)).collect(),
                    Mark::Line,
                )
                .with(
                    "arg⟨e^(iϑ)⟩",
                    obs.iter().map(|s| (s.tau, gap(s, s.arg_phase))).collect(),
                    Mark::Line,
                );
            sink.plot(&format!("{stem}_number_phase_series.svg"), &plot)?;
        }
        healths.push(health(sink, *w, ts, obs));
    }
    sink.note("runs", &healths);
    detuning_flag(sink, p);
    Ok(())
}

fn two_level(p: &ModelParameters, t: &TwoLevelConfig, sink: &mut Sink) -> Result<()> {
    let tl = two_level_parameters(t.initial, t.final_state, p)?;
    let tol = Tolerances::new(t.rel_tol, t.abs_tol);
    let pair = Arc::new(Basis::from_states(vec![t.initial, t.final_state], p)?);
    let (i0, i_f) = (
        pair.index_of(t.initial).unwrap(),
        pair.index_of(t.final_state).unwrap(),
    );
    let ts = evolve(
        &CoefficientVector::basis_state(pair, t.initial)?,
        p,
        t.tau_end,
        tol,
        t.sample_dt,
    )?;
    let mut max_amp_err: f64 = 0.0;
    let mut max_pop_err: f64 = 0.0;
    let mut rows = Vec::with_capacity(ts.samples.len());
    let mut numeric = Vec::new();
    let mut oracle = Vec::new();
    for d in &ts.samples {
        let (a, b) = rabi_solution(&tl, d.tau);
        let err = (d.values[i0] - a).norm().max((d.values[i_f] - b).norm());
        let pf = d.values[i_f].norm_sqr();
        max_amp_err = max_amp_err.max(err);
        max_pop_err = max_pop_err.max((pf - b.norm_sqr()).abs());
        numeric.push((d.tau, pf));
        oracle.push((d.tau, b.norm_sqr()));
        rows.push(vec![
            fmt_f64(d.tau),
            fmt_f64(d.values[i0].norm_sqr()),
            fmt_f64(pf),
            fmt_f64(b.norm_sqr()),
            fmt_f64(err),
        ]);
    }
    sink.csv(
        "two_level.csv",
        &header(&[
            "tau",
            "P_initial",
            "P_final",
            "P_final_oracle",
            "amplitude_error",
        ]),
        rows,
    )?;
    sink.note("alpha", tl.alpha);
    sink.note("omega_r", tl.omega_r);
    sink.note("rabi_frequency", tl.rabi_frequency());
    sink.note("max_transfer", tl.max_transfer());
    sink.note("max_amplitude_error", max_amp_err);
    sink.note("max_population_error", max_pop_err);
    let plot = Plot::new("Two-level reduction", "τ", "P_final")
        .with("evolved", numeric, Mark::Line)
        .with("closed form", oracle, Mark::Line);
    sink.plot("two_level.svg", &plot)?;

    if let Some(f) = &t.full_basis {
        let basis = Arc::new(crate::quantum::build_basis(f.n_max, f.l_max, p, None)?);
        let full = evolve(
            &CoefficientVector::basis_state(basis, t.initial)?,
            p,
            f.tau_end,
            tol,
            f.sample_dt,
        )?;
        let tracked = [t.initial, t.final_state];
        write_timeseries(sink, "full_basis.csv", &full, &tracked)?;
        let pf_max = full
            .samples
            .iter()
            .map(|d| d.population(t.final_state).unwrap())
            .fold(0.0, f64::max);
        let pair_min = full
            .samples
            .iter()
            .map(|d| d.population(t.initial).unwrap() + d.population(t.final_state).unwrap())
            .fold(1.0, f64::min);
        sink.note("full_basis_max_final_population", pf_max);
        sink.note(
            "full_basis_ratio_to_max_transfer",
            pf_max / tl.max_transfer(),
        );
        sink.note("full_basis_min_pair_population", pair_min);
    }
    detuning_flag(sink, p);
    Ok(())
}
