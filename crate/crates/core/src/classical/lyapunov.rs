//! Largest Lyapunov exponent by the two-trajectory method, and scans of
//! it over drive strength.
//!
//! The reference and the displaced trajectory are integrated together as
//! one 8-dimensional system so both see identical step sequences; their
//! difference then tracks the linearized flow instead of the integrator's
//! independent truncation errors.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_initial, rhs_into, ClassicalState};
use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, Tolerances};
use crate::params::{CodeConstants, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSettings {
    pub tau_end: f64,
    pub renorm_interval: f64,
    /// Initial displacement along n.
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

fn default_separation() -> f64 {
    1e-9
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        Self {
            tau_end: 1e4,
            renorm_interval: 1.0,
            separation: default_separation(),
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Mean log growth rate over the second half of the run.
    pub exponent: f64,
    /// Mean over the whole run, transient included.
    pub full_run: f64,
    pub intervals: usize,
}

struct PairSystem {
    constants: CodeConstants,
}

impl OdeSystem for PairSystem {
    fn dim(&self) -> usize {
        8
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let (d_ref, d_pert) = dydt.split_at_mut(4);
        rhs_into(&self.constants, &y[..4], d_ref)?;
        rhs_into(&self.constants, &y[4..], d_pert)
    }
}

pub fn largest_lyapunov(
    initial: &ClassicalState,
    params: &ModelParameters,
    settings: &LyapunovSettings,
) -> Result<LyapunovEstimate> {
    let start = check_initial(initial, params)?;
    if !(settings.renorm_interval > 0.0 && settings.tau_end >= settings.renorm_interval) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < renorm_interval <= tau_end, got {} and {}",
            settings.renorm_interval, settings.tau_end
        )));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
    if !(settings.separation > 0.0) {
        return Err(Error::InvalidParameter(
            "separation must be positive".into(),
        ));
    }
    let tol = Tolerances::new(settings.rel_tol, settings.abs_tol);
    let d0 = settings.separation;
    let mut y = [0.0; 8];
    y[..4].copy_from_slice(&start.to_array());
    y[4..].copy_from_slice(&start.to_array());
    y[4] += d0;

    let sys = PairSystem {
        constants: params.code(),
    };
    let mut stepper = Dopri5::new(&sys, 0.0, &y, tol)?;
    let intervals = (settings.tau_end / settings.renorm_interval).floor() as usize;
    let mut growth = Vec::with_capacity(intervals);
    for i in 1..=intervals {
        let t_next = i as f64 * settings.renorm_interval;
        stepper.advance_to(t_next)?;
        y.copy_from_slice(stepper.y());
        let dist = (0..4)
            .map(|j| (y[4 + j] - y[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(dist > 0.0 && dist.is_finite()) {
            return Err(Error::Domain(format!(
                "degenerate separation {dist:e} at tau = {t_next}"
            )));
        }
        growth.push((dist / d0).ln());
        let scale = d0 / dist;
        let diff: [f64; 4] = std::array::from_fn(|j| (y[4 + j] - y[j]) * scale);
        // ψ grows without bound; keeping it near [0, 2π) stops its rounding
        // from swamping a separation of order 1e-9.
        y[1] = y[1].rem_euclid(TAU);
        for j in 0..4 {
            y[4 + j] = y[j] + diff[j];
        }
        stepper.reset(t_next, &y)?;
    }
    let dt = settings.renorm_interval;
    let second_half = &growth[intervals / 2..];
    Ok(LyapunovEstimate {
        exponent: second_half.iter().sum::<f64>() / (second_half.len() as f64 * dt),
        full_run: growth.iter().sum::<f64>() / (growth.len() as f64 * dt),
        intervals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub w: f64,
    /// Largest exponent over the initial conditions that completed.
    pub max_exponent: Option<f64>,
    /// Per-initial-condition results, in input order.
    pub cells: Vec<std::result::Result<f64, String>>,
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosScan {
    pub threshold: f64,
    pub rows: Vec<ScanRow>,
    /// Smallest W in the grid whose maximum exponent exceeds the threshold.
    pub onset_w: Option<f64>,
}

/// Runs [`largest_lyapunov`] over the product of `w_grid` and `initials`
/// in parallel. Cell failures are recorded, not propagated.
pub fn chaos_scan(
    params_base: &ModelParameters,
    w_grid: &[f64],
    initials: &[ClassicalState],
    settings: &LyapunovSettings,
    threshold: f64,
) -> Result<ChaosScan> {
    if w_grid.is_empty() || initials.is_empty() {
        return Err(Error::InvalidParameter(
            "chaos scan needs nonempty grids".into(),
        ));
    }
    let cells: Vec<(usize, usize)> = (0..w_grid.len())
        .flat_map(|i| (0..initials.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<std::result::Result<f64, String>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let params = params_base.with_drive(w_grid[i]);
            largest_lyapunov(&initials[j], &params, settings)
                .map(|e| e.exponent)
                .map_err(|e| e.to_string())
        })
        .collect();

    let rows: Vec<ScanRow> = w_grid
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let cells = results[i * initials.len()..(i + 1) * initials.len()].to_vec();
            let max_exponent = cells
                .iter()
                .filter_map(|c| c.as_ref().ok().copied())
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
            ScanRow {
                w,
                max_exponent,
                cells,
                above_threshold: max_exponent.is_some_and(|m| m > threshold),
            }
        })
        .collect();
    let onset_w = rows
        .iter()
        .filter(|r| r.above_threshold)
        .map(|r| r.w)
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.min(w))));
    Ok(ChaosScan {
        threshold,
        rows,
        onset_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::geo_preset;

    fn short() -> LyapunovSettings {
        LyapunovSettings {
            tau_end: 400.0,
            ..LyapunovSettings::default()
        }
    }

    #[test]
    fn integrable_limit_has_small_exponent() {
        let est = largest_lyapunov(
            &ClassicalState::new(1.0, 0.0, 0.0, 1.0),
            &geo_preset(),
            &short(),
        )
        .unwrap();
        assert_eq!(est.intervals, 400);
        assert!(est.exponent.abs() < 0.01, "{est:?}");
    }

    #[test]
    fn deterministic() {
        let p = geo_preset().with_drive(1.03);
        let s = ClassicalState::new(2.0, 0.0, 0.0, 1.0);
        let a = largest_lyapunov(&s, &p, &short()).unwrap();
        let b = largest_lyapunov(&s, &p, &short()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_settings() {
        let s = ClassicalState::new(1.0, 0.0, 0.0, 1.0);
        let bad = LyapunovSettings {
            renorm_interval: 0.0,
            ..short()
        };
        assert!(largest_lyapunov(&s, &geo_preset(), &bad).is_err());
    }

    #[test]
    fn scan_duplicates_and_undriven_grid() {
        let initials = [ClassicalState::new(1.0, 0.0, 0.0, 1.0)];
        let scan = chaos_scan(&geo_preset(), &[0.3, 0.3], &initials, &short(), 1.0).unwrap();
        assert_eq!(scan.rows[0].max_exponent, scan.rows[1].max_exponent);

        let only_zero = chaos_scan(&geo_preset(), &[0.0], &initials, &short(), 0.05).unwrap();
        assert_eq!(only_zero.onset_w, None);
        assert!(chaos_scan(&geo_preset(), &[], &initials, &short(), 1.0).is_err());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let initials = [
            ClassicalState::new(1.0, 0.0, 0.0, 1.0),
            ClassicalState::new(1.0, 0.0, 0.0, 0.0),
        ];
        let scan = chaos_scan(&geo_preset(), &[0.1], &initials, &short(), 1.0).unwrap();
        assert!(scan.rows[0].cells[0].is_ok());
        assert!(scan.rows[0].cells[1].is_err());
        assert!(scan.rows[0].max_exponent.is_some());
    }
}
