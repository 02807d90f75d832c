//! Poincaré sections at θ = π/2 crossed upward (p > 0).

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::Serialize;
use thiserror::Error;

use super::{check_initial, ClassicalState, ClassicalSystem};
use crate::error::Error;
use crate::ode::{Dopri5, Tolerances};
use crate::params::ModelParameters;

const MAX_BISECTIONS: usize = 60;
const CROSSING_TOL: f64 = 1e-12;
const TANGENTIAL_P: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionPoint {
    pub tau: f64,
    /// ψ reduced to [0, 2π).
    pub psi_mod: f64,
    pub n: f64,
    /// Full state at the crossing, from the dense output.
    #[serde(skip)]
    pub state: ClassicalState,
}

/// A section run that stopped early; carries what was collected.
#[derive(Debug, Error)]
#[error("section aborted after {} crossings: {source}", .points.len())]
pub struct SectionAborted {
    pub points: Vec<SectionPoint>,
    #[source]
    pub source: Error,
}

/// Collects `n_crossings` upward crossings of θ = π/2.
pub fn poincare_section(
    initial: &ClassicalState,
    params: &ModelParameters,
    n_crossings: usize,
    tol: Tolerances,
) -> Result<Vec<SectionPoint>, SectionAborted> {
    poincare_section_until(initial, params, n_crossings, tol, 1e9)
}

/// As [`poincare_section`], giving up once τ reaches `tau_max`.
pub fn poincare_section_until(
    initial: &ClassicalState,
    params: &ModelParameters,
    n_crossings: usize,
    tol: Tolerances,
    tau_max: f64,
) -> Result<Vec<SectionPoint>, SectionAborted> {
    let mut points = Vec::with_capacity(n_crossings);
    let abort = |points, source| SectionAborted { points, source };
    let start = match check_initial(initial, params) {
        Ok(s) => s,
        Err(e) => return Err(abort(points, e)),
    };
    let sys = ClassicalSystem::new(params);
    let mut stepper = match Dopri5::new(&sys, 0.0, &start.to_array(), tol) {
        Ok(s) => s,
        Err(e) => return Err(abort(points, e)),
    };
    let mut full = [0.0; 4];
    let mut g_prev = start.theta - FRAC_PI_2;
    while points.len() < n_crossings {
        if stepper.t() >= tau_max {
            let e = Error::Domain(format!(
                "only {} of {n_crossings} crossings before tau = {tau_max}",
                points.len()
            ));
            return Err(abort(points, e));
        }
        if let Err(e) = stepper.step(tau_max) {
            return Err(abort(points, e));
        }
        let g_next = stepper.y()[3] - FRAC_PI_2;
        if g_prev < 0.0 && g_next >= 0.0 {
            let (t0, t1) = stepper.last_step().expect("a step was just accepted");
            let tc = refine_crossing(&stepper, t0, t1);
            stepper.dense_eval(tc, &mut full);
            let state = ClassicalState::from_slice(&full);
            if state.p > TANGENTIAL_P {
                points.push(SectionPoint {
                    tau: tc,
                    psi_mod: state.psi.rem_euclid(TAU),
                    n: state.n,
                    state,
                });
            }
        }
        g_prev = g_next;
    }
    Ok(points)
}

/// Bisection on the interpolated θ over one step bracketing the crossing.
fn refine_crossing(stepper: &Dopri5<'_, ClassicalSystem>, t0: f64, t1: f64) -> f64 {
    let g = |t: f64| stepper.dense_component(t, 3) - FRAC_PI_2;
    let (mut lo, mut hi) = (t0, t1);
    let mut best = (t1, g(t1).abs());
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() < best.1 {
            best = (mid, gm.abs());
        }
        if gm.abs() < CROSSING_TOL {
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.0
}
