//! Classical dynamics of the driven rotor-vibrator in the rotating
//! variables (n, ψ, p, θ), where φ is ignorable and k is conserved.

mod critical;
mod lyapunov;
mod section;

pub use critical::{critical_points, Branch};
pub use lyapunov::{
    chaos_scan, largest_lyapunov, ChaosScan, LyapunovEstimate, LyapunovSettings, ScanRow,
};
pub use section::{poincare_section, poincare_section_until, SectionAborted, SectionPoint};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, OdeSystem, StepStats, Tolerances};
use crate::params::{CodeConstants, ModelParameters};

/// Guard on sin θ below which the centrifugal terms are treated as singular.
pub const SIN_THETA_GUARD: f64 = 1e-6;
/// Guard on n + 1/2 below which the action-angle pair is treated as singular.
pub const ACTION_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub n: f64,
    pub psi: f64,
    pub p: f64,
    pub theta: f64,
}

impl ClassicalState {
    pub fn new(n: f64, psi: f64, p: f64, theta: f64) -> Self {
        Self { n, psi, p, theta }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.n, self.psi, self.p, self.theta]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }

    /// Same state with ψ reduced to [0, 2π).
    pub fn reduced(self) -> Self {
        Self {
            psi: self.psi.rem_euclid(TAU),
            ..self
        }
    }
}

/// Transformed Hamiltonian in code units.
pub fn hamiltonian(state: &ClassicalState, params: &ModelParameters) -> Result<f64> {
    let c = params.code();
    let s = state.n + 0.5;
    let sin_t = state.theta.sin();
    if s < 0.0 {
        return Err(Error::Domain(format!("n = {} is below -1/2", state.n)));
    }
    if sin_t == 0.0 {
        return Err(Error::Domain("sin(theta) = 0".into()));
    }
    let centrifugal = (c.k + s).powi(2) / (sin_t * sin_t);
    Ok(
        c.detuning * s - c.anharmonicity * s * s + c.beta * (state.p * state.p + centrifugal)
            - 0.5 * c.drive * s.sqrt() * sin_t * state.psi.cos(),
    )
}

/// Hamilton's equations `(dn/dτ, dψ/dτ, dp/dτ, dθ/dτ)`.
pub fn eom_rhs(state: &ClassicalState, params: &ModelParameters) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    rhs_into(&params.code(), &state.to_array(), &mut out)?;
    Ok(out)
}

fn rhs_into(c: &CodeConstants, y: &[f64], out: &mut [f64]) -> Result<()> {
    let (n, psi, p, theta) = (y[0], y[1], y[2], y[3]);
    let s = n + 0.5;
    let (sin_t, cos_t) = theta.sin_cos();
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
    if !(s >= ACTION_GUARD) {
        return Err(Error::Domain(format!("n + 1/2 = {s:e} below guard")));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
    if !(sin_t >= SIN_THETA_GUARD) {
        return Err(Error::Domain(format!("sin(theta) = {sin_t:e} below guard")));
    }
    let (sin_psi, cos_psi) = psi.sin_cos();
    let root_s = s.sqrt();
    let ks = c.k + s;
    let half_w = 0.5 * c.drive;
    out[0] = -half_w * root_s * sin_t * sin_psi;
    out[1] = c.detuning - 2.0 * c.anharmonicity * s + 2.0 * c.beta * ks / (sin_t * sin_t)
        - 0.25 * c.drive / root_s * sin_t * cos_psi;
    out[2] = 2.0 * c.beta * ks * ks * cos_t / (sin_t * sin_t * sin_t)
        + half_w * root_s * cos_t * cos_psi;
    out[3] = 2.0 * c.beta * p;
    Ok(())
}

/// The four-dimensional flow as an ODE system on `[n, ψ, p, θ]`.
#[derive(Debug, Clone, Copy)]
pub struct ClassicalSystem {
    constants: CodeConstants,
}

impl ClassicalSystem {
    pub fn new(params: &ModelParameters) -> Self {
        Self {
            constants: params.code(),
        }
    }
}

impl OdeSystem for ClassicalSystem {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        rhs_into(&self.constants, y, dydt)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(τ, state)` at the start and after every accepted step.
    pub samples: Vec<(f64, ClassicalState)>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, ClassicalState) {
        self.samples
            .last()
            .expect("trajectory holds the initial sample")
    }
}

fn check_initial(initial: &ClassicalState, params: &ModelParameters) -> Result<ClassicalState> {
    params.validate()?;
    let reduced = initial.reduced();
    // Trips the same guards the integrator uses.
    eom_rhs(&reduced, params).map_err(|e| match e {
        Error::Domain(reason) => Error::Singularity { tau: 0.0, reason },
        other => other,
    })?;
    Ok(reduced)
}

/// Integrates from τ = 0 to `tau_end`, recording every accepted step.
/// The initial ψ is reduced to [0, 2π) first.
pub fn integrate(
    initial: &ClassicalState,
    params: &ModelParameters,
    tau_end: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    let start = check_initial(initial, params)?;
    let sys = ClassicalSystem::new(params);
    let mut stepper = Dopri5::new(&sys, 0.0, &start.to_array(), tol)?;
    let mut samples = vec![(0.0, start)];
    while stepper.t() < tau_end {
        stepper.step(tau_end)?;
        samples.push((stepper.t(), ClassicalState::from_slice(stepper.y())));
    }
    Ok(Trajectory {
        samples,
        stats: stepper.stats(),
    })
}

/// Largest relative deviation of the Hamiltonian from its initial value.
pub fn max_energy_drift(traj: &Trajectory, params: &ModelParameters) -> Result<f64> {
    let h0 = hamiltonian(&traj.samples[0].1, params)?;
    let mut worst: f64 = 0.0;
    for (_, s) in &traj.samples {
        worst = worst.max((hamiltonian(s, params)? - h0).abs());
    }
    Ok(worst / h0.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::geo_preset;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hamiltonian_at_rest_without_drive() {
        let s = ClassicalState::new(0.0, 0.0, 0.0, FRAC_PI_2);
        let h = hamiltonian(&s, &geo_preset()).unwrap();
        // 15·0.5 − 2.2·0.25 + 0.48·0.25
        assert!((h - 7.07).abs() < 1e-12, "{h}");
    }

    #[test]
    fn drive_term_vanishes_at_quarter_phase() {
        let s = ClassicalState::new(1.3, FRAC_PI_2, 0.4, 1.1);
        let a = hamiltonian(&s, &geo_preset()).unwrap();
        let b = hamiltonian(&s, &geo_preset().with_drive(0.7)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_is_periodic_in_psi() {
        let p = geo_preset().with_drive(0.3);
        let a = hamiltonian(&ClassicalState::new(2.0, 0.0, 0.0, FRAC_PI_2), &p).unwrap();
        let b = hamiltonian(&ClassicalState::new(2.0, TAU, 0.0, FRAC_PI_2), &p).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_domain_errors() {
        let p = geo_preset();
        assert!(hamiltonian(&ClassicalState::new(0.0, 0.0, 0.0, 0.0), &p).is_err());
        assert!(hamiltonian(&ClassicalState::new(-0.6, 0.0, 0.0, 1.0), &p).is_err());
    }

    #[test]
    fn rhs_structure() {
        let free = geo_preset();
        let s = ClassicalState::new(1.2, 0.7, 0.3, 1.0);
        assert_eq!(eom_rhs(&s, &free).unwrap()[0], 0.0);
        let still = ClassicalState::new(1.2, 0.7, 0.0, 1.0);
        assert_eq!(
            eom_rhs(&still, &geo_preset().with_drive(0.5)).unwrap()[3],
            0.0
        );
    }

    #[test]
    fn rhs_guards() {
        let p = geo_preset();
        assert!(eom_rhs(&ClassicalState::new(1.0, 0.0, 0.0, 1e-7), &p).is_err());
        assert!(eom_rhs(&ClassicalState::new(-0.5, 0.0, 0.0, 1.0), &p).is_err());
        assert!(eom_rhs(&ClassicalState::new(-0.5 + 1e-9, 0.0, 0.0, 1.0), &p).is_ok());
    }

    /// Centered finite differences of the Hamiltonian reproduce the
    /// right-hand side: dn = −∂H/∂ψ, dψ = ∂H/∂n, dp = −∂H/∂θ, dθ = ∂H/∂p.
    #[test]
    fn rhs_is_hamiltonian_gradient() {
        let params = geo_preset().with_drive(0.9).with_k(1);
        let s = ClassicalState::new(1.7, 2.1, -0.4, 1.2);
        let h = 1e-5;
        let hv = |f: &dyn Fn(&mut ClassicalState)| {
            let mut a = s;
            f(&mut a);
            hamiltonian(&a, &params).unwrap()
        };
        let d = |set: &dyn Fn(&mut ClassicalState, f64)| {
            (hv(&|x| set(x, h)) - hv(&|x| set(x, -h))) / (2.0 * h)
        };
        let dh_dn = d(&|x, e| x.n += e);
        let dh_dpsi = d(&|x, e| x.psi += e);
        let dh_dp = d(&|x, e| x.p += e);
        let dh_dtheta = d(&|x, e| x.theta += e);
        let r = eom_rhs(&s, &params).unwrap();
        assert!((r[0] + dh_dpsi).abs() < 1e-8);
        assert!((r[1] - dh_dn).abs() < 1e-8);
        assert!((r[2] + dh_dtheta).abs() < 1e-8);
        assert!((r[3] - dh_dp).abs() < 1e-8);
    }

    #[test]
    fn undriven_action_is_constant() {
        let p = geo_preset();
        let traj = integrate(
            &ClassicalState::new(1.5, 0.3, 0.0, 1.0),
            &p,
            200.0,
            Tolerances::new(1e-10, 1e-12),
        )
        .unwrap();
        for (_, s) in &traj.samples {
            assert!((s.n - 1.5).abs() < 1e-10);
        }
        assert!(traj.samples.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn pole_start_is_rejected() {
        let err = integrate(
            &ClassicalState::new(1.0, 0.0, 0.0, 0.0),
            &geo_preset(),
            1.0,
            Tolerances::new(1e-8, 1e-10),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }), "{err:?}");
    }

    #[test]
    fn figure_one_start_runs() {
        let p = geo_preset().with_drive(0.048);
        let traj = integrate(
            &ClassicalState::new(1.0, 0.0, 0.0, 1.0),
            &p,
            5000.0,
            Tolerances::new(1e-10, 1e-12),
        )
        .unwrap();
        assert_eq!(traj.last().0, 5000.0);
        assert!(max_energy_drift(&traj, &p).unwrap() < 1e-6);
    }
}
