//! Expectation values computed from interaction-picture amplitudes.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::CoefficientVector;
use crate::quantum::{Basis, BasisIndex};

/// Below this |⟨e^{iϑ̂}⟩| the phase argument is reported as invalid.
pub const PHASE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Populations {
    pub per_state: Vec<f64>,
    pub total: f64,
}

pub fn populations(d: &CoefficientVector) -> Populations {
    let per_state: Vec<f64> = d.values.iter().map(|v| v.norm_sqr()).collect();
    let total = per_state.iter().sum();
    Populations { per_state, total }
}

/// Position of (n+1, l, m) for each state, if retained.
fn raised(basis: &Basis) -> Vec<Option<usize>> {
    basis
        .states()
        .iter()
        .map(|s| basis.index_of(BasisIndex { n: s.n + 1, ..*s }))
        .collect()
}

/// (⟨X̂⟩, ⟨P̂⟩) with X̂ = (a + a†)/2 and P̂ = (a − a†)/(2i), i.e. the real
/// and imaginary parts of ⟨a⟩ = Σ √(n+1) D*_{nlm} D_{n+1,lm}.
pub fn xp_expectation(d: &CoefficientVector) -> (f64, f64) {
    let mut a = Complex64::new(0.0, 0.0);
    for (i, up) in raised(&d.basis).into_iter().enumerate() {
        if let Some(j) = up {
            let n = d.basis.state(i).n as f64;
            a += (n + 1.0).sqrt() * d.values[i].conj() * d.values[j];
        }
    }
    (a.re, a.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumberPhase {
    pub n_mean: f64,
    /// ⟨e^{iϑ̂}⟩ = Σ D*_{n+1,lm} D_{nlm}
    pub phase_mean: Complex64,
    /// Argument of `phase_mean` in (−π, π]; 0 when invalid.
    pub arg_phase: f64,
    pub phase_valid: bool,
}

pub fn number_phase_expectation(d: &CoefficientVector) -> NumberPhase {
    let mut n_mean = 0.0;
    let mut phase = Complex64::new(0.0, 0.0);
    for (i, up) in raised(&d.basis).into_iter().enumerate() {
        n_mean += d.basis.state(i).n as f64 * d.values[i].norm_sqr();
        if let Some(j) = up {
            phase += d.values[j].conj() * d.values[i];
        }
    }
    let phase_valid = phase.norm() > PHASE_FLOOR;
    let mut arg_phase = if phase_valid { phase.arg() } else { 0.0 };
    if arg_phase == -std::f64::consts::PI {
        arg_phase = std::f64::consts::PI;
    }
    NumberPhase {
        n_mean,
        phase_mean: phase,
        arg_phase,
        phase_valid,
    }
}

/// ⟨k̂⟩ = Σ (m − n − ½) |D_{nlm}|²
pub fn k_expectation(d: &CoefficientVector) -> f64 {
    d.values
        .iter()
        .zip(d.basis.states())
        .map(|(v, s)| (s.m as f64 - s.n as f64 - 0.5) * v.norm_sqr())
        .sum()
}

/// Weight on the highest retained n or l shell.
pub fn boundary_population(d: &CoefficientVector) -> f64 {
    d.values
        .iter()
        .zip(d.basis.states())
        .filter(|(_, s)| d.basis.on_boundary(**s))
        .map(|(v, _)| v.norm_sqr())
        .sum()
}

/// Relative weights of the nine m = 0 states of the Poisson-like start,
/// indexed by (n, l); they sum to 12.
pub const POISSON_LIKE_WEIGHTS: [[f64; 3]; 3] =
    [[1.5, 0.2, 0.05], [8.0, 0.4, 0.1], [1.5, 0.2, 0.05]];

/// Real amplitudes √(w/12) on (n, l, 0) for n, l ≤ 2, zero elsewhere.
pub fn initial_state_poisson_like(basis: Arc<Basis>) -> Result<CoefficientVector> {
    let mut values = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (n, row) in POISSON_LIKE_WEIGHTS.iter().enumerate() {
        for (l, w) in row.iter().enumerate() {
            let idx = BasisIndex {
                n: n as u32,
                l: l as u32,
                m: 0,
            };
            let pos = basis.index_of(idx).ok_or_else(|| {
                Error::Basis(format!("basis lacks {idx} needed by the initial state"))
            })?;
            values[pos] = Complex64::new((w / 12.0).sqrt(), 0.0);
        }
    }
    CoefficientVector::new(basis, values, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSample {
    pub tau: f64,
    pub total_norm: f64,
    /// Populations of the requested states, in request order.
    pub populations: Vec<f64>,
    pub x_mean: f64,
    pub p_mean: f64,
    pub n_mean: f64,
    pub phase_mean: Complex64,
    pub arg_phase: f64,
    pub phase_valid: bool,
    pub k_mean: f64,
    pub boundary_population: f64,
}

pub fn observe(d: &CoefficientVector, tracked: &[BasisIndex]) -> Result<ObservableSample> {
    let pops = tracked
        .iter()
        .map(|idx| {
            d.population(*idx)
                .ok_or_else(|| Error::Basis(format!("tracked state {idx} not in basis")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (x_mean, p_mean) = xp_expectation(d);
    let np = number_phase_expectation(d);
    Ok(ObservableSample {
        tau: d.tau,
        total_norm: d.norm_sqr(),
        populations: pops,
        x_mean,
        p_mean,
        n_mean: np.n_mean,
        phase_mean: np.phase_mean,
        arg_phase: np.arg_phase,
        phase_valid: np.phase_valid,
        k_mean: k_expectation(d),
        boundary_population: boundary_population(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::geo_preset;
    use crate::quantum::build_basis;
    use std::f64::consts::PI;

    fn idx(n: u32, l: u32, m: i32) -> BasisIndex {
        BasisIndex { n, l, m }
    }

    fn basis() -> Arc<Basis> {
        Arc::new(build_basis(3, 3, &geo_preset(), None).unwrap())
    }

    fn two_number_states(c0: Complex64, c1: Complex64) -> CoefficientVector {
        let b = basis();
        let mut v = vec![Complex64::new(0.0, 0.0); b.len()];
        v[b.index_of(idx(0, 0, 0)).unwrap()] = c0;
        v[b.index_of(idx(1, 0, 0)).unwrap()] = c1;
        CoefficientVector::new(b, v, 0.0).unwrap()
    }

    #[test]
    fn poisson_like_state() {
        let d = initial_state_poisson_like(basis()).unwrap();
        assert!((d.population(idx(1, 0, 0)).unwrap() - 8.0 / 12.0).abs() < 1e-15);
        assert!((d.amplitude(idx(1, 0, 0)).unwrap().re - 0.816496580927726).abs() < 1e-15);
        assert!((d.amplitude(idx(0, 2, 0)).unwrap().re - (0.05f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!((populations(&d).total - 1.0).abs() < 1e-15);
        assert_eq!(d.values.iter().filter(|v| v.norm() != 0.0).count(), 9);
        // Every component sits at m − n − ½ ∈ {−½, −3/2, −5/2} with weights 1.75, 8.5, 1.75.
        assert!((k_expectation(&d) + 1.5).abs() < 1e-15);
        let small = Arc::new(build_basis(1, 3, &geo_preset(), None).unwrap());
        assert!(initial_state_poisson_like(small).is_err());
    }

    #[test]
    fn zero_vector() {
        let b = basis();
        let d = CoefficientVector::new(b.clone(), vec![Complex64::new(0.0, 0.0); b.len()], 0.0)
            .unwrap();
        let p = populations(&d);
        assert_eq!(p.total, 0.0);
        assert!(p.per_state.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn xp_values() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let d = CoefficientVector::basis_state(basis(), idx(2, 1, 0)).unwrap();
        assert_eq!(xp_expectation(&d), (0.0, 0.0));
        let (x, p) = xp_expectation(&two_number_states(
            Complex64::new(r, 0.0),
            Complex64::new(r, 0.0),
        ));
        assert!((x - 0.5).abs() < 1e-15 && p.abs() < 1e-15);
        let (x, p) = xp_expectation(&two_number_states(
            Complex64::new(r, 0.0),
            Complex64::new(0.0, r),
        ));
        assert!(x.abs() < 1e-15 && (p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn number_phase_values() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let d = CoefficientVector::basis_state(basis(), idx(2, 1, 1)).unwrap();
        let np = number_phase_expectation(&d);
        assert_eq!(np.n_mean, 2.0);
        assert_eq!(np.phase_mean, Complex64::new(0.0, 0.0));
        assert!(!np.phase_valid);
        assert_eq!(np.arg_phase, 0.0);

        let np = number_phase_expectation(&two_number_states(
            Complex64::new(r, 0.0),
            Complex64::new(r, 0.0),
        ));
        assert!((np.n_mean - 0.5).abs() < 1e-15);
        assert!((np.phase_mean - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(np.phase_valid && np.arg_phase == 0.0);

        // D*_1 D_0 = e^{−iπ/3}/2
        let d = two_number_states(Complex64::new(r, 0.0), Complex64::from_polar(r, PI / 3.0));
        let np = number_phase_expectation(&d);
        assert!((np.arg_phase + PI / 3.0).abs() < 1e-15, "{}", np.arg_phase);
    }

    #[test]
    fn k_values() {
        for s in [idx(1, 0, 0), idx(2, 1, 1)] {
            let d = CoefficientVector::basis_state(basis(), s).unwrap();
            assert_eq!(k_expectation(&d), -1.5);
        }
    }

    #[test]
    fn boundary_weight() {
        let b = basis();
        assert_eq!(
            boundary_population(&CoefficientVector::basis_state(b.clone(), idx(3, 0, 0)).unwrap()),
            1.0
        );
        assert_eq!(
            boundary_population(&CoefficientVector::basis_state(b.clone(), idx(0, 3, -2)).unwrap()),
            1.0
        );
        assert_eq!(
            boundary_population(&CoefficientVector::basis_state(b, idx(2, 2, 0)).unwrap()),
            0.0
        );
    }

    #[test]
    fn observe_collects_everything() {
        let d = initial_state_poisson_like(basis()).unwrap();
        let s = observe(&d, &[idx(1, 0, 0), idx(2, 1, 1)]).unwrap();
        assert_eq!(s.populations.len(), 2);
        assert!((s.total_norm - 1.0).abs() < 1e-15);
        assert!(s.phase_mean.norm() <= 1.0);
        assert!(observe(&d, &[idx(7, 0, 0)]).is_err());
    }
}
