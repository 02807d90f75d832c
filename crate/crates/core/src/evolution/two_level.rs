use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParameters;
use crate::quantum::{couplings, energy, Basis, BasisIndex, Direction};

/// A single resonant pair with everything else neglected:
/// i D'_0 = α e^{−iΩ_r τ} D_f, i D'_f = α e^{iΩ_r τ} D_0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelParams {
    /// Coupling matrix element W_{f,0} without its drive phase.
    pub alpha: f64,
    /// E_f − E_0 − ħω for an upward pair, E_f − E_0 + ħω for a downward one.
    pub omega_r: f64,
    pub initial: BasisIndex,
    pub final_state: BasisIndex,
}

impl TwoLevelParams {
    /// Generalized Rabi frequency √(α² + (Ω_r/2)²).
    pub fn rabi_frequency(&self) -> f64 {
        self.alpha.hypot(0.5 * self.omega_r)
    }

    /// Peak transfer probability α² / Ω_R².
    pub fn max_transfer(&self) -> f64 {
        let r = self.rabi_frequency();
        if r == 0.0 {
            0.0
        } else {
            (self.alpha / r).powi(2)
        }
    }
}

pub fn two_level_parameters(
    initial: BasisIndex,
    final_state: BasisIndex,
    params: &ModelParameters,
) -> Result<TwoLevelParams> {
    params.validate()?;
    let pair = Basis::from_states(vec![initial, final_state], params)?;
    let (i0, i_f) = (
        pair.index_of(initial).unwrap(),
        pair.index_of(final_state).unwrap(),
    );
    let dn = final_state.n as i64 - initial.n as i64;
    let dm = final_state.m as i64 - initial.m as i64;
    if dn.abs() != 1 || dm != dn || initial.l.abs_diff(final_state.l) != 1 {
        return Err(Error::InvalidParameter(format!(
            "{initial} -> {final_state} is not an allowed transition"
        )));
    }
    let direction = if dn == 1 {
        Direction::Raise
    } else {
        Direction::Lower
    };
    // With W = 0 there are no couplings to read back, so use a unit drive and rescale.
    let unit = params.with_drive(1.0);
    let alpha_unit = couplings(&pair, &unit)?
        .into_iter()
        .find(|c| c.row == i_f && c.col == i0)
        .map(|c| c.amplitude)
        .ok_or_else(|| Error::InvalidParameter("pair has no coupling".into()))?;
    let c = params.code();
    let omega_r = energy(final_state.n, final_state.l, params)
        - energy(initial.n, initial.l, params)
        - direction.drive_sign() * c.omega_drive;
    Ok(TwoLevelParams {
        alpha: alpha_unit * c.drive,
        omega_r,
        initial,
        final_state,
    })
}

/// Exact amplitudes (D_0, D_f) at τ starting from D_0 = 1, D_f = 0.
pub fn rabi_solution(tl: &TwoLevelParams, tau: f64) -> (Complex64, Complex64) {
    let omega = tl.omega_r;
    let r = tl.rabi_frequency();
    if r == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let (s, c) = (r * tau).sin_cos();
    let d0 =
        Complex64::from_polar(1.0, -0.5 * omega * tau) * Complex64::new(c, 0.5 * omega / r * s);
    let df = Complex64::from_polar(1.0, 0.5 * omega * tau) * Complex64::new(0.0, -tl.alpha / r * s);
    (d0, df)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::geo_preset;

    fn idx(n: u32, l: u32, m: i32) -> BasisIndex {
        BasisIndex { n, l, m }
    }

    #[test]
    fn resonant_pair_constants() {
        let w = 0.048;
        let tl =
            two_level_parameters(idx(1, 0, 0), idx(2, 1, 1), &geo_preset().with_drive(w)).unwrap();
        // Hand evaluation: 2451.71 − 1473.75 − (985.8 − 15)
        assert!((tl.omega_r - 7.16).abs() < 1e-10, "{}", tl.omega_r);
        let expected =
            -(w / 4.0) * (1.5f64.sqrt() + 2.5f64.sqrt()) * (4.0f64 / 3.0).sqrt() / 2f64.sqrt();
        assert!((tl.alpha - expected).abs() < 1e-15);
        assert!((tl.alpha / w + 0.5728).abs() < 1e-4);
        assert!(
            (tl.max_transfer() - 5.8968e-5).abs() < 1e-8,
            "{}",
            tl.max_transfer()
        );
    }

    #[test]
    fn undriven_alpha_vanishes() {
        let tl = two_level_parameters(idx(1, 0, 0), idx(2, 1, 1), &geo_preset()).unwrap();
        assert_eq!(tl.alpha, 0.0);
        assert_eq!(rabi_solution(&tl, 3.0).1, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn forbidden_pairs() {
        let p = geo_preset().with_drive(0.1);
        assert!(two_level_parameters(idx(1, 0, 0), idx(2, 1, -1), &p).is_err());
        assert!(two_level_parameters(idx(1, 0, 0), idx(3, 1, 1), &p).is_err());
        assert!(two_level_parameters(idx(1, 0, 0), idx(2, 2, 1), &p).is_err());
        assert!(two_level_parameters(idx(1, 0, 0), idx(1, 0, 0), &p).is_err());
    }

    #[test]
    fn downward_pair() {
        let tl = two_level_parameters(idx(1, 0, 0), idx(0, 1, -1), &geo_preset().with_drive(1.0))
            .unwrap();
        // 492.35 + 0.96 − 1473.75 + 970.8
        assert!((tl.omega_r + 9.64).abs() < 1e-10);
        assert!(tl.alpha != 0.0);
    }

    #[test]
    fn rabi_limits() {
        let tl = TwoLevelParams {
            alpha: 0.3,
            omega_r: 0.0,
            initial: idx(1, 0, 0),
            final_state: idx(2, 1, 1),
        };
        let (a, b) = rabi_solution(&tl, 0.0);
        assert_eq!((a, b), (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let t = std::f64::consts::PI / (2.0 * 0.3);
        assert!((rabi_solution(&tl, t).1.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rabi_solves_the_pair_equations() {
        let tl = TwoLevelParams {
            alpha: -0.4,
            omega_r: 2.3,
            initial: idx(1, 0, 0),
            final_state: idx(2, 1, 1),
        };
        let h = 1e-5;
        for tau in [0.1, 1.7, 9.0] {
            let (a, b) = rabi_solution(&tl, tau);
            assert!((a.norm_sqr() + b.norm_sqr() - 1.0).abs() < 1e-14);
            let (ap, bp) = rabi_solution(&tl, tau + h);
            let (am, bm) = rabi_solution(&tl, tau - h);
            let da = (ap - am) / (2.0 * h);
            let db = (bp - bm) / (2.0 * h);
            let i = Complex64::i();
            let ra = i * da - tl.alpha * Complex64::from_polar(1.0, -tl.omega_r * tau) * b;
            let rb = i * db - tl.alpha * Complex64::from_polar(1.0, tl.omega_r * tau) * a;
            assert!(ra.norm() < 1e-8 && rb.norm() < 1e-8, "{ra} {rb}");
        }
    }
}
