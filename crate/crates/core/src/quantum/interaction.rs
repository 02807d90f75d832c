use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::{Basis, BasisIndex};
use super::elements::{ang_element, clm, vib_cos_sym, vib_sin_sym, AngularOp};
use crate::error::Result;
use crate::params::ModelParameters;

/// Whether a coupling raises (n, m) by one or lowers both by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Raise,
    Lower,
}

impl Direction {
    /// Sign s in the drive phase e^{−i s ω τ}.
    pub fn drive_sign(self) -> f64 {
        match self {
            Direction::Raise => 1.0,
            Direction::Lower => -1.0,
        }
    }
}

/// One nonzero entry W_{row,col}(τ) = amplitude · e^{−i s ω τ}, where s is
/// the direction's drive sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub amplitude: f64,
    pub direction: Direction,
}

impl Coupling {
    pub fn value(&self, omega: f64, tau: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, -self.direction.drive_sign() * omega * tau)
    }
}

/// Every nonzero entry of the coupling matrix within the basis, from the
/// closed-form expression. Transitions leaving the basis are dropped.
pub fn couplings(basis: &Basis, params: &ModelParameters) -> Result<Vec<Coupling>> {
    let quarter_w = 0.25 * params.code().drive;
    let mut out = Vec::new();
    for (col, &s) in basis.states().iter().enumerate() {
        let c_src = clm(s.l, s.m)?;
        let targets = [
            (Direction::Raise, s.n.checked_add(1), s.m + 1),
            (Direction::Lower, s.n.checked_sub(1), s.m - 1),
        ];
        for (direction, n_t, m_t) in targets {
            let Some(n_t) = n_t else { continue };
            let root_sum = (s.n as f64 + 0.5).sqrt() + (n_t as f64 + 0.5).sqrt();
            for (l_t, l_sign) in [(s.l.checked_add(1), 1.0), (s.l.checked_sub(1), -1.0)] {
                let Some(l_t) = l_t else { continue };
                if m_t.unsigned_abs() > l_t {
                    continue;
                }
                let Some(row) = basis.index_of(BasisIndex {
                    n: n_t,
                    l: l_t,
                    m: m_t,
                }) else {
                    continue;
                };
                let c_t = clm(l_t, m_t)?;
                let ratio = match direction {
                    Direction::Raise => c_t / (c_src * (2 * s.l + 1) as f64),
                    Direction::Lower => -c_src / (c_t * (2 * l_t + 1) as f64),
                };
                out.push(Coupling {
                    row,
                    col,
                    amplitude: -quarter_w * root_sum * l_sign * ratio,
                    direction,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub tau: f64,
    pub matrix: DMatrix<Complex64>,
}

impl InteractionMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Largest |W_rc − conj(W_cr)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..=r {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }
}

/// Dense coupling matrix at time τ from the closed-form entries.
pub fn interaction_matrix(
    basis: &Basis,
    params: &ModelParameters,
    tau: f64,
) -> Result<InteractionMatrix> {
    let omega = params.code().omega_drive;
    let n = basis.len();
    let mut matrix = DMatrix::zeros(n, n);
    for c in couplings(basis, params)? {
        matrix[(c.row, c.col)] += c.value(omega, tau);
    }
    Ok(InteractionMatrix { tau, matrix })
}

/// Dense coupling matrix at time τ assembled from the separate vibrational
/// and angular factors, using
/// cos(φ − ωτ) = cos φ cos ωτ + sin φ sin ωτ and
/// sin(φ − ωτ) = sin φ cos ωτ − cos φ sin ωτ.
pub fn interaction_matrix_composed(
    basis: &Basis,
    params: &ModelParameters,
    tau: f64,
) -> Result<InteractionMatrix> {
    let c = params.code();
    let (sin_wt, cos_wt) = (c.omega_drive * tau).sin_cos();
    let n = basis.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (r, &sr) in basis.states().iter().enumerate() {
        for (col, &sc) in basis.states().iter().enumerate() {
            let vc = vib_cos_sym(sr.n, sc.n);
            let vs = vib_sin_sym(sr.n, sc.n);
            if vc == 0.0 && vs.norm() == 0.0 {
                continue;
            }
            let cos_phi = ang_element(sr.l, sr.m, sc.l, sc.m, AngularOp::SinThetaCosPhi)?;
            let sin_phi = ang_element(sr.l, sr.m, sc.l, sc.m, AngularOp::SinThetaSinPhi)?;
            let cos_part = cos_phi * cos_wt + sin_phi * sin_wt;
            let sin_part = sin_phi * cos_wt - cos_phi * sin_wt;
            matrix[(r, col)] = -0.5 * c.drive * (vc * cos_part - vs * sin_part);
        }
    }
    Ok(InteractionMatrix { tau, matrix })
}

/// Writes the nonzero entries as `row col re im` lines.
pub fn write_matrix_coo<W: Write>(m: &InteractionMatrix, mut out: W) -> Result<()> {
    writeln!(out, "# dim {} tau {:.16e}", m.dim(), m.tau)?;
    for r in 0..m.dim() {
        for c in 0..m.dim() {
            let v = m.matrix[(r, c)];
            if v.norm() != 0.0 {
                writeln!(out, "{r} {c} {:.16e} {:.16e}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}
