//! Ladder and Susskind-Glogower phase operators as dense matrices on the
//! number states |0⟩ … |levels−1⟩.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn real(m: DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// a|n⟩ = √n |n−1⟩
pub fn annihilation(levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |r, c| {
        if c == r + 1 {
            (c as f64).sqrt()
        } else {
            0.0
        }
    })
}

pub fn creation(levels: usize) -> DMatrix<f64> {
    annihilation(levels).transpose()
}

pub fn number(levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |r, c| if r == c { r as f64 } else { 0.0 })
}

/// diag(√(n+½))
pub fn sqrt_number_half(levels: usize) -> DMatrix<f64> {
    DMatrix::from_fn(levels, levels, |r, c| {
        if r == c {
            (r as f64 + 0.5).sqrt()
        } else {
            0.0
        }
    })
}

/// e^{−iϑ̂} = (a a†)^{−1/2} a. Truncation makes a a† vanish on the top
/// level; the inverse square root is taken on the nonzero diagonal only.
pub fn exp_minus_i_phase(levels: usize) -> DMatrix<f64> {
    let a = annihilation(levels);
    let aad = &a * a.transpose();
    let inv_sqrt = DMatrix::from_fn(levels, levels, |r, c| {
        let d = aad[(r, c)];
        if r == c && d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    inv_sqrt * a
}

/// e^{iϑ̂}, the adjoint of [`exp_minus_i_phase`].
pub fn exp_i_phase(levels: usize) -> DMatrix<f64> {
    exp_minus_i_phase(levels).transpose()
}

pub fn cos_phase(levels: usize) -> DMatrix<Complex64> {
    real((exp_i_phase(levels) + exp_minus_i_phase(levels)) * 0.5)
}

/// (e^{iϑ̂} − e^{−iϑ̂}) / (2i)
pub fn sin_phase(levels: usize) -> DMatrix<Complex64> {
    real(exp_i_phase(levels) - exp_minus_i_phase(levels)) * Complex64::new(0.0, -0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raising_shift() {
        let e = exp_i_phase(8);
        for c in 0..8 {
            for r in 0..8 {
                let expected = if r == c + 1 { 1.0 } else { 0.0 };
                assert_eq!(e[(r, c)], expected, "({r},{c})");
            }
        }
    }

    #[test]
    fn number_commutators() {
        let n = 10;
        let num = real(number(n));
        let cos = cos_phase(n);
        let sin = sin_phase(n);
        let comm = &num * &cos - &cos * &num;
        let target = sin * Complex64::i();
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                assert!((comm[(r, c)] - target[(r, c)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn canonical_commutator_below_boundary() {
        let n = 12;
        let a = annihilation(n);
        let comm = &a * a.transpose() - a.transpose() * &a;
        for r in 0..n - 1 {
            for c in 0..n - 1 {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert!((comm[(r, c)] - expected).abs() < 1e-14);
            }
        }
    }
}
