//! Closed-form matrix elements of the vibrational phase operators and the
//! angular factors sin θ cos φ, sin θ sin φ.

use num_complex::Complex64;

use crate::error::{Error, Result};

const FACTORIALS: [u64; 21] = {
    let mut f = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        f[i] = f[i - 1] * i as u64;
        i += 1;
    }
    f
};

fn check_lm(l: u32, m: i32) -> Result<()> {
    if m.unsigned_abs() > l {
        return Err(Error::Domain(format!("|m| > l for (l, m) = ({l}, {m})")));
    }
    Ok(())
}

/// c_lm from the exact factorial table; valid for l + |m| ≤ 20.
pub(crate) fn clm_integer(l: u32, m: i32) -> f64 {
    let hi = (l as i64 + m as i64) as usize;
    let lo = (l as i64 - m as i64) as usize;
    let ratio = FACTORIALS[hi] as f64 / FACTORIALS[lo] as f64;
    (2.0 * ratio / (2 * l + 1) as f64).sqrt()
}

/// c_lm as a product over the 2|m| factors of (l+m)!/(l−m)! that do not cancel.
pub(crate) fn clm_float(l: u32, m: i32) -> f64 {
    let (l, m) = (l as i64, m as i64);
    let prod: f64 = ((l - m.abs() + 1)..=(l + m.abs()))
        .map(|k| k as f64)
        .product();
    let ratio = if m >= 0 { prod } else { 1.0 / prod };
    (2.0 * ratio / (2 * l + 1) as f64).sqrt()
}

/// Normalization `sqrt(2 (l+m)! / ((2l+1)(l−m)!))` of the associated
/// Legendre function P_l^m.
pub fn clm(l: u32, m: i32) -> Result<f64> {
    check_lm(l, m)?;
    if l as u64 + m.unsigned_abs() as u64 <= 20 {
        Ok(clm_integer(l, m))
    } else {
        Ok(clm_float(l, m))
    }
}

fn root_half(n: u32) -> f64 {
    (n as f64 + 0.5).sqrt()
}

fn adjacent(n_prime: u32, n: u32) -> bool {
    n_prime.abs_diff(n) == 1
}

/// ⟨n'| √(n̂+½) cos ϑ̂ |n⟩
pub fn vib_sqrt_cos(n_prime: u32, n: u32) -> f64 {
    if adjacent(n_prime, n) {
        0.5 * root_half(n_prime)
    } else {
        0.0
    }
}

/// ⟨n'| cos ϑ̂ √(n̂+½) |n⟩
pub fn vib_cos_sqrt(n_prime: u32, n: u32) -> f64 {
    if adjacent(n_prime, n) {
        0.5 * root_half(n)
    } else {
        0.0
    }
}

fn sin_sign(n_prime: u32, n: u32) -> f64 {
    match n_prime as i64 - n as i64 {
        1 => 1.0,
        -1 => -1.0,
        _ => 0.0,
    }
}

/// ⟨n'| √(n̂+½) sin ϑ̂ |n⟩, purely imaginary.
pub fn vib_sqrt_sin(n_prime: u32, n: u32) -> Complex64 {
    // 1/(2i) = −i/2
    Complex64::new(0.0, -0.5 * root_half(n_prime) * sin_sign(n_prime, n))
}

/// ⟨n'| sin ϑ̂ √(n̂+½) |n⟩, purely imaginary.
pub fn vib_sin_sqrt(n_prime: u32, n: u32) -> Complex64 {
    Complex64::new(0.0, -0.5 * root_half(n) * sin_sign(n_prime, n))
}

/// ⟨n'| √(n̂+½) cos ϑ̂ + cos ϑ̂ √(n̂+½) |n⟩
pub fn vib_cos_sym(n_prime: u32, n: u32) -> f64 {
    vib_sqrt_cos(n_prime, n) + vib_cos_sqrt(n_prime, n)
}

/// ⟨n'| √(n̂+½) sin ϑ̂ + sin ϑ̂ √(n̂+½) |n⟩
pub fn vib_sin_sym(n_prime: u32, n: u32) -> Complex64 {
    vib_sqrt_sin(n_prime, n) + vib_sin_sqrt(n_prime, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularOp {
    SinThetaCosPhi,
    SinThetaSinPhi,
}

fn l_step(a: u32, b: u32) -> f64 {
    if a == b + 1 {
        1.0
    } else if a + 1 == b {
        -1.0
    } else {
        0.0
    }
}

/// ⟨l'm'| sin θ̂ cos φ̂ |lm⟩ or ⟨l'm'| sin θ̂ sin φ̂ |lm⟩ for spherical
/// harmonics P_l^m(cos θ) e^{imφ} / (c_lm √(2π)) without the
/// Condon-Shortley phase.
pub fn ang_element(
    l_prime: u32,
    m_prime: i32,
    l: u32,
    m: i32,
    which: AngularOp,
) -> Result<Complex64> {
    check_lm(l_prime, m_prime)?;
    check_lm(l, m)?;
    let up = if m_prime == m + 1 {
        clm(l_prime, m_prime)? / (clm(l, m)? * (2 * l + 1) as f64) * l_step(l_prime, l)
    } else {
        0.0
    };
    let down = if m_prime == m - 1 {
        clm(l, m)? / (clm(l_prime, m_prime)? * (2 * l_prime + 1) as f64) * l_step(l, l_prime)
    } else {
        0.0
    };
    Ok(match which {
        AngularOp::SinThetaCosPhi => Complex64::new(0.5 * (up + down), 0.0),
        AngularOp::SinThetaSinPhi => Complex64::new(0.0, -0.5 * (up - down)),
    })
}
