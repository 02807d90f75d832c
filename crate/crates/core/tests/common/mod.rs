//! Independent oracles for the closed-form matrix elements: angular factors
//! by numerical quadrature of explicit Rodrigues polynomials, vibrational
//! factors by products of truncated ladder matrices.

use std::f64::consts::PI;

use num_complex::Complex64;
use rovib_chaos::quantum::phase::{cos_phase, sin_phase, sqrt_number_half};
use rovib_chaos::quantum::{
    ang_element, vib_cos_sqrt, vib_sin_sqrt, vib_sqrt_cos, vib_sqrt_sin, AngularOp,
};

/// Gauss-Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// (1−x²)^{m/2} d^{l+m}/dx^{l+m} (x²−1)^l, any −l ≤ m ≤ l.
pub fn rodrigues(l: u32, m: i32, x: f64) -> f64 {
    let l = l as usize;
    // Coefficients of (x²−1)^l by ascending power.
    let mut coeffs = vec![0.0; 2 * l + 1];
    let mut binom = 1.0;
    for k in 0..=l {
        let sign = if (l - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        coeffs[2 * k] = sign * binom;
        binom = binom * (l - k) as f64 / (k + 1) as f64;
    }
    let order = (l as i64 + m as i64) as usize;
    for _ in 0..order {
        coeffs = (1..coeffs.len()).map(|p| p as f64 * coeffs[p]).collect();
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
    }
    let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    (1.0 - x * x).powf(m as f64 / 2.0) * poly
}

pub struct Harmonics {
    nodes: Vec<(f64, f64)>,
    phis: Vec<f64>,
}

impl Harmonics {
    pub fn new() -> Self {
        let n_phi = 64;
        Self {
            nodes: gauss_legendre(64),
            phis: (0..n_phi)
                .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
                .collect(),
        }
    }

    /// Positive constant making P_l^m e^{imφ} unit-normalized on the sphere.
    pub fn norm(&self, l: u32, m: i32) -> f64 {
        let integral: f64 = self
            .nodes
            .iter()
            .map(|(x, w)| w * rodrigues(l, m, *x).powi(2))
            .sum();
        1.0 / (2.0 * PI * integral).sqrt()
    }

    pub fn element(&self, lp: u32, mp: i32, l: u32, m: i32, op: AngularOp) -> Complex64 {
        let norm = self.norm(lp, mp) * self.norm(l, m);
        let dphi = 2.0 * PI / self.phis.len() as f64;
        let phi_part: Complex64 = self
            .phis
            .iter()
            .map(|&phi| {
                let f = match op {
                    AngularOp::SinThetaCosPhi => phi.cos(),
                    AngularOp::SinThetaSinPhi => phi.sin(),
                };
                Complex64::from_polar(f, (m - mp) as f64 * phi)
            })
            .sum::<Complex64>()
            * dphi;
        let theta_part: f64 = self
            .nodes
            .iter()
            .map(|(x, w)| w * rodrigues(lp, mp, *x) * (1.0 - x * x).sqrt() * rodrigues(l, m, *x))
            .sum();
        phi_part * theta_part * norm
    }
}

/// Largest |closed form − quadrature| over l, l' ≤ l_max, all m, both operators.
pub fn angular_worst_deviation(l_max: u32) -> f64 {
    let h = Harmonics::new();
    let mut worst: f64 = 0.0;
    for op in [AngularOp::SinThetaCosPhi, AngularOp::SinThetaSinPhi] {
        for l in 0..=l_max {
            for lp in 0..=l_max {
                for m in -(l as i32)..=l as i32 {
                    for mp in -(lp as i32)..=lp as i32 {
                        let closed = ang_element(lp, mp, l, m, op).unwrap();
                        worst = worst.max((closed - h.element(lp, mp, l, m, op)).norm());
                    }
                }
            }
        }
    }
    worst
}

/// Largest |closed form − ladder product| for the four √n·phase products on a `levels`
/// truncation, skipping the top level where truncation bites.
pub fn vibrational_worst_deviation(levels: usize) -> f64 {
    let root = sqrt_number_half(levels).map(|x| Complex64::new(x, 0.0));
    let cos = cos_phase(levels);
    let sin = sin_phase(levels);
    let products = [&root * &cos, &cos * &root, &root * &sin, &sin * &root];
    let closed: [fn(u32, u32) -> Complex64; 4] = [
        |a, b| vib_sqrt_cos(a, b).into(),
        |a, b| vib_cos_sqrt(a, b).into(),
        vib_sqrt_sin,
        vib_sin_sqrt,
    ];
    let mut worst: f64 = 0.0;
    for (m, f) in products.iter().zip(closed) {
        for np in 0..levels - 1 {
            for n in 0..levels - 1 {
                worst = worst.max((m[(np, n)] - f(np as u32, n as u32)).norm());
            }
        }
    }
    worst
}
