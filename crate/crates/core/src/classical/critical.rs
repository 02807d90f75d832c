//! Fixed points of the flow on θ = π/2, p = 0, ψ ∈ {0, π}.
//!
//! With s = n + 1/2 the ψ equation at such a point reads
//! `a + b·s − (W/4)·cos ψ / √s = 0`, with `a = Δ + 2βk` and
//! `b = 2β − 2ħx_eω_e`. Squaring gives the cubic `(a + b·s)²·s = W²/16`;
//! its positive roots are kept only if they satisfy the unsquared equation
//! on the requested branch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::ModelParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// ψ = 0, cos ψ = +1.
    Zero,
    /// ψ = π, cos ψ = −1.
    Pi,
}

impl Branch {
    pub fn psi(self) -> f64 {
        match self {
            Branch::Zero => 0.0,
            Branch::Pi => PI,
        }
    }

    fn cos_psi(self) -> f64 {
        match self {
            Branch::Zero => 1.0,
            Branch::Pi => -1.0,
        }
    }
}

/// Critical values of n on the given branch, ascending.
pub fn critical_points(params: &ModelParameters, branch: Branch) -> Result<Vec<f64>> {
    let params = params.validate()?;
    let c = params.code();
    let a = c.detuning + 2.0 * c.beta * c.k;
    let b = 2.0 * c.beta - 2.0 * c.anharmonicity;
    let quarter_w = 0.25 * c.drive;
    let cos_psi = branch.cos_psi();

    let mut roots: Vec<f64> = if quarter_w == 0.0 {
        // (a + b s)² s = 0: the s = 0 root is excluded, the other is double.
        if b != 0.0 {
            vec![-a / b]
        } else {
            vec![]
        }
    } else {
        let f = |s: f64| (a + b * s).powi(2) * s - quarter_w * quarter_w;
        let df = |s: f64| (a + b * s) * (a + 3.0 * b * s);
        real_cubic_roots(b * b, 2.0 * a * b, a * a, -quarter_w * quarter_w)
            .into_iter()
            .map(|s| newton_polish(s, f, df))
            .filter(|&s| s > 0.0 && (a + b * s) * cos_psi > 0.0)
            .map(|s| {
                let g = |s: f64| a + b * s - quarter_w * cos_psi / s.sqrt();
                let dg = |s: f64| b + 0.5 * quarter_w * cos_psi / (s * s.sqrt());
                newton_polish(s, g, dg)
            })
            .collect()
    };
    roots.retain(|&s| s > 0.0);
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
    Ok(roots.into_iter().map(|s| s - 0.5).collect())
}

/// A few Newton steps, stopping as soon as the residual stops shrinking.
fn newton_polish(mut x: f64, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
    let mut r = f(x).abs();
    for _ in 0..4 {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - f(x) / d;
        let rn = f(next).abs();
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail too
        if !(rn < r) {
            break;
        }
        x = next;
        r = rn;
    }
    x
}

/// Real roots of `c3·x³ + c2·x² + c1·x + c0` (c3 ≠ 0), unordered.
pub(crate) fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    if c3 == 0.0 {
        return real_quadratic_roots(c2, c1, c0);
    }
    let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
    let shift = a / 3.0;
    // x = t − a/3 gives t³ + p t + q = 0.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if p == 0.0 && q == 0.0 {
        return vec![-shift];
    }
    if disc > 0.0 {
        let sq = disc.sqrt();
        // Pick the larger-magnitude term first to avoid cancellation.
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let t = if u != 0.0 { u - p / (3.0 * u) } else { 0.0 };
        vec![t - shift]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{eom_rhs, ClassicalState};
    use crate::params::geo_preset;
    use std::f64::consts::FRAC_PI_2;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn cubic_with_known_roots() {
        // (x − 1)(x − 2)(x + 3) = x³ − 7x + 6
        let r = sorted(real_cubic_roots(1.0, 0.0, -7.0, 6.0));
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        // x³ + x + 1 has one real root near −0.6823278.
        let r = real_cubic_roots(2.0, 0.0, 2.0, 2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-12);
    }

    #[test]
    fn undriven_root_closed_form() {
        let p = geo_preset();
        // n = Δ/(2ħx_eω_e − 2β) − 1/2 = 15/3.44 − 1/2
        let want = 15.0 / 3.44 - 0.5;
        for branch in [Branch::Zero, Branch::Pi] {
            let roots = critical_points(&p, branch).unwrap();
            assert_eq!(roots.len(), 1);
            assert!((roots[0] - want).abs() < 1e-12);
            assert!((roots[0] - 3.8605).abs() < 1e-4);
        }
    }

    #[test]
    fn weak_drive_shifts_the_center_slightly() {
        let p = geo_preset().with_drive(0.05);
        let roots = critical_points(&p, Branch::Pi).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - (15.0 / 3.44 - 0.5)).abs() < 0.01);
        assert!(roots[0] > 15.0 / 3.44 - 0.5);
    }

    #[test]
    fn three_roots_across_both_branches() {
        let p = geo_preset().with_drive(0.05);
        let zero = critical_points(&p, Branch::Zero).unwrap();
        let pi = critical_points(&p, Branch::Pi).unwrap();
        assert_eq!(zero.len() + pi.len(), 3);
        for (branch, roots) in [(Branch::Zero, zero), (Branch::Pi, pi)] {
            for n in roots {
                let r = eom_rhs(&ClassicalState::new(n, branch.psi(), 0.0, FRAC_PI_2), &p).unwrap();
                let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                // Near s = 0 the ψ equation has slope ~(W/8)s^(-3/2) ≈ 1e7, and
                // n = s − 1/2 fixes s only to an ulp of 0.5.
                let limit = if n + 0.5 < 1e-3 { 1e-8 } else { 1e-10 };
                assert!(worst < limit, "branch {branch:?} n={n} residual {worst:e}");
            }
        }
    }

    #[test]
    fn no_positive_root() {
        // a = 15 + 0.96k < 0 with b < 0 leaves no s > 0 at W = 0.
        let p = geo_preset().with_k(-20);
        assert!(critical_points(&p, Branch::Zero).unwrap().is_empty());
        assert!(critical_points(&p, Branch::Pi).unwrap().is_empty());
        let driven = p.with_drive(0.5);
        assert!(critical_points(&driven, Branch::Zero).unwrap().is_empty());
    }
}
