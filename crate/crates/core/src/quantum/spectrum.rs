use crate::params::ModelParameters;

/// Largest vibrational quantum number for which the ladder still rises:
/// `floor(1/(2x_e) − 1/2)`.
pub fn n_bound(params: &ModelParameters) -> u32 {
    let bound = params.hbar_omega_e / (2.0 * params.hbar_xe_omega_e) - 0.5;
    bound.floor().max(0.0) as u32
}

/// Unperturbed level E_nl in code units; independent of m.
pub fn energy(n: u32, l: u32, params: &ModelParameters) -> f64 {
    let c = params.code();
    let v = n as f64 + 0.5;
    let l = l as f64;
    c.omega_e * v - c.anharmonicity * v * v + c.beta * l * (l + 1.0)
}
