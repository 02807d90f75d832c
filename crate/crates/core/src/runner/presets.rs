use std::f64::consts::PI;
use std::path::Path;

use super::{
    ClassicalGrid, CriticalConfig, Experiment, FullBasisCheck, InitialState, ObservablesConfig,
    Picture, PoincareConfig, QuantumConfig, RunConfig, ScanConfig, TwoLevelConfig,
};
use crate::classical::{Branch, LyapunovSettings};
use crate::params::geo_preset;
use crate::quantum::BasisIndex;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Default experiment for the per-experiment CLI subcommand.
    build: fn() -> (f64, Experiment),
}

const N0_GRID: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

fn fig1_grid() -> ClassicalGrid {
    ClassicalGrid {
        initial_n: N0_GRID.to_vec(),
        psi0: PI,
        p0: 0.0,
        theta0: 1.0,
    }
}

fn sections() -> Experiment {
    Experiment::ClassicalPoincare(PoincareConfig {
        grid: fig1_grid(),
        crossings: 2000,
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        tau_max: 1e7,
    })
}

const S100: BasisIndex = BasisIndex { n: 1, l: 0, m: 0 };
const S211: BasisIndex = BasisIndex { n: 2, l: 1, m: 1 };

fn quantum(initial: InitialState) -> QuantumConfig {
    QuantumConfig {
        n_max: 3,
        l_max: 3,
        k_filter: None,
        initial,
        tau_end: 2000.0,
        sample_dt: 0.5,
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        tracked: vec![S100, S211],
        w_sweep: vec![],
    }
}

fn observables(picture: Picture) -> Experiment {
    Experiment::QuantumObservables(ObservablesConfig {
        run: quantum(InitialState::PoissonLike),
        picture,
    })
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1a",
        description: "Poincaré sections at θ = π/2, W = 0.048, θ₀ = 1, p₀ = 0, ψ₀ = π, n₀ = 0.5..3",
        build: || (0.048, sections()),
    },
    Preset {
        name: "fig1b",
        description: "Poincaré sections as fig1a at W = 0.68",
        build: || (0.68, sections()),
    },
    Preset {
        name: "fig1c",
        description: "Poincaré sections as fig1a at W = 1.03",
        build: || (1.03, sections()),
    },
    Preset {
        name: "fig2a",
        description: "Populations of |100⟩ and |211⟩ from |100⟩ for W = 0.048, 0.19, 0.68",
        build: || {
            let mut q = quantum(InitialState::BasisState { state: S100 });
            q.w_sweep = vec![0.048, 0.19, 0.68];
            (0.048, Experiment::QuantumEvolve(q))
        },
    },
    Preset {
        name: "fig2b",
        description: "Populations of |100⟩ and |211⟩ from |100⟩ at W = 1.03",
        build: || (1.03, Experiment::QuantumEvolve(quantum(InitialState::BasisState { state: S100 }))),
    },
    Preset {
        name: "fig3",
        description: "⟨X⟩ against ⟨P⟩ from the Poisson-like start at W = 1.03",
        build: || (1.03, observables(Picture::Xp)),
    },
    Preset {
        name: "fig4",
        description: "Number/phase picture: ⟨n⟩ and arg⟨e^(iϑ)⟩ from the Poisson-like start at W = 1.03",
        build: || (1.03, observables(Picture::NumberPhase)),
    },
    Preset {
        name: "critical-points",
        description: "Critical values of n on both ψ branches at W = 0.05, k = 0",
        build: || {
            (0.05, Experiment::ClassicalCritical(CriticalConfig {
                branches: vec![Branch::Pi, Branch::Zero],
                reference_n: Some(2.0),
            }))
        },
    },
    Preset {
        name: "chaos-scan-default",
        description: "Largest Lyapunov exponent over W = 0.048, 0.177, 0.68, 1.03 on the fig1 grid, λ_c = 5× the W = 0 baseline",
        build: || {
            (0.0, Experiment::ChaosScan(ScanConfig {
                w_grid: vec![0.048, 0.177, 0.68, 1.03],
                grid: fig1_grid(),
                lyapunov: LyapunovSettings::default(),
                threshold: None,
                baseline_factor: 5.0,
            }))
        },
    },
    Preset {
        name: "two-level",
        description: "Two-level |100⟩ → |211⟩ reduction against direct evolution at W = 0.048",
        build: || {
            (0.048, Experiment::TwoLevelOracle(TwoLevelConfig {
                initial: S100,
                final_state: S211,
                tau_end: 500.0,
                sample_dt: 0.5,
                rel_tol: 1e-10,
                abs_tol: 1e-14,
                full_basis: Some(FullBasisCheck { n_max: 3, l_max: 3, tau_end: 2000.0, sample_dt: 0.05 }),
            }))
        },
    },
];

/// (name, description) for every preset.
pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.iter().map(|p| (p.name, p.description)).collect()
}

/// The named preset writing into `output_dir`, or None if unknown.
pub fn preset(name: &str, output_dir: &Path) -> Option<RunConfig> {
    let p = PRESETS.iter().find(|p| p.name == name)?;
    let (w, experiment) = (p.build)();
    Some(RunConfig {
        params: geo_preset().with_drive(w),
        experiment,
        output_dir: output_dir.to_path_buf(),
        plots: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_unique_and_required_present() {
        let names: Vec<&str> = list_presets().iter().map(|p| p.0).collect();
        assert_eq!(names.iter().collect::<HashSet<_>>().len(), names.len());
        for n in [
            "fig1a",
            "fig1b",
            "fig1c",
            "fig2a",
            "fig2b",
            "fig3",
            "fig4",
            "critical-points",
            "chaos-scan-default",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        let fig4 = list_presets().into_iter().find(|p| p.0 == "fig4").unwrap();
        assert!(fig4.1.contains("⟨n⟩"));
    }

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let c = preset(p.name, Path::new("out")).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
        assert!(preset("fig9", Path::new("out")).is_none());
    }

    #[test]
    fn figure_drives() {
        let w = |n| preset(n, Path::new("out")).unwrap().params.w;
        assert_eq!(w("fig1a"), 0.048);
        assert_eq!(w("fig1c"), 1.03);
        assert_eq!(w("fig2b"), 1.03);
        assert_eq!(w("fig3"), 1.03);
        assert_eq!(w("critical-points"), 0.05);
    }
}
