//! Cross-module consistency checks that exercise the full stack:
//! exact spectra ↔ Monte Carlo spectra, and the saturation-order
//! resummation (bound-form spectra reproduce non-perturbative dynamics).

use caqns::control::{DigitalControl, WindowGrid};
use caqns::dyson::expectation;
use caqns::noise::{
    ca_spectrum_exact, ca_spectrum_mc, InitLaw, NoiseModel, Provenance, SpectrumIndex,
    SpectrumTable,
};
use caqns::optimizer::all_classical_indices;
use caqns::protocols::Experiment;
use caqns::sim::{simulate_expectation, SimulationConfig};
use caqns::symmetry::bound_form;
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// MC spectra agree with the closed-form integrals on random classical
/// indices up to fourth order.
#[test]
fn mc_matches_exact_on_random_classical_indices() {
    let grid = WindowGrid::from_total(4, 4.0);
    let model = NoiseModel::classical_1q(0.6, 1.1, InitLaw::SymmetricPmOne);
    let mut rng = StdRng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 20 {
        let k = rng.random_range(1..=4usize);
        let mut n: Vec<u8> = (0..k).map(|_| rng.random_range(1..=4u8)).collect();
        n.sort_unstable_by(|a, b| b.cmp(a));
        let idx = SpectrumIndex::classical(n, vec![0; k]).unwrap();
        let exact = ca_spectrum_exact(&model, &idx, grid).unwrap();
        let (mc, err) = ca_spectrum_mc(&model, &idx, grid, 12_000, &mut rng).unwrap();
        if err == 0.0 {
            // odd-order zero-mean moments vanish identically
            assert!(exact.norm() < 1e-12 && mc.norm() < 1e-12);
        } else {
            assert!(
                (mc - exact).norm() <= 3.0 * err,
                "{idx:?}: exact {exact}, mc {mc} ± {err}"
            );
        }
        checked += 1;
    }
}

/// Saturation-order instantiation: for L=2 windows at strong coupling
/// g/γ = 20, the Dyson evaluation with exact bound-form spectra at K = 4
/// reproduces the Monte Carlo expectation — all higher-order spectra enter
/// only through their binding representatives.
#[test]
fn bound_spectra_reproduce_strong_coupling_dynamics() {
    let l = 2usize;
    let gamma = 1.0;
    let g = 20.0 * gamma;
    let t_total = 0.05; // γT = 0.05, gT = 1: fold tail is negligible by k≈20
    let grid = WindowGrid::from_total(l, t_total);
    let model = NoiseModel::classical_1q(gamma, g, InitLaw::SymmetricPmOne);

    let fold_order = 20;
    let mut raw = SpectrumTable::new(grid, Provenance::Exact);
    for k in 1..=fold_order {
        for idx in all_classical_indices(l, 1, k) {
            let v = ca_spectrum_exact(&model, &idx, grid).unwrap();
            raw.insert(idx, v);
        }
    }
    let bound = bound_form(&raw, 1).unwrap();
    assert!(bound.max_order().unwrap() <= 2 * l);

    let mut rng = StdRng::seed_from_u64(5);
    for trial in 0..4 {
        let y: Vec<[f64; 3]> = (0..l)
            .map(|_| {
                if trial == 0 {
                    [0.0, 0.0, 1.0]
                } else {
                    let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0f64));
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    [v[0] / norm, v[1] / norm, v[2] / norm]
                }
            })
            .collect();
        let control = DigitalControl::single_qubit(grid, y).unwrap();
        for (rho, obs) in [("X", "X"), ("Y", "Z"), ("Z", "Z")] {
            let exp = Experiment {
                control: control.clone(),
                rho: caqns::algebra::PauliIndex::parse(rho, 1).unwrap(),
                obs: caqns::algebra::PauliIndex::parse(obs, 1).unwrap(),
            };
            let dyson = expectation(&exp.control, exp.rho, exp.obs, &bound, 2 * l).unwrap();
            let (mc, err) =
                simulate_expectation(&exp, &model, &SimulationConfig::new(200_000, 99)).unwrap();
            assert!(
                (C64::new(mc, 0.0) - dyson).norm() <= 3.0 * err + 1e-3,
                "trial {trial} ({rho},{obs}): dyson {dyson} vs mc {mc} ± {err}"
            );
        }
    }
}
