//! Process-matrix prediction from a spectrum table and Nelder-Mead
//! optimization of digital control parameters for noise-tailored gates.
//!
//! The predicted Pauli transfer matrix lives in the toggling frame (the
//! frame-closing gate makes the noiseless channel the identity), so the
//! fidelity of the predicted χ against an ideal target directly scores how
//! well a control shapes the noise away.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{process_fidelity, ptm_to_chi, PauliIndex, ProcessMatrices};
use crate::control::{DigitalControl, WindowGrid};
use crate::dyson::{dyson_weight_matrix, minus_i_pow};
use crate::noise::{NoiseModel, SpectrumTable};
use crate::protocols::Experiment;
use crate::sim::{simulate_expectation, SimulationConfig};
use crate::{Error, Result};

/// PTM of the noisy toggling-frame channel predicted from a spectrum table:
/// `R_{v,u} = (1/2^{|Q|}) E[Λ_v]` from pseudo-state Λ_u, truncated at `k_max`.
/// The Λ_0 row is (1, 0, ..., 0) by trace preservation.
pub fn predict_ptm(
    control: &DigitalControl,
    spectra: &SpectrumTable,
    k_max: usize,
) -> Result<ProcessMatrices> {
    let nq = control.nqubits();
    let n2 = 4usize.pow(nq as u32);
    let d = (1 << nq) as f64;
    let paulis: Vec<_> = (0..n2).map(|u| PauliIndex::new(nq, u).matrix()).collect();

    let rows: Vec<Vec<f64>> = (1..n2)
        .into_par_iter()
        .map(|v| -> Result<Vec<f64>> {
            let o_tilde = control.toggled_observable(PauliIndex::new(nq, v))?;
            // E_u = Tr[ρ_u Õ] + Σ_idx (-i)^k Tr[W_idx ρ_u] S̄_idx
            let mut e: Vec<C64> = paulis.iter().map(|p| p.trace_mul(&o_tilde)).collect();
            for (idx, value) in spectra.iter() {
                if idx.order() > k_max || *value == C64::new(0.0, 0.0) {
                    continue;
                }
                let w = dyson_weight_matrix(control, &o_tilde, idx)?;
                let phase = minus_i_pow(idx.order()) * value;
                for (u, p) in paulis.iter().enumerate() {
                    e[u] += w.trace_mul(p) * phase;
                }
            }
            Ok(e.iter().map(|x| x.re / d).collect())
        })
        .collect::<Result<_>>()?;

    let ptm = DMatrix::from_fn(n2, n2, |v, u| {
        if v == 0 {
            if u == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            rows[v - 1][u]
        }
    });
    let chi = ptm_to_chi(&ptm)?;
    Ok(ProcessMatrices { ptm, chi })
}

/// χ-matrix of the ideal identity channel.
pub fn identity_chi(nqubits: usize) -> DMatrix<C64> {
    let n2 = 4usize.pow(nqubits as u32);
    let mut chi = DMatrix::zeros(n2, n2);
    chi[(0, 0)] = C64::new(1.0, 0.0);
    chi
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Initial simplex step per coordinate (radians).
    pub simplex_scale: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Stop when the simplex function spread falls below this.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iter: 2000, simplex_scale: 0.1, restarts: 3, seed: 0, f_tol: 1e-10 }
    }
}

/// Standard Nelder-Mead minimization (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2) with an orthogonal initial simplex.
fn nelder_mead(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += opts.simplex_scale;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut trace = Vec::new();

    for _ in 0..opts.max_iter {
        // sort ascending by value
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);
        if (values[dim] - values[0]).abs() <= opts.f_tol {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|p| p[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let point = |t: f64| -> Vec<f64> {
            (0..dim).map(|j| centroid[j] + t * (centroid[j] - worst[j])).collect()
        };

        let reflected = point(1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = point(2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            let contracted = if fr < values[dim] { point(0.5) } else { point(-0.5) };
            let fc = f(&contracted);
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                // shrink toward the best point
                for i in 1..=dim {
                    for j in 0..dim {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..simplex.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best], trace)
}

#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    pub spectra: SpectrumTable,
    pub grid: WindowGrid,
    pub nqubits: usize,
    /// Ideal χ-matrix (identity channel by default: the idle circuit).
    pub target_chi: DMatrix<C64>,
    /// Truncation order; the saturation order of the grid for exactness.
    pub k_max: usize,
    pub initial_params: Vec<f64>,
    pub options: NelderMeadOptions,
}

impl OptimizationProblem {
    pub fn idle(
        spectra: SpectrumTable,
        grid: WindowGrid,
        nqubits: usize,
        k_max: usize,
        options: NelderMeadOptions,
    ) -> Self {
        let params_per_window = if nqubits == 1 { 3 } else { 15 };
        let initial_params = vec![0.0; grid.windows() * params_per_window];
        Self {
            spectra,
            grid,
            nqubits,
            target_chi: identity_chi(nqubits),
            k_max,
            initial_params,
            options,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub params: Vec<f64>,
    /// Surrogate process fidelity, clamped to [0, 1].
    pub fidelity: f64,
    /// Raw surrogate value (truncated maps may exceed 1 slightly).
    pub fidelity_raw: f64,
    pub iterations: usize,
    /// Best objective value per iteration of the winning restart.
    pub trace: Vec<f64>,
}

/// Builds the digital control described by a flat window-major parameter
/// vector (3 per window for one qubit, 15 for two).
pub fn control_from_params(
    grid: WindowGrid,
    nqubits: usize,
    params: &[f64],
) -> Result<DigitalControl> {
    let per = if nqubits == 1 { 3 } else { 15 };
    if params.len() != per * grid.windows() {
        return Err(Error::DimensionMismatch(format!(
            "{} control parameters for L = {}",
            params.len(),
            grid.windows()
        )));
    }
    if nqubits == 1 {
        // free 3-vectors, normalized; all-zero windows mean no rotation (ẑ)
        let y: Vec<[f64; 3]> = params
            .chunks(3)
            .map(|c| {
                let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                if norm < 1e-12 {
                    [0.0, 0.0, 1.0]
                } else {
                    [c[0] / norm, c[1] / norm, c[2] / norm]
                }
            })
            .collect();
        // bypass the unit-norm tolerance; vectors are normalized already
        DigitalControl::single_qubit(grid, y)
    } else {
        let p: Vec<[f64; 15]> =
            params.chunks(15).map(|c| <[f64; 15]>::try_from(c).unwrap()).collect();
        DigitalControl::two_qubit_kak(grid, p)
    }
}

/// Surrogate process fidelity of a parameter vector.
pub fn surrogate_fidelity(problem: &OptimizationProblem, params: &[f64]) -> Result<f64> {
    let control = control_from_params(problem.grid, problem.nqubits, params)?;
    let pm = predict_ptm(&control, &problem.spectra, problem.k_max)?;
    Ok(process_fidelity(&pm.chi, &problem.target_chi))
}

/// Nelder-Mead maximization of the surrogate fidelity, best of
/// `restarts` seeded starting points. Deterministic for fixed options.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizeOutcome> {
    let objective = |p: &[f64]| -> f64 {
        match surrogate_fidelity(problem, p) {
            Ok(f) => -f,
            Err(_) => f64::INFINITY,
        }
    };
    let starts: Vec<Vec<f64>> = (0..problem.options.restarts.max(1))
        .map(|r| {
            if r == 0 {
                problem.initial_params.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(problem.options.seed);
                rng.set_stream(r as u64);
                problem
                    .initial_params
                    .iter()
                    .map(|&x| x + rng.random_range(-1.0..1.0) * problem.options.simplex_scale * 3.0)
                    .collect()
            }
        })
        .collect();
    let results: Vec<(Vec<f64>, f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| nelder_mead(&objective, x0, &problem.options))
        .collect();
    let best = results
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one restart");
    let raw = -best.1;
    Ok(OptimizeOutcome {
        params: best.0,
        fidelity: raw.clamp(0.0, 1.0),
        fidelity_raw: raw,
        iterations: best.2.len(),
        trace: best.2,
    })
}

/// Process fidelity of the actual noisy channel at the given control,
/// estimated by Monte Carlo channel tomography (independent of the Dyson
/// surrogate).
pub fn mc_process_fidelity(
    control: &DigitalControl,
    model: &NoiseModel,
    target_chi: &DMatrix<C64>,
    cfg: &SimulationConfig,
) -> Result<f64> {
    let nq = control.nqubits();
    let n2 = 4usize.pow(nq as u32);
    let d = (1 << nq) as f64;
    let entries: Vec<((usize, usize), f64)> = (1..n2)
        .flat_map(|v| (0..n2).map(move |u| (v, u)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(v, u)| -> Result<((usize, usize), f64)> {
            let exp = Experiment {
                control: control.clone(),
                rho: PauliIndex::new(nq, u),
                obs: PauliIndex::new(nq, v),
            };
            let (value, _) = simulate_expectation(&exp, model, cfg)?;
            Ok(((v, u), value / d))
        })
        .collect::<Result<_>>()?;
    let mut ptm = DMatrix::zeros(n2, n2);
    ptm[(0, 0)] = 1.0;
    for ((v, u), val) in entries {
        ptm[(v, u)] = val;
    }
    let chi = ptm_to_chi(&ptm)?;
    Ok(process_fidelity(&chi, target_chi))
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub g_over_gamma: f64,
    pub bare_surrogate: f64,
    pub optimized_surrogate: f64,
    pub bare_mc: f64,
    pub optimized_mc: f64,
    pub params: Vec<f64>,
}

/// For each coupling strength: compute exact bound spectra, optimize the
/// idle circuit, and score both bare (all-zero parameters) and optimized
/// controls against the Monte Carlo truth.
#[allow(clippy::too_many_arguments)]
pub fn fidelity_sweep(
    gamma: f64,
    g_over_gamma: &[f64],
    grid: WindowGrid,
    nqubits: usize,
    k_max: usize,
    fold_order: usize,
    nm: NelderMeadOptions,
    mc: &SimulationConfig,
) -> Result<Vec<SweepRow>> {
    use crate::noise::{ca_spectrum_exact, InitLaw, Provenance};
    use crate::symmetry::{bound_form, enumerate_learnable_to, NoiseClass};

    let mut rows = Vec::new();
    for &r in g_over_gamma {
        let model = if nqubits == 2 {
            NoiseModel::shared_2q(gamma, r * gamma, InitLaw::SymmetricPmOne)
        } else {
            NoiseModel::classical_1q(gamma, r * gamma, InitLaw::SymmetricPmOne)
        };
        // raw exact spectra well past saturation, folded into bound form
        let mut raw = SpectrumTable::new(grid, Provenance::Exact);
        for k in 1..=fold_order {
            for idx in all_classical_indices(grid.windows(), nqubits, k) {
                let v = ca_spectrum_exact(&model, &idx, grid)?;
                raw.insert(idx, v);
            }
        }
        let spectra = bound_form(&raw, nqubits)?;
        let learnable = enumerate_learnable_to(grid.windows(), nqubits, NoiseClass::Classical, k_max);
        debug_assert!(learnable.iter().all(|i| spectra.get(i).is_some() || i.order() % 2 == 1));

        let problem = OptimizationProblem::idle(spectra, grid, nqubits, k_max, nm);
        let bare_surrogate = surrogate_fidelity(&problem, &problem.initial_params)?;
        let outcome = optimize(&problem)?;

        let target = identity_chi(nqubits);
        let bare = control_from_params(grid, nqubits, &problem.initial_params)?;
        let opt = control_from_params(grid, nqubits, &outcome.params)?;
        let bare_mc = mc_process_fidelity(&bare, &model, &target, mc)?;
        let optimized_mc = mc_process_fidelity(&opt, &model, &target, mc)?;
        rows.push(SweepRow {
            g_over_gamma: r,
            bare_surrogate,
            optimized_surrogate: outcome.fidelity_raw,
            bare_mc,
            optimized_mc,
            params: outcome.params,
        });
    }
    Ok(rows)
}

/// All classical (μ⃗ = 0⃗) raw indices of one order, including contractible
/// streaks (needed as bound-form input).
pub fn all_classical_indices(l: usize, nqubits: usize, k: usize) -> Vec<crate::noise::SpectrumIndex> {
    use crate::noise::SpectrumIndex;
    let mut strings = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &strings {
            let hi = *s.last().unwrap_or(&(l as u8));
            for n in 1..=hi {
                let mut t = s.clone();
                t.push(n);
                next.push(t);
            }
        }
        strings = next;
    }
    let mut out = Vec::new();
    for s in strings {
        let q_count = if nqubits == 1 { 1usize } else { 1 << k };
        for q_bits in 0..q_count {
            let q: Vec<u8> = (0..k).map(|j| ((q_bits >> j) & 1) as u8).collect();
            out.push(SpectrumIndex::classical(s.clone(), q).unwrap());
        }
    }
    out
}
