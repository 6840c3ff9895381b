//! Exact Monte Carlo ground-truth simulator: evolves the toggling-frame
//! error propagator per noise trajectory and averages observables.
//!
//! Within one trajectory the toggled Hamiltonian is constant between window
//! boundaries and fluctuator switch times, so each segment propagator is an
//! exact analytic rotation (`h̃² = I` per qubit; commuting factors for the
//! shared two-qubit case; a fixed-norm generator for the toy model).
//! Trajectories use per-index ChaCha substreams, so results are
//! bit-identical for a given seed regardless of thread count.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::algebra::{DenseOperator, PauliIndex};
use crate::noise::{sample_trajectory, NoiseModel, RtnTrajectory, Topology};
use crate::protocols::Experiment;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    pub n_traj: usize,
    pub seed: u64,
    /// Finite-shot emulation: expectation components resampled binomially.
    /// Absent ⇒ exact per-trajectory averages.
    pub shots: Option<u64>,
}

impl SimulationConfig {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        Self { n_traj, seed, shots: None }
    }
}

fn traj_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Deterministic pairwise sum (stable reduction independent of thread
/// scheduling).
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1..=8 => v.iter().sum(),
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Segment boundaries of one trajectory: window edges plus (shifted) switch
/// times, ascending, covering `[0, T]`.
fn segment_grid(exp: &Experiment, model: &NoiseModel, traj: &RtnTrajectory) -> Vec<f64> {
    let grid = exp.control.grid();
    let total = grid.total();
    let mut cuts: Vec<f64> = (0..=grid.windows()).map(|n| n as f64 * grid.tau()).collect();
    for &s in &traj.switch_times {
        if s > 0.0 && s < total {
            cuts.push(s);
        }
        let shifted = s - model.quantum_shift;
        if model.quantum_shift > 0.0 && shifted > 0.0 && shifted < total {
            cuts.push(shifted);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

fn beta_at(model: &NoiseModel, traj: &RtnTrajectory, t: f64) -> f64 {
    let b = traj.value_at(t);
    if model.modulation > 0.0 {
        b * (model.modulation * t).cos()
    } else {
        b
    }
}

/// `cos θ · I − i sin θ · G` for a Hermitian G with `G² = I`.
fn involution_rotation(g: &DenseOperator, theta: f64) -> DenseOperator {
    DenseOperator::identity(g.dim())
        .scale(C64::new(theta.cos(), 0.0))
        .add(&g.scale(C64::new(0.0, -theta.sin())))
}

/// Toggling-frame error propagator of one classical trajectory
/// (per-qubit or shared fluctuators).
fn classical_propagator(
    exp: &Experiment,
    model: &NoiseModel,
    trajs: &[RtnTrajectory],
) -> DenseOperator {
    let grid = exp.control.grid();
    let cuts = segment_grid(exp, model, &trajs[0]);
    let mut u = DenseOperator::identity(1 << exp.control.nqubits());
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let n = grid.window_of(mid).expect("segment inside the grid");
        let dt = b - a;
        for (q, g) in model.couplings.iter().enumerate() {
            let traj = match model.topology {
                Topology::SharedFluctuator => &trajs[0],
                Topology::IndependentPerQubit => &trajs[q],
            };
            // β is constant on the segment; modulation varies slowly, use
            // the exact integral of cos over the segment instead
            let theta = if model.modulation > 0.0 {
                let om = model.modulation;
                traj.value_at(mid) * g * ((om * b).sin() - (om * a).sin()) / om
            } else {
                beta_at(model, traj, mid) * g * dt
            };
            u = involution_rotation(exp.control.toggled_pauli(q, n), theta).mul(&u);
        }
    }
    u
}

/// Joint system⊗auxiliary propagator of one toy-model trajectory.
fn toy_propagator(exp: &Experiment, model: &NoiseModel, traj: &RtnTrajectory) -> DenseOperator {
    let grid = exp.control.grid();
    let cuts = segment_grid(exp, model, traj);
    let g = model.couplings[0];
    let tx = PauliIndex::parse("X", 1).unwrap().matrix();
    let ty = PauliIndex::parse("Y", 1).unwrap().matrix();
    let mut u = DenseOperator::identity(4);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let n = grid.window_of(mid).expect("segment inside the grid");
        let b1 = beta_at(model, traj, mid);
        let b2 = beta_at(model, traj, mid + model.quantum_shift);
        let norm = (b1 * b1 + b2 * b2).sqrt();
        if norm == 0.0 {
            continue;
        }
        let m = tx.scale(C64::new(b1 / norm, 0.0)).add(&ty.scale(C64::new(b2 / norm, 0.0)));
        let gen = exp.control.toggled_pauli(0, n).kron(&m);
        u = involution_rotation(&gen, g * norm * (b - a)).mul(&u);
    }
    u
}

fn trajectory_value(exp: &Experiment, model: &NoiseModel, rng: &mut impl Rng) -> Result<f64> {
    let total = exp.control.grid().total();
    let o_tilde = exp.control.toggled_observable(exp.obs)?;
    let rho = exp.rho.matrix();
    let value = if model.is_classical() {
        let n_fluct = match model.topology {
            Topology::SharedFluctuator => 1,
            Topology::IndependentPerQubit => model.nqubits(),
        };
        let trajs: Vec<RtnTrajectory> =
            (0..n_fluct).map(|_| sample_trajectory(model, total, rng)).collect();
        let u = classical_propagator(exp, model, &trajs);
        debug_assert!(
            u.adjoint().mul(&u).max_abs_diff(&DenseOperator::identity(u.dim())) < 1e-10
        );
        u.adjoint().mul(&o_tilde).mul(&u).trace_mul(&rho)
    } else {
        if exp.control.nqubits() != 1 {
            return Err(Error::UnsupportedModel("toy model is single-qubit".into()));
        }
        let traj = sample_trajectory(model, total, rng);
        let u = toy_propagator(exp, model, &traj);
        // auxiliary qubit starts in (τ_0 + τ_z)/2 and is traced out
        let tz = PauliIndex::parse("Z", 1).unwrap().matrix();
        let rho_e = DenseOperator::identity(2).add(&tz).scale(C64::new(0.5, 0.0));
        let joint_rho = rho.kron(&rho_e);
        let joint_o = o_tilde.kron(&DenseOperator::identity(2));
        u.adjoint().mul(&joint_o).mul(&u).trace_mul(&joint_rho)
    };
    debug_assert!(value.im.abs() < 1e-9, "imaginary expectation {}", value.im);
    Ok(value.re)
}

fn apply_shots(value: f64, scale: f64, shots: u64, rng: &mut impl Rng) -> f64 {
    let v = (value / scale).clamp(-1.0, 1.0);
    let p = 0.5 * (1.0 + v);
    let k = Binomial::new(shots, p).unwrap().sample(rng);
    scale * (2.0 * k as f64 / shots as f64 - 1.0)
}

/// Trajectory-averaged `E[O(T)] = ⟨Tr[Ũ† Õ(T) Ũ ρ̃]⟩` and its standard
/// error.
pub fn simulate_expectation(
    exp: &Experiment,
    model: &NoiseModel,
    cfg: &SimulationConfig,
) -> Result<(f64, f64)> {
    model.validate()?;
    if model.nqubits() != exp.control.nqubits() {
        return Err(Error::DimensionMismatch("model vs control qubit count".into()));
    }
    let scale = (1u64 << exp.control.nqubits()) as f64;
    let values: Vec<f64> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = traj_rng(cfg.seed, i as u64);
            let mut v = trajectory_value(exp, model, &mut rng)?;
            if let Some(shots) = cfg.shots {
                v = apply_shots(v, scale, shots, &mut rng);
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(mean_stderr(&values))
}

/// Free-evolution coherence `|⟨e^{-2ig∫_0^t β}⟩|` at the requested times,
/// with the standard error of the complex mean.
pub fn free_coherence_curve(
    model: &NoiseModel,
    times: &[f64],
    cfg: &SimulationConfig,
) -> Result<Vec<(f64, f64, f64)>> {
    model.validate()?;
    if !model.is_classical() || model.nqubits() != 1 {
        return Err(Error::UnsupportedModel(
            "coherence curve needs a classical single-qubit model".into(),
        ));
    }
    let g = model.couplings[0];
    let horizon = times.iter().copied().fold(0.0f64, f64::max);
    let samples: Vec<Vec<C64>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = traj_rng(cfg.seed, i as u64);
            let traj = sample_trajectory(model, horizon, &mut rng);
            times
                .iter()
                .map(|&t| {
                    let phi = integrated_beta(model, &traj, t);
                    C64::new(0.0, -2.0 * g * phi).exp()
                })
                .collect()
        })
        .collect();
    let n = cfg.n_traj as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let re: Vec<f64> = samples.iter().map(|s| s[j].re).collect();
            let im: Vec<f64> = samples.iter().map(|s| s[j].im).collect();
            let mean = C64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n);
            let var_re: Vec<f64> = re.iter().map(|v| (v - mean.re) * (v - mean.re)).collect();
            let var_im: Vec<f64> = im.iter().map(|v| (v - mean.im) * (v - mean.im)).collect();
            let var = (pairwise_sum(&var_re) + pairwise_sum(&var_im)) / (n - 1.0).max(1.0);
            (t, mean.norm(), (var / n).sqrt())
        })
        .collect())
}

/// `∫_0^t β(s) ds` for a piecewise-constant trajectory (including the
/// modulated case).
fn integrated_beta(model: &NoiseModel, traj: &RtnTrajectory, t: f64) -> f64 {
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut value = traj.init_value as f64;
    let om = model.modulation;
    let seg = |v: f64, a: f64, b: f64| {
        if om > 0.0 {
            v * ((om * b).sin() - (om * a).sin()) / om
        } else {
            v * (b - a)
        }
    };
    for &s in &traj.switch_times {
        if s >= t {
            break;
        }
        acc += seg(value, prev, s);
        prev = s;
        value = -value;
    }
    acc + seg(value, prev, t)
}
