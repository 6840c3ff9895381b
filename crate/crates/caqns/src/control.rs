//! Window frames, digital control sequences, propagators, switching
//! vectors and frame-based filter functions.
//!
//! Digital control means L instantaneous, equidistant gates on `[0, T)`;
//! the control propagator is constant on each window. Single-qubit controls
//! are specified directly by unit switching vectors `y(n)` (the toggled
//! σ_z direction in window n); two-qubit controls by 15 KAK parameters per
//! window. Pulses sit at `t = 0, τ, ..., (L-1)τ`, and every sequence ends
//! with a frame-closing gate right before measurement, so the toggled
//! observable equals the measured Pauli.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{DenseOperator, PauliIndex};
use crate::{Error, Result};

/// Equal partition of `[0, T)` into `L` windows of width `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowGrid {
    l: usize,
    tau: f64,
}

impl WindowGrid {
    pub fn new(l: usize, tau: f64) -> Self {
        assert!(l >= 1 && tau > 0.0);
        Self { l, tau }
    }

    /// Grid with total duration `t`; `tau` is derived as `t / l`.
    pub fn from_total(l: usize, t: f64) -> Self {
        Self::new(l, t / l as f64)
    }

    pub fn windows(&self) -> usize {
        self.l
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn total(&self) -> f64 {
        self.l as f64 * self.tau
    }

    /// Bounds `[(n-1)τ, nτ)` of window `n` (1-based).
    pub fn window_bounds(&self, n: usize) -> (f64, f64) {
        assert!(n >= 1 && n <= self.l);
        ((n - 1) as f64 * self.tau, n as f64 * self.tau)
    }

    /// Indicator W_n(t): 1 iff `(n-1)τ ≤ t < nτ`.
    pub fn window_value(&self, n: usize, t: f64) -> u8 {
        let (lo, hi) = self.window_bounds(n);
        u8::from(t >= lo && t < hi)
    }

    /// Window index containing `t`, if `t ∈ [0, T)`.
    pub fn window_of(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t >= self.total() {
            return None;
        }
        Some(((t / self.tau).floor() as usize + 1).min(self.l))
    }
}

/// Per-window specification of a digital control.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlKind {
    /// Unit switching vector `y(n)` per window; the toggled error operator
    /// is `h̃(n) = y(n)·σ⃗`.
    SingleQubit(Vec<[f64; 3]>),
    /// 15 KAK parameters per window:
    /// `(θ_A, α_A, φ_A, θ_B, α_B, φ_B, Θ, ϱ, ω, θ'_A, α'_A, φ'_A, θ'_B, α'_B, φ'_B)`.
    TwoQubitKak(Vec<[f64; 15]>),
}

/// A digital control with derived toggled Pauli matrices cached per window.
#[derive(Clone, Debug)]
pub struct DigitalControl {
    grid: WindowGrid,
    kind: ControlKind,
    /// `toggled[n-1][q] = h̃_q(n)`.
    toggled: Vec<Vec<DenseOperator>>,
    /// Control propagator per window (two-qubit only).
    u0: Vec<DenseOperator>,
}

impl DigitalControl {
    pub fn single_qubit(grid: WindowGrid, y: Vec<[f64; 3]>) -> Result<Self> {
        if y.len() != grid.windows() {
            return Err(Error::DimensionMismatch(format!(
                "{} switching vectors for {} windows",
                y.len(),
                grid.windows()
            )));
        }
        let mut y_norm = Vec::with_capacity(y.len());
        for v in &y {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-3 {
                return Err(Error::InvalidProtocol(format!(
                    "switching vector {v:?} has norm {norm}"
                )));
            }
            y_norm.push([v[0] / norm, v[1] / norm, v[2] / norm]);
        }
        let toggled = y_norm
            .iter()
            .map(|v| vec![pauli_vector_matrix(v)])
            .collect();
        Ok(Self { grid, kind: ControlKind::SingleQubit(y_norm), toggled, u0: Vec::new() })
    }

    pub fn two_qubit_kak(grid: WindowGrid, params: Vec<[f64; 15]>) -> Result<Self> {
        if params.len() != grid.windows() {
            return Err(Error::DimensionMismatch(format!(
                "{} KAK parameter sets for {} windows",
                params.len(),
                grid.windows()
            )));
        }
        let u0: Vec<DenseOperator> = params.iter().map(|p| kak_unitary(p)).collect();
        let za = PauliIndex::sigma_z_on(2, 0).matrix();
        let zb = PauliIndex::sigma_z_on(2, 1).matrix();
        let toggled = u0
            .iter()
            .map(|u| {
                let ud = u.adjoint();
                vec![ud.mul(&za).mul(u), ud.mul(&zb).mul(u)]
            })
            .collect();
        Ok(Self { grid, kind: ControlKind::TwoQubitKak(params), toggled, u0 })
    }

    /// Two-qubit control from explicit per-window propagators
    /// `U_0(nτ)` (each must be unitary).
    pub fn two_qubit_unitaries(grid: WindowGrid, u0: Vec<DenseOperator>) -> Result<Self> {
        if u0.len() != grid.windows() {
            return Err(Error::DimensionMismatch(format!(
                "{} propagators for {} windows",
                u0.len(),
                grid.windows()
            )));
        }
        for u in &u0 {
            if u.dim() != 4 || !u.is_unitary(1e-9) {
                return Err(Error::InvalidProtocol("window propagator must be unitary".into()));
            }
        }
        let za = PauliIndex::sigma_z_on(2, 0).matrix();
        let zb = PauliIndex::sigma_z_on(2, 1).matrix();
        let toggled = u0
            .iter()
            .map(|u| {
                let ud = u.adjoint();
                vec![ud.mul(&za).mul(u), ud.mul(&zb).mul(u)]
            })
            .collect();
        let params = vec![[0.0; 15]; grid.windows()];
        Ok(Self { grid, kind: ControlKind::TwoQubitKak(params), toggled, u0 })
    }

    /// Identity control (no pulses).
    pub fn identity(grid: WindowGrid, nqubits: usize) -> Self {
        match nqubits {
            1 => Self::single_qubit(grid, vec![[0.0, 0.0, 1.0]; grid.windows()]).unwrap(),
            2 => Self::two_qubit_kak(grid, vec![[0.0; 15]; grid.windows()]).unwrap(),
            _ => panic!("only 1 or 2 qubits supported"),
        }
    }

    pub fn grid(&self) -> WindowGrid {
        self.grid
    }

    pub fn nqubits(&self) -> usize {
        match self.kind {
            ControlKind::SingleQubit(_) => 1,
            ControlKind::TwoQubitKak(_) => 2,
        }
    }

    pub fn kind(&self) -> &ControlKind {
        &self.kind
    }

    /// `h̃_q(n) = U_0†(nτ) σ_z^{[q]} U_0(nτ)` for window `n` (1-based),
    /// qubit `q` (0-based).
    pub fn toggled_pauli(&self, q: usize, n: usize) -> &DenseOperator {
        &self.toggled[n - 1][q]
    }

    /// Control propagator during window `n` (two-qubit controls only).
    pub fn propagator(&self, n: usize) -> Option<&DenseOperator> {
        self.u0.get(n - 1)
    }

    /// Toggled observable `Õ(T) = U_0†(T) O U_0(T)`.
    ///
    /// A frame-closing gate right before measurement is part of every
    /// sequence (it never changes the noise propagator), so `U_0(T) = I`
    /// and the toggled observable is the Pauli `O` itself.
    pub fn toggled_observable(&self, o: PauliIndex) -> Result<DenseOperator> {
        if o.nqubits() != self.nqubits() {
            return Err(Error::DimensionMismatch("observable qubit count".into()));
        }
        Ok(o.matrix())
    }

    /// Frame-based filter function `F^{(1)}_{[q],u}(n) = Tr[h̃_q(n) Λ_u]/2^{|Q|}`.
    pub fn frame_filter(&self, q: usize) -> FrameFilter {
        let nq = self.nqubits();
        let d = (1 << nq) as f64;
        let gens: Vec<_> = PauliIndex::generators(nq).collect();
        let values = (1..=self.grid.windows())
            .map(|n| {
                gens.iter()
                    .map(|g| {
                        let t = self.toggled_pauli(q, n).trace_mul(&g.matrix());
                        debug_assert!(t.im.abs() < 1e-10);
                        t.re / d
                    })
                    .collect()
            })
            .collect();
        FrameFilter { nqubits: nq, values }
    }
}

/// Filter-function coefficients `F(q, u, n)`, indexed `values[n-1][u-1]`
/// over the non-identity generators `Λ_1..Λ_{4^|Q|-1}`.
#[derive(Clone, Debug)]
pub struct FrameFilter {
    nqubits: usize,
    values: Vec<Vec<f64>>,
}

impl FrameFilter {
    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    /// `F^{(1)}_u(n)` with `u` the 1-based generator code, `n` 1-based.
    pub fn value(&self, u: usize, n: usize) -> f64 {
        self.values[n - 1][u - 1]
    }

    pub fn windows(&self) -> usize {
        self.values.len()
    }
}

/// `y·σ⃗` for a 3-vector y.
fn pauli_vector_matrix(y: &[f64; 3]) -> DenseOperator {
    let x = PauliIndex::parse("X", 1).unwrap().matrix();
    let yy = PauliIndex::parse("Y", 1).unwrap().matrix();
    let z = PauliIndex::parse("Z", 1).unwrap().matrix();
    x.scale(C64::new(y[0], 0.0))
        .add(&yy.scale(C64::new(y[1], 0.0)))
        .add(&z.scale(C64::new(y[2], 0.0)))
}

/// `e^{-iθ n̂·σ⃗} = cos θ · I − i sin θ · n̂·σ⃗` for a unit vector n̂ (2x2).
fn axis_rotation(theta: f64, axis: &[f64; 3]) -> DenseOperator {
    let id = DenseOperator::identity(2);
    id.scale(C64::new(theta.cos(), 0.0))
        .add(&pauli_vector_matrix(axis).scale(C64::new(0.0, -theta.sin())))
}

fn embed_single(op: &DenseOperator, q: usize) -> DenseOperator {
    let id = DenseOperator::identity(2);
    if q == 0 {
        op.kron(&id)
    } else {
        id.kron(op)
    }
}

/// The two-qubit KAK propagator of one window:
/// local A,B rotations × entangling (XX, YY, ZZ) exponential × local A,B
/// rotations, with the angle conventions of the 15-parameter record.
pub fn kak_unitary(p: &[f64; 15]) -> DenseOperator {
    let local = |theta: f64, alpha: f64, phi: f64| -> DenseOperator {
        let axis = [phi.cos() * alpha.sin(), phi.cos() * alpha.cos(), phi.sin()];
        axis_rotation(theta, &axis)
    };
    let la = embed_single(&local(p[0], p[1], p[2]), 0);
    let lb = embed_single(&local(p[3], p[4], p[5]), 1);
    let (big_theta, rho, omega) = (p[6], p[7], p[8]);
    let (cx, cy, cz) = (
        rho.cos() * omega.sin(),
        rho.cos() * omega.cos(),
        rho.sin(),
    );
    // XX, YY, ZZ commute, so the entangler factorizes into three rotations.
    let ent_factor = |c: f64, label: &str| -> DenseOperator {
        let g = PauliIndex::parse(label, 2).unwrap().matrix();
        DenseOperator::identity(4)
            .scale(C64::new((big_theta * c).cos(), 0.0))
            .add(&g.scale(C64::new(0.0, -(big_theta * c).sin())))
    };
    let ent = ent_factor(cx, "XX").mul(&ent_factor(cy, "YY")).mul(&ent_factor(cz, "ZZ"));
    let la2 = embed_single(&local(p[9], p[10], p[11]), 0);
    let lb2 = embed_single(&local(p[12], p[13], p[14]), 1);
    la.mul(&lb).mul(&ent).mul(&la2).mul(&lb2)
}
