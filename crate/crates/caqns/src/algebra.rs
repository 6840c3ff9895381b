//! Pauli-string algebra, dense complex operators and process-matrix
//! machinery shared by all modules.
//!
//! Everything here is sized for one or two qubits: dense operators are
//! stack-allocated 2x2 or 4x4 complex matrices, and Pauli strings are
//! base-4 codes (0=I, 1=X, 2=Y, 3=Z per qubit digit).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Label of a Pauli-group generator on `nqubits` qubits, stored as a base-4
/// code. The leftmost qubit (qubit A) is the most significant digit, so the
/// two-qubit generators run `L1 = I⊗X, ..., L4 = X⊗I, ..., L15 = Z⊗Z`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliIndex {
    nqubits: u8,
    code: u8,
}

impl std::fmt::Debug for PauliIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

const DIGIT_NAMES: [char; 4] = ['I', 'X', 'Y', 'Z'];

impl PauliIndex {
    pub fn new(nqubits: usize, code: usize) -> Self {
        assert!(nqubits >= 1 && nqubits <= 2, "only 1 or 2 qubits supported");
        assert!(code < 4usize.pow(nqubits as u32));
        Self { nqubits: nqubits as u8, code: code as u8 }
    }

    pub fn from_digits(digits: &[u8]) -> Self {
        assert!(!digits.is_empty() && digits.len() <= 2);
        let mut code = 0u8;
        for &d in digits {
            assert!(d < 4);
            code = code * 4 + d;
        }
        Self { nqubits: digits.len() as u8, code }
    }

    pub fn identity(nqubits: usize) -> Self {
        Self::new(nqubits, 0)
    }

    /// σ_z acting on qubit `q` (0-based), identity elsewhere.
    pub fn sigma_z_on(nqubits: usize, q: usize) -> Self {
        assert!(q < nqubits);
        let mut digits = vec![0u8; nqubits];
        digits[q] = 3;
        Self::from_digits(&digits)
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits as usize
    }

    pub fn code(&self) -> usize {
        self.code as usize
    }

    pub fn is_identity(&self) -> bool {
        self.code == 0
    }

    pub fn digits(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.nqubits()];
        let mut c = self.code;
        for slot in out.iter_mut().rev() {
            *slot = c % 4;
            c /= 4;
        }
        out
    }

    /// Text label, e.g. `Z`, `XY` (= σ_x ⊗ σ_y) or `I`.
    pub fn label(&self) -> String {
        self.digits().iter().map(|&d| DIGIT_NAMES[d as usize]).collect()
    }

    /// Parses `"Z"`, `"ZZ"`, `"XY"`, ... or the generator shorthand `"L7"`.
    pub fn parse(s: &str, nqubits: usize) -> Result<Self> {
        let s = s.trim();
        if let Some(num) = s.strip_prefix('L') {
            let code: usize = num
                .parse()
                .map_err(|_| Error::InvalidIndex(format!("bad Pauli label {s:?}")))?;
            if code >= 4usize.pow(nqubits as u32) {
                return Err(Error::InvalidIndex(format!("label {s:?} out of range")));
            }
            return Ok(Self::new(nqubits, code));
        }
        if s.len() != nqubits {
            return Err(Error::InvalidIndex(format!(
                "label {s:?} has {} digits, expected {nqubits}",
                s.len()
            )));
        }
        let mut digits = Vec::with_capacity(nqubits);
        for ch in s.chars() {
            let d = DIGIT_NAMES
                .iter()
                .position(|&c| c == ch)
                .ok_or_else(|| Error::InvalidIndex(format!("bad Pauli digit {ch:?}")))?;
            digits.push(d as u8);
        }
        Ok(Self::from_digits(&digits))
    }

    /// All `4^n - 1` non-identity generators, in canonical order Λ_1..Λ_{4^n-1}.
    pub fn generators(nqubits: usize) -> impl Iterator<Item = PauliIndex> {
        (1..4usize.pow(nqubits as u32)).map(move |c| PauliIndex::new(nqubits, c))
    }

    /// Dense matrix rendering.
    pub fn matrix(&self) -> DenseOperator {
        let digits = self.digits();
        let mut m = single_pauli(digits[0]);
        for &d in &digits[1..] {
            m = m.kron(&single_pauli(d));
        }
        m
    }
}

fn single_pauli(d: u8) -> DenseOperator {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match d {
        0 => DenseOperator::from_rows(2, &[l, o, o, l]),
        1 => DenseOperator::from_rows(2, &[o, l, l, o]),
        2 => DenseOperator::from_rows(2, &[o, -i, i, o]),
        3 => DenseOperator::from_rows(2, &[l, o, o, -l]),
        _ => unreachable!(),
    }
}

/// Single-qubit product σ_a σ_b = phase · σ_c.
fn single_product(a: u8, b: u8) -> (C64, u8) {
    if a == 0 {
        return (C64::new(1.0, 0.0), b);
    }
    if b == 0 {
        return (C64::new(1.0, 0.0), a);
    }
    if a == b {
        return (C64::new(1.0, 0.0), 0);
    }
    // σ_a σ_b = i ε_{abc} σ_c for distinct a,b,c in {1,2,3}
    let c = 6 - a - b;
    let eps = levi_civita(a, b, c);
    (C64::new(0.0, eps as f64), c)
}

fn levi_civita(a: u8, b: u8, c: u8) -> i32 {
    match (a, b, c) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1,
        (3, 2, 1) | (2, 1, 3) | (1, 3, 2) => -1,
        _ => 0,
    }
}

/// Λ_u Λ_v = phase · Λ_w with phase in {±1, ±i}.
pub fn pauli_product(u: PauliIndex, v: PauliIndex) -> Result<(C64, PauliIndex)> {
    if u.nqubits != v.nqubits {
        return Err(Error::DimensionMismatch(format!(
            "pauli product on {} vs {} qubits",
            u.nqubits, v.nqubits
        )));
    }
    let (du, dv) = (u.digits(), v.digits());
    let mut phase = C64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(du.len());
    for (&a, &b) in du.iter().zip(dv.iter()) {
        let (p, c) = single_product(a, b);
        phase *= p;
        out.push(c);
    }
    Ok((phase, PauliIndex::from_digits(&out)))
}

/// Dense complex operator of dimension 2 or 4, stored row-major on the stack.
#[derive(Clone, Copy)]
pub struct DenseOperator {
    dim: usize,
    a: [C64; 16],
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4);
        Self { dim, a: [C64::new(0.0, 0.0); 16] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        let mut m = Self::zeros(dim);
        m.a[..dim * dim].copy_from_slice(entries);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.dim + j] = v;
    }

    #[inline]
    pub fn mul(&self, rhs: &DenseOperator) -> DenseOperator {
        debug_assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = DenseOperator::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let s = self.a[i * d + k];
                if s.re == 0.0 && s.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.a[i * d + j] += s * rhs.a[k * d + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &DenseOperator) -> DenseOperator {
        let mut out = *self;
        for (x, y) in out.a.iter_mut().zip(rhs.a.iter()) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, rhs: &DenseOperator) -> DenseOperator {
        let mut out = *self;
        for (x, y) in out.a.iter_mut().zip(rhs.a.iter()) {
            *x -= y;
        }
        out
    }

    pub fn scale(&self, c: C64) -> DenseOperator {
        let mut out = *self;
        for x in out.a.iter_mut() {
            *x *= c;
        }
        out
    }

    pub fn adjoint(&self) -> DenseOperator {
        let d = self.dim;
        let mut out = DenseOperator::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.a[i * d + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.a[i * self.dim + i]).sum()
    }

    /// Tr[self · rhs] without forming the product.
    pub fn trace_mul(&self, rhs: &DenseOperator) -> C64 {
        let d = self.dim;
        let mut t = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                t += self.a[i * d + k] * rhs.a[k * d + i];
            }
        }
        t
    }

    pub fn kron(&self, rhs: &DenseOperator) -> DenseOperator {
        assert!(self.dim == 2 && rhs.dim == 2);
        let mut out = DenseOperator::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out.a[(2 * i + k) * 4 + (2 * j + l)] =
                            self.a[i * 2 + j] * rhs.a[k * 2 + l];
                    }
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.a[..self.dim * self.dim]
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, rhs: &DenseOperator) -> f64 {
        self.a[..self.dim * self.dim]
            .iter()
            .zip(rhs.a.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint().mul(self).max_abs_diff(&DenseOperator::identity(self.dim)) <= tol
    }
}

impl std::fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "DenseOperator({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let v = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i  ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Dense matrix of the Pauli string `u`.
pub fn pauli_matrix(u: PauliIndex) -> DenseOperator {
    u.matrix()
}

/// Conjugation factor `-(1/2^{|Q|}) Tr[Õ⁻¹ Λ_u Õ Λ_c]` for a unitary
/// Hermitian toggled observable. Symmetric in `(u, c)`.
pub fn conjugation_factor(u: PauliIndex, c: PauliIndex, o_tilde: &DenseOperator) -> Result<f64> {
    let d = o_tilde.dim();
    if u.nqubits != c.nqubits || pauli_dim(u) != d {
        return Err(Error::DimensionMismatch("conjugation_factor".into()));
    }
    if !o_tilde.is_unitary(1e-9) || !o_tilde.is_hermitian(1e-9) {
        return Err(Error::NotPauliObservable);
    }
    let inv = o_tilde.adjoint();
    let t = inv.mul(&u.matrix()).mul(o_tilde).trace_mul(&c.matrix());
    Ok(-t.re / d as f64)
}

fn pauli_dim(u: PauliIndex) -> usize {
    1 << u.nqubits()
}

/// Pauli transfer matrix and χ-matrix of a channel, both in the Λ_0..Λ_{4^n-1}
/// generator basis.
#[derive(Clone, Debug)]
pub struct ProcessMatrices {
    pub ptm: DMatrix<f64>,
    pub chi: DMatrix<C64>,
}

/// χ from the Pauli transfer matrix: solves `R_{ab} = Σ_{uv} χ_{uv} M_{(ab),(uv)}`
/// with `M = (1/d) Tr[Λ_a Λ_u Λ_b Λ_v]` computed symbolically.
pub fn ptm_to_chi(ptm: &DMatrix<f64>) -> Result<DMatrix<C64>> {
    let n2 = ptm.nrows();
    if ptm.ncols() != n2 || (n2 != 4 && n2 != 16) {
        return Err(Error::DimensionMismatch(format!("ptm is {}x{}", n2, ptm.ncols())));
    }
    let nq = if n2 == 4 { 1 } else { 2 };
    let m = chi_basis_matrix(nq);
    let rvec = DMatrix::from_fn(n2 * n2, 1, |r, _| C64::new(ptm[(r / n2, r % n2)], 0.0));
    let lu = m.lu();
    let sol = lu
        .solve(&rvec)
        .ok_or_else(|| Error::DimensionMismatch("singular chi basis matrix".into()))?;
    Ok(DMatrix::from_fn(n2, n2, |u, v| sol[(u * n2 + v, 0)]))
}

/// Forward map χ → PTM (used to cross-check the inversion).
pub fn chi_to_ptm(chi: &DMatrix<C64>) -> DMatrix<f64> {
    let n2 = chi.nrows();
    let nq = if n2 == 4 { 1 } else { 2 };
    let m = chi_basis_matrix(nq);
    DMatrix::from_fn(n2, n2, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for u in 0..n2 {
            for v in 0..n2 {
                acc += m[(a * n2 + b, u * n2 + v)] * chi[(u, v)];
            }
        }
        acc.re
    })
}

fn chi_basis_matrix(nq: usize) -> DMatrix<C64> {
    let n2 = 4usize.pow(nq as u32);
    DMatrix::from_fn(n2 * n2, n2 * n2, |row, col| {
        let (a, b) = (row / n2, row % n2);
        let (u, v) = (col / n2, col % n2);
        let (p1, w1) = pauli_product(PauliIndex::new(nq, a), PauliIndex::new(nq, u)).unwrap();
        let (p2, w2) = pauli_product(PauliIndex::new(nq, b), PauliIndex::new(nq, v)).unwrap();
        if w1 == w2 {
            p1 * p2
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Real trace inner product `Re Tr[χ χ̃]`.
pub fn process_fidelity(chi: &DMatrix<C64>, chi_ideal: &DMatrix<C64>) -> f64 {
    let n = chi.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for u in 0..n {
        for v in 0..n {
            acc += chi[(u, v)] * chi_ideal[(v, u)];
        }
    }
    acc.re
}
