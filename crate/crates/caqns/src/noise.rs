//! RTN-based classical and quantum noise: trajectory sampling, closed-form
//! moments, nested-bracket correlators, and control-adapted spectra.
//!
//! Two noise families are supported:
//!
//! - classical RTN dephasing, `B_q(t) = g_q β(t)` (`quantum_shift = 0`),
//!   with a shared or per-qubit fluctuator;
//! - the single-qubit quantum toy model
//!   `B(t) = g [β(t) τ_x + β(t + T̃) τ_y]` with the auxiliary qubit traced
//!   against `(τ_0 + τ_z)/2` (`quantum_shift = T̃ > 0`).
//!
//! CA spectra are time-ordered integrals of the nested-bracket correlators
//! against products of window functions; couplings are absorbed into the
//! spectrum values, controls stay dimensionless.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::control::WindowGrid;
use crate::polyexp::{ordered_integral, Piecewise, PolyExp, Rate, Scales, Term};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitLaw {
    /// β(0) ≡ +1 ("semi-symmetric" RTN: symmetric switching, pinned start).
    FixedPlusOne,
    /// β(0) = ±1 with equal probability; all odd moments vanish.
    SymmetricPmOne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    IndependentPerQubit,
    /// All qubit labels reference one fluctuator β(t).
    SharedFluctuator,
}

/// RTN noise model parameters. `couplings[q]` is g_q in rad/s.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma: f64,
    pub couplings: Vec<f64>,
    pub init_law: InitLaw,
    /// T̃ in seconds; 0 ⇒ purely classical noise.
    #[serde(default)]
    pub quantum_shift: f64,
    /// Modulation Ω in rad/s; implemented as β(t) → β(t)·cos(Ωt).
    #[serde(default)]
    pub modulation: f64,
    pub topology: Topology,
}

impl NoiseModel {
    pub fn classical_1q(gamma: f64, g: f64, init_law: InitLaw) -> Self {
        Self {
            gamma,
            couplings: vec![g],
            init_law,
            quantum_shift: 0.0,
            modulation: 0.0,
            topology: Topology::SharedFluctuator,
        }
    }

    /// Both qubits coupled equally to one fluctuator.
    pub fn shared_2q(gamma: f64, g: f64, init_law: InitLaw) -> Self {
        Self {
            gamma,
            couplings: vec![g, g],
            init_law,
            quantum_shift: 0.0,
            modulation: 0.0,
            topology: Topology::SharedFluctuator,
        }
    }

    /// Single-qubit quantum toy model with shift T̃.
    pub fn toy_quantum(gamma: f64, g: f64, t_shift: f64) -> Self {
        Self {
            gamma,
            couplings: vec![g],
            init_law: InitLaw::SymmetricPmOne,
            quantum_shift: t_shift,
            modulation: 0.0,
            topology: Topology::SharedFluctuator,
        }
    }

    pub fn nqubits(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_classical(&self) -> bool {
        self.quantum_shift == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || self.quantum_shift < 0.0 || self.modulation < 0.0 {
            return Err(Error::UnsupportedModel("negative rate parameters".into()));
        }
        if self.couplings.is_empty() || self.couplings.len() > 2 {
            return Err(Error::UnsupportedModel("1 or 2 qubit couplings required".into()));
        }
        if !self.is_classical() && self.couplings.len() != 1 {
            return Err(Error::UnsupportedModel("toy quantum model is single-qubit".into()));
        }
        Ok(())
    }

    fn scales(&self) -> Scales {
        Scales { g2: 2.0 * self.gamma, om: self.modulation }
    }
}

/// One random telegraph path: value at t is `init · (-1)^{#switches ≤ t}`.
#[derive(Clone, Debug)]
pub struct RtnTrajectory {
    pub init_value: i8,
    pub switch_times: Vec<f64>,
}

impl RtnTrajectory {
    pub fn value_at(&self, t: f64) -> f64 {
        let flips = self.switch_times.partition_point(|&s| s <= t);
        let v = self.init_value as f64;
        if flips % 2 == 0 {
            v
        } else {
            -v
        }
    }
}

/// Poisson switching at rate γ over `[0, horizon]` (internally extended by
/// T̃ when the model is shifted).
pub fn sample_trajectory(model: &NoiseModel, horizon: f64, rng: &mut impl Rng) -> RtnTrajectory {
    let horizon = horizon + model.quantum_shift;
    let init_value = match model.init_law {
        InitLaw::FixedPlusOne => 1,
        InitLaw::SymmetricPmOne => {
            if rng.random::<bool>() {
                1
            } else {
                -1
            }
        }
    };
    let mut switch_times = Vec::new();
    if model.gamma > 0.0 {
        let exp = Exp::new(model.gamma).unwrap();
        let mut t = exp.sample(rng);
        while t <= horizon {
            switch_times.push(t);
            t += exp.sample(rng);
        }
    }
    RtnTrajectory { init_value, switch_times }
}

/// `⟨β(t_1)···β(t_k)⟩` of the telegraph process for times sorted in
/// descending order: adjacent pairs contribute `e^{-2γ(t_{2i-1}-t_{2i})}`;
/// an unpaired trailing time contributes `e^{-2γ t_k}` for the pinned
/// initial law and kills the moment for the symmetric law.
pub fn pure_moment(model: &NoiseModel, times: &[f64]) -> Result<f64> {
    if times.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidIndex("moment times must be sorted descending".into()));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidIndex("moment times must be nonnegative".into()));
    }
    let k = times.len();
    if k == 0 {
        return Ok(1.0);
    }
    if k % 2 == 1 && model.init_law == InitLaw::SymmetricPmOne {
        return Ok(0.0);
    }
    let mut log_m = 0.0;
    let mut i = 0;
    while i + 1 < k {
        log_m -= 2.0 * model.gamma * (times[i] - times[i + 1]);
        i += 2;
    }
    if k % 2 == 1 {
        log_m -= 2.0 * model.gamma * times[k - 1];
    }
    Ok(log_m.exp())
}

/// Canonical label (n-string, μ-string, q-string) of a CA spectrum.
/// `n` is 1-based and nonincreasing for time-ordered indices; `q` holds
/// 0-based qubit labels.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrumIndex {
    pub n: Vec<u8>,
    pub mu: Vec<u8>,
    pub q: Vec<u8>,
}

impl SpectrumIndex {
    pub fn new(n: Vec<u8>, mu: Vec<u8>, q: Vec<u8>) -> Result<Self> {
        let idx = Self { n, mu, q };
        idx.check_shape()?;
        Ok(idx)
    }

    /// Single-qubit index (all q-labels zero).
    pub fn single(n: Vec<u8>, mu: Vec<u8>) -> Result<Self> {
        let q = vec![0; n.len()];
        Self::new(n, mu, q)
    }

    /// Classical index (μ⃗ = 0⃗).
    pub fn classical(n: Vec<u8>, q: Vec<u8>) -> Result<Self> {
        let mu = vec![0; n.len().saturating_sub(1)];
        Self::new(n, mu, q)
    }

    pub fn order(&self) -> usize {
        self.n.len()
    }

    fn check_shape(&self) -> Result<()> {
        let k = self.n.len();
        if k == 0 {
            return Err(Error::InvalidIndex("empty n-string".into()));
        }
        if self.mu.len() + 1 != k || self.q.len() != k {
            return Err(Error::InvalidIndex(format!(
                "inconsistent lengths: n={k}, mu={}, q={}",
                self.mu.len(),
                self.q.len()
            )));
        }
        if self.mu.iter().any(|&m| m > 1) {
            return Err(Error::InvalidIndex("mu digits must be bits".into()));
        }
        Ok(())
    }

    /// Time ordering `n_1 ≥ n_2 ≥ ... ≥ n_k`; violating strings label the
    /// zero spectrum.
    pub fn is_time_ordered(&self) -> bool {
        self.n.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn is_classical(&self) -> bool {
        self.mu.iter().all(|&m| m == 0)
    }

    pub fn validate(&self, l: usize, nqubits: usize) -> Result<()> {
        self.check_shape()?;
        if self.n.iter().any(|&n| n == 0 || n as usize > l) {
            return Err(Error::InvalidIndex(format!("window index out of 1..={l}")));
        }
        if self.q.iter().any(|&q| q as usize >= nqubits) {
            return Err(Error::InvalidIndex("qubit label out of range".into()));
        }
        Ok(())
    }
}

impl std::fmt::Debug for SpectrumIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let q: String = self.q.iter().map(|&q| (b'A' + q) as char).collect();
        write!(f, "S^{:?}_{}{:?}", self.mu, q, self.n)
    }
}

impl Ord for SpectrumIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.n.len(), &self.n, &self.mu, &self.q).cmp(&(
            other.n.len(),
            &other.n,
            &other.mu,
            &other.q,
        ))
    }
}

impl PartialOrd for SpectrumIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo,
    Reconstructed,
    Bound,
}

/// Map from spectrum index to complex value, tied to one window grid.
#[derive(Clone, Debug)]
pub struct SpectrumTable {
    pub grid: WindowGrid,
    pub provenance: Provenance,
    entries: BTreeMap<SpectrumIndex, C64>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRecord {
    k: usize,
    n: Vec<u8>,
    mu: Vec<u8>,
    q: Vec<u8>,
    re: f64,
    im: f64,
    provenance: Provenance,
}

impl SpectrumTable {
    pub fn new(grid: WindowGrid, provenance: Provenance) -> Self {
        Self { grid, provenance, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, idx: SpectrumIndex, value: C64) {
        self.entries.insert(idx, value);
    }

    pub fn get(&self, idx: &SpectrumIndex) -> Option<C64> {
        self.entries.get(idx).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpectrumIndex, &C64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_order(&self) -> Option<usize> {
        self.entries.keys().map(|i| i.order()).max()
    }

    pub fn to_json(&self) -> String {
        let records: Vec<SpectrumRecord> = self
            .entries
            .iter()
            .map(|(i, v)| SpectrumRecord {
                k: i.order(),
                n: i.n.clone(),
                mu: i.mu.clone(),
                q: i.q.clone(),
                re: v.re,
                im: v.im,
                provenance: self.provenance,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("spectrum table serializes")
    }

    pub fn from_json(json: &str, grid: WindowGrid) -> Result<Self> {
        let records: Vec<SpectrumRecord> = serde_json::from_str(json)?;
        let provenance = records.first().map(|r| r.provenance).unwrap_or(Provenance::Exact);
        let mut table = Self::new(grid, provenance);
        for r in records {
            if r.provenance != provenance {
                return Err(Error::InvalidIndex("mixed provenance in spectrum table".into()));
            }
            let idx = SpectrumIndex::new(r.n, r.mu, r.q)?;
            if idx.order() != r.k {
                return Err(Error::InvalidIndex("record k disagrees with n-string".into()));
            }
            table.insert(idx, C64::new(r.re, r.im));
        }
        Ok(table)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path, grid: WindowGrid) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, grid)
    }
}

/// One expansion term of the nested bracket: operators appear left-to-right
/// in the order of `ops` (0-based original slots).
#[derive(Clone, Debug)]
struct BracketTerm {
    sign: f64,
    ops: Vec<usize>,
}

/// Expands `⟦...⟦B_1, B_2⟧_{μ_1}, ...⟧_{μ_{k-1}}` into 2^{k-1} ordered
/// operator strings with signs (overall 1/2^{k-1} applied by callers).
fn bracket_terms(mu: &[u8]) -> Vec<BracketTerm> {
    let mut terms = vec![BracketTerm { sign: 1.0, ops: vec![0] }];
    for (j, &m) in mu.iter().enumerate() {
        let slot = j + 1;
        let mut next = Vec::with_capacity(terms.len() * 2);
        for t in &terms {
            let mut right = t.ops.clone();
            right.push(slot);
            next.push(BracketTerm { sign: t.sign, ops: right });
            let mut left = Vec::with_capacity(t.ops.len() + 1);
            left.push(slot);
            left.extend_from_slice(&t.ops);
            let sign = if m == 1 { -t.sign } else { t.sign };
            next.push(BracketTerm { sign, ops: left });
        }
        terms = next;
    }
    terms
}

/// Expectation of a product of toy-model Pauli factors `τ_{a_1}···τ_{a_m}`
/// against `(τ_0 + τ_z)/2`, with `a = 0 ↦ τ_x`, `a = 1 ↦ τ_y`.
fn tau_string_expectation(choices_in_order: &[u8]) -> C64 {
    let mut phase = C64::new(1.0, 0.0);
    let mut cur = 0u8; // current Pauli digit, 0 = identity
    for &a in choices_in_order {
        let digit = if a == 0 { 1 } else { 2 };
        let (p, next) = single_pauli_product(cur, digit);
        phase *= p;
        cur = next;
    }
    if cur == 0 || cur == 3 {
        phase
    } else {
        C64::new(0.0, 0.0)
    }
}

fn single_pauli_product(a: u8, b: u8) -> (C64, u8) {
    if a == 0 {
        return (C64::new(1.0, 0.0), b);
    }
    if b == 0 {
        return (C64::new(1.0, 0.0), a);
    }
    if a == b {
        return (C64::new(1.0, 0.0), 0);
    }
    let c = 6 - a - b;
    let eps = match (a, b) {
        (1, 2) | (2, 3) | (3, 1) => 1.0,
        _ => -1.0,
    };
    (C64::new(0.0, eps), c)
}

fn coupling_product(model: &NoiseModel, q: &[u8]) -> Result<f64> {
    match model.topology {
        Topology::SharedFluctuator => {
            Ok(q.iter().map(|&qi| model.couplings[qi as usize]).product())
        }
        Topology::IndependentPerQubit => {
            if q.windows(2).any(|w| w[0] != w[1]) {
                return Err(Error::UnsupportedModel(
                    "cross-correlators need a shared fluctuator".into(),
                ));
            }
            Ok(q.iter().map(|&qi| model.couplings[qi as usize]).product())
        }
    }
}

/// Pointwise nested-bracket correlator `⟨B^{μ⃗}_{q⃗}(t⃗)⟩` for descending
/// times. Classical models reduce to a single pure moment; the toy model
/// expands over the τ_x/τ_y channels with shifted times.
pub fn nested_bracket_correlator(
    model: &NoiseModel,
    mu: &[u8],
    q: &[u8],
    times: &[f64],
) -> Result<C64> {
    model.validate()?;
    let k = times.len();
    if mu.len() + 1 != k || q.len() != k {
        return Err(Error::InvalidIndex("inconsistent correlator index lengths".into()));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidIndex("negative correlator times".into()));
    }
    if times.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidIndex("correlator times must be descending".into()));
    }
    let g = coupling_product(model, q)?;
    let norm = 0.5f64.powi(k as i32 - 1);
    let modf = |t: f64| {
        if model.modulation > 0.0 {
            (model.modulation * t).cos()
        } else {
            1.0
        }
    };

    if model.is_classical() {
        // scalars commute: every bracket string evaluates identically
        let sign_sum: f64 = bracket_terms(mu).iter().map(|t| t.sign).sum();
        if sign_sum == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let m = pure_moment(model, times)?;
        let modulation: f64 = times.iter().map(|&t| modf(t)).product();
        return Ok(C64::new(norm * sign_sum * g * m * modulation, 0.0));
    }

    // toy model: B(t) = g [β(t) τ_x + β(t+T̃) τ_y]
    let shift = model.quantum_shift;
    let mut acc = C64::new(0.0, 0.0);
    for term in bracket_terms(mu) {
        for choice in 0..(1u32 << k) {
            let choices: Vec<u8> =
                (0..k).map(|pos| ((choice >> pos) & 1) as u8).collect();
            let phase = tau_string_expectation(&choices);
            if phase.norm_sqr() == 0.0 {
                continue;
            }
            let mut shifted: Vec<f64> = term
                .ops
                .iter()
                .zip(choices.iter())
                .map(|(&var, &a)| times[var] + if a == 1 { shift } else { 0.0 })
                .collect();
            let modulation: f64 = shifted.iter().map(|&t| modf(t)).product();
            shifted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let m = pure_moment(model, &shifted)?;
            acc += phase * term.sign * m * modulation;
        }
    }
    Ok(acc * norm * g)
}

/// Exponential rate (in units of 2γ) of each position of a descending
/// moment argument list, or `None` when the moment vanishes identically.
fn moment_slot_rates(k: usize, init: InitLaw) -> Option<Vec<i32>> {
    if k % 2 == 1 && init == InitLaw::SymmetricPmOne {
        return None;
    }
    let mut rates = Vec::with_capacity(k);
    let mut i = 0;
    while i + 1 < k {
        rates.push(-1);
        rates.push(1);
        i += 2;
    }
    if k % 2 == 1 {
        rates.push(-1);
    }
    Some(rates)
}

/// Per-variable integrand `e^{λ_v t}·[cos(Ω(t + shift_v))]` on its window,
/// expressed in local window coordinates.
fn exact_factor(
    model: &NoiseModel,
    grid: WindowGrid,
    window: usize,
    rate_units: i32,
    shift: f64,
) -> Piecewise {
    let (lo, hi) = grid.window_bounds(window);
    let scales = model.scales();
    let rate = Rate { m: rate_units, n: 0 };
    let base = (rate.value(scales) * lo).exp();
    let mut p = PolyExp::zero();
    if model.modulation > 0.0 {
        // cos(Ω(t+shift)) = e^{iΩ(t+shift)}/2 + e^{-iΩ(t+shift)}/2
        for s in [1i32, -1] {
            let r = Rate { m: rate_units, n: s };
            let coeff = base
                * C64::new(0.0, s as f64 * model.modulation * (shift + lo)).exp()
                * 0.5;
            p.push(Term { coeff, pow: 0, rate: r });
        }
    } else {
        p.push(Term { coeff: base, pow: 0, rate });
    }
    Piecewise::single(lo, hi, p)
}

/// Closed-form CA spectrum by recursive integration of poly-exponential
/// integrands over the window boxes intersected with the time-ordering
/// simplex. Couplings are included in the value.
///
/// Supported exactly: classical models (any order), and the toy model when
/// every mixed-channel term has a domain-independent time ordering, i.e.
/// `T̃ ≥ T` (all shifted times sort above all unshifted ones) or `T̃ = 0`.
/// Other configurations return `UnsupportedModel`; use [`ca_spectrum_mc`].
pub fn ca_spectrum_exact(
    model: &NoiseModel,
    index: &SpectrumIndex,
    grid: WindowGrid,
) -> Result<C64> {
    model.validate()?;
    index.validate(grid.windows(), model.nqubits())?;
    if !index.is_time_ordered() {
        return Ok(C64::new(0.0, 0.0));
    }
    let k = index.order();
    let g = coupling_product(model, &index.q)?;
    let scales = model.scales();

    if model.is_classical() {
        if !index.is_classical() {
            return Ok(C64::new(0.0, 0.0));
        }
        let Some(rates) = moment_slot_rates(k, model.init_law) else {
            return Ok(C64::new(0.0, 0.0));
        };
        let factors: Vec<Piecewise> = (0..k)
            .map(|j| exact_factor(model, grid, index.n[j] as usize, rates[j], 0.0))
            .collect();
        return Ok(ordered_integral(&factors, scales) * g);
    }

    // toy model
    let shift = model.quantum_shift;
    let total = grid.total();
    let mut acc = C64::new(0.0, 0.0);
    for term in bracket_terms(&index.mu) {
        for choice in 0..(1u32 << k) {
            let choices: Vec<u8> = (0..k).map(|pos| ((choice >> pos) & 1) as u8).collect();
            let phase = tau_string_expectation(&choices);
            if phase.norm_sqr() == 0.0 {
                continue;
            }
            // shifted[var] = 1 iff variable var carries the +T̃ channel
            let mut shifted = vec![0u8; k];
            for (pos, &var) in term.ops.iter().enumerate() {
                shifted[var] = choices[pos];
            }
            let n_shifted = shifted.iter().filter(|&&s| s == 1).count();
            let mixed = n_shifted > 0 && n_shifted < k;
            if mixed && shift < total {
                return Err(Error::UnsupportedModel(
                    "toy-model exact integration needs quantum_shift >= grid total; \
                     fall back to ca_spectrum_mc"
                        .into(),
                ));
            }
            // Sorted order of {t_v + shift_v}: shifted variables (descending
            // v) above unshifted variables (descending v).
            let sorted_vars: Vec<usize> = (0..k)
                .filter(|&v| shifted[v] == 1)
                .chain((0..k).filter(|&v| shifted[v] == 0))
                .collect();
            let Some(slot_rates) = moment_slot_rates(k, model.init_law) else {
                continue;
            };
            let mut var_rate = vec![0i32; k];
            for (slot, &var) in sorted_vars.iter().enumerate() {
                var_rate[var] = slot_rates[slot];
            }
            // e^{λ(t+T̃)} = e^{λT̃} e^{λt}: the shift enters as a constant
            let mut shift_coeff = C64::new(1.0, 0.0);
            for v in 0..k {
                if shifted[v] == 1 {
                    let r = Rate { m: var_rate[v], n: 0 };
                    shift_coeff *= (r.value(scales) * shift).exp();
                }
            }
            let factors: Vec<Piecewise> = (0..k)
                .map(|v| {
                    let sh = if shifted[v] == 1 { shift } else { 0.0 };
                    exact_factor(model, grid, index.n[v] as usize, var_rate[v], sh)
                })
                .collect();
            acc += phase * term.sign * shift_coeff * ordered_integral(&factors, scales);
        }
    }
    Ok(acc * g * 0.5f64.powi(k as i32 - 1))
}

/// β(t + shift)·[cos(Ω(t + shift))] on one window as a piecewise function
/// of the window-local time, with cells cut at the trajectory's (shifted)
/// switch times.
fn trajectory_factor(
    model: &NoiseModel,
    grid: WindowGrid,
    traj: &RtnTrajectory,
    window: usize,
    shift: f64,
) -> Piecewise {
    let (lo, hi) = grid.window_bounds(window);
    let mut cuts = vec![lo];
    for &s in &traj.switch_times {
        let t = s - shift;
        if t > lo && t < hi {
            cuts.push(t);
        }
    }
    cuts.push(hi);
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let b = traj.value_at(mid + shift);
        let mut p = PolyExp::zero();
        if model.modulation > 0.0 {
            for s in [1i32, -1] {
                let coeff = C64::new(0.0, s as f64 * model.modulation * (shift + w[0])).exp()
                    * (0.5 * b);
                p.push(Term { coeff, pow: 0, rate: Rate { m: 0, n: s } });
            }
        } else {
            p.push(Term { coeff: C64::new(b, 0.0), pow: 0, rate: Rate::ZERO });
        }
        pieces.push(p);
    }
    Piecewise::new(cuts, pieces, C64::new(0.0, 0.0), C64::new(0.0, 0.0))
}

/// Monte Carlo CA spectrum: per trajectory the β path is piecewise
/// constant, so the ordered window integral is evaluated in closed form;
/// averaging over trajectories gives an unbiased estimate and its
/// standard error.
pub fn ca_spectrum_mc(
    model: &NoiseModel,
    index: &SpectrumIndex,
    grid: WindowGrid,
    n_traj: usize,
    rng: &mut impl Rng,
) -> Result<(C64, f64)> {
    model.validate()?;
    index.validate(grid.windows(), model.nqubits())?;
    assert!(n_traj >= 1);
    if !index.is_time_ordered() {
        return Ok((C64::new(0.0, 0.0), 0.0));
    }
    let k = index.order();
    let g = coupling_product(model, &index.q)?;
    let scales = model.scales();
    let norm = 0.5f64.powi(k as i32 - 1);

    if model.is_classical() && !index.is_classical() {
        // commuting scalars: the bracket signs cancel exactly, zero variance
        return Ok((C64::new(0.0, 0.0), 0.0));
    }

    let terms = bracket_terms(&index.mu);
    let mut samples = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let traj = sample_trajectory(model, grid.total(), rng);
        let value = if model.is_classical() {
            let factors: Vec<Piecewise> = (0..k)
                .map(|j| trajectory_factor(model, grid, &traj, index.n[j] as usize, 0.0))
                .collect();
            ordered_integral(&factors, scales) * (g * 0.5f64.powi(k as i32 - 1) * terms.len() as f64)
        } else {
            let shift = model.quantum_shift;
            let mut acc = C64::new(0.0, 0.0);
            for term in &terms {
                for choice in 0..(1u32 << k) {
                    let choices: Vec<u8> =
                        (0..k).map(|pos| ((choice >> pos) & 1) as u8).collect();
                    let phase = tau_string_expectation(&choices);
                    if phase.norm_sqr() == 0.0 {
                        continue;
                    }
                    let mut shifted = vec![0u8; k];
                    for (pos, &var) in term.ops.iter().enumerate() {
                        shifted[var] = choices[pos];
                    }
                    let factors: Vec<Piecewise> = (0..k)
                        .map(|v| {
                            let sh = if shifted[v] == 1 { shift } else { 0.0 };
                            trajectory_factor(model, grid, &traj, index.n[v] as usize, sh)
                        })
                        .collect();
                    acc += phase * term.sign * ordered_integral(&factors, scales);
                }
            }
            acc * g * norm
        };
        samples.push(value);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<C64>() / n;
    let var = samples
        .iter()
        .map(|s| (s - mean).norm_sqr())
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}
