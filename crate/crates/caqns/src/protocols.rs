//! QNS protocol machinery: experiment lists, design-matrix assembly,
//! random-shuffle protocol design with condition-number selection,
//! least-squares spectral reconstruction, and protocol-table I/O with the
//! bundled reference protocols.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::PauliIndex;
use crate::control::{ControlKind, DigitalControl, WindowGrid};
use crate::dyson::dyson_coefficient_with;
use crate::noise::{Provenance, SpectrumIndex, SpectrumTable};
use crate::{Error, Result};

/// One QNS experiment: a digital control, a pseudo-initial Pauli operator,
/// and a measured Pauli observable.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub control: DigitalControl,
    pub rho: PauliIndex,
    pub obs: PauliIndex,
}

/// JSON schema of one protocol row. Single-qubit rows carry per-window
/// switching vectors; two-qubit rows carry per-window KAK parameter sets.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ProtocolRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kak: Option<Vec<Vec<f64>>>,
    pub rho: String,
    pub obs: String,
}

impl ProtocolRow {
    pub fn to_experiment(&self, grid: WindowGrid) -> Result<Experiment> {
        let control = match (&self.windows, &self.kak) {
            (Some(y), None) => DigitalControl::single_qubit(grid, y.clone())?,
            (None, Some(kak)) => {
                let params: Vec<[f64; 15]> = kak
                    .iter()
                    .map(|p| {
                        <[f64; 15]>::try_from(p.as_slice()).map_err(|_| {
                            Error::InvalidProtocol(format!("{} KAK values, need 15", p.len()))
                        })
                    })
                    .collect::<Result<_>>()?;
                DigitalControl::two_qubit_kak(grid, params)?
            }
            _ => {
                return Err(Error::InvalidProtocol(
                    "row needs exactly one of `windows` or `kak`".into(),
                ))
            }
        };
        let nq = control.nqubits();
        Ok(Experiment {
            rho: PauliIndex::parse(&self.rho, nq)?,
            obs: PauliIndex::parse(&self.obs, nq)?,
            control,
        })
    }

    pub fn from_experiment(e: &Experiment) -> Self {
        match e.control.kind() {
            ControlKind::SingleQubit(y) => ProtocolRow {
                windows: Some(y.clone()),
                kak: None,
                rho: e.rho.label(),
                obs: e.obs.label(),
            },
            ControlKind::TwoQubitKak(p) => ProtocolRow {
                windows: None,
                kak: Some(p.iter().map(|w| w.to_vec()).collect()),
                rho: e.rho.label(),
                obs: e.obs.label(),
            },
        }
    }
}

pub fn experiments_from_json(json: &str, grid: WindowGrid) -> Result<Vec<Experiment>> {
    let rows: Vec<ProtocolRow> = serde_json::from_str(json)?;
    rows.iter().map(|r| r.to_experiment(grid)).collect()
}

pub fn experiments_to_json(experiments: &[Experiment]) -> String {
    let rows: Vec<ProtocolRow> = experiments.iter().map(ProtocolRow::from_experiment).collect();
    serde_json::to_string_pretty(&rows).expect("protocol rows serialize")
}

pub fn load_protocol_table(path: &std::path::Path, grid: WindowGrid) -> Result<Vec<Experiment>> {
    experiments_from_json(&std::fs::read_to_string(path)?, grid)
}

pub fn save_protocol_table(path: &std::path::Path, experiments: &[Experiment]) -> Result<()> {
    std::fs::write(path, experiments_to_json(experiments))?;
    Ok(())
}

/// Reference protocols shipped with the crate.
pub mod fixtures {
    use super::*;

    macro_rules! fixture_fn {
        ($name:ident, $file:literal, $windows:literal, $doc:literal) => {
            #[doc = $doc]
            pub fn $name(grid: WindowGrid) -> Result<Vec<Experiment>> {
                if grid.windows() != $windows {
                    return Err(Error::InvalidProtocol(format!(
                        "{} expects L = {}, got {}",
                        stringify!($name),
                        $windows,
                        grid.windows()
                    )));
                }
                experiments_from_json(include_str!($file), grid)
            }
        };
    }

    fixture_fn!(k2c, "../fixtures/k2c.json", 4, "Gaussian classical QNS, L=4 (14 rows).");
    fixture_fn!(k2q, "../fixtures/k2q.json", 4, "Gaussian classical+quantum QNS, L=4 (20 rows).");
    fixture_fn!(k4c, "../fixtures/k4c.json", 4, "K=4 classical QNS, L=4 (49 rows).");
    fixture_fn!(k4q, "../fixtures/k4q.json", 4, "K=4 classical+quantum QNS, L=4.");
    fixture_fn!(
        fundamental_1q_l4,
        "../fixtures/fundamental_1q_l4.json",
        4,
        "Fundamental single-qubit digital QNS, L=4, K=8 (80 rows)."
    );
    fixture_fn!(
        fundamental_2q_l2,
        "../fixtures/fundamental_2q_l2.json",
        2,
        "Fundamental two-qubit digital QNS, L=2, K=8 (80 rows)."
    );
}

/// Row i, column j: the affine coefficient of learnable spectrum j in the
/// expectation of experiment i; offsets carry the k=0 term `Tr[ρ̃ Õ]`.
pub fn assemble_design_matrix(
    experiments: &[Experiment],
    learnable: &[SpectrumIndex],
) -> Result<(DMatrix<C64>, DVector<f64>)> {
    let rows: Vec<(Vec<C64>, f64)> = experiments
        .par_iter()
        .map(|e| -> Result<(Vec<C64>, f64)> {
            let o_tilde = e.control.toggled_observable(e.obs)?;
            let rho = e.rho.matrix();
            let offset = rho.trace_mul(&o_tilde);
            let row: Vec<C64> = learnable
                .iter()
                .map(|idx| dyson_coefficient_with(&e.control, &rho, &o_tilde, idx))
                .collect::<Result<_>>()?;
            Ok((row, offset.re))
        })
        .collect::<Result<_>>()?;
    let design = DMatrix::from_fn(experiments.len(), learnable.len(), |i, j| rows[i].0[j]);
    let offsets = DVector::from_fn(experiments.len(), |i, _| rows[i].1);
    Ok((design, offsets))
}

/// Embeds a complex matrix as the real `[[Re, -Im], [Im, Re]]` block form
/// (same singular values, doubled multiplicity).
fn real_embedding(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let v = m[(i % r, j % c)];
        match (i >= r, j >= c) {
            (false, false) | (true, true) => v.re,
            (false, true) => -v.im,
            (true, false) => v.im,
        }
    })
}

/// Column norms of a complex matrix (zero-safe).
fn column_norms(design: &DMatrix<C64>) -> Vec<f64> {
    (0..design.ncols())
        .map(|j| {
            let n = design.column(j).norm();
            if n == 0.0 {
                1.0
            } else {
                n
            }
        })
        .collect()
}

/// 2-norm condition number of the column-equilibrated design matrix
/// (coefficient magnitudes grow with the order k, so raw columns carry an
/// artificial scale spread; equilibration makes κ measure the actual
/// geometry of the experiment set).
pub fn condition_number(design: &DMatrix<C64>) -> f64 {
    let norms = column_norms(design);
    let scaled = DMatrix::from_fn(design.nrows(), design.ncols(), |i, j| {
        design[(i, j)] / norms[j]
    });
    let svd = real_embedding(&scaled).svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// A designed QNS protocol: experiments, target learnable set, design
/// matrix with offsets, and its condition number.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub experiments: Vec<Experiment>,
    pub learnable: Vec<SpectrumIndex>,
    pub design: DMatrix<C64>,
    pub offsets: DVector<f64>,
    pub condition_number: f64,
}

impl Protocol {
    /// Builds the protocol data for a fixed experiment list.
    pub fn from_experiments(
        experiments: Vec<Experiment>,
        learnable: Vec<SpectrumIndex>,
    ) -> Result<Self> {
        let (design, offsets) = assemble_design_matrix(&experiments, &learnable)?;
        let condition_number = condition_number(&design);
        Ok(Self { experiments, learnable, design, offsets, condition_number })
    }

    /// Noiseless synthetic measurements for a planted spectrum table.
    pub fn predict_measurements(&self, table: &SpectrumTable) -> Vec<f64> {
        let x = DVector::from_fn(self.learnable.len(), |j, _| {
            table.get(&self.learnable[j]).unwrap_or(C64::new(0.0, 0.0))
        });
        let y = &self.design * x;
        (0..self.experiments.len()).map(|i| self.offsets[i] + y[i].re).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DesignOptions {
    /// Candidate pool size as a multiple of the learnable-set size.
    pub pool_factor: usize,
    /// Number of random shuffles of the pool.
    pub shuffles: usize,
    /// Snap single-qubit switching vectors to the discrete axis/diagonal
    /// alphabet used by the reference tables.
    pub snap_alphabet: bool,
    /// Relative pivot threshold of the greedy independence test.
    pub pivot_threshold: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { pool_factor: 5, shuffles: 50, snap_alphabet: false, pivot_threshold: 1e-8 }
    }
}

const AXIS_ALPHABET: [[f64; 3]; 6] = {
    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [S, S, 0.0],
        [S, 0.0, S],
        [0.0, S, S],
    ]
};

fn random_experiment(
    grid: WindowGrid,
    nqubits: usize,
    snap: bool,
    rng: &mut impl Rng,
) -> Experiment {
    let control = if nqubits == 1 {
        let y: Vec<[f64; 3]> = (0..grid.windows())
            .map(|_| {
                if snap {
                    AXIS_ALPHABET[rng.random_range(0..AXIS_ALPHABET.len())]
                } else {
                    let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    [v[0] / norm, v[1] / norm, v[2] / norm]
                }
            })
            .collect();
        DigitalControl::single_qubit(grid, y).unwrap()
    } else {
        let params: Vec<[f64; 15]> = (0..grid.windows())
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        DigitalControl::two_qubit_kak(grid, params).unwrap()
    };
    let codes = 4usize.pow(nqubits as u32);
    Experiment {
        control,
        rho: PauliIndex::new(nqubits, rng.random_range(0..codes)),
        obs: PauliIndex::new(nqubits, rng.random_range(1..codes)),
    }
}

/// Greedy selection of the first `need` rows that stay linearly independent
/// under pivoted orthogonalization; returns their indices in `order`.
fn greedy_independent(
    rows: &DMatrix<C64>,
    order: &[usize],
    need: usize,
    threshold: f64,
) -> Option<Vec<usize>> {
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(need);
    let mut picked = Vec::with_capacity(need);
    for &i in order {
        let mut v: DVector<C64> = rows.row(i).transpose().map(|x| x.conj());
        let orig = v.norm();
        if orig == 0.0 {
            continue;
        }
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        if v.norm() > threshold * orig {
            basis.push(v.normalize());
            picked.push(i);
            if picked.len() == need {
                return Some(picked);
            }
        }
    }
    None
}

/// The random-shuffle design strategy: draw a large random candidate pool,
/// take the first linearly independent subset under many shuffles, and keep
/// the subset with the smallest 2-norm condition number.
pub fn design_protocol(
    grid: WindowGrid,
    nqubits: usize,
    learnable: Vec<SpectrumIndex>,
    opts: DesignOptions,
    rng: &mut impl Rng,
) -> Result<Protocol> {
    let n = learnable.len();
    assert!(n > 0);
    let m = opts.pool_factor.max(2) * n;
    let pool: Vec<Experiment> =
        (0..m).map(|_| random_experiment(grid, nqubits, opts.snap_alphabet, rng)).collect();
    let (rows, offsets) = assemble_design_matrix(&pool, &learnable)?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..opts.shuffles.max(1) {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let Some(picked) = greedy_independent(&rows, &order, n, opts.pivot_threshold) else {
            continue;
        };
        let sub = DMatrix::from_fn(n, n, |i, j| rows[(picked[i], j)]);
        let kappa = condition_number(&sub);
        if best.as_ref().map_or(true, |(k, _)| kappa < *k) {
            best = Some((kappa, picked));
        }
    }
    let Some((kappa, picked)) = best else {
        return Err(Error::RankDeficient { rank: 0, need: n });
    };
    let experiments: Vec<Experiment> = picked.iter().map(|&i| pool[i].clone()).collect();
    let design = DMatrix::from_fn(n, n, |i, j| rows[(picked[i], j)]);
    let offs = DVector::from_fn(n, |i, _| offsets[picked[i]]);
    Ok(Protocol { experiments, learnable, design, offsets: offs, condition_number: kappa })
}

/// Solves `design · x = measurements - offsets` by least squares
/// (minimum-norm via SVD) and returns the reconstructed table.
pub fn reconstruct(
    protocol: &Protocol,
    measurements: &[f64],
    grid: WindowGrid,
) -> Result<SpectrumTable> {
    let rows = protocol.experiments.len();
    if measurements.len() != rows {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for {rows} experiments",
            measurements.len()
        )));
    }
    let n = protocol.learnable.len();
    // column equilibration: solve M D z = b, x = D z (identical solution
    // for full-rank systems, far better numerical rank detection)
    let norms = column_norms(&protocol.design);
    let scaled = DMatrix::from_fn(rows, n, |i, j| protocol.design[(i, j)] / norms[j]);
    let emb = real_embedding(&scaled);
    let svd = emb.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    if rank < 2 * n {
        return Err(Error::RankDeficient { rank: rank / 2, need: n });
    }
    let mut b = DVector::zeros(2 * rows);
    for i in 0..rows {
        b[i] = measurements[i] - protocol.offsets[i];
    }
    let sol = svd.solve(&b, 1e-10 * smax).map_err(|e| Error::InvalidProtocol(e.to_string()))?;
    let mut table = SpectrumTable::new(grid, Provenance::Reconstructed);
    for (j, idx) in protocol.learnable.iter().enumerate() {
        table.insert(idx.clone(), C64::new(sol[j] / norms[j], sol[j + n] / norms[j]));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyson::expectation;
    use crate::symmetry::{enumerate_learnable_to, NoiseClass};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn fixture_row_counts_and_first_rows() {
        let g4 = WindowGrid::from_total(4, 4.0);
        let g2 = WindowGrid::from_total(2, 2.0);
        assert_eq!(fixtures::k2c(g4).unwrap().len(), 14);
        assert_eq!(fixtures::k2q(g4).unwrap().len(), 20);
        assert_eq!(fixtures::k4c(g4).unwrap().len(), 49);
        assert_eq!(fixtures::k4q(g4).unwrap().len(), 85);
        let fund = fixtures::fundamental_1q_l4(g4).unwrap();
        assert_eq!(fund.len(), 80);
        // first row: all windows {1,0,0}, ρ = σ_z, O = σ_z
        let first = &fund[0];
        assert_eq!(first.rho.label(), "Z");
        assert_eq!(first.obs.label(), "Z");
        match first.control.kind() {
            ControlKind::SingleQubit(y) => {
                assert!(y.iter().all(|v| *v == [1.0, 0.0, 0.0]));
            }
            _ => panic!("expected single-qubit control"),
        }
        let fund2 = fixtures::fundamental_2q_l2(g2).unwrap();
        assert_eq!(fund2.len(), 80);
        assert_eq!(fund2[0].rho.label(), "XZ"); // Λ_7
        assert_eq!(fund2[0].obs.label(), "ZZ");
        // wrong grid size rejected
        assert!(fixtures::k2c(g2).is_err());
    }

    #[test]
    fn protocol_json_roundtrip_is_byte_stable() {
        let g = WindowGrid::from_total(4, 4.0);
        let exps = fixtures::k2c(g).unwrap();
        let once = experiments_to_json(&exps);
        let back = experiments_from_json(&once, g).unwrap();
        let twice = experiments_to_json(&back);
        assert_eq!(once, twice);
    }

    #[test]
    fn design_rows_have_zero_coefficients_on_dark_indices() {
        let g = WindowGrid::from_total(2, 2.0);
        let mut rng = StdRng::seed_from_u64(11);
        let exp = random_experiment(g, 1, false, &mut rng);
        let learnable = enumerate_learnable_to(2, 1, NoiseClass::Quantum, 2);
        let mut table = SpectrumTable::new(g, Provenance::Exact);
        for idx in &learnable {
            table.insert(idx.clone(), C64::new(0.3, 0.1));
        }
        let base = expectation(&exp.control, exp.rho, exp.obs, &table, 2).unwrap();
        table.insert(SpectrumIndex::single(vec![2, 2], vec![1]).unwrap(), C64::new(17.0, -3.0));
        let with_dark = expectation(&exp.control, exp.rho, exp.obs, &table, 2).unwrap();
        assert!((base - with_dark).norm() < 1e-10);
    }

    #[test]
    fn gaussian_design_has_14_experiments() {
        let g = WindowGrid::from_total(4, 4.0);
        let learnable = enumerate_learnable_to(4, 1, NoiseClass::Classical, 2);
        assert_eq!(learnable.len(), 14);
        let mut rng = StdRng::seed_from_u64(23);
        let p = design_protocol(
            g,
            1,
            learnable,
            DesignOptions { pool_factor: 5, shuffles: 10, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        assert_eq!(p.experiments.len(), 14);
        assert!(p.condition_number.is_finite());
    }

    #[test]
    fn reconstruction_roundtrip_small() {
        let g = WindowGrid::from_total(2, 2.0);
        let learnable = enumerate_learnable_to(2, 1, NoiseClass::Classical, 4);
        assert_eq!(learnable.len(), 8);
        let mut rng = StdRng::seed_from_u64(31);
        let p = design_protocol(
            g,
            1,
            learnable.clone(),
            DesignOptions { shuffles: 8, ..Default::default() },
            &mut rng,
        )
        .unwrap();

        let mut planted = SpectrumTable::new(g, Provenance::Exact);
        use rand::Rng;
        for idx in &learnable {
            planted.insert(idx.clone(), C64::new(rng.random_range(-0.5..0.5), 0.0));
        }
        let meas = p.predict_measurements(&planted);
        let rec = reconstruct(&p, &meas, g).unwrap();
        for idx in &learnable {
            let want = planted.get(idx).unwrap();
            let got = rec.get(idx).unwrap();
            assert!(
                (want - got).norm() <= 1e-6 * want.norm().max(1e-9),
                "{idx:?}: {want} vs {got}"
            );
        }

        // all-zero measurements minus offsets → all-zero spectra
        let zero_meas: Vec<f64> = p.offsets.iter().copied().collect();
        let rec = reconstruct(&p, &zero_meas, g).unwrap();
        for idx in &learnable {
            assert!(rec.get(idx).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn reconstruction_invariant_under_row_permutation() {
        let g = WindowGrid::from_total(2, 2.0);
        let learnable = enumerate_learnable_to(2, 1, NoiseClass::Classical, 4);
        let mut rng = StdRng::seed_from_u64(37);
        let p = design_protocol(
            g,
            1,
            learnable.clone(),
            DesignOptions { shuffles: 4, ..Default::default() },
            &mut rng,
        )
        .unwrap();
        let mut planted = SpectrumTable::new(g, Provenance::Exact);
        use rand::Rng;
        for idx in &learnable {
            planted.insert(idx.clone(), C64::new(rng.random_range(-0.5..0.5), 0.0));
        }
        let meas = p.predict_measurements(&planted);
        let rec = reconstruct(&p, &meas, g).unwrap();

        let perm: Vec<usize> = (0..p.experiments.len()).rev().collect();
        let p2 = Protocol::from_experiments(
            perm.iter().map(|&i| p.experiments[i].clone()).collect(),
            learnable.clone(),
        )
        .unwrap();
        let meas2: Vec<f64> = perm.iter().map(|&i| meas[i]).collect();
        let rec2 = reconstruct(&p2, &meas2, g).unwrap();
        for idx in &learnable {
            assert!((rec.get(idx).unwrap() - rec2.get(idx).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_reconstruction_is_rejected() {
        let g = WindowGrid::from_total(2, 2.0);
        let learnable = enumerate_learnable_to(2, 1, NoiseClass::Classical, 4);
        let mut rng = StdRng::seed_from_u64(41);
        let e = random_experiment(g, 1, false, &mut rng);
        let p = Protocol::from_experiments(vec![e; 8], learnable).unwrap();
        let meas = vec![0.0; 8];
        assert!(matches!(reconstruct(&p, &meas, g), Err(Error::RankDeficient { .. })));
    }
}
