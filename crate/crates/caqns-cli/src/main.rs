//! Command-line front end wiring the caqns library into reproducible batch
//! workflows with file-based I/O.
//!
//! Every subcommand is a pure function of (config, seed); runs that write
//! into an output directory also leave a manifest with artifact hashes.
//! Exit codes: 0 ok, 1 validation failure, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use caqns::control::WindowGrid;
use caqns::noise::{NoiseModel, Provenance, SpectrumTable};
use caqns::protocols::{self, Protocol};
use caqns::symmetry::{self, NoiseClass};

mod manifest;

#[derive(Parser)]
#[command(
    name = "caqns",
    about = "Control-adapted quantum noise spectroscopy toolkit",
    version
)]
struct Cli {
    /// Worker threads (default: all cores; env CAQNS_THREADS overrides).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed for stochastic subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; created if missing. Streams to stdout when absent
    /// (where the subcommand allows it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseClassArg {
    Classical,
    Quantum,
}

impl From<NoiseClassArg> for NoiseClass {
    fn from(v: NoiseClassArg) -> Self {
        match v {
            NoiseClassArg::Classical => NoiseClass::Classical,
            NoiseClassArg::Quantum => NoiseClass::Quantum,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample-complexity report: learnable-spectrum counts up to saturation.
    Count {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        qubits: usize,
        #[arg(long, value_enum, default_value = "classical")]
        noise_class: NoiseClassArg,
    },
    /// Dump learnable / bound / dark symmetry classes.
    SymmetryReport {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        qubits: usize,
        #[arg(long, value_enum, default_value = "classical")]
        noise_class: NoiseClassArg,
        /// Maximum order to classify (default: saturation order).
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Compute CA spectra of a noise model (exact or Monte Carlo).
    Spectra {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a protocol through the trajectory simulator → measurement CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Design a QNS protocol by the random-shuffle strategy.
    Design {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        qubits: usize,
        /// Target learnable set: gaussian (k ≤ 2), fundamental (k ≤ 2|Q|L),
        /// or an explicit truncation like k4.
        #[arg(long, default_value = "fundamental")]
        learnable: String,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 5)]
        pool_factor: usize,
        #[arg(long, default_value_t = 50)]
        shuffles: usize,
        /// Snap single-qubit switching vectors to the axis/diagonal alphabet.
        #[arg(long, default_value_t = false)]
        snap: bool,
    },
    /// Reconstruct CA spectra from measurements by least squares.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
    },
    /// Predict coherence curves or protocol expectations from a table.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
    /// Optimize digital control against a spectrum table (idle circuit).
    Optimize {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Deserialize)]
struct GridConfig {
    l: usize,
    t: f64,
}

impl GridConfig {
    fn grid(&self) -> WindowGrid {
        WindowGrid::from_total(self.l, self.t)
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum SpectraMethod {
    Exact,
    MonteCarlo,
}

#[derive(Deserialize)]
struct SpectraConfig {
    model: NoiseModel,
    grid: GridConfig,
    method: SpectraMethod,
    /// Orders to cover (default: saturation order of the grid).
    k_max: Option<usize>,
    noise_class: Option<NoiseClass>,
    /// Learnable representatives only (default) or all raw indices.
    #[serde(default)]
    raw_indices: bool,
    n_traj: Option<usize>,
}

#[derive(Deserialize)]
struct SimulateConfig {
    model: NoiseModel,
    grid: GridConfig,
    protocol: PathBuf,
    n_traj: usize,
    shots: Option<u64>,
}

#[derive(Deserialize)]
struct ReconstructConfig {
    grid: GridConfig,
    qubits: usize,
    protocol: PathBuf,
    measurements: PathBuf,
    noise_class: Option<NoiseClass>,
    k_max: Option<usize>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum PredictMode {
    /// |ρ_01| at t = τ, 2τ, ..., Lτ from the table (single qubit).
    Coherence,
    /// Predicted expectation of every row of a protocol.
    Expectations { protocol: PathBuf },
}

#[derive(Deserialize)]
struct PredictConfig {
    grid: GridConfig,
    qubits: usize,
    spectra: PathBuf,
    k_max: Option<usize>,
    mode: PredictMode,
}

#[derive(Deserialize)]
struct NmConfig {
    max_iter: Option<usize>,
    simplex_scale: Option<f64>,
    restarts: Option<usize>,
}

#[derive(Deserialize)]
struct OptimizeConfig {
    grid: GridConfig,
    qubits: usize,
    /// Spectrum table path; computed exactly from `model` when absent.
    spectra: Option<PathBuf>,
    model: Option<NoiseModel>,
    k_max: Option<usize>,
    /// Raw-spectra folding depth when computing from a model.
    fold_order: Option<usize>,
    nm: Option<NmConfig>,
    /// Run a coupling sweep g/γ over these ratios instead of a single
    /// optimization (requires `model`; the model's coupling is ignored).
    sweep_g_over_gamma: Option<Vec<f64>>,
    mc_n_traj: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("CAQNS_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .or(cli.threads);
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.downcast_ref::<caqns::Error>().is_some_and(|err| {
                matches!(
                    err,
                    caqns::Error::RankDeficient { .. } | caqns::Error::TruncationBeyondTable { .. }
                )
            });
            if numerical {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut run = manifest::RunWriter::new(cli.out.clone(), cli.seed)?;
    match &cli.command {
        Command::Count { l, qubits, noise_class } => {
            let report = symmetry::complexity_report(*l, *qubits, (*noise_class).into())?;
            run.emit_json("complexity_report.json", &report)?;
        }
        Command::SymmetryReport { l, qubits, noise_class, k_max } => {
            let class: NoiseClass = (*noise_class).into();
            let k = k_max.unwrap_or_else(|| symmetry::saturation_order(*l, *qubits));
            #[derive(Serialize)]
            struct FullReport {
                complexity: symmetry::ComplexityReport,
                classes: Vec<symmetry::SymmetryClassReport>,
            }
            let report = FullReport {
                complexity: symmetry::complexity_report(*l, *qubits, class)?,
                classes: symmetry::symmetry_report(*l, *qubits, class, k),
            };
            run.emit_json("symmetry_report.json", &report)?;
        }
        Command::Spectra { config } => {
            let cfg: SpectraConfig = read_config(config)?;
            cfg.model.validate()?;
            run.config_path = Some(config.clone());
            let grid = cfg.grid.grid();
            let nq = cfg.model.nqubits();
            let class = cfg.noise_class.unwrap_or(if cfg.model.is_classical() {
                NoiseClass::Classical
            } else {
                NoiseClass::Quantum
            });
            let k_max = cfg.k_max.unwrap_or_else(|| symmetry::saturation_order(cfg.grid.l, nq));
            let indices = if cfg.raw_indices {
                (1..=k_max)
                    .flat_map(|k| caqns::optimizer::all_classical_indices(cfg.grid.l, nq, k))
                    .collect()
            } else {
                symmetry::enumerate_learnable_to(cfg.grid.l, nq, class, k_max)
            };
            let table = match cfg.method {
                SpectraMethod::Exact => {
                    let mut t = SpectrumTable::new(grid, Provenance::Exact);
                    for idx in indices {
                        let v = caqns::noise::ca_spectrum_exact(&cfg.model, &idx, grid)?;
                        t.insert(idx, v);
                    }
                    t
                }
                SpectraMethod::MonteCarlo => {
                    use rand::SeedableRng;
                    let n_traj = cfg.n_traj.unwrap_or(10_000).max(100);
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
                    let mut t = SpectrumTable::new(grid, Provenance::MonteCarlo);
                    for idx in indices {
                        let (v, _err) =
                            caqns::noise::ca_spectrum_mc(&cfg.model, &idx, grid, n_traj, &mut rng)?;
                        t.insert(idx, v);
                    }
                    t
                }
            };
            run.emit_text("spectra.json", &table.to_json())?;
        }
        Command::Simulate { config } => {
            let cfg: SimulateConfig = read_config(config)?;
            cfg.model.validate()?;
            run.config_path = Some(config.clone());
            let grid = cfg.grid.grid();
            let experiments = protocols::load_protocol_table(&cfg.protocol, grid)?;
            let sim_cfg = caqns::sim::SimulationConfig {
                n_traj: cfg.n_traj,
                seed: cli.seed,
                shots: cfg.shots,
            };
            let mut csv = String::from("experiment_id,value,stderr\n");
            for (i, e) in experiments.iter().enumerate() {
                let (v, err) = caqns::sim::simulate_expectation(e, &cfg.model, &sim_cfg)?;
                csv.push_str(&format!("{i},{v:.17e},{err:.17e}\n"));
            }
            run.emit_text("measurements.csv", &csv)?;
        }
        Command::Design { l, qubits, learnable, tau, pool_factor, shuffles, snap } => {
            let grid = WindowGrid::new(*l, *tau);
            let k_max = match learnable.as_str() {
                "gaussian" => 2,
                "fundamental" => symmetry::saturation_order(*l, *qubits),
                other => other
                    .strip_prefix('k')
                    .and_then(|s| s.parse().ok())
                    .with_context(|| format!("bad --learnable {other:?}"))?,
            };
            let set =
                symmetry::enumerate_learnable_to(*l, *qubits, NoiseClass::Classical, k_max);
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
            let opts = protocols::DesignOptions {
                pool_factor: *pool_factor,
                shuffles: *shuffles,
                snap_alphabet: *snap,
                ..Default::default()
            };
            let p = protocols::design_protocol(grid, *qubits, set, opts, &mut rng)?;
            run.emit_text("protocol.json", &protocols::experiments_to_json(&p.experiments))?;
            #[derive(Serialize)]
            struct DesignReport {
                experiments: usize,
                learnable: usize,
                condition_number: f64,
            }
            run.emit_json(
                "design_report.json",
                &DesignReport {
                    experiments: p.experiments.len(),
                    learnable: p.learnable.len(),
                    condition_number: p.condition_number,
                },
            )?;
        }
        Command::Reconstruct { config } => {
            let cfg: ReconstructConfig = read_config(config)?;
            run.config_path = Some(config.clone());
            let grid = cfg.grid.grid();
            let experiments = protocols::load_protocol_table(&cfg.protocol, grid)?;
            let class = cfg.noise_class.unwrap_or(NoiseClass::Classical);
            let k_max =
                cfg.k_max.unwrap_or_else(|| symmetry::saturation_order(cfg.grid.l, cfg.qubits));
            let learnable =
                symmetry::enumerate_learnable_to(cfg.grid.l, cfg.qubits, class, k_max);
            let protocol = Protocol::from_experiments(experiments, learnable)?;
            let measurements = read_measurements(&cfg.measurements)?;
            let table = protocols::reconstruct(&protocol, &measurements, grid)?;
            run.emit_text("spectra_reconstructed.json", &table.to_json())?;
        }
        Command::Predict { config } => {
            let cfg: PredictConfig = read_config(config)?;
            run.config_path = Some(config.clone());
            let grid = cfg.grid.grid();
            let table = SpectrumTable::load(&cfg.spectra, grid)?;
            match &cfg.mode {
                PredictMode::Coherence => {
                    if cfg.qubits != 1 {
                        bail!("coherence prediction is single-qubit");
                    }
                    let mut csv = String::from("time,coherence\n");
                    for m in 1..=cfg.grid.l {
                        let v = caqns::dyson::predicted_coherence(&table, m)?;
                        csv.push_str(&format!("{:.17e},{v:.17e}\n", m as f64 * grid.tau()));
                    }
                    run.emit_text("coherence_prediction.csv", &csv)?;
                }
                PredictMode::Expectations { protocol } => {
                    let experiments = protocols::load_protocol_table(protocol, grid)?;
                    let k_max = cfg.k_max.or(table.max_order()).unwrap_or(0);
                    let mut csv = String::from("experiment_id,value\n");
                    for (i, e) in experiments.iter().enumerate() {
                        let v =
                            caqns::dyson::expectation(&e.control, e.rho, e.obs, &table, k_max)?;
                        csv.push_str(&format!("{i},{:.17e}\n", v.re));
                    }
                    run.emit_text("expectations.csv", &csv)?;
                }
            }
        }
        Command::Optimize { config } => {
            let cfg: OptimizeConfig = read_config(config)?;
            run.config_path = Some(config.clone());
            let grid = cfg.grid.grid();
            let k_max =
                cfg.k_max.unwrap_or_else(|| symmetry::saturation_order(cfg.grid.l, cfg.qubits));
            let mut nm = caqns::optimizer::NelderMeadOptions { seed: cli.seed, ..Default::default() };
            if let Some(n) = &cfg.nm {
                if let Some(v) = n.max_iter {
                    nm.max_iter = v;
                }
                if let Some(v) = n.simplex_scale {
                    nm.simplex_scale = v;
                }
                if let Some(v) = n.restarts {
                    nm.restarts = v;
                }
            }
            if let Some(ratios) = &cfg.sweep_g_over_gamma {
                let model = cfg.model.as_ref().context("sweep needs a model")?;
                let mc = caqns::sim::SimulationConfig::new(
                    cfg.mc_n_traj.unwrap_or(20_000),
                    cli.seed,
                );
                let rows = caqns::optimizer::fidelity_sweep(
                    model.gamma,
                    ratios,
                    grid,
                    cfg.qubits,
                    k_max,
                    cfg.fold_order.unwrap_or(k_max + 8),
                    nm,
                    &mc,
                )?;
                let mut csv =
                    String::from("g_over_gamma,bare_surrogate,opt_surrogate,bare_mc,opt_mc\n");
                for r in &rows {
                    csv.push_str(&format!(
                        "{:.6},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                        r.g_over_gamma,
                        r.bare_surrogate,
                        r.optimized_surrogate,
                        r.bare_mc,
                        r.optimized_mc
                    ));
                }
                run.emit_text("fidelity_sweep.csv", &csv)?;
            } else {
                let spectra = match (&cfg.spectra, &cfg.model) {
                    (Some(path), _) => SpectrumTable::load(path, grid)?,
                    (None, Some(model)) => {
                        let fold = cfg.fold_order.unwrap_or(k_max + 8);
                        let mut raw = SpectrumTable::new(grid, Provenance::Exact);
                        for k in 1..=fold {
                            for idx in
                                caqns::optimizer::all_classical_indices(cfg.grid.l, cfg.qubits, k)
                            {
                                let v = caqns::noise::ca_spectrum_exact(model, &idx, grid)?;
                                raw.insert(idx, v);
                            }
                        }
                        symmetry::bound_form(&raw, cfg.qubits)?
                    }
                    (None, None) => bail!("optimize needs `spectra` or `model`"),
                };
                let problem = caqns::optimizer::OptimizationProblem::idle(
                    spectra,
                    grid,
                    cfg.qubits,
                    k_max,
                    nm,
                );
                let outcome = caqns::optimizer::optimize(&problem)?;
                #[derive(Serialize)]
                struct OptimizeReport {
                    params: Vec<f64>,
                    fidelity: f64,
                    fidelity_raw: f64,
                    iterations: usize,
                }
                run.emit_json(
                    "optimize_result.json",
                    &OptimizeReport {
                        params: outcome.params,
                        fidelity: outcome.fidelity,
                        fidelity_raw: outcome.fidelity_raw,
                        iterations: outcome.iterations,
                    },
                )?;
            }
        }
    }
    run.finish(&std::env::args().collect::<Vec<_>>().join(" "))?;
    Ok(())
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn read_measurements(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading measurements {}", path.display()))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("experiment_id") {
            continue;
        }
        let mut parts = line.split(',');
        let _id = parts.next();
        let value: f64 = parts
            .next()
            .with_context(|| format!("{}:{}: missing value", path.display(), ln + 1))?
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad value", path.display(), ln + 1))?;
        out.push(value);
    }
    Ok(out)
}
