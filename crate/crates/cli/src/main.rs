use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wrg::config::{Experiment, Lattice, RunConfig};
use wrg::presets::{preset_text, PRESETS};
use wrg_core::rg::FlowMass;
use wrg::{run_experiment, validate_config, RunError, RunManifest};

#[derive(Parser)]
#[command(name = "wrg", version, about = "Wavelet renormalization of free lattice scalar fields")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "wrg-out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct LatticeArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Torus half-length in units of eps.
    #[arg(long = "L0", default_value_t = 1)]
    l0: usize,
    /// Spacing at scale N = 0.
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long = "N", default_value_t = 0)]
    n: u32,
}

impl LatticeArgs {
    fn lattice(self) -> Lattice {
        Lattice { d: self.d, l: self.l0 as f64 * self.eps, eps0: self.eps, n: self.n }
    }
}

#[derive(Args, Clone, Copy)]
#[group(required = true, multiple = false)]
struct MassArgs {
    /// Continuum mass; the lattice mass follows the renormalization trajectory.
    #[arg(long)]
    m: Option<f64>,
    /// Fixed dimensionless mass parameter.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML configuration.
    Run { config: PathBuf },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Run a named preset.
    Preset { name: String },
    /// Print a preset's configuration, or list the presets.
    ShowPreset { name: Option<String> },
    Filters {
        #[arg(long = "K", num_args = 1.., default_values_t = [2])]
        k: Vec<usize>,
        /// Cascade resolution level J (samples at spacing 2^-J).
        #[arg(long, default_value_t = 0)]
        emit_cascade: u32,
        /// KMAX NPTS: sample the Fourier transform of the scaling function.
        #[arg(long, num_args = 2, value_names = ["KMAX", "NPTS"])]
        emit_symbol: Option<Vec<f64>>,
    },
    Groundstate {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        mass: MassArgs,
        #[arg(long)]
        exclude_zero_mode: bool,
    },
    Rgflow {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "M-max", default_value_t = 8)]
        m_max: u32,
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Flow at a scale-independent mass parameter instead.
        #[arg(long)]
        fixed_mu: Option<f64>,
        /// Also compare with the scaling limit summed to this tolerance.
        #[arg(long)]
        limit_tol: Option<f64>,
    },
    Limit {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "K", default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        allow_divergent: bool,
        /// Sum a fixed box of momentum labels instead of adaptive shells.
        #[arg(long)]
        cutoff_label: Option<u64>,
    },
    Lightcone {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long, default_value_t = 1.0)]
        tmax: f64,
        #[arg(long, default_value_t = 20)]
        tsteps: usize,
    },
    DynError {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "Nprime-max")]
        n_prime_max: u32,
        #[arg(long = "K", default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Largest time; five equally spaced times in [0, T] are used.
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        #[arg(long, num_args = 1.., default_values_t = [0.0, 0.5, 1.0])]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 1000.0)]
        k_cut: f64,
        /// Descriptor as comma-separated insertions, e.g. `phi:0,pi:1`; repeatable.
        #[arg(long, default_values_t = ["phi:0".to_string(), "pi:0".to_string(), "phi:0,pi:1".to_string()])]
        descriptor: Vec<String>,
    },
    CorrConv {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "K", default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Insertions at the origin, e.g. `pi:0,phi:1`.
        #[arg(long, value_delimiter = ',')]
        a: Vec<String>,
        /// Insertions at the evolved, translated point.
        #[arg(long, value_delimiter = ',')]
        b: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        t: f64,
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
        #[arg(long = "Nprime", value_delimiter = ',')]
        n_primes: Vec<u32>,
        #[arg(long, default_value_t = 2000.0)]
        k_cut: f64,
    },
    MeraCheck {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long, default_value_t = 8192)]
        cutoff_label: u64,
        /// Descriptor as comma-separated insertions; repeatable. Defaults to fixed probes.
        #[arg(long)]
        descriptor: Vec<String>,
    },
}

fn rg_mass(m: Option<f64>, mu: Option<f64>) -> FlowMass {
    match mu {
        Some(mu) => FlowMass::FixedMu(mu),
        None => FlowMass::Trajectory(m.unwrap_or(1.0)),
    }
}

fn single(exp: Experiment) -> RunConfig {
    RunConfig::new(vec![exp])
}

fn config_for(command: Command) -> Result<Option<RunConfig>, RunError> {
    let config = match command {
        Command::Run { config } => RunConfig::load(&config)?,
        Command::Preset { name } => match preset_text(&name) {
            Some(text) => RunConfig::from_toml(text)?,
            None => return Err(RunError::Parse(format!("unknown preset `{name}`"))),
        },
        Command::Validate { config } => {
            let config = RunConfig::load(&config)?;
            let violations = validate_config(&config);
            if !violations.is_empty() {
                return Err(RunError::Validation(violations));
            }
            println!("ok: {} experiments", config.experiments.len());
            return Ok(None);
        }
        Command::ShowPreset { name } => {
            match name {
                Some(name) => match preset_text(&name) {
                    Some(text) => print!("{text}"),
                    None => return Err(RunError::Parse(format!("unknown preset `{name}`"))),
                },
                None => PRESETS.iter().for_each(|(n, _)| println!("{n}")),
            }
            return Ok(None);
        }
        Command::Filters { k, emit_cascade, emit_symbol } => {
            let (kmax, npts) = emit_symbol.map_or((0.0, 0), |v| (v[0], v[1] as usize));
            single(Experiment::Filters {
                name: "filters".into(),
                ks: k,
                cascade_level: emit_cascade,
                symbol_points: npts,
                symbol_kmax: kmax,
            })
        }
        Command::Groundstate { lattice, mass, exclude_zero_mode } => single(Experiment::GroundState {
            name: "groundstate".into(),
            lattice: lattice.lattice(),
            mass: rg_mass(mass.m, mass.mu),
            exclude_zero_mode,
        }),
        Command::Rgflow { lattice, m_max, k, m, fixed_mu, limit_tol } => single(Experiment::RgFlow {
            name: "rgflow".into(),
            lattice: lattice.lattice(),
            mass: rg_mass(Some(m), fixed_mu),
            k,
            m_max,
            limit_tol,
        }),
        Command::Limit { lattice, k, m, tol, allow_divergent, cutoff_label } => single(Experiment::Limit {
            name: "limit".into(),
            lattice: lattice.lattice(),
            m,
            k,
            tol,
            allow_divergent,
            cutoff_label,
        }),
        Command::Lightcone { lattice, m, tmax, tsteps } => single(Experiment::Lightcone {
            name: "lightcone".into(),
            lattice: lattice.lattice(),
            m,
            t_max: tmax,
            t_steps: tsteps,
        }),
        Command::DynError { lattice, n_prime_max, k, m, t, delta, k_cut, descriptor } => {
            let lattice = lattice.lattice();
            single(Experiment::DynError {
                name: "dyn-error".into(),
                lattice,
                k,
                m,
                n_prime_max,
                times: (0..5).map(|i| t * i as f64 / 4.0).collect(),
                deltas: delta,
                k_cut,
                u: vec![0.25 * lattice.eps0; lattice.d],
                v: vec![0.0; lattice.d],
                descriptors: descriptor.iter().map(|s| s.split(',').map(str::to_string).collect()).collect(),
            })
        }
        Command::CorrConv { lattice, k, m, a, b, t, x, n_primes, k_cut } => single(Experiment::CorrConv {
            name: "corr-conv".into(),
            lattice: lattice.lattice(),
            k,
            m,
            a,
            b,
            t,
            x,
            n_primes,
            k_cut,
        }),
        Command::MeraCheck { lattice, k, m, cutoff_label, descriptor } => single(Experiment::MeraCheck {
            name: "mera-check".into(),
            lattice: lattice.lattice(),
            k,
            m,
            cutoff_label,
            descriptors: descriptor.iter().map(|s| s.split(',').map(str::to_string).collect()).collect(),
        }),
    };
    Ok(Some(config))
}

fn report(manifest: &RunManifest) -> ExitCode {
    for e in &manifest.experiments {
        let passed = e.checks.iter().filter(|c| c.passed).count();
        println!("{:<24} {:>3}/{:<3} checks  {:.2}s", e.name, passed, e.checks.len(), e.seconds);
    }
    let mut failed = false;
    for (name, c) in manifest.failed_checks() {
        eprintln!("FAILED {name}: {} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
        failed = true;
    }
    println!("{} files, {:.2}s", manifest.files.len(), manifest.wall_clock_seconds);
    if failed {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config_for(cli.command).and_then(|config| match config {
        Some(c) => run_experiment(&c, &cli.out, cli.threads).map(Some),
        None => Ok(None),
    });
    match result {
        Ok(Some(manifest)) => report(&manifest),
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
