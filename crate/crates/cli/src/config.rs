//! Run configuration: a TOML document with one `[[experiment]]` table per task.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wrg_core::gaussian::{Insertion, WeylDescriptor};
use wrg_core::lattice::{HarmonicModel, LatticeSpec};
use wrg_core::rg::FlowMass;
use wrg_core::wavelet::daubechies_filter;

use crate::RunError;

pub const FORMAT_VERSION: u32 = 1;

/// Largest lattice (in sites) any experiment may build.
pub const MAX_SITES: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

impl RunConfig {
    pub fn new(experiments: Vec<Experiment>) -> Self {
        Self { version: FORMAT_VERSION, experiments }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub d: usize,
    pub l: f64,
    pub eps0: f64,
    pub n: u32,
}

impl Lattice {
    pub fn spec(&self) -> Result<LatticeSpec, wrg_core::Error> {
        LatticeSpec::new(self.d, self.l, self.eps0, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Filter taps, identity residuals and cascade samples.
    Filters {
        name: String,
        ks: Vec<usize>,
        cascade_level: u32,
        /// Sample `ŝ` at this many points of `[0, symbol_kmax]`; zero skips it.
        #[serde(default)]
        symbol_points: usize,
        #[serde(default)]
        symbol_kmax: f64,
    },
    /// Weights of one coarse site on finer lattices, block spin versus a
    /// Daubechies filter.
    FilterWeights { name: String, k: usize, levels: u32 },
    /// Renormalized states `ω^{(N)}_M` for `N ≤ n_max`, `M ≤ m_max`.
    Triangle { name: String, lattice: Lattice, m: f64, k: usize, n_max: u32, m_max: u32 },
    GroundState {
        name: String,
        lattice: Lattice,
        mass: FlowMass,
        #[serde(default)]
        exclude_zero_mode: bool,
    },
    RgFlow {
        name: String,
        lattice: Lattice,
        mass: FlowMass,
        k: usize,
        m_max: u32,
        /// Compare against the scaling limit summed to this tolerance.
        #[serde(default)]
        limit_tol: Option<f64>,
    },
    Limit {
        name: String,
        lattice: Lattice,
        m: f64,
        k: usize,
        tol: f64,
        #[serde(default)]
        allow_divergent: bool,
        /// Sum a fixed label box instead of adaptive shells.
        #[serde(default)]
        cutoff_label: Option<u64>,
    },
    Lightcone { name: String, lattice: Lattice, m: f64, t_max: f64, t_steps: usize },
    DynError {
        name: String,
        lattice: Lattice,
        k: usize,
        m: f64,
        n_prime_max: u32,
        times: Vec<f64>,
        deltas: Vec<f64>,
        k_cut: f64,
        u: Vec<f64>,
        v: Vec<f64>,
        /// Each descriptor is a sum of unit insertions such as `"phi:0"`.
        descriptors: Vec<Vec<String>>,
    },
    CorrConv {
        name: String,
        lattice: Lattice,
        k: usize,
        m: f64,
        a: Vec<String>,
        b: Vec<String>,
        t: f64,
        x: Vec<f64>,
        n_primes: Vec<u32>,
        k_cut: f64,
    },
    MeraCheck {
        name: String,
        lattice: Lattice,
        k: usize,
        m: f64,
        cutoff_label: u64,
        /// Coherent-state descriptors for the Gram check; empty uses fixed probes.
        #[serde(default)]
        descriptors: Vec<Vec<String>>,
    },
}

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Self::Filters { name, .. }
            | Self::FilterWeights { name, .. }
            | Self::Triangle { name, .. }
            | Self::GroundState { name, .. }
            | Self::RgFlow { name, .. }
            | Self::Limit { name, .. }
            | Self::Lightcone { name, .. }
            | Self::DynError { name, .. }
            | Self::CorrConv { name, .. }
            | Self::MeraCheck { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Filters { .. } => "filters",
            Self::FilterWeights { .. } => "filter-weights",
            Self::Triangle { .. } => "triangle",
            Self::GroundState { .. } => "ground-state",
            Self::RgFlow { .. } => "rg-flow",
            Self::Limit { .. } => "limit",
            Self::Lightcone { .. } => "lightcone",
            Self::DynError { .. } => "dyn-error",
            Self::CorrConv { .. } => "corr-conv",
            Self::MeraCheck { .. } => "mera-check",
        }
    }
}

/// Parses `phi:x` or `pi:x` with a flat site index.
pub fn parse_insertion(s: &str) -> Result<Insertion, String> {
    let (field, site) = s.split_once(':').ok_or_else(|| format!("insertion `{s}` is not of the form phi:x or pi:x"))?;
    let site: usize = site.trim().parse().map_err(|_| format!("insertion `{s}` has a malformed site"))?;
    match field.trim() {
        "phi" => Ok(Insertion::phi(site)),
        "pi" => Ok(Insertion::pi(site)),
        other => Err(format!("unknown field `{other}` in insertion `{s}`")),
    }
}

/// Sum of unit insertions as one descriptor.
pub fn parse_descriptor(spec: LatticeSpec, terms: &[String]) -> Result<WeylDescriptor, String> {
    let mut w = WeylDescriptor::zero(spec);
    for t in terms {
        let ins = parse_insertion(t)?;
        if ins.site >= spec.volume() {
            return Err(format!("site {} is outside a lattice of {} sites", ins.site, spec.volume()));
        }
        let d = ins.descriptor(spec);
        for (a, b) in w.f.iter_mut().zip(&d.f) {
            *a += b;
        }
        for (a, b) in w.g.iter_mut().zip(&d.g) {
            *a += b;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub experiment: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.experiment, self.message)
    }
}

struct Checker<'a> {
    name: &'a str,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn fail(&mut self, message: impl Into<String>) {
        self.out.push(Violation { experiment: self.name.to_string(), message: message.into() });
    }

    fn filter(&mut self, k: usize) {
        if let Err(e) = daubechies_filter(k) {
            self.fail(e.to_string());
        }
    }

    fn spec(&mut self, lattice: &Lattice, extra_scales: u32) -> Option<LatticeSpec> {
        match lattice.spec().and_then(|s| s.finer(extra_scales).map(|f| (s, f))) {
            Ok((s, f)) => {
                if f.volume() > MAX_SITES {
                    self.fail(format!("finest lattice has {} sites, above the limit of {MAX_SITES}", f.volume()));
                    return None;
                }
                Some(s)
            }
            Err(e) => {
                self.fail(e.to_string());
                None
            }
        }
    }

    fn positive(&mut self, what: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.fail(format!("{what} = {x} must be positive"));
        }
    }

    fn mass(&mut self, spec: Option<LatticeSpec>, mass: &FlowMass) {
        let Some(spec) = spec else { return };
        let r = match *mass {
            FlowMass::Trajectory(m) => HarmonicModel::on_trajectory(spec, m).map(|_| ()),
            FlowMass::FixedMu(mu) => HarmonicModel::with_mu(spec, mu).map(|_| ()),
        };
        if let Err(e) = r {
            self.fail(e.to_string());
        }
    }
}

/// Every precondition violation in `config`; empty iff a run would start.
pub fn validate_config(config: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if config.version != FORMAT_VERSION {
        out.push(Violation {
            experiment: String::new(),
            message: format!("unsupported format version {} (expected {FORMAT_VERSION})", config.version),
        });
    }
    let mut names = HashSet::new();
    for exp in &config.experiments {
        let mut c = Checker { name: exp.name(), out: Vec::new() };
        let name = exp.name();
        if name.is_empty() || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_') {
            c.fail("names must be non-empty and use only letters, digits, '-' and '_'");
        }
        if !names.insert(name.to_string()) {
            c.fail("duplicate experiment name");
        }
        match exp {
            Experiment::Filters { ks, cascade_level, symbol_points, symbol_kmax, .. } => {
                ks.iter().for_each(|k| c.filter(*k));
                if *cascade_level > 16 {
                    c.fail("cascade_level must be at most 16");
                }
                if *symbol_points > 0 && !(symbol_kmax.is_finite() && *symbol_kmax > 0.0) {
                    c.fail("symbol_kmax must be positive when symbol_points > 0");
                }
                if *symbol_points > 1 << 20 {
                    c.fail("symbol_points must be at most 2^20");
                }
            }
            Experiment::FilterWeights { k, levels, .. } => {
                c.filter(*k);
                if *levels == 0 || *levels > 10 {
                    c.fail("levels must lie in 1..=10");
                }
            }
            Experiment::Triangle { lattice, m, k, n_max, m_max, .. } => {
                c.filter(*k);
                c.positive("m", *m);
                c.spec(lattice, n_max + m_max);
            }
            Experiment::GroundState { lattice, mass, exclude_zero_mode, .. } => {
                let spec = c.spec(lattice, 0);
                if let (FlowMass::FixedMu(mu), Some(s)) = (mass, spec) {
                    let massless = HarmonicModel::with_mu(s, *mu).is_ok_and(|m| m.gap2() == 0.0);
                    if massless && !exclude_zero_mode {
                        c.fail("the massless ground state needs exclude_zero_mode = true");
                    }
                }
                c.mass(spec, mass);
            }
            Experiment::RgFlow { lattice, mass, k, m_max, limit_tol, .. } => {
                c.filter(*k);
                let spec = c.spec(lattice, *m_max);
                if let Some(s) = spec {
                    c.mass(s.finer(*m_max).ok(), mass);
                }
                if *m_max < 2 {
                    c.fail("flow reports need m_max >= 2");
                }
                if let Some(tol) = limit_tol {
                    c.positive("limit_tol", *tol);
                    if *k == 1 {
                        c.fail("the momentum block of the scaling limit needs H^{1/2} filters (K >= 2)");
                    }
                    if !matches!(mass, FlowMass::Trajectory(_)) {
                        c.fail("a scaling-limit comparison needs a trajectory mass");
                    }
                }
            }
            Experiment::Limit { lattice, m, k, tol, allow_divergent, cutoff_label, .. } => {
                c.filter(*k);
                c.positive("m", *m);
                c.positive("tol", *tol);
                c.spec(lattice, 0);
                if *k == 1 && !allow_divergent && cutoff_label.is_none() {
                    c.fail("the momentum block of the scaling limit needs H^{1/2} filters (K >= 2) or allow_divergent");
                }
                if cutoff_label == &Some(0) {
                    c.fail("cutoff_label must be positive");
                }
            }
            Experiment::Lightcone { lattice, m, t_max, t_steps, .. } => {
                c.positive("m", *m);
                c.positive("t_max", *t_max);
                c.spec(lattice, 0);
                if *t_steps < 2 {
                    c.fail("t_steps must be at least 2");
                }
            }
            Experiment::DynError { lattice, k, m, n_prime_max, times, deltas, k_cut, u, v, descriptors, .. } => {
                c.filter(*k);
                c.positive("m", *m);
                c.positive("k_cut", *k_cut);
                let spec = c.spec(lattice, n_prime_max.saturating_sub(lattice.n));
                if *n_prime_max <= lattice.n {
                    c.fail("n_prime_max must exceed the base scale n");
                }
                if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
                    c.fail("times must be a non-empty list of finite numbers");
                }
                if deltas.iter().any(|d| d.is_nan() || *d < 0.0) {
                    c.fail("deltas must be non-negative");
                }
                if u.len() != lattice.d || v.len() != lattice.d {
                    c.fail("u and v must have d components");
                }
                if descriptors.is_empty() {
                    c.fail("at least one descriptor is needed");
                }
                if let Some(s) = spec {
                    for d in descriptors {
                        if let Err(e) = parse_descriptor(s, d) {
                            c.fail(e);
                        }
                    }
                }
            }
            Experiment::CorrConv { lattice, k, m, a, b, t, x, n_primes, k_cut, .. } => {
                c.filter(*k);
                c.positive("m", *m);
                c.positive("k_cut", *k_cut);
                let top = n_primes.iter().copied().max().unwrap_or(lattice.n);
                let spec = c.spec(lattice, top.saturating_sub(lattice.n));
                if n_primes.is_empty() || n_primes.iter().any(|n| *n < lattice.n) {
                    c.fail("n_primes must be a non-empty list of scales at or above n");
                }
                if !t.is_finite() || x.len() != lattice.d {
                    c.fail("t must be finite and x must have d components");
                }
                if let Some(s) = spec {
                    for ins in a.iter().chain(b) {
                        match parse_insertion(ins) {
                            Ok(i) if i.site >= s.volume() => c.fail(format!("site {} is outside the lattice", i.site)),
                            Ok(_) => {}
                            Err(e) => c.fail(e),
                        }
                    }
                    for n in n_primes {
                        let eps = s.at_scale(*n).map(|f| f.eps_n()).unwrap_or(f64::NAN);
                        if x.iter().any(|xj| ((xj / eps) - (xj / eps).round()).abs() > 1e-9 * (xj / eps).abs().max(1.0)) {
                            c.fail(format!("translation {x:?} is not on the lattice at scale {n}"));
                        }
                    }
                }
            }
            Experiment::MeraCheck { lattice, k, m, cutoff_label, descriptors, .. } => {
                c.filter(*k);
                c.positive("m", *m);
                if *cutoff_label == 0 {
                    c.fail("cutoff_label must be positive");
                }
                if let Some(s) = c.spec(lattice, 1) {
                    for d in descriptors {
                        if let Err(e) = parse_descriptor(s, d) {
                            c.fail(e);
                        }
                    }
                }
            }
        }
        out.extend(c.out);
    }
    out
}
