//! Dyadic torus lattices, the harmonic lattice Hamiltonian and its ground state.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::gaussian::GaussianState;
use crate::{Error, Result};

/// Largest supported scale index; keeps site counts within `usize` and
/// lattice constants well above the double-precision floor.
pub const MAX_SCALE: u32 = 40;

/// The lattice `Λ_N = ε_N {-L_N..L_N-1}^d` on the torus of side `2L`.
///
/// Sites are stored by periodic index `i ∈ 0..2L_N` per axis, with `i` and
/// `i - 2L_N` naming the same point; momenta use the usual DFT ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticeSpec {
    d: usize,
    l: f64,
    eps0: f64,
    l0: usize,
    n: u32,
}

impl LatticeSpec {
    pub fn new(d: usize, l: f64, eps0: f64, n: u32) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Domain(format!("dimension d = {d} outside 1..=3")));
        }
        if !(l.is_finite() && l > 0.0 && eps0.is_finite() && eps0 > 0.0) {
            return Err(Error::Domain(format!("L = {l} and eps = {eps0} must be positive")));
        }
        let ratio = l / eps0;
        let l0 = ratio.round();
        if l0 < 1.0 || (ratio - l0).abs() > 1e-9 * ratio {
            return Err(Error::Domain(format!("L/eps = {ratio} is not a positive integer")));
        }
        if n > MAX_SCALE {
            return Err(Error::Domain(format!("scale N = {n} exceeds {MAX_SCALE}")));
        }
        Ok(Self { d, l, eps0, l0: l0 as usize, n })
    }

    /// Lattice with `L = L0 * eps0`.
    pub fn from_l0(d: usize, l0: usize, eps0: f64, n: u32) -> Result<Self> {
        Self::new(d, l0 as f64 * eps0, eps0, n)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Torus half-length `L`.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn l0(&self) -> usize {
        self.l0
    }

    /// Scale index `N`.
    pub fn scale(&self) -> u32 {
        self.n
    }

    /// `ε_N = 2^{-N} ε`.
    pub fn eps_n(&self) -> f64 {
        self.eps0 * (-(self.n as f64)).exp2()
    }

    /// `L_N = 2^N L_0`.
    pub fn l_n(&self) -> usize {
        self.l0 << self.n
    }

    /// Sites per axis, `2 L_N`.
    pub fn sites_per_axis(&self) -> usize {
        2 * self.l_n()
    }

    /// `|Λ_N| = (2 L_N)^d`.
    pub fn volume(&self) -> usize {
        self.sites_per_axis().pow(self.d as u32)
    }

    /// The same torus at scale `N'`.
    pub fn at_scale(&self, n: u32) -> Result<Self> {
        Self::new(self.d, self.l, self.eps0, n)
    }

    pub fn finer(&self, m: u32) -> Result<Self> {
        self.at_scale(self.n + m)
    }

    pub fn same_torus(&self, other: &Self) -> bool {
        self.d == other.d && self.l == other.l && self.eps0 == other.eps0
    }

    /// Row-major flattening of a per-axis index.
    pub fn flatten(&self, idx: &[usize]) -> usize {
        let n = self.sites_per_axis();
        idx.iter().fold(0, |acc, i| acc * n + i % n)
    }

    /// Inverse of [`flatten`](Self::flatten); unused trailing axes are zero.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let n = self.sites_per_axis();
        let mut out = [0; 3];
        for axis in (0..self.d).rev() {
            out[axis] = flat % n;
            flat /= n;
        }
        out
    }

    /// Signed integer label in `-L_N..L_N-1` for a per-axis index.
    pub fn signed(&self, i: usize) -> i64 {
        let n = self.sites_per_axis();
        let i = (i % n) as i64;
        if i < self.l_n() as i64 {
            i
        } else {
            i - n as i64
        }
    }

    /// Position of a site in `ε_N {-L_N..L_N-1}^d`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.d {
            x[axis] = self.eps_n() * self.signed(idx[axis]) as f64;
        }
        x
    }

    /// Momentum `(π/L) k_int` of a DFT index, `k_int ∈ -L_N..L_N-1`.
    pub fn momentum(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0.0; 3];
        for axis in 0..self.d {
            k[axis] = PI / self.l * self.signed(idx[axis]) as f64;
        }
        k
    }

    /// Site index of `x + shift` with periodic wraparound, shift in lattice units.
    pub fn translate(&self, flat: usize, shift: &[i64]) -> usize {
        let n = self.sites_per_axis() as i64;
        let idx = self.unflatten(flat);
        let mut out = 0usize;
        for axis in 0..self.d {
            let s = shift.get(axis).copied().unwrap_or(0);
            out = out * n as usize + (idx[axis] as i64 + s).rem_euclid(n) as usize;
        }
        out
    }

    /// Site index of a point given in per-axis signed lattice units.
    pub fn site(&self, coords: &[i64]) -> usize {
        self.translate(0, coords)
    }
}

/// Harmonic lattice Hamiltonian
/// `H = ε_N^{-1} (½ Σ_x (Π_x² + μ² Φ_x²) - Σ_{<x,y>} Φ_x Φ_y)`.
///
/// The mass term is stored as the gap `ε_N^{-2}(μ² - 2d)` so that the
/// dispersion stays accurate when `μ²` is close to `2d`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HarmonicModel {
    spec: LatticeSpec,
    gap2: f64,
    mass: Option<f64>,
    exclude_zero_mode: bool,
}

impl HarmonicModel {
    /// On the renormalization trajectory, `μ_N² = 2d + ε_N² m²`.
    pub fn on_trajectory(spec: LatticeSpec, m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain(format!("mass m = {m} must be positive")));
        }
        Ok(Self { spec, gap2: m * m, mass: Some(m), exclude_zero_mode: false })
    }

    /// Scale-independent mass parameter `μ`. Values of `μ²` within a few
    /// ulps of `2d` give the massless model.
    pub fn with_mu(spec: LatticeSpec, mu: f64) -> Result<Self> {
        let bound = 2.0 * spec.d() as f64;
        let mu2 = mu * mu;
        if (mu2 - bound).abs() <= 4.0 * f64::EPSILON * bound {
            return Ok(Self::massless(spec));
        }
        if !mu2.is_finite() || mu2 < bound {
            return Err(Error::Unstable { mu2, bound });
        }
        let eps = spec.eps_n();
        Ok(Self { spec, gap2: (mu2 - bound) / (eps * eps), mass: None, exclude_zero_mode: false })
    }

    /// The massless model `μ² = 2d`. Its ground state needs
    /// [`HarmonicModel::excluding_zero_mode`].
    pub fn massless(spec: LatticeSpec) -> Self {
        Self { spec, gap2: 0.0, mass: None, exclude_zero_mode: false }
    }

    pub fn excluding_zero_mode(mut self) -> Self {
        self.exclude_zero_mode = true;
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// `ε_N^{-2}(μ_N² - 2d)`.
    pub fn gap2(&self) -> f64 {
        self.gap2
    }

    pub fn mu2(&self) -> f64 {
        let eps = self.spec.eps_n();
        2.0 * self.spec.d() as f64 + eps * eps * self.gap2
    }

    pub fn mu(&self) -> f64 {
        self.mu2().sqrt()
    }

    /// Target continuum mass when built on the trajectory.
    pub fn mass(&self) -> Option<f64> {
        self.mass
    }

    pub fn excludes_zero_mode(&self) -> bool {
        self.exclude_zero_mode
    }

    /// The same model one or more scales finer: the trajectory follows `m`,
    /// a fixed `μ` stays fixed.
    pub fn at_scale(&self, n: u32) -> Result<Self> {
        let spec = self.spec.at_scale(n)?;
        let model = match self.mass {
            Some(m) => Self::on_trajectory(spec, m)?,
            None if self.gap2 == 0.0 => Self::massless(spec),
            None => Self::with_mu(spec, self.mu())?,
        };
        Ok(Self { exclude_zero_mode: self.exclude_zero_mode, ..model })
    }

    /// `γ(k)`, valid for any real wavevector.
    pub fn dispersion(&self, k: &[f64]) -> f64 {
        dispersion_from_gap(self.gap2, self.spec.eps_n(), k)
    }

    pub fn dispersion_at(&self, flat: usize) -> f64 {
        let k = self.spec.momentum(flat);
        self.dispersion(&k[..self.spec.d()])
    }

    /// Whether the DFT mode `flat` is dropped from mode sums.
    pub fn is_excluded(&self, flat: usize) -> bool {
        self.exclude_zero_mode && flat == 0
    }

    /// Expectation of the Hamiltonian in a state, from momentum data.
    pub fn energy(&self, state: &GaussianState) -> Result<f64> {
        if state.spec() != &self.spec {
            return Err(Error::LatticeMismatch("state and model live on different lattices".into()));
        }
        let eps = self.spec.eps_n();
        let mut e = 0.0;
        for q in 0..self.spec.volume() {
            if state.is_excluded(q) || self.is_excluded(q) {
                continue;
            }
            let g = self.dispersion_at(q);
            // ε^{-1}·½(b + ε²γ² a)
            e += 0.5 * (state.pipi()[q] + eps * eps * g * g * state.phiphi()[q]) / eps;
        }
        Ok(e)
    }
}

/// `γ² = gap² + 4 ε^{-2} Σ_j sin²(ε k_j / 2)`.
pub fn dispersion_from_gap(gap2: f64, eps: f64, k: &[f64]) -> f64 {
    let s: f64 = k.iter().map(|kj| (0.5 * eps * kj).sin().powi(2)).sum();
    (gap2 + 4.0 * s / (eps * eps)).max(0.0).sqrt()
}

/// Continuum dispersion `γ_m(k) = (m² + |k|²)^{1/2}`.
pub fn continuum_dispersion(m: f64, k: &[f64]) -> f64 {
    (m * m + k.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// `μ_N` on the renormalization trajectory.
pub fn mass_parameter(spec: &LatticeSpec, m: f64) -> Result<f64> {
    Ok(HarmonicModel::on_trajectory(*spec, m)?.mu())
}

/// `dγ/dk_1` along the first axis; bounded by one in magnitude.
pub fn group_velocity(model: &HarmonicModel, k: f64) -> f64 {
    let eps = model.spec().eps_n();
    let g = model.dispersion(&[k]);
    if g == 0.0 {
        return 1.0;
    }
    (eps * k).sin() / (eps * g)
}

/// Ground state: `⟨ΦΦ⟩(k) = 1/(2ε_N γ)`, `⟨ΠΠ⟩(k) = ε_N γ / 2`, vanishing
/// symmetrized cross term.
pub fn ground_state(model: &HarmonicModel) -> Result<GaussianState> {
    let spec = *model.spec();
    let eps = spec.eps_n();
    let v = spec.volume();
    let mut phiphi = Vec::with_capacity(v);
    let mut pipi = Vec::with_capacity(v);
    let mut excluded = Vec::new();
    for q in 0..v {
        if model.is_excluded(q) {
            excluded.push(q);
            phiphi.push(0.0);
            pipi.push(0.0);
            continue;
        }
        let g = model.dispersion_at(q);
        if g == 0.0 {
            return Err(Error::Infrared);
        }
        phiphi.push(0.5 / (eps * g));
        pipi.push(0.5 * eps * g);
    }
    let cross = alloc::vec![Complex64::new(0.0, 0.0); v];
    GaussianState::from_symbols(spec, phiphi, pipi, cross, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_examples() {
        let spec = LatticeSpec::new(1, 1.0, 1.0, 0).unwrap();
        let model = HarmonicModel::with_mu(spec, 3f64.sqrt()).unwrap();
        assert!((model.dispersion(&[0.0]) - 1.0).abs() < 1e-15);
        assert!((model.dispersion(&[PI]) - 5f64.sqrt()).abs() < 1e-15);
        let spec2 = LatticeSpec::new(2, 1.0, 1.0, 0).unwrap();
        let massless = HarmonicModel::with_mu(spec2, 2.0).unwrap();
        assert_eq!(massless.dispersion(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn unstable_mu_rejected() {
        let spec = LatticeSpec::new(1, 1.0, 1.0, 0).unwrap();
        assert!(matches!(HarmonicModel::with_mu(spec, 1.0), Err(Error::Unstable { .. })));
    }

    #[test]
    fn mass_parameter_examples() {
        let spec = LatticeSpec::new(1, 1.0, 1.0, 1).unwrap();
        assert!((mass_parameter(&spec, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let spec0 = LatticeSpec::new(1, 1.0, 1.0, 0).unwrap();
        assert!((mass_parameter(&spec0, 1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(mass_parameter(&spec0, 0.0).is_err());
    }

    #[test]
    fn geometry() {
        let spec = LatticeSpec::new(2, 2.0, 0.5, 1).unwrap();
        assert_eq!(spec.l_n(), 8);
        assert_eq!(spec.volume(), 256);
        assert_eq!(spec.eps_n() * spec.l_n() as f64, spec.l());
        for f in [0, 17, 255] {
            assert_eq!(spec.flatten(&spec.unflatten(f)[..2]), f);
        }
        assert!(LatticeSpec::new(1, 1.0, 0.3, 0).is_err());
    }
}
