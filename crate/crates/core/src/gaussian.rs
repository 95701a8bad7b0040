//! Translation-invariant quasi-free states and their Weyl calculus.
//!
//! Covariances are stored as momentum-space symbols. For a kernel `K(x - y)`
//! the symbol is `K̂(k) = Σ_r K(r) e^{-ik·r}`, so
//! `K(r) = |Λ|^{-1} Σ_k K̂(k) e^{ik·r}`. The symmetrized cross term
//! `½⟨Φ_x Π_y + Π_y Φ_x⟩ = S(x - y)` is stored the same way; the commutator
//! part `⟨[Φ_x, Π_y]⟩ = i δ_{xy}` is implicit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::lattice::LatticeSpec;
use crate::linalg::{forward_real, inverse_complex, inverse_to_real, Matrix};
use crate::{Error, Result};

/// Relative slack allowed in the uncertainty relation for states produced
/// by truncated or rounded computations.
pub const UNCERTAINTY_SLACK: f64 = 1e-9;

/// A phase-space vector `w` labelling the linear field `X(w)` and the Weyl
/// operator `W(w) = e^{iX(w)}`.
pub trait SymplecticVector: Clone {
    /// `σ(a, b)`, with `[X(a), X(b)] = iσ(a, b)`.
    fn symplectic(&self, other: &Self) -> f64;

    /// `a·self + b·other`.
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self;

    fn difference(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }
}

/// A quasi-free state on the Weyl algebra over some phase space.
pub trait QuasiFree {
    type Vector: SymplecticVector;

    /// Rejects vectors that do not belong to the state's phase space.
    fn check(&self, v: &Self::Vector) -> Result<()>;

    /// Symmetrized covariance `½⟨{X(a) - ⟨X(a)⟩, X(b) - ⟨X(b)⟩}⟩`.
    fn covariance(&self, a: &Self::Vector, b: &Self::Vector) -> f64;

    /// `⟨X(a)⟩`.
    fn mean(&self, a: &Self::Vector) -> f64;

    /// `ω(W(w)) = exp(i⟨X(w)⟩ - ½ cov(w, w))`.
    fn weyl_expectation(&self, w: &Self::Vector) -> Result<Complex64> {
        self.check(w)?;
        let q = self.covariance(w, w);
        Ok(Complex64::from_polar((-0.5 * q).exp(), self.mean(w)))
    }

    /// Ordered two-point function `⟨X(a) X(b)⟩`.
    fn two_point(&self, a: &Self::Vector, b: &Self::Vector) -> Result<Complex64> {
        self.check(a)?;
        self.check(b)?;
        Ok(Complex64::new(self.covariance(a, b) + self.mean(a) * self.mean(b), 0.5 * a.symplectic(b)))
    }

    /// `⟨W(w1)Ω, W(w2)Ω⟩` with `Ω` the GNS vector of the state.
    fn coherent_overlap(&self, w1: &Self::Vector, w2: &Self::Vector) -> Result<Complex64> {
        let c = w2.difference(w1);
        let base = self.weyl_expectation(&c)?;
        Ok(base * Complex64::from_polar(1.0, 0.5 * w1.symplectic(w2)))
    }

    /// `⟨W(a1)ψ, W(a2)ψ⟩` for the coherent vector `ψ = W(p)Ω`.
    fn displaced_overlap(&self, p: &Self::Vector, a1: &Self::Vector, a2: &Self::Vector) -> Result<Complex64> {
        self.check(p)?;
        let c = a2.difference(a1);
        let base = self.weyl_expectation(&c)?;
        let phase = 0.5 * a1.symplectic(a2) + p.symplectic(&c);
        Ok(base * Complex64::from_polar(1.0, phase))
    }

    /// `‖W(a1)ψ - W(a2)ψ‖` for `ψ = W(p)Ω`.
    fn displaced_distance(&self, p: &Self::Vector, a1: &Self::Vector, a2: &Self::Vector) -> Result<f64> {
        let o = self.displaced_overlap(p, a1, a2)?;
        Ok((2.0 - 2.0 * o.re).max(0.0).sqrt())
    }

    /// `⟨X(v_1) ⋯ X(v_n)⟩` by Wick's theorem, including the mean field.
    fn wick(&self, vs: &[Self::Vector]) -> Result<Complex64> {
        for v in vs {
            self.check(v)?;
        }
        let n = vs.len();
        let means: Vec<f64> = vs.iter().map(|v| self.mean(v)).collect();
        let mut pair = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i + 1..n {
                pair[i * n + j] = Complex64::new(self.covariance(&vs[i], &vs[j]), 0.5 * vs[i].symplectic(&vs[j]));
            }
        }
        let idx: Vec<usize> = (0..n).collect();
        Ok(wick_recursive(&idx, &means, &pair, n))
    }
}

fn wick_recursive(idx: &[usize], means: &[f64], pair: &[Complex64], n: usize) -> Complex64 {
    let Some((&first, rest)) = idx.split_first() else {
        return Complex64::new(1.0, 0.0);
    };
    let mut total = Complex64::new(0.0, 0.0);
    if means[first] != 0.0 {
        total += means[first] * wick_recursive(rest, means, pair, n);
    }
    for (pos, &j) in rest.iter().enumerate() {
        let p = pair[first * n + j];
        if p == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut remaining = Vec::with_capacity(rest.len() - 1);
        remaining.extend_from_slice(&rest[..pos]);
        remaining.extend_from_slice(&rest[pos + 1..]);
        total += p * wick_recursive(&remaining, means, pair, n);
    }
    total
}

/// Real phase-space pair `(f, g)` over a lattice, labelling `Φ(f) + Π(g)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeylDescriptor {
    pub spec: LatticeSpec,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl WeylDescriptor {
    pub fn new(spec: LatticeSpec, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let v = spec.volume();
        if f.len() != v || g.len() != v {
            return Err(Error::LatticeMismatch(format!(
                "descriptor lengths ({}, {}) do not match {} sites",
                f.len(),
                g.len(),
                v
            )));
        }
        Ok(Self { spec, f, g })
    }

    pub fn zero(spec: LatticeSpec) -> Self {
        let v = spec.volume();
        Self { spec, f: vec![0.0; v], g: vec![0.0; v] }
    }

    /// `Φ(x)` at the site with flat index `site`.
    pub fn field(spec: LatticeSpec, site: usize) -> Self {
        let mut w = Self::zero(spec);
        w.f[site] = 1.0;
        w
    }

    /// `Π(x)` at the site with flat index `site`.
    pub fn momentum(spec: LatticeSpec, site: usize) -> Self {
        let mut w = Self::zero(spec);
        w.g[site] = 1.0;
        w
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.combine(s, self, 0.0)
    }

    pub fn f_hat(&self) -> Vec<Complex64> {
        forward_real(&self.f, self.spec.sites_per_axis(), self.spec.d())
    }

    pub fn g_hat(&self) -> Vec<Complex64> {
        forward_real(&self.g, self.spec.sites_per_axis(), self.spec.d())
    }

    /// Builds a descriptor from momentum data; imaginary residue of the
    /// inverse transform is discarded.
    pub fn from_hat(spec: LatticeSpec, f_hat: &[Complex64], g_hat: &[Complex64]) -> Self {
        let n = spec.sites_per_axis();
        let d = spec.d();
        Self { spec, f: inverse_to_real(f_hat, n, d), g: inverse_to_real(g_hat, n, d) }
    }

    /// Translation by a lattice vector given in lattice units.
    pub fn translated(&self, shift: &[i64]) -> Self {
        let v = self.spec.volume();
        let mut f = vec![0.0; v];
        let mut g = vec![0.0; v];
        for x in 0..v {
            let y = self.spec.translate(x, shift);
            f[y] = self.f[x];
            g[y] = self.g[x];
        }
        Self { spec: self.spec, f, g }
    }
}

impl SymplecticVector for WeylDescriptor {
    fn symplectic(&self, other: &Self) -> f64 {
        let fg: f64 = self.f.iter().zip(&other.g).map(|(a, b)| a * b).sum();
        let gf: f64 = self.g.iter().zip(&other.f).map(|(a, b)| a * b).sum();
        fg - gf
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            spec: self.spec,
            f: self.f.iter().zip(&other.f).map(|(x, y)| a * x + b * y).collect(),
            g: self.g.iter().zip(&other.g).map(|(x, y)| a * x + b * y).collect(),
        }
    }
}

/// Which coordinate a monomial insertion refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Field {
    Phi,
    Pi,
}

/// A single `Φ(x)` or `Π(x)` factor of a monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Insertion {
    pub site: usize,
    pub field: Field,
}

impl Insertion {
    pub fn phi(site: usize) -> Self {
        Self { site, field: Field::Phi }
    }

    pub fn pi(site: usize) -> Self {
        Self { site, field: Field::Pi }
    }

    pub fn descriptor(&self, spec: LatticeSpec) -> WeylDescriptor {
        match self.field {
            Field::Phi => WeylDescriptor::field(spec, self.site),
            Field::Pi => WeylDescriptor::momentum(spec, self.site),
        }
    }
}

/// Mean field `⟨Φ_x⟩`, `⟨Π_x⟩` of a displaced state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Displacement {
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Translation-invariant quasi-free state on a lattice, with an optional
/// coherent displacement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianState {
    spec: LatticeSpec,
    phiphi: Vec<f64>,
    pipi: Vec<f64>,
    cross: Vec<Complex64>,
    excluded: Vec<usize>,
    displacement: Option<Displacement>,
}

impl GaussianState {
    /// Builds a state from its symbols, checking the uncertainty relation
    /// `ab - |Ŝ|² - |Im Ŝ| ≥ 1/4` mode by mode. Excluded modes carry no
    /// fluctuations and are skipped in all mode sums.
    pub fn from_symbols(
        spec: LatticeSpec,
        phiphi: Vec<f64>,
        pipi: Vec<f64>,
        cross: Vec<Complex64>,
        mut excluded: Vec<usize>,
    ) -> Result<Self> {
        let v = spec.volume();
        if phiphi.len() != v || pipi.len() != v || cross.len() != v {
            return Err(Error::LatticeMismatch(format!("symbol lengths do not match {v} modes")));
        }
        excluded.sort_unstable();
        excluded.dedup();
        if excluded.last().is_some_and(|&q| q >= v) {
            return Err(Error::Domain("excluded mode index out of range".into()));
        }
        let state = Self { spec, phiphi, pipi, cross, excluded, displacement: None };
        let worst = state.uncertainty_violation();
        if !worst.is_finite() || worst > UNCERTAINTY_SLACK {
            return Err(Error::Domain(format!("covariance violates the uncertainty relation by {worst:e}")));
        }
        Ok(state)
    }

    pub fn with_displacement(mut self, displacement: Displacement) -> Result<Self> {
        let v = self.spec.volume();
        if displacement.phi.len() != v || displacement.pi.len() != v {
            return Err(Error::LatticeMismatch("displacement length does not match the lattice".into()));
        }
        self.displacement = Some(displacement);
        Ok(self)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// `⟨ΦΦ⟩(k)`.
    pub fn phiphi(&self) -> &[f64] {
        &self.phiphi
    }

    /// `⟨ΠΠ⟩(k)`.
    pub fn pipi(&self) -> &[f64] {
        &self.pipi
    }

    /// Symbol of the symmetrized `⟨ΦΠ⟩`.
    pub fn cross(&self) -> &[Complex64] {
        &self.cross
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn is_excluded(&self, q: usize) -> bool {
        self.excluded.binary_search(&q).is_ok()
    }

    pub fn displacement(&self) -> Option<&Displacement> {
        self.displacement.as_ref()
    }

    /// Largest relative violation of `ab - |Ŝ|² - |Im Ŝ| ≥ 1/4`, or zero.
    pub fn uncertainty_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for q in 0..self.phiphi.len() {
            if self.is_excluded(q) {
                continue;
            }
            let (a, b, s) = (self.phiphi[q], self.pipi[q], self.cross[q]);
            if a < 0.0 || b < 0.0 {
                return f64::INFINITY;
            }
            let slack = a * b - s.norm_sqr() - s.im.abs() - 0.25;
            worst = worst.max(-slack / (a * b).max(0.25));
        }
        worst
    }

    /// `ab - |Ŝ|² - |Im Ŝ|` per mode; equal to 1/4 for pure modes.
    pub fn uncertainty_products(&self) -> Vec<f64> {
        (0..self.phiphi.len())
            .map(|q| {
                let s = self.cross[q];
                self.phiphi[q] * self.pipi[q] - s.norm_sqr() - s.im.abs()
            })
            .collect()
    }

    /// Position kernel `⟨Φ_0 Φ_r⟩` indexed by flat site `r`.
    pub fn phiphi_kernel(&self) -> Vec<f64> {
        self.kernel(&self.phiphi)
    }

    /// Position kernel `⟨Π_0 Π_r⟩`.
    pub fn pipi_kernel(&self) -> Vec<f64> {
        self.kernel(&self.pipi)
    }

    /// Symmetrized `½⟨Φ_r Π_0 + Π_0 Φ_r⟩`, indexed by `r`.
    pub fn cross_kernel(&self) -> Vec<f64> {
        let sym: Vec<Complex64> = self
            .cross
            .iter()
            .enumerate()
            .map(|(q, s)| if self.is_excluded(q) { Complex64::new(0.0, 0.0) } else { *s })
            .collect();
        inverse_complex(&sym, self.spec.sites_per_axis(), self.spec.d()).iter().map(|z| z.re).collect()
    }

    fn kernel(&self, symbol: &[f64]) -> Vec<f64> {
        let c: Vec<Complex64> = symbol
            .iter()
            .enumerate()
            .map(|(q, a)| Complex64::new(if self.is_excluded(q) { 0.0 } else { *a }, 0.0))
            .collect();
        inverse_to_real(&c, self.spec.sites_per_axis(), self.spec.d())
    }

    /// Dense position-space blocks `(G_ΦΦ, G_ΠΠ, S)` with
    /// `S_{xy} = ½⟨Φ_x Π_y + Π_y Φ_x⟩`.
    pub fn position_covariance(&self) -> (Matrix, Matrix, Matrix) {
        let v = self.spec.volume();
        let kp = self.phiphi_kernel();
        let kpi = self.pipi_kernel();
        let ks = self.cross_kernel();
        let mut gp = Matrix::zeros(v, v);
        let mut gpi = Matrix::zeros(v, v);
        let mut s = Matrix::zeros(v, v);
        for x in 0..v {
            for y in 0..v {
                let r = self.difference_index(x, y);
                gp[(x, y)] = kp[r];
                gpi[(x, y)] = kpi[r];
                s[(x, y)] = ks[r];
            }
        }
        (gp, gpi, s)
    }

    /// Flat index of `x - y`.
    pub fn difference_index(&self, x: usize, y: usize) -> usize {
        let d = self.spec.d();
        let (ix, iy) = (self.spec.unflatten(x), self.spec.unflatten(y));
        let shift: Vec<i64> = (0..d).map(|a| ix[a] as i64 - iy[a] as i64).collect();
        self.spec.site(&shift)
    }

    fn check_descriptor(&self, w: &WeylDescriptor) -> Result<()> {
        if w.spec != self.spec {
            return Err(Error::LatticeMismatch("descriptor and state live on different lattices".into()));
        }
        if w.f.len() != self.spec.volume() || w.g.len() != self.spec.volume() {
            return Err(Error::LatticeMismatch("descriptor length does not match the lattice".into()));
        }
        Ok(())
    }

    /// Covariance of two descriptors from their Fourier data.
    pub fn covariance_hat(
        &self,
        fa: &[Complex64],
        ga: &[Complex64],
        fb: &[Complex64],
        gb: &[Complex64],
    ) -> f64 {
        let mut acc = 0.0;
        for q in 0..self.phiphi.len() {
            if self.is_excluded(q) {
                continue;
            }
            let s = self.cross[q];
            let t = fa[q].conj() * fb[q] * self.phiphi[q]
                + ga[q].conj() * gb[q] * self.pipi[q]
                + fa[q].conj() * s * gb[q]
                + fb[q].conj() * s * ga[q];
            acc += t.re;
        }
        acc / self.phiphi.len() as f64
    }
}

impl QuasiFree for GaussianState {
    type Vector = WeylDescriptor;

    fn check(&self, v: &WeylDescriptor) -> Result<()> {
        self.check_descriptor(v)
    }

    fn covariance(&self, a: &WeylDescriptor, b: &WeylDescriptor) -> f64 {
        let (fa, ga) = (a.f_hat(), a.g_hat());
        if a == b {
            return self.covariance_hat(&fa, &ga, &fa, &ga);
        }
        self.covariance_hat(&fa, &ga, &b.f_hat(), &b.g_hat())
    }

    fn mean(&self, a: &WeylDescriptor) -> f64 {
        match &self.displacement {
            None => 0.0,
            Some(d) => {
                let p: f64 = a.f.iter().zip(&d.phi).map(|(x, y)| x * y).sum();
                let q: f64 = a.g.iter().zip(&d.pi).map(|(x, y)| x * y).sum();
                p + q
            }
        }
    }
}

/// `ω(e^{i(Φ(f) + Π(g))})`.
pub fn weyl_expectation(state: &GaussianState, w: &WeylDescriptor) -> Result<Complex64> {
    state.weyl_expectation(w)
}

/// `⟨c(w1), c(w2)⟩` for coherent vectors `c(w) = W(w)Ω`.
pub fn coherent_overlap(state: &GaussianState, w1: &WeylDescriptor, w2: &WeylDescriptor) -> Result<Complex64> {
    state.coherent_overlap(w1, w2)
}

/// Ordered expectation of a monomial in `Φ(x)`, `Π(x)`.
pub fn wick_correlator(state: &GaussianState, monomial: &[Insertion]) -> Result<Complex64> {
    let v = state.spec().volume();
    if let Some(bad) = monomial.iter().find(|i| i.site >= v) {
        return Err(Error::LatticeMismatch(format!("site {} outside a lattice of {v} sites", bad.site)));
    }
    let descriptors: Vec<WeylDescriptor> = monomial.iter().map(|i| i.descriptor(*state.spec())).collect();
    state.wick(&descriptors)
}
