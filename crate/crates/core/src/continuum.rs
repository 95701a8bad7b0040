//! The free continuum field on the torus `T^d_L`, represented on a truncated
//! momentum grid `Γ_∞ ∩ [-k_max, k_max]^d`.
//!
//! A test-function pair `(F, G)` is stored through its Fourier coefficients
//! `F̂(k) = ∫ F(x) e^{-ik·x} dx`; the field operators are normalized so that
//! `[Φ(F), Π(G)] = i ∫ F G`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::gaussian::{QuasiFree, SymplecticVector, WeylDescriptor};
use crate::lattice::{continuum_dispersion, LatticeSpec};
use crate::wavelet::FilterBank;
use crate::{Error, Result};

/// Truncated dual lattice `(π/L){-n..n}^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentumGrid {
    pub d: usize,
    pub l: f64,
    pub n_max: usize,
}

impl MomentumGrid {
    /// Smallest grid containing every momentum with `|k_j| ≤ k_max`.
    pub fn with_cutoff(d: usize, l: f64, k_max: f64) -> Result<Self> {
        if !(1..=3).contains(&d) || !(l > 0.0) || !(k_max >= 0.0) || !k_max.is_finite() {
            return Err(Error::Domain(format!("invalid momentum grid d = {d}, L = {l}, k_max = {k_max}")));
        }
        Ok(Self { d, l, n_max: (k_max * l / PI).floor() as usize })
    }

    pub fn k_max(&self) -> f64 {
        PI / self.l * self.n_max as f64
    }

    pub fn per_axis(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer label of a grid point along each axis.
    pub fn label(&self, mut flat: usize) -> [i64; 3] {
        let p = self.per_axis();
        let mut out = [0i64; 3];
        for axis in (0..self.d).rev() {
            out[axis] = (flat % p) as i64 - self.n_max as i64;
            flat /= p;
        }
        out
    }

    pub fn momentum(&self, flat: usize) -> [f64; 3] {
        let lab = self.label(flat);
        let mut k = [0.0; 3];
        for axis in 0..self.d {
            k[axis] = PI / self.l * lab[axis] as f64;
        }
        k
    }

    /// Volume `(2L)^d` of the torus.
    pub fn torus_volume(&self) -> f64 {
        (2.0 * self.l).powi(self.d as i32)
    }
}

/// Fourier data of a continuum test-function pair on a [`MomentumGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumVector {
    pub grid: MomentumGrid,
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
}

impl ContinuumVector {
    pub fn zero(grid: MomentumGrid) -> Self {
        let z = alloc::vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, f: z.clone(), g: z }
    }

    /// Image of `Φ_N(f) + Π_N(g)` under the continuum embedding:
    /// `F̂ = ε_N^{(d-1)/2} f̂ Π ŝ(ε_N k_j)`, `Ĝ = ε_N^{(d+1)/2} ĝ Π ŝ(ε_N k_j)`.
    pub fn embed(w: &WeylDescriptor, bank: &FilterBank, grid: MomentumGrid) -> Result<Self> {
        let spec = w.spec;
        check_grid(&spec, &grid)?;
        let d = spec.d();
        let eps = spec.eps_n();
        let n = spec.sites_per_axis();
        let (f_hat, g_hat) = (w.f_hat(), w.g_hat());
        let pf = eps.powf(0.5 * (d as f64 - 1.0));
        let pg = eps.powf(0.5 * (d as f64 + 1.0));
        let mut out = Self::zero(grid);
        for q in 0..grid.len() {
            let lab = grid.label(q);
            let k = grid.momentum(q);
            let mut sym = Complex64::new(1.0, 0.0);
            let mut idx = 0usize;
            for axis in 0..d {
                sym *= bank.shat(eps * k[axis]);
                idx = idx * n + lab[axis].rem_euclid(n as i64) as usize;
            }
            out.f[q] = f_hat[idx] * sym * pf;
            out.g[q] = g_hat[idx] * sym * pg;
        }
        Ok(out)
    }

    /// Image of `Φ(s^{(ε)}_u)` scaled by `a` plus `Π(s^{(ε)}_v)` scaled by `b`,
    /// with `s^{(ε)}_x` the normalized scaled translate of the scaling function.
    pub fn smeared(bank: &FilterBank, eps: f64, u: &[f64], a: f64, v: &[f64], b: f64, grid: MomentumGrid) -> Self {
        let mut out = Self::zero(grid);
        let d = grid.d;
        let norm = eps.powf(0.5 * d as f64);
        for q in 0..grid.len() {
            let k = grid.momentum(q);
            let mut sym = Complex64::new(norm, 0.0);
            let (mut pu, mut pv) = (0.0, 0.0);
            for axis in 0..d {
                sym *= bank.shat(eps * k[axis]);
                pu += k[axis] * u[axis];
                pv += k[axis] * v[axis];
            }
            out.f[q] = sym * Complex64::from_polar(a, -pu);
            out.g[q] = sym * Complex64::from_polar(b, -pv);
        }
        out
    }

    /// Translation `F(· - a)`.
    pub fn translated(&self, a: &[f64]) -> Self {
        let mut out = self.clone();
        for q in 0..self.grid.len() {
            let k = self.grid.momentum(q);
            let phase: f64 = (0..self.grid.d).map(|j| k[j] * a[j]).sum();
            let p = Complex64::from_polar(1.0, -phase);
            out.f[q] *= p;
            out.g[q] *= p;
        }
        out
    }

    /// Free massive Heisenberg evolution over time `t`.
    pub fn evolved(&self, m: f64, t: f64) -> Self {
        let mut out = self.clone();
        for q in 0..self.grid.len() {
            let k = self.grid.momentum(q);
            let w = continuum_dispersion(m, &k[..self.grid.d]);
            let (s, c) = (w * t).sin_cos();
            let (f, g) = (self.f[q], self.g[q]);
            out.f[q] = f * c - g * (w * s);
            out.g[q] = f * (s / w) + g * c;
        }
        out
    }
}

fn check_grid(spec: &LatticeSpec, grid: &MomentumGrid) -> Result<()> {
    if spec.d() != grid.d || spec.l() != grid.l {
        return Err(Error::LatticeMismatch("momentum grid and lattice describe different tori".into()));
    }
    Ok(())
}

impl SymplecticVector for ContinuumVector {
    fn symplectic(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for q in 0..self.f.len() {
            acc += (self.f[q].conj() * other.g[q] - self.g[q].conj() * other.f[q]).re;
        }
        acc / self.grid.torus_volume()
    }

    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self {
            grid: self.grid,
            f: self.f.iter().zip(&other.f).map(|(x, y)| x * a + y * b).collect(),
            g: self.g.iter().zip(&other.g).map(|(x, y)| x * a + y * b).collect(),
        }
    }
}

/// Ground state of the free continuum field of mass `m` on the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuumGroundState {
    pub grid: MomentumGrid,
    pub m: f64,
}

impl ContinuumGroundState {
    pub fn new(grid: MomentumGrid, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("mass m = {m} must be positive")));
        }
        Ok(Self { grid, m })
    }
}

impl QuasiFree for ContinuumGroundState {
    type Vector = ContinuumVector;

    fn check(&self, v: &ContinuumVector) -> Result<()> {
        if v.grid != self.grid {
            return Err(Error::LatticeMismatch("continuum vector lives on a different momentum grid".into()));
        }
        Ok(())
    }

    fn covariance(&self, a: &ContinuumVector, b: &ContinuumVector) -> f64 {
        let mut acc = 0.0;
        for q in 0..self.grid.len() {
            let k = self.grid.momentum(q);
            let w = continuum_dispersion(self.m, &k[..self.grid.d]);
            acc += (a.f[q].conj() * b.f[q]).re / (2.0 * w) + (a.g[q].conj() * b.g[q]).re * w / 2.0;
        }
        acc / self.grid.torus_volume()
    }

    fn mean(&self, _a: &ContinuumVector) -> f64 {
        0.0
    }
}
