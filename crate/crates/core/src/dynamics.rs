//! Harmonic lattice and continuum dynamics, commutator functions, light-cone
//! fits and the lattice-to-continuum convergence checks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::continuum::{ContinuumGroundState, ContinuumVector, MomentumGrid};
use crate::gaussian::{Insertion, QuasiFree, WeylDescriptor};
use crate::lattice::{continuum_dispersion, ground_state, HarmonicModel, LatticeSpec};
use crate::linalg::inverse_complex;
use crate::rg::push_descriptor;
use crate::wavelet::FilterBank;
use crate::{Error, Result};

/// Per-mode phase-space rotation of the lattice dynamics over a fixed time.
///
/// `f̂ ↦ cos(γt) f̂ - ε γ sin(γt) ĝ`, `ĝ ↦ sin(γt)/(ε γ) f̂ + cos(γt) ĝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionKernel {
    pub model: HarmonicModel,
    pub t: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// `ε_N γ(k)`.
    stiffness: Vec<f64>,
}

impl EvolutionKernel {
    pub fn new(model: &HarmonicModel, t: f64) -> Self {
        let spec = model.spec();
        let eps = spec.eps_n();
        let v = spec.volume();
        let (mut cos, mut sin, mut stiffness) = (vec![0.0; v], vec![0.0; v], vec![0.0; v]);
        for q in 0..v {
            let g = model.dispersion_at(q);
            let (s, c) = (g * t).sin_cos();
            cos[q] = c;
            sin[q] = s;
            stiffness[q] = eps * g;
        }
        Self { model: *model, t, cos, sin, stiffness }
    }

    /// Largest deviation of a mode's rotation determinant from one.
    pub fn symplectic_residual(&self) -> f64 {
        let eps = self.model.spec().eps_n();
        let mut worst: f64 = 0.0;
        for q in 0..self.cos.len() {
            let w = self.stiffness[q];
            let off = if w == 0.0 { self.t / eps } else { self.sin[q] / w };
            let det = self.cos[q] * self.cos[q] + w * self.sin[q] * off;
            worst = worst.max((det - 1.0).abs());
        }
        worst
    }

    /// Heisenberg evolution of `Φ(f) + Π(g)`.
    pub fn apply(&self, w: &WeylDescriptor) -> Result<WeylDescriptor> {
        let spec = self.model.spec();
        if &w.spec != spec {
            return Err(Error::LatticeMismatch("descriptor is not on the kernel's lattice".into()));
        }
        let eps = spec.eps_n();
        let (mut f, mut g) = (w.f_hat(), w.g_hat());
        for q in 0..f.len() {
            let st = self.stiffness[q];
            let (fq, gq) = (f[q], g[q]);
            let off = if st == 0.0 {
                if gq.norm() > 0.0 && !self.model.is_excluded(q) {
                    return Err(Error::Infrared);
                }
                self.t / eps
            } else {
                self.sin[q] / st
            };
            f[q] = fq * self.cos[q] - gq * (st * self.sin[q]);
            g[q] = fq * off + gq * self.cos[q];
        }
        Ok(WeylDescriptor::from_hat(*spec, &f, &g))
    }

    /// `Σ_k |f̂|²/(εγ) + εγ|ĝ|²`, conserved by the evolution.
    pub fn energy_form(&self, w: &WeylDescriptor) -> f64 {
        let (f, g) = (w.f_hat(), w.g_hat());
        let mut e = 0.0;
        for q in 0..f.len() {
            let st = self.stiffness[q];
            if st > 0.0 {
                e += f[q].norm_sqr() / st + st * g[q].norm_sqr();
            }
        }
        e / f.len() as f64
    }
}

/// `σ^{(N)}_t(W(w)) = W(w_t)`.
pub fn evolve_weyl(model: &HarmonicModel, w: &WeylDescriptor, t: f64) -> Result<WeylDescriptor> {
    EvolutionKernel::new(model, t).apply(w)
}

/// `sin(γt)/(εγ)`, continued to `t/ε` at `γ = 0`.
fn propagator(gamma: f64, eps: f64, t: f64) -> f64 {
    if gamma == 0.0 {
        t / eps
    } else {
        (gamma * t).sin() / (eps * gamma)
    }
}

/// `[Φ(x, t), Φ(y, 0)] = -i |Λ|^{-1} Σ_k sin(γt)/(εγ) e^{ik·(y-x)}`.
pub fn commutator_function(model: &HarmonicModel, x: usize, y: usize, t: f64) -> Complex64 {
    let spec = model.spec();
    let v = spec.volume();
    let eps = spec.eps_n();
    let (px, py) = (spec.position(x), spec.position(y));
    let mut acc = 0.0;
    for q in 0..v {
        let k = spec.momentum(q);
        let phase: f64 = (0..spec.d()).map(|j| k[j] * (py[j] - px[j])).sum();
        acc += propagator(model.dispersion_at(q), eps, t) * phase.cos();
    }
    Complex64::new(0.0, -acc / v as f64)
}

/// The commutator for every separation `r = y - x` at once, indexed by flat `r`.
pub fn commutator_profile(model: &HarmonicModel, t: f64) -> Vec<Complex64> {
    let spec = model.spec();
    let eps = spec.eps_n();
    let sym: Vec<Complex64> = (0..spec.volume())
        .map(|q| Complex64::new(0.0, -propagator(model.dispersion_at(q), eps, t)))
        .collect();
    inverse_complex(&sym, spec.sites_per_axis(), spec.d())
}

/// `max_k |∂γ/∂k_1|` over the lattice momenta.
pub fn max_group_velocity(model: &HarmonicModel) -> f64 {
    let spec = model.spec();
    let eps = spec.eps_n();
    let mut best: f64 = 0.0;
    for q in 0..spec.volume() {
        let g = model.dispersion_at(q);
        if g > 0.0 {
            let k = spec.momentum(q);
            best = best.max(((eps * k[0]).sin() / (eps * g)).abs());
        }
    }
    best
}

/// `|[Φ(0, t), Φ(r, 0)]|` on a grid of times and non-negative separations
/// along the first axis; `values[i][j]` belongs to `times[i]`, `radii[j]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LightconeGrid {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn lightcone_grid(model: &HarmonicModel, times: &[f64]) -> LightconeGrid {
    let spec = model.spec();
    let eps = spec.eps_n();
    let half = spec.l_n();
    let radii: Vec<f64> = (0..=half).map(|j| j as f64 * eps).collect();
    let sites: Vec<usize> = (0..=half).map(|j| spec.site(&[j as i64])).collect();
    let values = times
        .iter()
        .map(|&t| {
            let prof = commutator_profile(model, t);
            sites.iter().map(|&s| prof[s].norm()).collect()
        })
        .collect();
    LightconeGrid { times: times.to_vec(), radii, values }
}

/// Settings of the exterior fit `log|c| ≈ β0 - λ (r - v t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    /// Initial velocity bounding the exterior region `r > v0 t + margin`.
    pub v0: f64,
    /// Margin in units of the lattice constant.
    pub margin_sites: f64,
    /// Samples below this magnitude are roundoff and are discarded.
    pub noise_floor: f64,
    /// Earliest time used, as a fraction of the largest time on the grid.
    pub t_min_fraction: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { v0: 1.2, margin_sites: 3.0, noise_floor: 1e-13, t_min_fraction: 0.2, max_iterations: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LightconeFit {
    pub velocity: f64,
    pub decay_rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// Velocity that bounded the exterior region in the final pass.
    pub region_velocity: f64,
    pub iterations: usize,
}

fn least_squares3(rows: &[[f64; 3]], y: &[f64]) -> Option<[f64; 3]> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (r, yi) in rows.iter().zip(y) {
        for i in 0..3 {
            aty[i] += r[i] * yi;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 normal equations.
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&ata[i]);
        m[i][3] = aty[i];
    }
    for col in 0..3 {
        let p = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, p);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in col..4 {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// Fits the exterior decay of the commutator, refining the exterior region
/// with the fitted velocity until it settles.
pub fn lightcone_fit(grid: &LightconeGrid, eps: f64, opts: FitOptions) -> Result<LightconeFit> {
    let t_max = grid.times.iter().cloned().fold(0.0, f64::max);
    let t_min = opts.t_min_fraction * t_max;
    let mut v_region = opts.v0;
    let mut last: Option<LightconeFit> = None;
    for iteration in 1..=opts.max_iterations.max(1) {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for (i, &t) in grid.times.iter().enumerate() {
            if t < t_min || t <= 0.0 {
                continue;
            }
            for (j, &r) in grid.radii.iter().enumerate() {
                let c = grid.values[i][j];
                if r > v_region * t + opts.margin_sites * eps && c > opts.noise_floor {
                    rows.push([1.0, r, t]);
                    ys.push(c.ln());
                }
            }
        }
        if rows.len() < 10 {
            return Err(Error::Fit(format!("only {} exterior samples above the noise floor", rows.len())));
        }
        let beta = least_squares3(&rows, &ys).ok_or_else(|| Error::Fit("degenerate exterior sample set".into()))?;
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (r, y) in rows.iter().zip(&ys) {
            let pred = beta[0] + beta[1] * r[1] + beta[2] * r[2];
            ss_res += (y - pred).powi(2);
            ss_tot += (y - mean).powi(2);
        }
        let lambda = -beta[1];
        if !(lambda > 0.0) {
            return Err(Error::Fit(format!("non-decaying exterior fit (lambda = {lambda})")));
        }
        let velocity = beta[2] / lambda;
        let fit = LightconeFit {
            velocity,
            decay_rate: lambda,
            intercept: beta[0],
            r_squared: 1.0 - ss_res / ss_tot,
            samples: rows.len(),
            region_velocity: v_region,
            iterations: iteration,
        };
        let settled = (velocity - v_region).abs() < 1e-3;
        last = Some(fit);
        if settled || !(velocity > 0.0) {
            break;
        }
        v_region = velocity;
    }
    last.ok_or_else(|| Error::Fit("no fit performed".into()))
}

/// Continuum test vector of the coherent state `c(ε^{-1/2} s_u, ε^{1/2} s_v)`.
pub fn coherent_probe(bank: &FilterBank, eps: f64, u: &[f64], v: &[f64], grid: MomentumGrid) -> ContinuumVector {
    ContinuumVector::smeared(bank, eps, u, eps.powf(-0.5), v, eps.sqrt(), grid)
}

/// Inputs of a dynamics-error evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSetup {
    pub spec: LatticeSpec,
    pub bank: FilterBank,
    pub m: f64,
    /// Physical momentum cutoff of the truncated continuum.
    pub k_cut: f64,
    /// Centres of the coherent state's field and momentum smearings.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DynamicsError {
    pub n_prime: u32,
    pub t: f64,
    pub lhs: f64,
    /// `(δ, sup_k γ_m^{1/2} |γ_{μ_{N'}} - γ_m| / (1 + ε_N|k|)^δ)`.
    pub rhs: Vec<(f64, f64)>,
    pub k_cut: f64,
}

/// `‖(σ^{(N')}_t - σ_t)(α^N_∞(W(w))) ψ‖` and the dispersion envelope.
pub fn dynamics_error(setup: &DynamicsSetup, w: &WeylDescriptor, n_prime: u32, t: f64, deltas: &[f64]) -> Result<DynamicsError> {
    let spec = setup.spec;
    if w.spec != spec {
        return Err(Error::LatticeMismatch("descriptor is not on the base lattice".into()));
    }
    if n_prime <= spec.scale() {
        return Err(Error::Domain(format!("N' = {n_prime} must exceed N = {}", spec.scale())));
    }
    let grid = MomentumGrid::with_cutoff(spec.d(), spec.l(), setup.k_cut)?;
    if grid.n_max == 0 {
        return Err(Error::Cutoff { tail: f64::INFINITY, tol: 0.0, cutoff: setup.k_cut });
    }
    let state = ContinuumGroundState::new(grid, setup.m)?;
    let eps = spec.eps_n();
    let psi = coherent_probe(&setup.bank, eps, &setup.u, &setup.v, grid);
    let continuum = ContinuumVector::embed(w, &setup.bank, grid)?.evolved(setup.m, t);
    let fine_model = HarmonicModel::on_trajectory(spec.at_scale(n_prime)?, setup.m)?;
    let pushed = push_descriptor(w, &setup.bank, n_prime)?;
    let lattice = ContinuumVector::embed(&evolve_weyl(&fine_model, &pushed, t)?, &setup.bank, grid)?;
    let lhs = state.displaced_distance(&psi, &lattice, &continuum)?;
    let rhs = deltas.iter().map(|&delta| (delta, dispersion_envelope(&fine_model, setup.m, eps, &grid, delta))).collect();
    Ok(DynamicsError { n_prime, t, lhs, rhs, k_cut: grid.k_max() })
}

/// `sup_{k ∈ grid} γ_m^{1/2} |γ_μ(k) - γ_m(k)| / (1 + ε_N |k|)^δ`.
pub fn dispersion_envelope(model: &HarmonicModel, m: f64, eps_n: f64, grid: &MomentumGrid, delta: f64) -> f64 {
    let d = grid.d;
    let mut best: f64 = 0.0;
    for q in 0..grid.len() {
        let k = grid.momentum(q);
        let gm = continuum_dispersion(m, &k[..d]);
        let diff = (model.dispersion(&k[..d]) - gm).abs();
        let norm = k[..d].iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.max(gm.sqrt() * diff / (1.0 + eps_n * norm).powf(delta));
    }
    best
}

/// `sup_{|k_j| ≤ k_fix} |γ_μ(k) - γ_m(k)|` along the first axis.
pub fn dispersion_gap(model: &HarmonicModel, m: f64, k_fix: f64, samples: usize) -> f64 {
    let mut best: f64 = 0.0;
    let d = model.spec().d();
    for i in 0..=samples {
        let mut k = [0.0; 3];
        k[0] = k_fix * i as f64 / samples.max(1) as f64;
        best = best.max((model.dispersion(&k[..d]) - continuum_dispersion(m, &k[..d])).abs());
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelatorComparison {
    pub n_prime: u32,
    pub lattice: Complex64,
    pub continuum: Complex64,
    pub difference: f64,
}

/// `|ω^{(N')}_0(A σ^{(N')}_{(t,x)}(B)) - ω(A σ_{(t,x)}(B))|` for monomials
/// `A`, `B` at scale `N`; `x` must lie on the lattice at scale `N'`.
#[allow(clippy::too_many_arguments)]
pub fn correlator_convergence(
    spec: &LatticeSpec,
    n_prime: u32,
    bank: &FilterBank,
    m: f64,
    a: &[Insertion],
    b: &[Insertion],
    t: f64,
    x: &[f64],
    k_cut: f64,
) -> Result<CorrelatorComparison> {
    let d = spec.d();
    if x.len() != d {
        return Err(Error::Domain(format!("translation must have {d} components")));
    }
    let fine = spec.at_scale(n_prime)?;
    let eps_f = fine.eps_n();
    let mut shift = Vec::with_capacity(d);
    for xj in x {
        let s = xj / eps_f;
        if (s - s.round()).abs() > 1e-9 * s.abs().max(1.0) {
            return Err(Error::Domain(format!("translation {xj} is not on the lattice at scale {n_prime}")));
        }
        shift.push(s.round() as i64);
    }
    let model = HarmonicModel::on_trajectory(fine, m)?;
    let lattice_state = ground_state(&model)?;
    let kernel = EvolutionKernel::new(&model, t);
    let grid = MomentumGrid::with_cutoff(d, spec.l(), k_cut)?;
    let cont_state = ContinuumGroundState::new(grid, m)?;

    let mut lat = Vec::with_capacity(a.len() + b.len());
    let mut cont = Vec::with_capacity(a.len() + b.len());
    for ins in a {
        let w = ins.descriptor(*spec);
        lat.push(push_descriptor(&w, bank, n_prime)?);
        cont.push(ContinuumVector::embed(&w, bank, grid)?);
    }
    for ins in b {
        let w = ins.descriptor(*spec);
        let pushed = push_descriptor(&w, bank, n_prime)?;
        lat.push(kernel.apply(&pushed)?.translated(&shift));
        cont.push(ContinuumVector::embed(&w, bank, grid)?.evolved(m, t).translated(x));
    }
    let lattice = lattice_state.wick(&lat)?;
    let continuum = cont_state.wick(&cont)?;
    Ok(CorrelatorComparison { n_prime, lattice, continuum, difference: (lattice - continuum).norm() })
}

/// Period `2π/γ` of a single lattice mode.
pub fn mode_period(model: &HarmonicModel, q: usize) -> f64 {
    2.0 * PI / model.dispersion_at(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> HarmonicModel {
        let spec = LatticeSpec::new(1, 1.0, 0.25, 1).unwrap();
        HarmonicModel::on_trajectory(spec, 1.0).unwrap()
    }

    #[test]
    fn commutator_vanishes_at_equal_times() {
        let m = model();
        for y in 0..m.spec().volume() {
            assert_eq!(commutator_function(&m, 0, y, 0.0), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn profile_matches_direct_sum() {
        let m = model();
        let prof = commutator_profile(&m, 0.37);
        for y in 0..m.spec().volume() {
            assert!((prof[y] - commutator_function(&m, 0, y, 0.37)).norm() < 1e-14);
        }
    }

    #[test]
    fn kernel_is_symplectic() {
        let k = EvolutionKernel::new(&model(), 1.3);
        assert!(k.symplectic_residual() < 1e-14);
    }
}
