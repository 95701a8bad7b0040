//! Wavelet scaling maps, coarse-graining of Gaussian states and the
//! scaling-limit state.
//!
//! One step sends `Φ_N(x) ↦ 2^{-1/2} Σ_n h_n Φ_{N+1}(x + n ε_{N+1})` and
//! `Π_N(x) ↦ 2^{+1/2} Σ_n h_n Π_{N+1}(x + n ε_{N+1})`, with the separable
//! d-dimensional filter `h_n = Π_j h_{n_j}`. The two prefactors make the map
//! canonical and agree with the continuum embedding `Φ_N(x) = ε_N^{-1/2} Φ(s_x)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::gaussian::{Displacement, GaussianState, WeylDescriptor};
use crate::lattice::{continuum_dispersion, ground_state, HarmonicModel, LatticeSpec};
use crate::linalg::{forward_real, Matrix};
use crate::wavelet::FilterBank;
use crate::{Error, Result};

/// Per-step prefactors of the field and momentum branches.
pub const PHI_STEP: f64 = FRAC_1_SQRT_2;
pub const PI_STEP: f64 = SQRT_2;

/// The matrices `(A_Φ, A_Π)` of `α^N_{N'}`, rows indexed by coarse sites and
/// columns by fine sites: `α(Φ_N(x)) = Σ_y A_Φ(x, y) Φ_{N'}(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneParticleMap {
    pub from: LatticeSpec,
    pub to: LatticeSpec,
    pub a_phi: Matrix,
    pub a_pi: Matrix,
    pub bank: FilterBank,
}

impl OneParticleMap {
    pub fn steps(&self) -> u32 {
        self.to.scale() - self.from.scale()
    }

    /// `max |A_Φ A_Π^T - 1|`.
    pub fn ccr_residual(&self) -> f64 {
        self.a_phi.matmul_transpose(&self.a_pi).identity_residual()
    }

    /// `max |A_Π - 2^M A_Φ|`.
    pub fn prefactor_residual(&self) -> f64 {
        let s = (self.steps() as f64).exp2();
        self.a_pi.max_abs_diff(&self.a_phi.scaled(s))
    }

    /// Deviation of the rows of `2^{M/2} A_Φ` from orthonormality.
    pub fn row_orthonormality_residual(&self) -> f64 {
        let s = (0.5 * self.steps() as f64).exp2();
        let b = self.a_phi.scaled(s);
        b.matmul_transpose(&b).identity_residual()
    }

    /// `self` followed by `next` (coarse to fine), as a product of matrices.
    pub fn then(&self, next: &OneParticleMap) -> Result<OneParticleMap> {
        if self.to != next.from || self.bank != next.bank {
            return Err(Error::LatticeMismatch("maps do not compose".into()));
        }
        Ok(OneParticleMap {
            from: self.from,
            to: next.to,
            a_phi: self.a_phi.matmul(&next.a_phi),
            a_pi: self.a_pi.matmul(&next.a_pi),
            bank: self.bank.clone(),
        })
    }

    /// Image `α(Φ(f) + Π(g))` of a coarse descriptor.
    pub fn push(&self, w: &WeylDescriptor) -> Result<WeylDescriptor> {
        if w.spec != self.from {
            return Err(Error::LatticeMismatch("descriptor is not on the map's coarse lattice".into()));
        }
        let apply = |m: &Matrix, v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; m.cols()];
            for (x, vx) in v.iter().enumerate() {
                if *vx != 0.0 {
                    for (o, a) in out.iter_mut().zip(m.row(x)) {
                        *o += vx * a;
                    }
                }
            }
            out
        };
        WeylDescriptor::new(self.to, apply(&self.a_phi, &w.f), apply(&self.a_pi, &w.g))
    }
}

fn check_pair(from: &LatticeSpec, to: &LatticeSpec) -> Result<()> {
    if !from.same_torus(to) {
        return Err(Error::Domain("scaling maps need both lattices on the same torus".into()));
    }
    if to.scale() < from.scale() {
        return Err(Error::Domain(format!(
            "scaling maps run from coarse to fine; got N = {} > N' = {}",
            from.scale(),
            to.scale()
        )));
    }
    Ok(())
}

/// One refinement step of a function on `coarse`:
/// `out(z) = pref Σ_x v(x) Π_j h_{z_j - 2x_j}` on the next finer lattice.
pub fn refine(coarse: &LatticeSpec, bank: &FilterBank, v: &[f64], pref: f64) -> Result<Vec<f64>> {
    let fine = coarse.finer(1)?;
    let d = coarse.d();
    let nf = fine.sites_per_axis();
    let h = bank.h();
    let taps = h.len();
    let mut out = vec![0.0; fine.volume()];
    let tap_count = taps.pow(d as u32);
    for (x, vx) in v.iter().enumerate() {
        if *vx == 0.0 {
            continue;
        }
        let ix = coarse.unflatten(x);
        for t in 0..tap_count {
            let mut rem = t;
            let mut weight = pref * vx;
            let mut z = 0usize;
            for axis in 0..d {
                let n = rem % taps;
                rem /= taps;
                weight *= h[n];
                z = z * nf + (2 * ix[axis] + n) % nf;
            }
            out[z] += weight;
        }
    }
    Ok(out)
}

/// Builds `α^N_{N'}` by composing single refinement steps row by row.
pub fn build_map(from: &LatticeSpec, to: &LatticeSpec, bank: &FilterBank) -> Result<OneParticleMap> {
    check_pair(from, to)?;
    let rows = from.volume();
    let mut a_phi = Matrix::zeros(rows, to.volume());
    for x in 0..rows {
        let mut v = vec![0.0; rows];
        v[x] = 1.0;
        let mut spec = *from;
        while spec.scale() < to.scale() {
            v = refine(&spec, bank, &v, PHI_STEP)?;
            spec = spec.finer(1)?;
        }
        a_phi.row_mut(x).copy_from_slice(&v);
    }
    let a_pi = a_phi.scaled(((to.scale() - from.scale()) as f64).exp2());
    Ok(OneParticleMap { from: *from, to: *to, a_phi, a_pi, bank: bank.clone() })
}

/// Pushes a descriptor from its lattice to scale `to` without forming the map.
pub fn push_descriptor(w: &WeylDescriptor, bank: &FilterBank, to: u32) -> Result<WeylDescriptor> {
    if to < w.spec.scale() {
        return Err(Error::Domain("descriptors are pushed from coarse to fine".into()));
    }
    let (mut f, mut g, mut spec) = (w.f.clone(), w.g.clone(), w.spec);
    while spec.scale() < to {
        f = refine(&spec, bank, &f, PHI_STEP)?;
        g = refine(&spec, bank, &g, PI_STEP)?;
        spec = spec.finer(1)?;
    }
    WeylDescriptor::new(spec, f, g)
}

/// Position-space pullback `(A_Φ G_ΦΦ A_Φ^T, A_Π G_ΠΠ A_Π^T, A_Φ S A_Π^T)`.
pub fn pullback_covariance(state: &GaussianState, map: &OneParticleMap) -> Result<(Matrix, Matrix, Matrix)> {
    if state.spec() != &map.to {
        return Err(Error::LatticeMismatch("state is not on the map's fine lattice".into()));
    }
    let (gp, gpi, s) = state.position_covariance();
    let cp = map.a_phi.matmul(&gp).matmul_transpose(&map.a_phi);
    let cpi = map.a_pi.matmul(&gpi).matmul_transpose(&map.a_pi);
    let cs = map.a_phi.matmul(&s).matmul_transpose(&map.a_pi);
    Ok((cp, cpi, cs))
}

/// Coarse-grained state together with the largest deviation of the pulled
/// back covariance from translation invariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized {
    pub state: GaussianState,
    pub translation_residual: f64,
}

/// `ω^{(N+M)} ∘ α^N_{N+M}` computed by dense matrix pullback.
pub fn renormalize_state(state: &GaussianState, map: &OneParticleMap) -> Result<Renormalized> {
    let (cp, cpi, cs) = pullback_covariance(state, map)?;
    let spec = map.from;
    let v = spec.volume();
    let n = spec.sites_per_axis();
    let d = spec.d();
    let mut kp = vec![0.0; v];
    let mut kpi = vec![0.0; v];
    let mut ks = vec![0.0; v];
    for r in 0..v {
        kp[r] = cp[(r, 0)];
        kpi[r] = cpi[(r, 0)];
        ks[r] = cs[(r, 0)];
    }
    let mut residual: f64 = 0.0;
    for x in 0..v {
        for y in 0..v {
            let ix = spec.unflatten(x);
            let iy = spec.unflatten(y);
            let shift: Vec<i64> = (0..d).map(|a| ix[a] as i64 - iy[a] as i64).collect();
            let r = spec.site(&shift);
            residual = residual
                .max((cp[(x, y)] - kp[r]).abs())
                .max((cpi[(x, y)] - kpi[r]).abs())
                .max((cs[(x, y)] - ks[r]).abs());
        }
    }
    let phiphi: Vec<f64> = forward_real(&kp, n, d).iter().map(|z| z.re).collect();
    let pipi: Vec<f64> = forward_real(&kpi, n, d).iter().map(|z| z.re).collect();
    let cross = forward_real(&ks, n, d);
    let excluded = if state.is_excluded(0) { vec![0] } else { Vec::new() };
    let mut out = GaussianState::from_symbols(spec, phiphi, pipi, cross, excluded)?;
    if let Some(disp) = state.displacement() {
        let mul = |m: &Matrix, u: &[f64]| -> Vec<f64> { (0..m.rows()).map(|x| crate::linalg::dot(m.row(x), u)).collect() };
        out = out.with_displacement(Displacement { phi: mul(&map.a_phi, &disp.phi), pi: mul(&map.a_pi, &disp.pi) })?;
    }
    Ok(Renormalized { state: out, translation_residual: residual })
}

/// Per-mode folding of the symbols through `steps` coarse-graining steps:
/// `a ↦ ½ Σ w a`, `b ↦ 2 Σ w b`, `Ŝ ↦ Σ w Ŝ` with `w = Π_j |m0(θ_j)|²`
/// summed over the `2^d` fine momenta above each coarse momentum.
pub fn coarse_grain(state: &GaussianState, bank: &FilterBank, steps: u32) -> Result<GaussianState> {
    let mut spec = *state.spec();
    if steps > spec.scale() {
        return Err(Error::Domain(format!("cannot coarse-grain scale {} by {steps} steps", spec.scale())));
    }
    let d = spec.d();
    let mut a = state.phiphi().to_vec();
    let mut b = state.pipi().to_vec();
    let mut s = state.cross().to_vec();
    let zero_excluded = state.is_excluded(0);
    if zero_excluded {
        a[0] = 0.0;
        b[0] = 0.0;
        s[0] = Complex64::new(0.0, 0.0);
    }
    for _ in 0..steps {
        let coarse = spec.at_scale(spec.scale() - 1)?;
        let nf = spec.sites_per_axis();
        let nc = coarse.sites_per_axis();
        let weights: Vec<f64> = (0..nf).map(|i| bank.m0_sq(2.0 * PI * i as f64 / nf as f64)).collect();
        let vc = coarse.volume();
        let mut a2 = vec![0.0; vc];
        let mut b2 = vec![0.0; vc];
        let mut s2 = vec![Complex64::new(0.0, 0.0); vc];
        for q in 0..vc {
            let iq = coarse.unflatten(q);
            for fold in 0..(1usize << d) {
                let mut w = 1.0;
                let mut k = 0usize;
                for axis in 0..d {
                    let i = iq[axis] + if fold >> axis & 1 == 1 { nc } else { 0 };
                    w *= weights[i];
                    k = k * nf + i;
                }
                a2[q] += w * a[k];
                b2[q] += w * b[k];
                s2[q] += s[k] * w;
            }
            a2[q] *= 0.5;
            b2[q] *= 2.0;
        }
        a = a2;
        b = b2;
        s = s2;
        spec = coarse;
    }
    let excluded = if zero_excluded { vec![0] } else { Vec::new() };
    GaussianState::from_symbols(spec, a, b, s, excluded)
}

/// Same contract as [`renormalize_state`], evaluated by momentum folding.
pub fn momentum_fast_path(state: &GaussianState, map: &OneParticleMap) -> Result<GaussianState> {
    if state.spec() != &map.to {
        return Err(Error::LatticeMismatch("state is not on the map's fine lattice".into()));
    }
    if state.displacement().is_some() {
        return Err(Error::Domain("the momentum fast path handles undisplaced states only".into()));
    }
    coarse_grain(state, &map.bank, map.steps())
}

/// Which blocks a limit-state request needs and how far to sum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitOptions {
    /// Bound on the estimated tail of the position-space kernels.
    pub tol: f64,
    /// Accept a divergent momentum block (Haar) and truncate it where the
    /// field block has converged.
    pub allow_divergent: bool,
    /// Maximal dyadic shell of aliases.
    pub max_shell: u32,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { tol: 1e-9, allow_divergent: false, max_shell: 30 }
    }
}

/// The scaling-limit state at scale `N` with its truncation data.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub state: GaussianState,
    pub m: f64,
    pub k: usize,
    /// Momenta with `|k_int|_∞ ≤ cutoff_label` were summed; `k = (π/L) k_int`.
    pub cutoff_label: u64,
    pub tail_phi: f64,
    pub tail_pi: f64,
    pub pi_divergent: bool,
}

impl LimitState {
    pub fn cutoff(&self) -> f64 {
        PI / self.state.spec().l() * self.cutoff_label as f64
    }
}

/// Adds the aliases in the label box `[-hi, hi-1]^d` minus `[-lo, lo-1]^d`
/// and returns the added position-space mass of both blocks.
fn add_shell(
    spec: &LatticeSpec,
    bank: &FilterBank,
    m: f64,
    lo: i64,
    hi: i64,
    a: &mut [f64],
    b: &mut [f64],
) -> (f64, f64) {
    let d = spec.d();
    let eps = spec.eps_n();
    let n = spec.sites_per_axis() as i64;
    let unit = PI / spec.l();
    let width = (2 * hi) as usize;
    // Per-axis |ŝ|² tables over the box.
    let table: Vec<f64> = (0..width).map(|i| bank.shat_sq(eps * unit * (i as i64 - hi) as f64)).collect();
    let total = width.pow(d as u32);
    let (mut da, mut db) = (0.0, 0.0);
    let mut labels = [0i64; 3];
    for t in 0..total {
        let mut rem = t;
        let mut inner = true;
        let mut w = 1.0;
        let mut q = 0usize;
        for axis in (0..d).rev() {
            let i = rem % width;
            rem /= width;
            labels[axis] = i as i64 - hi;
            inner &= labels[axis] >= -lo && labels[axis] < lo;
            w *= table[i];
        }
        if inner || w == 0.0 {
            continue;
        }
        let mut k = [0.0; 3];
        for axis in 0..d {
            k[axis] = unit * labels[axis] as f64;
            q = q * n as usize + labels[axis].rem_euclid(n) as usize;
        }
        let g = continuum_dispersion(m, &k[..d]);
        let ta = w / (2.0 * eps * g);
        let tb = 0.5 * w * eps * g;
        a[q] += ta;
        b[q] += tb;
        da += ta;
        db += tb;
    }
    let v = spec.volume() as f64;
    (da / v, db / v)
}

/// Limit-state symbols summed over the fixed label box `[-c, c-1]^d`.
pub fn limit_state_with_cutoff(spec: &LatticeSpec, m: f64, bank: &FilterBank, cutoff_label: u64) -> Result<LimitState> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("mass m = {m} must be positive")));
    }
    let v = spec.volume();
    let mut a = vec![0.0; v];
    let mut b = vec![0.0; v];
    add_shell(spec, bank, m, 0, cutoff_label as i64, &mut a, &mut b);
    let state = GaussianState::from_symbols(*spec, a, b, vec![Complex64::new(0.0, 0.0); v], Vec::new())?;
    Ok(LimitState {
        state,
        m,
        k: bank.k(),
        cutoff_label,
        tail_phi: f64::NAN,
        tail_pi: f64::NAN,
        pi_divergent: bank.k() == 1,
    })
}

/// Shell ratio above which a block is treated as non-convergent.
const DIVERGENT_RATIO: f64 = 0.95;

/// Largest label box (in momenta) a limit-state sum may visit.
const SHELL_BUDGET: u64 = 1 << 26;

/// `ω^{(N)}_{m,∞}`: symbols `Σ_{k≡q} |ŝ(ε_N k)|²/(2ε_N γ_m(k))` and
/// `Σ_{k≡q} |ŝ(ε_N k)|² ε_N γ_m(k)/2`, summed over dyadic shells of aliases
/// until the geometric tail estimate of both position kernels is below `tol`.
pub fn scaling_limit_state(spec: &LatticeSpec, m: f64, bank: &FilterBank, opts: LimitOptions) -> Result<LimitState> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("mass m = {m} must be positive")));
    }
    if bank.k() == 1 && !opts.allow_divergent {
        return Err(Error::Sobolev);
    }
    let v = spec.volume();
    let half = spec.l_n() as i64;
    let mut a = vec![0.0; v];
    let mut b = vec![0.0; v];
    add_shell(spec, bank, m, 0, half, &mut a, &mut b);
    let mut prev: Option<(f64, f64)> = None;
    let mut tails = (f64::INFINITY, f64::INFINITY);
    let mut pi_divergent = false;
    let mut hi = half;
    for _shell in 1..=opts.max_shell {
        if (4 * hi as u64).pow(spec.d() as u32) > SHELL_BUDGET {
            break;
        }
        let lo = hi;
        hi *= 2;
        let delta = add_shell(spec, bank, m, lo, hi, &mut a, &mut b);
        if let Some(p) = prev {
            let tail = |cur: f64, before: f64| -> (f64, bool) {
                if cur == 0.0 {
                    return (0.0, false);
                }
                let r = cur / before;
                if r >= DIVERGENT_RATIO {
                    (f64::INFINITY, true)
                } else {
                    (cur * r / (1.0 - r), false)
                }
            };
            let (tp, _) = tail(delta.0, p.0);
            let (tq, div) = tail(delta.1, p.1);
            tails = (tp, tq);
            pi_divergent = div;
            let pi_ok = tq < opts.tol || (opts.allow_divergent && bank.k() == 1);
            if tp < opts.tol && pi_ok {
                break;
            }
        }
        prev = Some(delta);
    }
    let cutoff = PI / spec.l() * hi as f64;
    if !(tails.0 < opts.tol) {
        return Err(Error::Cutoff { tail: tails.0, tol: opts.tol, cutoff });
    }
    if bank.k() > 1 && !(tails.1 < opts.tol) {
        return Err(Error::Cutoff { tail: tails.1, tol: opts.tol, cutoff });
    }
    let state = GaussianState::from_symbols(*spec, a, b, vec![Complex64::new(0.0, 0.0); v], Vec::new())?;
    Ok(LimitState {
        state,
        m,
        k: bank.k(),
        cutoff_label: hi as u64,
        tail_phi: tails.0,
        tail_pi: tails.1,
        pi_divergent: pi_divergent || bank.k() == 1,
    })
}

/// Two-point extrapolation of a sequence converging like `c·ratio^M`.
pub fn richardson(previous: f64, last: f64, ratio: f64) -> f64 {
    last + (last - previous) * ratio / (1.0 - ratio)
}

/// Mass data driving a flow: the renormalization trajectory of a continuum
/// mass, or a scale-independent `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FlowMass {
    Trajectory(f64),
    FixedMu(f64),
}

/// One row of a flow table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowRow {
    pub m_steps: u32,
    pub phiphi0: f64,
    pub pipi0: f64,
    /// Nearest-neighbour to on-site ratio of the two kernels along the first axis.
    pub phi_locality: f64,
    pub pi_locality: f64,
    /// Sup distance of both kernels to the next row.
    pub step_distance: f64,
    /// Sup distance of both kernels to the limit state, when one is given.
    pub limit_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowReport {
    pub rows: Vec<FlowRow>,
    /// Richardson extrapolation of `(⟨ΦΦ⟩(0), ⟨ΠΠ⟩(0))` from the last two rows.
    pub extrapolated: (f64, f64),
}

/// The renormalized states `ω^{(N)}_M` for `M = 0..=m_max`.
pub fn flow_states(spec: &LatticeSpec, mass: FlowMass, bank: &FilterBank, m_max: u32) -> Result<Vec<GaussianState>> {
    (0..=m_max)
        .map(|m| {
            let fine = spec.finer(m)?;
            let model = match mass {
                FlowMass::Trajectory(m) => HarmonicModel::on_trajectory(fine, m)?,
                FlowMass::FixedMu(mu) => HarmonicModel::with_mu(fine, mu)?,
            };
            coarse_grain(&ground_state(&model)?, bank, m)
        })
        .collect()
}

fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Convergence table of the flow toward the scaling limit.
pub fn flow_report(
    spec: &LatticeSpec,
    mass: FlowMass,
    bank: &FilterBank,
    m_max: u32,
    limit: Option<&LimitState>,
) -> Result<FlowReport> {
    if m_max < 2 {
        return Err(Error::Domain("flow reports need M_max >= 2".into()));
    }
    let states = flow_states(spec, mass, bank, m_max)?;
    let kernels: Vec<(Vec<f64>, Vec<f64>)> = states.iter().map(|s| (s.phiphi_kernel(), s.pipi_kernel())).collect();
    let limit_kernels = limit.map(|l| (l.state.phiphi_kernel(), l.state.pipi_kernel()));
    let neighbour = spec.site(&[1]);
    let mut rows = Vec::with_capacity(kernels.len());
    for (i, (kp, kpi)) in kernels.iter().enumerate() {
        let step_distance = kernels
            .get(i + 1)
            .map(|(np, npi)| sup_distance(kp, np).max(sup_distance(kpi, npi)))
            .unwrap_or(f64::NAN);
        let limit_residual = limit_kernels
            .as_ref()
            .map(|(lp, lpi)| sup_distance(kp, lp).max(sup_distance(kpi, lpi)))
            .unwrap_or(f64::NAN);
        rows.push(FlowRow {
            m_steps: i as u32,
            phiphi0: kp[0],
            pipi0: kpi[0],
            phi_locality: kp[neighbour] / kp[0],
            pi_locality: kpi[neighbour] / kpi[0],
            step_distance,
            limit_residual,
        });
    }
    let n = rows.len();
    let extrapolated = (
        richardson(rows[n - 2].phiphi0, rows[n - 1].phiphi0, 0.5),
        richardson(rows[n - 2].pipi0, rows[n - 1].pipi0, 0.5),
    );
    Ok(FlowReport { rows, extrapolated })
}
