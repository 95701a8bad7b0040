//! One MERA layer at the level of one-particle (symplectic) data: the
//! orthogonal wavelet transform, the sublattice embedding and the circulant
//! disentangler, with the identities that tie them to the scaling map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;

use crate::gaussian::{QuasiFree, WeylDescriptor};
use crate::lattice::LatticeSpec;
use crate::linalg::{inverse_complex, Matrix};
use crate::rg::{build_map, coarse_grain, LimitState, OneParticleMap};
use crate::wavelet::FilterBank;
use crate::{Error, Result};

/// Symbols below this magnitude count as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Orthogonal wavelet transform on the lattice at scale `N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DwtLayer {
    pub spec: LatticeSpec,
    pub bank: FilterBank,
    /// Rows: low-pass block (coarse sites, row-major) then the remaining
    /// high-pass/mixed channels.
    pub w: Matrix,
    /// Interleaved form: row `2j` low-pass, row `2j+1` high-pass, per axis.
    pub interleaved: Matrix,
}

fn periodic_rows(n: usize, taps: &[f64], row: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (k, t) in taps.iter().enumerate() {
        out[(2 * row + k) % n] += t;
    }
    out
}

/// 1D blocks: `(W, U_D)` for `n` sites.
fn dwt_1d(n: usize, bank: &FilterBank) -> (Matrix, Matrix) {
    let half = n / 2;
    let mut w = Matrix::zeros(n, n);
    let mut u = Matrix::zeros(n, n);
    for j in 0..half {
        let lo = periodic_rows(n, bank.h(), j);
        let hi = periodic_rows(n, bank.g(), j);
        w.row_mut(j).copy_from_slice(&lo);
        w.row_mut(half + j).copy_from_slice(&hi);
        u.row_mut(2 * j).copy_from_slice(&lo);
        u.row_mut(2 * j + 1).copy_from_slice(&hi);
    }
    (w, u)
}

fn kron_power(m: &Matrix, d: usize) -> Matrix {
    let mut out = m.clone();
    for _ in 1..d {
        out = out.kron(m);
    }
    out
}

/// Builds the separable wavelet transform on `spec` (the finer lattice).
pub fn dwt_layer(spec: &LatticeSpec, bank: &FilterBank) -> Result<DwtLayer> {
    let n = spec.sites_per_axis();
    if !n.is_multiple_of(2) {
        return Err(Error::Domain(format!("wavelet layer needs an even number of sites, got {n}")));
    }
    let (w1, u1) = dwt_1d(n, bank);
    Ok(DwtLayer { spec: *spec, bank: bank.clone(), w: kron_power(&w1, spec.d()), interleaved: kron_power(&u1, spec.d()) })
}

impl DwtLayer {
    pub fn orthogonality_residual(&self) -> f64 {
        self.w.matmul_transpose(&self.w).identity_residual()
    }

    /// Low-pass rows ordered by coarse site.
    pub fn lowpass_rows(&self) -> Result<Matrix> {
        let coarse = self.spec.at_scale(self.spec.scale() - 1)?;
        let n = self.spec.sites_per_axis();
        let d = self.spec.d();
        let mut out = Matrix::zeros(coarse.volume(), self.spec.volume());
        for x in 0..coarse.volume() {
            let ix = coarse.unflatten(x);
            let row = (0..d).fold(0, |acc, a| acc * n + ix[a]);
            out.row_mut(x).copy_from_slice(self.w.row(row));
        }
        Ok(out)
    }
}

/// Sublattice inclusion `Φ_N(x) ↦ 2^{-1/2} Φ_{N+1}(x)`, `Π_N(x) ↦ 2^{1/2} Π_{N+1}(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SublatticeEmbedding {
    pub from: LatticeSpec,
    pub to: LatticeSpec,
    pub i_phi: Matrix,
    pub i_pi: Matrix,
}

impl SublatticeEmbedding {
    pub fn ccr_residual(&self) -> f64 {
        self.i_phi.matmul_transpose(&self.i_pi).identity_residual()
    }
}

pub fn sublattice_embedding(from: &LatticeSpec, to: &LatticeSpec) -> Result<SublatticeEmbedding> {
    if !from.same_torus(to) || to.scale() != from.scale() + 1 {
        return Err(Error::Domain("sublattice embedding needs consecutive scales of one torus".into()));
    }
    let d = from.d();
    let mut i_phi = Matrix::zeros(from.volume(), to.volume());
    let mut i_pi = Matrix::zeros(from.volume(), to.volume());
    for x in 0..from.volume() {
        let ix = from.unflatten(x);
        let doubled: Vec<usize> = (0..d).map(|a| 2 * ix[a]).collect();
        let y = to.flatten(&doubled);
        i_phi[(x, y)] = FRAC_1_SQRT_2;
        i_pi[(x, y)] = SQRT_2;
    }
    Ok(SublatticeEmbedding { from: *from, to: *to, i_phi, i_pi })
}

/// The circulant `U_Φ(z, z+n) = h_n` and its inverse transpose on the
/// modes where the symbol does not vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct Disentangler {
    pub spec: LatticeSpec,
    pub u_phi: Matrix,
    pub u_pi: Matrix,
    /// Eigenvalue `λ(θ) = Π_j √2 conj(m0(θ_j))` of `U_Φ` on `e^{iθ·y}`.
    pub symbol: Vec<Complex64>,
    pub singular_modes: Vec<usize>,
    /// Projector onto the non-singular modes.
    pub projector: Matrix,
}

fn circulant(spec: &LatticeSpec, kernel: &[f64]) -> Matrix {
    let v = spec.volume();
    let d = spec.d();
    let mut m = Matrix::zeros(v, v);
    for z in 0..v {
        let iz = spec.unflatten(z);
        for y in 0..v {
            let iy = spec.unflatten(y);
            let shift: Vec<i64> = (0..d).map(|a| iy[a] as i64 - iz[a] as i64).collect();
            m[(z, y)] = kernel[spec.site(&shift)];
        }
    }
    m
}

/// Kernel `c(r) = |Λ|^{-1} Σ_θ μ(θ) e^{iθ·r}`, real part.
fn kernel_from_symbol(spec: &LatticeSpec, symbol: &[Complex64]) -> Vec<f64> {
    inverse_complex(symbol, spec.sites_per_axis(), spec.d()).iter().map(|z| z.re).collect()
}

pub fn disentangler_action(spec: &LatticeSpec, bank: &FilterBank) -> Result<Disentangler> {
    let v = spec.volume();
    let d = spec.d();
    let n = spec.sites_per_axis();
    let taps = bank.h().len();
    let mut kernel = vec![0.0; v];
    for t in 0..taps.pow(d as u32) {
        let mut rem = t;
        let mut w = 1.0;
        let mut shift = [0i64; 3];
        for axis in (0..d).rev() {
            let k = rem % taps;
            rem /= taps;
            w *= bank.h()[k];
            shift[axis] = k as i64;
        }
        kernel[spec.site(&shift[..d])] += w;
    }
    let u_phi = circulant(spec, &kernel);
    let mut symbol = Vec::with_capacity(v);
    let mut singular = Vec::new();
    let mut inv = Vec::with_capacity(v);
    let mut proj = Vec::with_capacity(v);
    for q in 0..v {
        let iq = spec.unflatten(q);
        let mut lam = Complex64::new(1.0, 0.0);
        for axis in 0..d {
            lam *= bank.m0(2.0 * PI * iq[axis] as f64 / n as f64).conj() * SQRT_2;
        }
        symbol.push(lam);
        if lam.norm() < SINGULAR_TOL {
            singular.push(q);
            inv.push(Complex64::new(0.0, 0.0));
            proj.push(Complex64::new(0.0, 0.0));
        } else {
            inv.push(lam.inv());
            proj.push(Complex64::new(1.0, 0.0));
        }
    }
    let u_pi = circulant(spec, &kernel_from_symbol(spec, &inv));
    let projector = circulant(spec, &kernel_from_symbol(spec, &proj));
    Ok(Disentangler { spec: *spec, u_phi, u_pi, symbol, singular_modes: singular, projector })
}

impl Disentangler {
    /// `max |U_Φ U_Π^T - P|` with `P` the non-singular projector.
    pub fn pairing_residual(&self) -> f64 {
        self.u_phi.matmul_transpose(&self.u_pi).max_abs_diff(&self.projector)
    }
}

/// Residuals of one verified layer; all fields are non-negative.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerCheckReport {
    pub dwt_orthogonality: f64,
    /// `max |lowpass rows of W - √2 A_Φ|`.
    pub lowpass_residual: f64,
    /// `max |(A_Φ - I_Φ U_Φ) P|`.
    pub phi_factorization: f64,
    /// `max |(A_Π - I_Π U_Π) P|` for the circulant inverse transpose. This is
    /// O(1): the circulant is not orthogonal, and only the orthogonal
    /// transform (`dwt_factorization`) carries the momentum branch.
    pub pi_factorization: f64,
    /// Both branches through the interleaved orthogonal transform.
    pub dwt_factorization: f64,
    pub pairing: f64,
    pub sublattice_ccr: f64,
    pub singular_modes: Vec<usize>,
    pub min_nonsingular_symbol: f64,
    /// Coherent-state Gram matrices at scales `N` and `N+1`.
    pub gram: f64,
    /// Coarse-graining the finer limit state versus the coarser one.
    pub channel: f64,
}

/// Checks the layer `N → N+1` against the one-step scaling map, and the
/// state-level isometry on a family of descriptors at scale `N`.
pub fn verify_layer(
    spec: &LatticeSpec,
    bank: &FilterBank,
    coarse: &LimitState,
    fine: &LimitState,
    descriptors: &[WeylDescriptor],
) -> Result<LayerCheckReport> {
    let fine_spec = spec.finer(1)?;
    if coarse.state.spec() != spec || fine.state.spec() != &fine_spec {
        return Err(Error::LatticeMismatch("limit states are not at scales N and N+1".into()));
    }
    if coarse.m != fine.m || coarse.k != fine.k || coarse.k != bank.k() {
        return Err(Error::Domain("limit states were built with different parameters".into()));
    }
    let map: OneParticleMap = build_map(spec, &fine_spec, bank)?;
    let layer = dwt_layer(&fine_spec, bank)?;
    let emb = sublattice_embedding(spec, &fine_spec)?;
    let dis = disentangler_action(&fine_spec, bank)?;

    let lowpass_residual = layer.lowpass_rows()?.max_abs_diff(&map.a_phi.scaled(SQRT_2));
    let phi_factorization =
        map.a_phi.matmul(&dis.projector).max_abs_diff(&emb.i_phi.matmul(&dis.u_phi).matmul(&dis.projector));
    let pi_factorization =
        map.a_pi.matmul(&dis.projector).max_abs_diff(&emb.i_pi.matmul(&dis.u_pi).matmul(&dis.projector));
    let dwt_factorization = map
        .a_phi
        .max_abs_diff(&emb.i_phi.matmul(&layer.interleaved))
        .max(map.a_pi.max_abs_diff(&emb.i_pi.matmul(&layer.interleaved)));
    let min_nonsingular_symbol = dis
        .symbol
        .iter()
        .map(|z| z.norm())
        .filter(|x| *x >= SINGULAR_TOL)
        .fold(f64::INFINITY, f64::min);

    let mut gram: f64 = 0.0;
    let pushed: Vec<WeylDescriptor> = descriptors.iter().map(|w| map.push(w)).collect::<Result<_>>()?;
    for i in 0..descriptors.len() {
        for j in 0..descriptors.len() {
            let a = coarse.state.coherent_overlap(&descriptors[i], &descriptors[j])?;
            let b = fine.state.coherent_overlap(&pushed[i], &pushed[j])?;
            gram = gram.max((a - b).norm());
        }
    }
    let cg = coarse_grain(&fine.state, bank, 1)?;
    let channel = sup(&cg.phiphi_kernel(), &coarse.state.phiphi_kernel()).max(sup(&cg.pipi_kernel(), &coarse.state.pipi_kernel()));

    Ok(LayerCheckReport {
        dwt_orthogonality: layer.orthogonality_residual(),
        lowpass_residual,
        phi_factorization,
        pi_factorization,
        dwt_factorization,
        pairing: dis.pairing_residual(),
        sublattice_ccr: emb.ccr_residual(),
        singular_modes: dis.singular_modes.clone(),
        min_nonsingular_symbol,
        gram,
        channel,
    })
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::daubechies_filter;

    #[test]
    fn haar_two_sites() {
        let bank = daubechies_filter(1).unwrap();
        let spec = LatticeSpec::new(1, 1.0, 1.0, 0).unwrap();
        let layer = dwt_layer(&spec, &bank).unwrap();
        let r = FRAC_1_SQRT_2;
        let expected = Matrix::from_rows(2, 2, vec![r, r, r, -r]);
        assert!(layer.w.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn haar_disentangler_row() {
        let bank = daubechies_filter(1).unwrap();
        let spec = LatticeSpec::new(1, 2.0, 1.0, 0).unwrap();
        let dis = disentangler_action(&spec, &bank).unwrap();
        let r = FRAC_1_SQRT_2;
        assert_eq!(dis.u_phi.row(0), &[r, r, 0.0, 0.0]);
        assert!((dis.symbol[0].norm() - SQRT_2).abs() < 1e-15);
        assert_eq!(dis.singular_modes, vec![2]);
    }
}
