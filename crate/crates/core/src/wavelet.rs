//! Daubechies filter banks, scaling-function samples and Fourier symbols.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it whenever std is linked
use num_traits::Float;

use crate::lattice::LatticeSpec;
use crate::{Error, Result};

/// Tolerance for every filter-bank identity.
pub const FILTER_TOL: f64 = 1e-12;

const CASCADE_TOL: f64 = 1e-10;
const CASCADE_MAX_ITER: usize = 200;

/// Low-pass/high-pass pair of a compactly supported orthonormal scaling function.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    k: usize,
    h: Vec<f64>,
    g: Vec<f64>,
    // Odd-lag autocorrelation of h; |m0|^2 = 1/2 + sum r_l cos(l θ).
    acf: Vec<f64>,
    flat_below: f64,
    // Σ h_n as computed; dividing by it makes m0(0) = 1 exactly.
    sum: f64,
}

/// Maximal violations of the filter-bank identities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FilterResiduals {
    pub normalization: f64,
    pub orthonormality: f64,
    pub highpass_orthogonality: f64,
    pub highpass_orthonormality: f64,
    /// Moments are taken in the rescaled variable n/(2K-1), so the residual is
    /// comparable across K.
    pub vanishing_moments: f64,
}

impl FilterResiduals {
    pub fn max(&self) -> f64 {
        self.normalization
            .max(self.orthonormality)
            .max(self.highpass_orthogonality)
            .max(self.highpass_orthonormality)
            .max(self.vanishing_moments)
    }
}

fn autocorrelation(h: &[f64], lag: usize) -> f64 {
    h.iter().zip(&h[lag.min(h.len())..]).map(|(a, b)| a * b).sum()
}

fn qmf_residual(h: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for m in (0..h.len()).step_by(2) {
        let target = if m == 0 { 1.0 } else { 0.0 };
        worst = worst.max((autocorrelation(h, m) - target).abs());
    }
    worst
}

fn cross_residual(g: &[f64], h: &[f64]) -> f64 {
    let len = h.len() as isize;
    let mut worst: f64 = 0.0;
    let mut m = -len;
    while m <= len {
        let mut s = 0.0;
        for (n, gn) in g.iter().enumerate() {
            let j = n as isize + m;
            if j >= 0 && j < len {
                s += gn * h[j as usize];
            }
        }
        worst = worst.max(s.abs());
        m += 2;
    }
    worst
}

fn moment_residual(h: &[f64], k: usize) -> f64 {
    let scale = (h.len() - 1).max(1) as f64;
    let mut worst: f64 = 0.0;
    for p in 0..k {
        let s: f64 = h
            .iter()
            .enumerate()
            .map(|(n, hn)| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * (n as f64 / scale).powi(p as i32) * hn
            })
            .sum();
        worst = worst.max(s.abs());
    }
    worst
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl FilterBank {
    /// Validates an orthonormal low-pass filter of even length 2K and completes
    /// it with its high-pass partner.
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() || !h.len().is_multiple_of(2) {
            return Err(Error::InvalidFilter(format!("filter length {} is not a positive even number", h.len())));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFilter("non-finite tap".into()));
        }
        let norm = (h.iter().sum::<f64>() - SQRT_2).abs();
        if norm > FILTER_TOL {
            return Err(Error::InvalidFilter(format!("taps sum to sqrt(2) only within {norm:e}")));
        }
        let qmf = qmf_residual(&h);
        if qmf > FILTER_TOL {
            return Err(Error::InvalidFilter(format!("taps are not orthonormal under even shifts (residual {qmf:e})")));
        }
        let k = h.len() / 2;
        let g = highpass_from_lowpass(&h)?;
        let acf = (1..h.len()).step_by(2).map(|l| autocorrelation(&h, l)).collect();
        let flat_below = if moment_residual(&h, k) < 1e-10 {
            // 1 - |m0|^2 = sin^{2K}(θ/2) P(cos^2(θ/2)) <= (θ/2)^{2K} C(2K-1, K-1)
            2.0 * (1e-17 / binomial(2 * k - 1, k - 1)).powf(1.0 / (2 * k) as f64)
        } else {
            let curvature: f64 =
                (1..h.len()).step_by(2).map(|l| (autocorrelation(&h, l) * (l * l) as f64).abs()).sum();
            (2e-17 / curvature.max(1.0)).sqrt()
        };
        let sum = h.iter().sum();
        Ok(Self { k, h, g, acf, flat_below, sum })
    }

    /// Number of vanishing moments for Daubechies banks; half the tap count in general.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Length of the support [0, 2K-1] of the scaling function.
    pub fn support_length(&self) -> usize {
        2 * self.k - 1
    }

    pub fn residuals(&self) -> FilterResiduals {
        FilterResiduals {
            normalization: (self.h.iter().sum::<f64>() - SQRT_2).abs(),
            orthonormality: qmf_residual(&self.h),
            highpass_orthogonality: cross_residual(&self.g, &self.h),
            highpass_orthonormality: qmf_residual(&self.g),
            vanishing_moments: moment_residual(&self.h, self.k),
        }
    }

    /// `m0(θ) = 2^{-1/2} Σ h_n e^{-inθ}`.
    pub fn m0(&self, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, hn) in self.h.iter().enumerate() {
            acc += Complex64::from_polar(*hn, -(n as f64) * theta);
        }
        acc / self.sum
    }

    /// `|m0(θ)|²`, evaluated from the autocorrelation with a single cosine.
    pub fn m0_sq(&self, theta: f64) -> f64 {
        let c1 = theta.cos();
        let two_c2 = 2.0 * (2.0 * c1 * c1 - 1.0);
        // Odd Chebyshev polynomials, T_{l+2} = 2 T_2 T_l - T_{l-2}, with T_{-1} = T_1.
        let (mut prev, mut cur) = (c1, c1);
        let mut s = 0.0;
        for r in &self.acf {
            s += r * cur;
            let next = two_c2 * cur - prev;
            prev = cur;
            cur = next;
        }
        (0.5 + s).clamp(0.0, 1.0)
    }

    /// `ŝ(ξ) = Π_{j=1..j_max} m0(ξ / 2^j)`.
    pub fn fourier_scaling(&self, xi: f64, j_max: u32) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        let mut theta = xi;
        for _ in 0..j_max {
            theta *= 0.5;
            acc *= self.m0(theta);
        }
        acc
    }

    /// Number of product factors needed for a truncation error below 1e-16.
    pub fn product_depth(xi: f64) -> u32 {
        let scale = xi.abs().max(1.0).log2().ceil() as u32;
        scale + 56
    }

    /// `ŝ(ξ)` with the product depth chosen automatically.
    pub fn shat(&self, xi: f64) -> Complex64 {
        self.fourier_scaling(xi, Self::product_depth(xi))
    }

    /// `|ŝ(ξ)|²`, truncating the product once the remaining factors equal one
    /// to double precision.
    pub fn shat_sq(&self, xi: f64) -> f64 {
        let mut acc = 1.0;
        let mut theta = xi.abs() * 0.5;
        while theta >= self.flat_below {
            acc *= self.m0_sq(theta);
            if acc == 0.0 {
                return 0.0;
            }
            theta *= 0.5;
        }
        acc
    }

    /// `Π_j |ŝ(ε k_j)|²` for a d-dimensional wavevector.
    pub fn shat_sq_nd(&self, eps: f64, k: &[f64]) -> f64 {
        k.iter().map(|kj| self.shat_sq(eps * kj)).product()
    }
}

/// Completes a low-pass filter with `g_n = (-1)^n h_{2K-1-n}`.
pub fn highpass_from_lowpass(h: &[f64]) -> Result<Vec<f64>> {
    if h.is_empty() || !h.len().is_multiple_of(2) {
        return Err(Error::InvalidFilter(format!("filter length {} is not a positive even number", h.len())));
    }
    let qmf = qmf_residual(h);
    if qmf > FILTER_TOL {
        return Err(Error::InvalidFilter(format!("taps are not orthonormal under even shifts (residual {qmf:e})")));
    }
    let last = h.len() - 1;
    Ok((0..h.len()).map(|n| if n % 2 == 0 { h[last - n] } else { -h[last - n] }).collect())
}

/// Roots of a complex polynomial `Σ c_j z^j` by Aberth iteration.
fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = coeffs[deg];
        let mut dp = Complex64::new(0.0, 0.0);
        for c in coeffs[..deg].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let lead = coeffs[deg].norm();
    let radius = 1.0 + coeffs[..deg].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|i| Complex64::from_polar(0.5 * radius, 2.0 * PI * (i as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..deg {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    repulsion += (z[i] - z[j]).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= step;
            moved = moved.max(step.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = eval(*zi);
            if dp.norm() == 0.0 {
                break;
            }
            *zi -= p / dp;
        }
    }
    z
}

/// Daubechies D2K low-pass filter with `K` vanishing moments, minimal phase.
pub fn daubechies_filter(k: usize) -> Result<FilterBank> {
    if !(1..=10).contains(&k) {
        return Err(Error::UnsupportedFamily(k));
    }
    // P(y) = Σ_{j<K} C(K-1+j, j) y^j, with |m0|^2 = cos^{2K}(θ/2) P(sin^2(θ/2)).
    let p: Vec<Complex64> = (0..k).map(|j| Complex64::new(binomial(k - 1 + j, j), 0.0)).collect();
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let mut convolve = |factor: [Complex64; 2]| {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c * factor[0];
            next[i + 1] += c * factor[1];
        }
        poly = next;
    };
    for _ in 0..k {
        convolve([Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    for y in polynomial_roots(&p) {
        // y = (2 - z - 1/z)/4 in terms of z = e^{iθ}
        let w = Complex64::new(1.0, 0.0) - 2.0 * y;
        let disc = (w * w - 1.0).sqrt();
        let z = if (w + disc).norm() < 1.0 { w + disc } else { w - disc };
        convolve([Complex64::new(1.0, 0.0), -z]);
    }
    let raw: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let total: f64 = raw.iter().sum();
    let h = polish_daubechies(raw.iter().map(|x| x * SQRT_2 / total).collect(), k);
    FilterBank::new(h)
}

/// Gauss-Newton refinement of the constraint system (QMF, normalization,
/// vanishing moments including the zeroth, which the quadratic constraints
/// only fix to the square root of their residual).
fn polish_daubechies(mut h: Vec<f64>, k: usize) -> Vec<f64> {
    let n = h.len();
    let scale = (n - 1).max(1) as f64;
    let moment_row = |p: usize| -> Vec<f64> {
        (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (i as f64 / scale).powi(p as i32)).collect()
    };
    let moments: Vec<Vec<f64>> = (0..k).map(moment_row).collect();
    for _ in 0..20 {
        let mut r = Vec::with_capacity(2 * k + 1);
        r.push(h.iter().sum::<f64>() - SQRT_2);
        for m in (0..n).step_by(2) {
            let target = if m == 0 { 1.0 } else { 0.0 };
            r.push(autocorrelation(&h, m) - target);
        }
        for row in &moments {
            r.push(row.iter().zip(&h).map(|(a, b)| a * b).sum());
        }
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if worst < 2e-16 {
            break;
        }
        let mut jac = Vec::with_capacity(r.len());
        jac.push(vec![1.0; n]);
        for m in (0..n).step_by(2) {
            jac.push(
                (0..n)
                    .map(|i| {
                        let mut d = 0.0;
                        if i + m < n {
                            d += h[i + m];
                        }
                        if i >= m {
                            d += h[i - m];
                        }
                        d
                    })
                    .collect(),
            );
        }
        jac.extend(moments.iter().cloned());
        // Least-squares step from the normal equations J^T J dh = J^T r.
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..n {
                jtr[a] += row[a] * ri;
                for b in 0..n {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let Some(step) = solve_dense(jtj, jtr) else { break };
        let before = worst;
        let trial: Vec<f64> = h.iter().zip(&step).map(|(x, s)| x - s).collect();
        let mut after: f64 = (trial.iter().sum::<f64>() - SQRT_2).abs();
        for m in (0..n).step_by(2) {
            let target = if m == 0 { 1.0 } else { 0.0 };
            after = after.max((autocorrelation(&trial, m) - target).abs());
        }
        for row in &moments {
            after = after.max(row.iter().zip(&trial).map(|(a, b)| a * b).sum::<f64>().abs());
        }
        if after >= before {
            break;
        }
        h = trial;
    }
    h
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Samples of the scaling function on the dyadic grid `2^{-J} Z ∩ [0, 2K-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSamples {
    pub k: usize,
    pub j: u32,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl ScalingSamples {
    pub fn spacing(&self) -> f64 {
        (-(self.j as f64)).exp2()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Sample at `x = i 2^{-J}`, zero outside the support.
    pub fn at(&self, i: isize) -> f64 {
        if i < 0 {
            0.0
        } else {
            self.values.get(i as usize).copied().unwrap_or(0.0)
        }
    }

    /// `max_x |Σ_n s(x - n) - 1|` over the grid.
    pub fn partition_of_unity_residual(&self) -> f64 {
        let per_unit = 1usize << self.j;
        let mut worst: f64 = 0.0;
        for i in 0..per_unit {
            let s: f64 = (0..2 * self.k).map(|n| self.at((i + n * per_unit) as isize)).sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// Riemann-sum Fourier transform `2^{-J} Σ_i s(x_i) e^{-i ξ x_i}`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let dx = self.spacing();
        let step = Complex64::from_polar(1.0, -xi * dx);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            if i % 4096 == 0 {
                phase = Complex64::from_polar(1.0, -xi * dx * i as f64);
            }
            acc += phase * v;
            phase *= step;
        }
        acc * dx
    }
}

/// Cascade iteration of `s(x) = √2 Σ h_n s(2x - n)` from the Haar indicator.
pub fn cascade_evaluate(bank: &FilterBank, j: u32) -> Result<ScalingSamples> {
    if j == 0 {
        return Err(Error::Domain("cascade resolution J must be at least 1".into()));
    }
    if j > 24 {
        return Err(Error::Domain(format!("cascade resolution J = {j} exceeds 24")));
    }
    let per_unit = 1usize << j;
    let len = bank.support_length() * per_unit + 1;
    let mut v = vec![0.0; len];
    v[..per_unit].iter_mut().for_each(|x| *x = 1.0);
    let mut next = vec![0.0; len];
    // √2 h_n written as 2h_n/Σh so that the Haar taps are exactly one.
    let h: Vec<f64> = bank.h().iter().map(|x| 2.0 * x / bank.sum).collect();
    let mut residual = f64::INFINITY;
    for iter in 1..=CASCADE_MAX_ITER {
        for (i, out) in next.iter_mut().enumerate() {
            let mut s = 0.0;
            for (n, hn) in h.iter().enumerate() {
                let idx = 2 * i as isize - (n * per_unit) as isize;
                if idx >= 0 && (idx as usize) < len {
                    s += hn * v[idx as usize];
                }
            }
            *out = s;
        }
        residual = v.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        core::mem::swap(&mut v, &mut next);
        if residual < CASCADE_TOL {
            return Ok(ScalingSamples { k: bank.k(), j, values: v, iterations: iter, residual });
        }
    }
    Err(Error::Convergence { iterations: CASCADE_MAX_ITER, residual })
}

/// Cumulative estimates of `∫_{|ξ|≤c}(1+|ξ|)|ŝ(ξ)|² dξ` for increasing cutoffs `c`.
pub fn sobolev_halforder_diagnostic(bank: &FilterBank, cutoffs: &[f64]) -> Result<Vec<f64>> {
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs.first().is_some_and(|c| *c <= 0.0) {
        return Err(Error::Domain("cutoff grid must be positive and strictly increasing".into()));
    }
    let step = 4.0 * PI / bank.support_length() as f64 / 32.0;
    let f = |xi: f64| (1.0 + xi) * bank.shat_sq(xi);
    let mut out = Vec::with_capacity(cutoffs.len());
    let mut total = 0.0;
    let mut lo = 0.0;
    for &hi in cutoffs {
        let mut panels = ((hi - lo) / step).ceil() as usize;
        panels += panels % 2;
        panels = panels.max(2);
        let dx = (hi - lo) / panels as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * dx);
        }
        // even integrand: the negative half-line doubles the integral
        total += 2.0 * s * dx / 3.0;
        out.push(total);
        lo = hi;
    }
    Ok(out)
}

/// Torus Fourier coefficient `e^{-ik·x} ε_N^{d/2} Π_j ŝ(ε_N k_j)` of the scaled
/// translate `s^{(ε_N)}_x`.
pub fn periodized_symbol(bank: &FilterBank, spec: &LatticeSpec, x: &[f64], k: &[f64]) -> Result<Complex64> {
    let d = spec.d();
    if x.len() != d || k.len() != d {
        return Err(Error::Domain(format!("expected {d}-dimensional point and momentum")));
    }
    let unit = PI / spec.l();
    for kj in k {
        let q = kj / unit;
        if (q - q.round()).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(Error::Domain(format!("momentum {kj} is not on the dual lattice (pi/L) Z")));
        }
    }
    let eps = spec.eps_n();
    let mut c = Complex64::new(eps.powf(0.5 * d as f64), 0.0);
    for (xj, kj) in x.iter().zip(k) {
        c *= bank.shat(eps * kj) * Complex64::from_polar(1.0, -kj * xj);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_trivial() {
        let b = daubechies_filter(1).unwrap();
        let r = 1.0 / SQRT_2;
        assert!((b.h()[0] - r).abs() < 1e-15 && (b.h()[1] - r).abs() < 1e-15);
        assert!((b.g()[0] - r).abs() < 1e-15 && (b.g()[1] + r).abs() < 1e-15);
    }

    #[test]
    fn m0_sq_matches_direct_modulus() {
        for k in 1..=10 {
            let b = daubechies_filter(k).unwrap();
            for i in 0..50 {
                let th = -3.0 + 0.13 * i as f64;
                assert!((b.m0_sq(th) - b.m0(th).norm_sqr()).abs() < 1e-13, "K={k} θ={th}");
            }
        }
    }

    #[test]
    fn unsupported_family() {
        assert_eq!(daubechies_filter(0), Err(Error::UnsupportedFamily(0)));
        assert_eq!(daubechies_filter(11), Err(Error::UnsupportedFamily(11)));
    }
}
