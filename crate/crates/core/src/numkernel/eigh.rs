//! Dense Hermitian eigensolver.
//!
//! The matrix is reduced to a real symmetric tridiagonal form with complex
//! Householder reflections followed by a diagonal phase transform, the
//! tridiagonal problem is solved with implicit-shift QL, and the eigenvectors
//! are assembled by back-transformation.

use num_complex::Complex64 as C64;

use super::matrix::HermitianMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_DIM_CAP: usize = 4096;

const QL_MAX_ITER: usize = 60;
// components below this modulus are skipped when fixing the phase gauge
const GAUGE_EPS: f64 = 1e-10;
// output rows per pass over the Householder basis during back-transformation
const BACKTRANSFORM_BLOCK: usize = 32;

/// Ascending eigenvalues and the matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    dim: usize,
    energies: Vec<f64>,
    // eigenvector-major: component i of state n at n * dim + i
    states: Vec<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.energies[n]
    }

    pub fn state(&self, n: usize) -> &[C64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    pub fn ground_state(&self) -> &[C64] {
        self.state(0)
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// `omega_nm = e_n - e_m`
    pub fn omega(&self, n: usize, m: usize) -> f64 {
        self.energies[n] - self.energies[m]
    }

    /// `e_1 - e_0`, or infinity for a one-dimensional space.
    pub fn ground_gap(&self) -> f64 {
        if self.dim > 1 {
            self.omega(1, 0)
        } else {
            f64::INFINITY
        }
    }

    /// `sum_n e_n |phi_n><phi_n|`
    pub fn reconstruct(&self) -> HermitianMatrix {
        let n = self.dim;
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        for (k, &e) in self.energies.iter().enumerate() {
            let v = self.state(k);
            for i in 0..n {
                let vi = v[i] * e;
                for j in 0..n {
                    entries[i * n + j] += vi * v[j].conj();
                }
            }
        }
        HermitianMatrix::new(n, entries).expect("reconstruction is Hermitian by construction")
    }
}

pub fn eigh(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    eigh_with_cap(h, DEFAULT_DIM_CAP)
}

pub fn eigh_with_cap(h: &HermitianMatrix, cap: usize) -> Result<SpectralDecomposition> {
    let n = h.dim();
    if n > cap {
        return Err(Error::DimensionCap { dim: n, cap });
    }
    let asymmetry = h.max_asymmetry();
    if asymmetry > super::matrix::HERMITIAN_TOL {
        return Err(Error::NonHermitianInput { asymmetry });
    }

    let (diag, off, reflectors) = tridiagonalize(h);

    // phases turning the complex subdiagonal real and nonnegative
    let mut phases = vec![C64::new(1.0, 0.0); n];
    let mut sub = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let r = off[k].norm();
        sub[k] = r;
        let unit = if r > 0.0 { off[k] / r } else { C64::new(1.0, 0.0) };
        phases[k + 1] = phases[k] * unit;
    }

    let mut energies = diag;
    let mut rotations = identity(n);
    tridiagonal_ql(&mut energies, &mut sub, &mut rotations)?;

    let basis = householder_basis(n, &reflectors, &phases);
    let raw_states = back_transform(n, &rotations, &basis);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));

    let mut sorted_energies = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n * n);
    for &k in &order {
        sorted_energies.push(energies[k]);
        let v = &raw_states[k * n..(k + 1) * n];
        let lead = v.iter().find(|c| c.norm() > GAUGE_EPS).copied().unwrap_or(C64::new(1.0, 0.0));
        let gauge = lead.conj() / lead.norm();
        states.extend(v.iter().map(|c| c * gauge));
    }

    Ok(SpectralDecomposition { dim: n, energies: sorted_energies, states })
}

struct Reflector {
    // acts on indices offset..n
    offset: usize,
    v: Vec<C64>,
}

/// Returns the real diagonal, the complex subdiagonal `T[k+1][k]`, and the
/// reflectors `H_k = I - 2 v v^dagger` with `A = U T U^dagger`,
/// `U = H_0 H_1 ... H_{n-2}`.
fn tridiagonalize(h: &HermitianMatrix) -> (Vec<f64>, Vec<C64>, Vec<Reflector>) {
    let n = h.dim();
    let mut a = h.entries().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut reflectors = Vec::new();
    let zero = C64::new(0.0, 0.0);

    for k in 0..n.saturating_sub(1) {
        diag[k] = a[k * n + k].re;
        let m = n - k - 1;
        let offset = k + 1;
        // column k below the diagonal, read from row k
        let x: Vec<C64> = (0..m).map(|j| a[k * n + offset + j].conj()).collect();
        let tail: f64 = x[1..].iter().map(|c| c.norm_sqr()).sum();
        if tail == 0.0 {
            off[k] = x[0];
            continue;
        }
        let xnorm = (x[0].norm_sqr() + tail).sqrt();
        let x0 = x[0].norm();
        let unit = if x0 > 0.0 { x[0] / x0 } else { C64::new(1.0, 0.0) };
        let alpha = -unit * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = (2.0 * xnorm * (xnorm + x0)).sqrt();
        v.iter_mut().for_each(|c| *c /= vnorm);

        // p = B v on the trailing block, q = p - (v^dagger p) v
        let mut p = vec![zero; m];
        for (i, pi) in p.iter_mut().enumerate() {
            let row = &a[(offset + i) * n + offset..(offset + i) * n + n];
            *pi = row.iter().zip(&v).map(|(b, c)| b * c).sum();
        }
        let kk: C64 = v.iter().zip(&p).map(|(c, d)| c.conj() * d).sum();
        let q: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        for i in 0..m {
            let vi2 = v[i] * 2.0;
            let qi2 = q[i] * 2.0;
            let row = &mut a[(offset + i) * n + offset..(offset + i) * n + n];
            for ((b, vj), qj) in row.iter_mut().zip(&v).zip(&q) {
                *b -= vi2 * qj.conj() + qi2 * vj.conj();
            }
        }
        off[k] = alpha;
        reflectors.push(Reflector { offset, v });
    }
    diag[n - 1] = a[(n - 1) * n + n - 1].re;
    (diag, off, reflectors)
}

fn identity(n: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    z
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. `sub[k]` couples
/// `k` and `k + 1`. Row `j` of `rot` ends up holding eigenvector `j` of the
/// tridiagonal matrix.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], rot: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n > 0 {
        e[n - 1] = 0.0;
    }
    // Absolute floor so clusters of eigenvalues near zero still deflate.
    let norm = d.iter().zip(e.iter()).fold(0.0_f64, |m, (a, b)| m.max(a.abs() + 2.0 * b.abs()));
    let floor = f64::EPSILON * norm;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd || e[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITER {
                return Err(Error::NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (lo, hi) = rot.split_at_mut((i + 1) * n);
                let zi = &mut lo[i * n..];
                let zi1 = &mut hi[..n];
                for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                    let f = *b;
                    *b = s * *a + c * f;
                    *a = c * *a - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Columns of `U D` stored as rows: row `i` is `phase_i * U e_i`.
fn householder_basis(n: usize, reflectors: &[Reflector], phases: &[C64]) -> Vec<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut u = vec![zero; n * n];
    for i in 0..n {
        u[i * n + i] = C64::new(1.0, 0.0);
    }
    // U = H_0 (H_1 (... H_{n-2})), applied from the left in reverse order
    let mut w = vec![zero; n];
    for r in reflectors.iter().rev() {
        let off = r.offset;
        let cols = off..n;
        w[cols.clone()].iter_mut().for_each(|c| *c = zero);
        for (j, vj) in r.v.iter().enumerate() {
            let vc = vj.conj();
            let row = &u[(off + j) * n + off..(off + j) * n + n];
            for (acc, x) in w[cols.clone()].iter_mut().zip(row) {
                *acc += vc * x;
            }
        }
        for (j, vj) in r.v.iter().enumerate() {
            let f = vj * 2.0;
            let row = &mut u[(off + j) * n + off..(off + j) * n + n];
            for (x, acc) in row.iter_mut().zip(&w[cols.clone()]) {
                *x -= f * acc;
            }
        }
    }
    let mut basis = vec![zero; n * n];
    for r in 0..n {
        for i in 0..n {
            basis[i * n + r] = u[r * n + i] * phases[i];
        }
    }
    basis
}

/// Row `j` of the result is `sum_i rot[j][i] * basis[i]`.
fn back_transform(n: usize, rot: &[f64], basis: &[C64]) -> Vec<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![zero; n * n];
    for block_start in (0..n).step_by(BACKTRANSFORM_BLOCK) {
        let block_end = (block_start + BACKTRANSFORM_BLOCK).min(n);
        for i in 0..n {
            let bi = &basis[i * n..(i + 1) * n];
            for j in block_start..block_end {
                let c = rot[j * n + i];
                if c == 0.0 {
                    continue;
                }
                let row = &mut out[j * n..(j + 1) * n];
                for (o, b) in row.iter_mut().zip(bi) {
                    *o += b * c;
                }
            }
        }
    }
    out
}
