use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest tolerated `|A_ij - conj(A_ji)|` for input matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Dense complex Hermitian matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "Hermitian matrix needs dim >= 1");
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    /// Validates shape and Hermiticity of a row-major entry list.
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        let m = Self { dim, entries };
        let asymmetry = m.max_asymmetry();
        if asymmetry > HERMITIAN_TOL {
            return Err(Error::NonHermitianInput { asymmetry });
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            entries.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(dim, entries)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * m.dim + i] = C64::new(d, 0.0);
        }
        m
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn pauli_y() -> Self {
        let i = C64::i();
        Self::new(2, vec![C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    /// Adds `value` at `(i, j)` and its conjugate at `(j, i)`; on the diagonal
    /// only the real part is added.
    pub fn add_hermitian(&mut self, i: usize, j: usize, value: C64) {
        let n = self.dim;
        if i == j {
            self.entries[i * n + i] += C64::new(value.re, 0.0);
        } else {
            self.entries[i * n + j] += value;
            self.entries[j * n + i] += value.conj();
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `out = self * x`
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        debug_assert_eq!(x.len(), n);
        for (row, o) in self.entries.chunks_exact(n).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut out);
        out
    }

    /// `<x|self|x>`, real for Hermitian `self`.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let hx = self.matvec(x);
        x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum::<C64>().re
    }

    /// `self + scale * other`
    pub fn scaled_add(&self, scale: f64, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b * scale).collect();
        Ok(Self { dim: self.dim, entries })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|a| a * factor).collect() }
    }

    /// Maximum absolute row sum; an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.entries.chunks_exact(self.dim).map(|row| row.iter().map(|a| a.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i].re).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.entries[i * n + j] == C64::new(0.0, 0.0)))
    }
}

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on an empty or zero vector.
    pub fn new(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = l2_norm(&amplitudes);
        if amplitudes.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("state vector must have finite nonzero norm".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `<self|other>`
    pub fn overlap(&self, other: &[C64]) -> C64 {
        inner(&self.amplitudes, other)
    }

    pub fn fidelity(&self, other: &[C64]) -> f64 {
        self.overlap(other).norm()
    }
}

/// `<a|b>`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn l2_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let err = HermitianMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonHermitianInput { .. }));
    }

    #[test]
    fn rejects_wrong_length() {
        let err = HermitianMatrix::new(2, vec![C64::new(1.0, 0.0); 3]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn pauli_y_is_hermitian_and_traceless() {
        let y = HermitianMatrix::pauli_y();
        assert_eq!(y.max_asymmetry(), 0.0);
        assert_eq!(y.trace(), 0.0);
    }

    #[test]
    fn add_hermitian_keeps_symmetry() {
        let mut m = HermitianMatrix::zeros(3);
        m.add_hermitian(0, 2, C64::new(1.0, -2.0));
        m.add_hermitian(1, 1, C64::new(4.0, 7.0));
        assert_eq!(m.max_asymmetry(), 0.0);
        assert_eq!(m.get(2, 0), C64::new(1.0, 2.0));
        assert_eq!(m.get(1, 1), C64::new(4.0, 0.0));
    }

    #[test]
    fn state_vector_normalizes() {
        let s = StateVector::new(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::new(vec![C64::new(0.0, 0.0)]).is_err());
    }
}
