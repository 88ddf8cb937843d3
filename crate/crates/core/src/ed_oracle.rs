//! Exact-diagonalization route to the perturbative fidelity quantities:
//! the fidelity susceptibility as a sum over excited states, the ground-state
//! fidelity, its finite-difference estimate, the Loschmidt-echo form `F1` and
//! the lower bound `F2`.
//!
//! Two models are provided: the periodic transverse-field Ising chain in the
//! full `2^N` space and the Lipkin-Meshkov-Glick model
//! `H = -(1/N) sum_{i<j} (sx_i sx_j + gamma sy_i sy_j) - h sum_i sz_i`
//! restricted to the maximal-spin sector `S = N/2`, which has its critical
//! point at `h = 1`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numkernel::{eigh, inner, HermitianMatrix, SpectralDecomposition};

pub const ISING_MIN_SITES: usize = 4;
pub const ISING_MAX_SITES: usize = 14;
pub const LMG_MAX_SITES: usize = 8192;
/// Ground states with `e_1 - e_0` below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Relative tolerance of the half-step check in [`chi_f_finite_difference_checked`].
pub const FD_CONVERGENCE_TOL: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ising,
    Lmg,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Ising => "ising",
            ModelKind::Lmg => "lmg",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ising" => Ok(ModelKind::Ising),
            "lmg" => Ok(ModelKind::Lmg),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// A model `H(lambda) = H_0 + lambda H_I` at a fixed size.
pub trait ModelBuilder: Sync {
    fn build(&self, lambda: f64) -> Result<HermitianMatrix>;

    /// `H_I = dH / d lambda`
    fn driving(&self) -> Result<HermitianMatrix>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub lambda: f64,
    /// LMG anisotropy; ignored for Ising.
    pub gamma: f64,
}

impl SpinModelSpec {
    pub fn ising(n: usize, h: f64) -> Result<Self> {
        check_ising_size(n)?;
        Ok(Self { kind: ModelKind::Ising, n, lambda: h, gamma: 0.0 })
    }

    pub fn lmg(n: usize, h: f64, gamma: f64) -> Result<Self> {
        check_lmg(n, gamma)?;
        Ok(Self { kind: ModelKind::Lmg, n, lambda: h, gamma })
    }

    pub fn hamiltonian(&self) -> Result<HermitianMatrix> {
        self.build(self.lambda)
    }
}

impl ModelBuilder for SpinModelSpec {
    fn build(&self, lambda: f64) -> Result<HermitianMatrix> {
        match self.kind {
            ModelKind::Ising => build_ising(self.n, lambda),
            ModelKind::Lmg => build_lmg(self.n, lambda, self.gamma),
        }
    }

    fn driving(&self) -> Result<HermitianMatrix> {
        match self.kind {
            ModelKind::Ising => ising_driving(self.n),
            ModelKind::Lmg => lmg_driving(self.n),
        }
    }
}

/// Ising ring with a configurable sign on the bond closing the ring. A
/// negative sign gives the antiperiodic chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingRing {
    pub n: usize,
    pub boundary_sign: f64,
}

impl IsingRing {
    pub fn periodic(n: usize) -> Self {
        Self { n, boundary_sign: 1.0 }
    }
}

impl ModelBuilder for IsingRing {
    fn build(&self, lambda: f64) -> Result<HermitianMatrix> {
        build_ising_ring(self.n, lambda, self.boundary_sign)
    }

    fn driving(&self) -> Result<HermitianMatrix> {
        ising_driving(self.n)
    }
}

fn check_ising_size(n: usize) -> Result<()> {
    if n % 2 == 1 {
        return Err(Error::OddSize(n));
    }
    if !(ISING_MIN_SITES..=ISING_MAX_SITES).contains(&n) {
        return Err(Error::SizeCap { size: n, min: ISING_MIN_SITES, max: ISING_MAX_SITES });
    }
    Ok(())
}

fn check_lmg(n: usize, gamma: f64) -> Result<()> {
    if !(1..=LMG_MAX_SITES).contains(&n) {
        return Err(Error::SizeCap { size: n, min: 1, max: LMG_MAX_SITES });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("LMG anisotropy must lie in [0, 1), got {gamma}")));
    }
    Ok(())
}

/// `-sum_j (sx_j sx_{j+1} + h sz_j)` on a periodic ring of `n` sites. Bit `j`
/// of a basis index set means spin `j` points down.
pub fn build_ising(n: usize, h: f64) -> Result<HermitianMatrix> {
    build_ising_ring(n, h, 1.0)
}

fn build_ising_ring(n: usize, h: f64, boundary_sign: f64) -> Result<HermitianMatrix> {
    check_ising_size(n)?;
    let dim = 1usize << n;
    let mut m = HermitianMatrix::zeros(dim);
    for s in 0..dim {
        let down = s.count_ones() as f64;
        m.add_hermitian(s, s, C64::new(-h * (n as f64 - 2.0 * down), 0.0));
    }
    for j in 0..n {
        let mask = (1usize << j) | (1usize << ((j + 1) % n));
        let coupling = if j == n - 1 { -boundary_sign } else { -1.0 };
        for s in 0..dim {
            let t = s ^ mask;
            if t > s {
                m.add_hermitian(t, s, C64::new(coupling, 0.0));
            }
        }
    }
    Ok(m)
}

/// `-sum_j sz_j`, diagonal in the computational basis.
pub fn ising_driving(n: usize) -> Result<HermitianMatrix> {
    check_ising_size(n)?;
    let diag: Vec<f64> = (0..1usize << n).map(|s| -(n as f64 - 2.0 * s.count_ones() as f64)).collect();
    Ok(HermitianMatrix::from_real_diagonal(&diag))
}

/// Maximal-spin sector of the LMG Hamiltonian in the `S_z` basis, ordered
/// `m = S, S - 1, ..., -S`. Only `m -> m` and `m -> m +/- 2` couplings occur.
pub fn build_lmg(n: usize, h: f64, gamma: f64) -> Result<HermitianMatrix> {
    check_lmg(n, gamma)?;
    let nf = n as f64;
    let s = 0.5 * nf;
    let dim = n + 1;
    let mut mat = HermitianMatrix::zeros(dim);
    for i in 0..dim {
        let m = s - i as f64;
        let diag = -(1.0 + gamma) * (s * (s + 1.0) - m * m) / nf + 0.5 * (1.0 + gamma) - 2.0 * h * m;
        mat.add_hermitian(i, i, C64::new(diag, 0.0));
        if i + 2 < dim {
            // <m|S+^2|m-2>
            let lower = m - 2.0;
            let raising = ((s - lower) * (s + lower + 1.0) * (s - lower - 1.0) * (s + lower + 2.0)).sqrt();
            mat.add_hermitian(i, i + 2, C64::new(-(1.0 - gamma) / (2.0 * nf) * raising, 0.0));
        }
    }
    Ok(mat)
}

/// `-sum_i sz_i = -2 S_z`, diagonal `-2m` in the sector basis.
pub fn lmg_driving(n: usize) -> Result<HermitianMatrix> {
    check_lmg(n, 0.0)?;
    let s = 0.5 * n as f64;
    let diag: Vec<f64> = (0..=n).map(|i| -2.0 * (s - i as f64)).collect();
    Ok(HermitianMatrix::from_real_diagonal(&diag))
}

fn check_nondegenerate(dec: &SpectralDecomposition) -> Result<()> {
    let gap = dec.ground_gap();
    if gap < DEGENERACY_TOL {
        return Err(Error::DegenerateGroundState { gap });
    }
    Ok(())
}

/// `(omega_n0, |<phi_n|H_I|phi_0>|^2)` for every excited state `n`.
pub fn transition_elements(dec: &SpectralDecomposition, driving: &HermitianMatrix) -> Result<Vec<(f64, f64)>> {
    if driving.dim() != dec.dim() {
        return Err(Error::DimensionMismatch { expected: dec.dim(), got: driving.dim() });
    }
    check_nondegenerate(dec)?;
    let pushed = driving.matvec(dec.ground_state());
    Ok((1..dec.dim()).map(|n| (dec.omega(n, 0), inner(dec.state(n), &pushed).norm_sqr())).collect())
}

/// `sum_{n != 0} |H_I^{n0}|^2 / (e_n - e_0)^2`
pub fn chi_f_perturbative(dec: &SpectralDecomposition, driving: &HermitianMatrix) -> Result<f64> {
    Ok(transition_elements(dec, driving)?.iter().map(|(w, m)| m / (w * w)).sum())
}

/// `|<phi_0(a)|phi_0(b)>|`
pub fn ground_fidelity(a: &SpectralDecomposition, b: &SpectralDecomposition) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    check_nondegenerate(a)?;
    check_nondegenerate(b)?;
    Ok(inner(a.ground_state(), b.ground_state()).norm().min(1.0))
}

/// `2 (1 - F(lambda, lambda + delta)) / delta^2`
pub fn chi_f_finite_difference<B: ModelBuilder + ?Sized>(builder: &B, lambda: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("finite-difference step must be nonzero, got {delta}")));
    }
    let a = eigh(&builder.build(lambda)?)?;
    let b = eigh(&builder.build(lambda + delta)?)?;
    let f = ground_fidelity(&a, &b)?;
    Ok(2.0 * (1.0 - f) / (delta * delta))
}

/// Finite-difference estimate at the default step, cross-checked against the
/// half step. Returns the half-step value.
pub fn chi_f_finite_difference_checked<B: ModelBuilder + ?Sized>(builder: &B, lambda: f64) -> Result<f64> {
    let coarse = chi_f_finite_difference(builder, lambda, DEFAULT_FD_STEP)?;
    let fine = chi_f_finite_difference(builder, lambda, 0.5 * DEFAULT_FD_STEP)?;
    let scale = fine.abs().max(f64::MIN_POSITIVE);
    if (coarse - fine).abs() > FD_CONVERGENCE_TOL * scale {
        return Err(Error::NotConverged { coarse, fine });
    }
    Ok(fine)
}

/// Perturbative Loschmidt echo
/// `1 - delta^2 sum_{n != 0} |H_I^{n0}|^2 (1 - cos(omega_0n dt)) / omega_0n^2`.
pub fn loschmidt_f1(dec: &SpectralDecomposition, driving: &HermitianMatrix, delta: f64, dt: f64) -> Result<f64> {
    let loss: f64 = transition_elements(dec, driving)?.iter().map(|(w, m)| m * (1.0 - (w * dt).cos()) / (w * w)).sum();
    Ok(1.0 - delta * delta * loss)
}

/// `1 - (delta^2 / 2) chi_F`
pub fn lower_bound_f2(dec: &SpectralDecomposition, driving: &HermitianMatrix, delta: f64) -> Result<f64> {
    Ok(1.0 - 0.5 * delta * delta * chi_f_perturbative(dec, driving)?)
}

/// One perturbative step `lambda -> lambda + delta` taking time `dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationStep {
    pub lambda: f64,
    pub delta: f64,
    pub dt: f64,
    pub subdivisions: usize,
}

impl PerturbationStep {
    /// Step tied to a linear protocol of duration scale `tau0`: `dt = |delta| tau0`.
    pub fn tied(lambda: f64, delta: f64, tau0: f64, subdivisions: usize) -> Result<Self> {
        if delta == 0.0 || !(tau0 > 0.0) || subdivisions == 0 {
            return Err(Error::InvalidArgument(format!(
                "need delta != 0, tau0 > 0, M >= 1 (got {delta}, {tau0}, {subdivisions})"
            )));
        }
        Ok(Self { lambda, delta, dt: delta.abs() * tau0, subdivisions })
    }
}
