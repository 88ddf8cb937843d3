//! Free-fermion solution of the periodic transverse-field Ising chain
//! `H = -sum_j (sx_j sx_{j+1} + h sz_j)` in the even-parity sector.
//!
//! After the Jordan-Wigner and Fourier transforms every momentum pair
//! `(k, -k)` with `k = (2j - 1) pi / N` decouples into a two-level problem
//! `H_k = 2[(h - cos k) sz + sin k sx]` whose instantaneous gap is
//! `4 sqrt(1 + h^2 - 2h cos k)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkernel::{eigh, inner, HamiltonianSource, HermitianMatrix, Rk4};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsingChainSpec {
    n: usize,
    h: f64,
}

impl IsingChainSpec {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        check_size(n)?;
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("transverse field must be >= 0, got {h}")));
        }
        Ok(Self { n, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Allowed momenta together with `d theta_k / dh` at a given field.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub momenta: Vec<f64>,
    pub dtheta_dh: Vec<f64>,
}

impl ModeSet {
    pub fn new(spec: IsingChainSpec) -> Self {
        let momenta = momenta(spec.n).expect("IsingChainSpec::new validates the size");
        let dtheta_dh = momenta.iter().map(|&k| dtheta_dh(k, spec.h)).collect();
        Self { momenta, dtheta_dh }
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }
}

/// Two-level state `u |0> + v |1>` of one momentum pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeAmplitude {
    pub k: f64,
    pub u: C64,
    pub v: C64,
}

impl ModeAmplitude {
    pub fn ground(k: f64, h: f64) -> Self {
        let [u, v] = mode_ground_state(k, h);
        Self { k, u, v }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.u.norm_sqr() + self.v.norm_sqr()
    }

    /// `|<other|self>|^2`
    pub fn overlap_sqr(&self, other: [C64; 2]) -> f64 {
        (other[0].conj() * self.u + other[1].conj() * self.v).norm_sqr()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n % 2 == 1 {
        return Err(Error::OddSize(n));
    }
    if n < 2 {
        return Err(Error::SizeCap { size: n, min: 2, max: usize::MAX });
    }
    Ok(())
}

/// `k = (2j - 1) pi / N` for `j = 1..=N/2`.
pub fn momenta(n: usize) -> Result<Vec<f64>> {
    check_size(n)?;
    Ok((1..=n / 2).map(|j| (2 * j - 1) as f64 * PI / n as f64).collect())
}

pub fn dtheta_dh(k: f64, h: f64) -> f64 {
    k.sin() / (2.0 * (1.0 + h * h - 2.0 * h * k.cos()))
}

/// Fidelity susceptibility `sum_k (d theta_k / dh)^2`.
pub fn chi_f(n: usize, h: f64) -> Result<f64> {
    Ok(momenta(n)?.iter().map(|&k| dtheta_dh(k, h).powi(2)).sum())
}

/// Thermodynamic limit of `chi_F / N` away from the critical field.
pub fn chi_f_saturation(h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::InvalidArgument(format!("transverse field must be >= 0, got {h}")));
    }
    if h == 1.0 {
        return Err(Error::AtCriticalPoint);
    }
    let h2 = h * h;
    Ok(if h < 1.0 { 1.0 / (16.0 * (1.0 - h2)) } else { 1.0 / (16.0 * h2 * (h2 - 1.0)) })
}

pub fn mode_hamiltonian(k: f64, h: f64) -> HermitianMatrix {
    let z = h - k.cos();
    let x = k.sin();
    HermitianMatrix::from_real_rows(&[&[2.0 * z, 2.0 * x], &[2.0 * x, -2.0 * z]])
        .expect("2x2 mode Hamiltonian is symmetric")
}

pub fn mode_gap(k: f64, h: f64) -> f64 {
    4.0 * (1.0 + h * h - 2.0 * h * k.cos()).sqrt()
}

/// Lower eigenvector of [`mode_hamiltonian`], first component nonpositive.
pub fn mode_ground_state(k: f64, h: f64) -> [C64; 2] {
    let theta = k.sin().atan2(h - k.cos());
    let (s, c) = (0.5 * theta).sin_cos();
    [C64::new(-s, 0.0), C64::new(c, 0.0)]
}

/// Fidelity susceptibility from the two-level perturbative sum
/// `|<e_k| dH_k/dh |g_k>|^2 / gap_k^2` using numerically diagonalized modes.
pub fn chi_f_from_modes(n: usize, h: f64) -> Result<f64> {
    let drive = HermitianMatrix::pauli_z().scale(2.0);
    let mut total = 0.0;
    for k in momenta(n)? {
        let dec = eigh(&mode_hamiltonian(k, h))?;
        let element = inner(dec.state(1), &drive.matvec(dec.ground_state()));
        total += element.norm_sqr() / dec.omega(1, 0).powi(2);
    }
    Ok(total)
}

/// Mode Hamiltonian with the field swept linearly, `h(t) = h_start + rate t`.
#[derive(Clone, Copy, Debug)]
pub struct ModeDrive {
    pub k: f64,
    pub h_start: f64,
    pub rate: f64,
    cos_k: f64,
    sin_k: f64,
}

impl ModeDrive {
    pub fn new(k: f64, h_start: f64, rate: f64) -> Self {
        Self { k, h_start, rate, cos_k: k.cos(), sin_k: k.sin() }
    }
}

impl HamiltonianSource for ModeDrive {
    fn dim(&self) -> usize {
        2
    }

    #[inline]
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let a = 2.0 * (self.h_start + self.rate * t - self.cos_k);
        let b = 2.0 * self.sin_k;
        out[0] = psi[0] * a + psi[1] * b;
        out[1] = psi[0] * b - psi[1] * a;
    }
}

/// Step size giving at least 100 steps per unit of field and `dt <= 0.01`.
pub fn default_sweep_dt(tau0: f64, h_i: f64, h_f: f64) -> f64 {
    let dh = (h_i - h_f).abs();
    if dh == 0.0 {
        0.01
    } else {
        0.01_f64.min(0.01 * tau0 / dh)
    }
}

fn check_sweep(h_i: f64, h_f: f64, tau0: f64, dt: f64) -> Result<()> {
    if !(h_i >= 0.0 && h_f >= 0.0) {
        return Err(Error::InvalidArgument(format!("fields must be >= 0, got {h_i} -> {h_f}")));
    }
    if !(tau0 > 0.0) || !tau0.is_finite() {
        return Err(Error::InvalidArgument(format!("tau0 must be positive, got {tau0}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Evolves mode `k` from its ground state at `h_i` while the field moves
/// linearly to `h_f` at rate `1 / tau0`.
pub fn sweep_mode(k: f64, h_i: f64, h_f: f64, tau0: f64, dt: f64) -> Result<ModeAmplitude> {
    check_sweep(h_i, h_f, tau0, dt)?;
    let mut psi = mode_ground_state(k, h_i);
    let span = (h_f - h_i).abs() * tau0;
    if span > 0.0 {
        let rate = (h_f - h_i).signum() / tau0;
        let drive = ModeDrive::new(k, h_i, rate);
        let steps = (span / dt).ceil().max(1.0) as usize;
        let step = span / steps as f64;
        let mut rk = Rk4::new(2);
        for s in 0..steps {
            rk.step(&drive, &mut psi, s as f64 * step, step)?;
        }
    }
    Ok(ModeAmplitude { k, u: psi[0], v: psi[1] })
}

/// Excitation probability `1 - |<g_k(h_f)|psi_k>|^2` after a linear sweep.
pub fn lz_mode_sweep(k: f64, h_i: f64, h_f: f64, tau0: f64, dt: f64) -> Result<f64> {
    let amp = sweep_mode(k, h_i, h_f, tau0, dt)?;
    Ok((1.0 - amp.overlap_sqr(mode_ground_state(k, h_f))).clamp(0.0, 1.0))
}

/// Asymptotic Landau-Zener excitation probability for a full sweep through
/// the avoided crossing of mode `k`.
pub fn landau_zener_probability(k: f64, tau0: f64) -> f64 {
    (-2.0 * PI * tau0 * k * k).exp()
}

/// Per-mode excitation probabilities for the whole chain, ordered by momentum.
pub fn mode_excitations(n: usize, h_i: f64, h_f: f64, tau0: f64, dt: f64) -> Result<Vec<f64>> {
    let ks = momenta(n)?;
    check_sweep(h_i, h_f, tau0, dt)?;
    ks.par_iter().map(|&k| lz_mode_sweep(k, h_i, h_f, tau0, dt)).collect()
}

/// Ground-state fidelity `prod_k sqrt(1 - p_k)` after a linear quench.
pub fn quench_ground_fidelity(n: usize, h_i: f64, h_f: f64, tau0: f64, dt: f64) -> Result<f64> {
    Ok(mode_excitations(n, h_i, h_f, tau0, dt)?.iter().map(|p| (1.0 - p).sqrt()).product())
}
