//! Fixed-step fourth-order Runge-Kutta integration of `i d/dt psi = H(t) psi`
//! (hbar = 1) with renormalization after every step.

use num_complex::Complex64 as C64;

use super::matrix::{l2_norm, HermitianMatrix, StateVector};
use crate::error::{Error, Result};

/// Pre-renormalization norm drift above which a step is rejected.
pub const MAX_STEP_DRIFT: f64 = 1e-6;

/// A time-dependent Hamiltonian that can act on a state.
pub trait HamiltonianSource {
    fn dim(&self) -> usize;

    /// `out = H(t) psi`
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);
}

impl HamiltonianSource for HermitianMatrix {
    fn dim(&self) -> usize {
        HermitianMatrix::dim(self)
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        HermitianMatrix::apply(self, psi, out)
    }
}

/// `H(t) = base + (lambda_start + rate * t) * drive`
#[derive(Clone, Debug)]
pub struct LinearDrive {
    pub base: HermitianMatrix,
    pub drive: HermitianMatrix,
    pub lambda_start: f64,
    pub rate: f64,
}

impl LinearDrive {
    pub fn lambda_at(&self, t: f64) -> f64 {
        self.lambda_start + self.rate * t
    }
}

impl HamiltonianSource for LinearDrive {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let lambda = self.lambda_at(t);
        let n = self.base.dim();
        let base = self.base.entries();
        let drive = self.drive.entries();
        for (i, o) in out.iter_mut().enumerate() {
            let b = &base[i * n..(i + 1) * n];
            let d = &drive[i * n..(i + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for ((x, y), p) in b.iter().zip(d).zip(psi) {
                acc += (x + y * lambda) * p;
            }
            *o = acc;
        }
    }
}

/// Wraps a closure that builds the full matrix at each time.
pub struct MatrixFn<F> {
    dim: usize,
    build: F,
}

impl<F: Fn(f64) -> HermitianMatrix> MatrixFn<F> {
    pub fn new(dim: usize, build: F) -> Self {
        Self { dim, build }
    }
}

impl<F: Fn(f64) -> HermitianMatrix> HamiltonianSource for MatrixFn<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        (self.build)(t).apply(psi, out)
    }
}

/// Reusable RK4 scratch space.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// Advances `psi` from `t` to `t + dt` in place and renormalizes it.
    /// Returns the norm drift observed before renormalization.
    pub fn step<H: HamiltonianSource + ?Sized>(&mut self, h: &H, psi: &mut [C64], t: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = psi.len();
        if n != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), got: n });
        }
        if self.k1.len() != n {
            *self = Self::new(n);
        }
        let mi = C64::new(0.0, -1.0);
        let half = 0.5 * dt;

        h.apply(t, psi, &mut self.k1);
        self.k1.iter_mut().for_each(|k| *k *= mi);

        for ((tmp, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(&self.k1) {
            *tmp = p + k * half;
        }
        h.apply(t + half, &self.tmp, &mut self.k2);
        self.k2.iter_mut().for_each(|k| *k *= mi);

        for ((tmp, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(&self.k2) {
            *tmp = p + k * half;
        }
        h.apply(t + half, &self.tmp, &mut self.k3);
        self.k3.iter_mut().for_each(|k| *k *= mi);

        for ((tmp, p), k) in self.tmp.iter_mut().zip(psi.iter()).zip(&self.k3) {
            *tmp = p + k * dt;
        }
        h.apply(t + dt, &self.tmp, &mut self.k4);
        self.k4.iter_mut().for_each(|k| *k *= mi);

        let sixth = dt / 6.0;
        for (i, p) in psi.iter_mut().enumerate() {
            *p += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * sixth;
        }
        let norm = l2_norm(psi);
        let drift = (norm - 1.0).abs();
        if !(drift <= MAX_STEP_DRIFT) {
            return Err(Error::StepTooLarge { drift });
        }
        psi.iter_mut().for_each(|p| *p /= norm);
        Ok(drift)
    }
}

/// One RK4 step from `t` to `t + dt`.
pub fn evolve_step<H: HamiltonianSource + ?Sized>(h: &H, psi: &StateVector, t: f64, dt: f64) -> Result<StateVector> {
    let mut amps = psi.amplitudes().to_vec();
    Rk4::new(amps.len()).step(h, &mut amps, t, dt)?;
    StateVector::new(amps)
}

/// Integrates from `t0` to `t1` with `ceil((t1 - t0) / dt)` equal steps.
pub fn propagate<H: HamiltonianSource + ?Sized>(
    h: &H,
    psi: &StateVector,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(psi.clone());
    }
    let steps = (span / dt).ceil().max(1.0) as usize;
    let h_step = span / steps as f64;
    let mut amps = psi.amplitudes().to_vec();
    let mut rk = Rk4::new(amps.len());
    for s in 0..steps {
        rk.step(h, &mut amps, t0 + s as f64 * h_step, h_step)?;
    }
    StateVector::new(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::eigh::eigh;
    use crate::numkernel::matrix::inner;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = HermitianMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.add_hermitian(i, j, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        m
    }

    // exp(-iHt) psi built from the spectral decomposition
    fn spectral_propagate(h: &HermitianMatrix, psi: &[C64], t: f64) -> Vec<C64> {
        let dec = eigh(h).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for n in 0..h.dim() {
            let c = inner(dec.state(n), psi) * C64::from_polar(1.0, -dec.energy(n) * t);
            for (o, v) in out.iter_mut().zip(dec.state(n)) {
                *o += c * v;
            }
        }
        out
    }

    #[test]
    fn stationary_state_under_pauli_z() {
        let h = HermitianMatrix::pauli_z();
        let psi = StateVector::basis(2, 0);
        let out = propagate(&h, &psi, 0.3, 2.3, 0.01).unwrap();
        assert!((out.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        assert!(out.amplitudes()[1].norm() < 1e-12);
    }

    #[test]
    fn rabi_flip_under_pauli_x() {
        let h = HermitianMatrix::pauli_x();
        let psi = StateVector::basis(2, 0);
        let out = propagate(&h, &psi, 0.0, std::f64::consts::FRAC_PI_2, 1e-3).unwrap();
        assert!(out.amplitudes()[0].norm() < 1e-10);
        assert!((out.amplitudes()[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_spectral_propagator() {
        let h = random_hermitian(4, 2024);
        let psi =
            StateVector::new(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.7, 0.0), C64::new(0.1, -0.4)])
                .unwrap();
        let out = propagate(&h, &psi, 0.0, 1.0, 1e-3).unwrap();
        let want = spectral_propagate(&h, psi.amplitudes(), 1.0);
        for (a, b) in out.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_oversized_step() {
        let h = HermitianMatrix::pauli_x().scale(100.0);
        let err = evolve_step(&h, &StateVector::basis(2, 0), 0.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
        assert!(evolve_step(&h, &StateVector::basis(2, 0), 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_drive_matches_matrix_fn() {
        let base = random_hermitian(3, 5);
        let drive = random_hermitian(3, 6);
        let lin = LinearDrive { base: base.clone(), drive: drive.clone(), lambda_start: 0.5, rate: -0.25 };
        let f = MatrixFn::new(3, |t| base.scaled_add(0.5 - 0.25 * t, &drive).unwrap());
        let psi = StateVector::basis(3, 1);
        let a = propagate(&lin, &psi, 0.0, 2.0, 1e-3).unwrap();
        let b = propagate(&f, &psi, 0.0, 2.0, 1e-3).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn norm_drift_and_energy_conservation(seed in 0u64..10_000, n in 2usize..7) {
            let h = random_hermitian(n, seed);
            let dt = 0.02 / h.norm_bound().max(1.0);
            let mut psi = StateVector::new(
                (0..n).map(|i| C64::new(1.0 + i as f64, 0.5 * i as f64)).collect(),
            ).unwrap().into_amplitudes();
            let e0 = h.expectation(&psi);
            let steps = (1.0 / dt).ceil() as usize;
            let step = 1.0 / steps as f64;
            let mut rk = Rk4::new(n);
            for s in 0..steps {
                let drift = rk.step(&h, &mut psi, s as f64 * step, step).unwrap();
                prop_assert!(drift < 1e-9);
            }
            prop_assert!((h.expectation(&psi) - e0).abs() < 1e-8);
        }
    }
}
