//! Linear-quench simulations and the step-composition estimates for the
//! adiabatic duration time.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::ed_oracle::{ModelBuilder, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::ising_ff;
use crate::numkernel::{eigh, inner, HermitianMatrix, LinearDrive, Rk4, SpectralDecomposition, StateVector};

/// Lower and upper bounds of the duration-time search.
pub const TAU_SEARCH_BOUNDS: (f64, f64) = (1e-2, 1e6);
pub const TAU_SEARCH_REL_TOL: f64 = 1e-2;
pub const DEFAULT_TARGET_FIDELITY: f64 = 0.9;
/// `tau0 >= ADIABATIC_MARGIN * threshold` is reported as satisfying `tau0 >> kappa L^d_a`.
pub const ADIABATIC_MARGIN: f64 = 10.0;
/// Upper bound on `dt * ||H||` used for default exact-diagonalization steps.
pub const ED_STEP_PHASE: f64 = 0.08;
const MAX_TRAJECTORY_SAMPLES: usize = 200;

/// Linear schedule `lambda(t) = lambda_i + sign(lambda_f - lambda_i) t / tau0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuenchProtocol {
    pub lambda_i: f64,
    pub lambda_f: f64,
    pub tau0: f64,
    pub subdivisions: usize,
}

impl QuenchProtocol {
    pub fn new(lambda_i: f64, lambda_f: f64, tau0: f64, subdivisions: usize) -> Result<Self> {
        if !(tau0 > 0.0) || !tau0.is_finite() {
            return Err(Error::InvalidArgument(format!("tau0 must be positive, got {tau0}")));
        }
        if subdivisions == 0 {
            return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
        }
        Ok(Self { lambda_i, lambda_f, tau0, subdivisions })
    }

    /// `(lambda_f - lambda_i) / M`
    pub fn delta_lambda(&self) -> f64 {
        (self.lambda_f - self.lambda_i) / self.subdivisions as f64
    }

    /// Time spent on one subinterval, `|delta lambda| tau0`.
    pub fn step_time(&self) -> f64 {
        self.delta_lambda().abs() * self.tau0
    }

    pub fn rate(&self) -> f64 {
        if self.lambda_f == self.lambda_i {
            0.0
        } else {
            (self.lambda_f - self.lambda_i).signum() / self.tau0
        }
    }

    /// `|lambda_f - lambda_i| tau0`; a protocol without drive holds the
    /// Hamiltonian fixed for `tau0`.
    pub fn duration(&self) -> f64 {
        let span = (self.lambda_f - self.lambda_i).abs();
        if span == 0.0 {
            self.tau0
        } else {
            span * self.tau0
        }
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        self.lambda_i + self.rate() * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub lambda: f64,
    /// `|<phi_0(t)|Psi(t)>|` against the instantaneous ground state.
    pub fidelity: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_state: StateVector,
}

impl Trajectory {
    pub fn final_fidelity(&self) -> f64 {
        self.samples.last().map(|s| s.fidelity).unwrap_or(1.0)
    }
}

fn nondegenerate_ground(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let dec = eigh(h)?;
    let gap = dec.ground_gap();
    if gap < DEGENERACY_TOL {
        return Err(Error::DegenerateGroundState { gap });
    }
    Ok(dec)
}

/// Default step for exact-diagonalization sweeps: the free-fermion default,
/// further limited so that `dt * ||H|| <= ED_STEP_PHASE` along the sweep.
pub fn default_ed_dt<B: ModelBuilder + ?Sized>(builder: &B, lambda_i: f64, lambda_f: f64, tau0: f64) -> Result<f64> {
    let norm = builder.build(lambda_i)?.norm_bound().max(builder.build(lambda_f)?.norm_bound());
    Ok(ising_ff::default_sweep_dt(tau0, lambda_i, lambda_f).min(ED_STEP_PHASE / norm.max(1e-300)))
}

fn sample(
    builder: &(impl ModelBuilder + ?Sized),
    protocol: &QuenchProtocol,
    psi: &[C64],
    t: f64,
) -> Result<TrajectorySample> {
    let lambda = protocol.lambda_at(t);
    let h = builder.build(lambda)?;
    let dec = nondegenerate_ground(&h)?;
    let fidelity = inner(dec.ground_state(), psi).norm().min(1.0);
    Ok(TrajectorySample { t, lambda, fidelity, energy: h.expectation(psi) })
}

/// Integrates the Schrodinger equation along the protocol starting from the
/// ground state at `lambda_i`, sampling the instantaneous ground-state
/// fidelity every `max(1, floor(steps / 200))` steps.
pub fn evolve_protocol<B: ModelBuilder + ?Sized>(
    builder: &B,
    protocol: &QuenchProtocol,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let start = builder.build(protocol.lambda_i)?;
    let drive =
        LinearDrive { drive: builder.driving()?, base: start.clone(), lambda_start: 0.0, rate: protocol.rate() };
    let dec = nondegenerate_ground(&start)?;
    let mut psi = dec.ground_state().to_vec();

    let duration = protocol.duration();
    let steps = (duration / dt).ceil().max(1.0) as usize;
    let step = duration / steps as f64;
    let every = (steps / MAX_TRAJECTORY_SAMPLES).max(1);

    let mut samples =
        vec![TrajectorySample { t: 0.0, lambda: protocol.lambda_i, fidelity: 1.0, energy: dec.ground_energy() }];
    let mut rk = Rk4::new(psi.len());
    for s in 0..steps {
        rk.step(&drive, &mut psi, s as f64 * step, step)?;
        let done = s + 1;
        if done % every == 0 || done == steps {
            let t = done as f64 * step;
            samples.push(sample(builder, protocol, &psi, t)?);
        }
    }
    Ok(Trajectory { samples, final_state: StateVector::new(psi)? })
}

/// Final ground-state fidelity of a linear quench without intermediate sampling.
pub fn ed_quench_fidelity<B: ModelBuilder + ?Sized>(
    builder: &B,
    lambda_i: f64,
    lambda_f: f64,
    tau0: f64,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) || !(tau0 > 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and tau0 > 0, got {dt}, {tau0}")));
    }
    let start = builder.build(lambda_i)?;
    let end = nondegenerate_ground(&builder.build(lambda_f)?)?;
    let mut psi = nondegenerate_ground(&start)?.ground_state().to_vec();
    let span = (lambda_f - lambda_i).abs() * tau0;
    if span > 0.0 {
        let drive = LinearDrive {
            drive: builder.driving()?,
            base: start,
            lambda_start: 0.0,
            rate: (lambda_f - lambda_i).signum() / tau0,
        };
        let steps = (span / dt).ceil().max(1.0) as usize;
        let step = span / steps as f64;
        let mut rk = Rk4::new(psi.len());
        for s in 0..steps {
            rk.step(&drive, &mut psi, s as f64 * step, step)?;
        }
    }
    Ok(inner(end.ground_state(), &psi).norm().min(1.0))
}

/// `P_t ~ M (1/M)^2 chi_F = chi_F / M`
pub fn total_transition_scale(subdivisions: usize, chi_f: f64) -> Result<f64> {
    if subdivisions == 0 || !(chi_f >= 0.0) {
        return Err(Error::InvalidArgument(format!("need M >= 1 and chi_F >= 0, got {subdivisions}, {chi_f}")));
    }
    Ok(chi_f / subdivisions as f64)
}

/// `P_s = [1 - (dt/tau0)^2 chi_F / 2]^(L^d_a)`
pub fn survival_probability(dt: f64, tau0: f64, chi_f: f64, length: f64, d_a: f64) -> Result<f64> {
    if !(tau0 > 0.0) || !(length >= 1.0) {
        return Err(Error::InvalidArgument(format!("need tau0 > 0 and L >= 1, got {tau0}, {length}")));
    }
    let ratio = dt / tau0;
    let base = 1.0 - 0.5 * ratio * ratio * chi_f;
    if base < 0.0 {
        return Err(Error::BaseNegative { base });
    }
    Ok(base.powf(length.powf(d_a)))
}

/// `kappa L^d_a`
pub fn duration_threshold(kappa: f64, length: f64, d_a: f64) -> Result<f64> {
    if !(kappa > 0.0) || !(length >= 1.0) {
        return Err(Error::InvalidArgument(format!("need kappa > 0 and L >= 1, got {kappa}, {length}")));
    }
    Ok(kappa * length.powf(d_a))
}

pub fn satisfies_adiabatic_condition(tau0: f64, threshold: f64) -> bool {
    tau0 >= ADIABATIC_MARGIN * threshold
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticityEstimate {
    pub transition: f64,
    pub survival: f64,
    pub tau0_threshold: f64,
}

impl AdiabaticityEstimate {
    /// Composes `M` perturbative steps of the protocol with `chi_F ~ L^d_a`.
    pub fn compose(protocol: &QuenchProtocol, chi_f: f64, length: f64, d_a: f64, kappa: f64) -> Result<Self> {
        Ok(Self {
            transition: total_transition_scale(protocol.subdivisions, chi_f)?,
            survival: survival_probability(protocol.step_time(), protocol.tau0, chi_f, length, d_a)?,
            tau0_threshold: duration_threshold(kappa, length, d_a)?,
        })
    }
}

/// Quench dynamics backend for duration-time searches.
#[derive(Clone, Copy)]
pub enum QuenchModel<'a> {
    /// Ising chain of `n` sites through its momentum modes.
    FreeFermion {
        n: usize,
    },
    Exact(&'a dyn ModelBuilder),
}

impl std::fmt::Debug for QuenchModel<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QuenchModel::FreeFermion { n } => write!(f, "FreeFermion {{ n: {n} }}"),
            QuenchModel::Exact(_) => f.write_str("Exact(..)"),
        }
    }
}

impl QuenchModel<'_> {
    pub fn default_dt(&self, lambda_i: f64, lambda_f: f64, tau0: f64) -> Result<f64> {
        match self {
            QuenchModel::FreeFermion { .. } => Ok(ising_ff::default_sweep_dt(tau0, lambda_i, lambda_f)),
            QuenchModel::Exact(b) => default_ed_dt(*b, lambda_i, lambda_f, tau0),
        }
    }

    /// Final ground-state fidelity; `dt = None` selects the default step.
    pub fn final_fidelity(&self, lambda_i: f64, lambda_f: f64, tau0: f64, dt: Option<f64>) -> Result<f64> {
        let dt = match dt {
            Some(dt) => dt,
            None => self.default_dt(lambda_i, lambda_f, tau0)?,
        };
        match self {
            QuenchModel::FreeFermion { n } => ising_ff::quench_ground_fidelity(*n, lambda_i, lambda_f, tau0, dt),
            QuenchModel::Exact(b) => ed_quench_fidelity(*b, lambda_i, lambda_f, tau0, dt),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauSearch {
    pub tau0: f64,
    pub fidelity: f64,
    pub evaluations: usize,
    /// The target was already met at the lower search bound.
    pub at_lower_bound: bool,
}

/// Smallest `tau0` (to 1% relative) whose final fidelity reaches `target`,
/// assuming fidelity is nondecreasing in `tau0`. The bracket grows by
/// doubling from the lower bound and is then bisected geometrically.
pub fn critical_tau_search(model: QuenchModel<'_>, lambda_i: f64, lambda_f: f64, target: f64) -> Result<TauSearch> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!("target fidelity must lie in [0, 1), got {target}")));
    }
    let (lower, upper) = TAU_SEARCH_BOUNDS;
    let mut evaluations = 0;
    let mut eval = |tau0: f64| -> Result<f64> {
        evaluations += 1;
        model.final_fidelity(lambda_i, lambda_f, tau0, None)
    };

    let f_lower = eval(lower)?;
    if f_lower >= target {
        return Ok(TauSearch { tau0: lower, fidelity: f_lower, evaluations, at_lower_bound: true });
    }
    let mut lo = lower;
    let mut hi = lower;
    let mut f_hi = f_lower;
    while f_hi < target {
        if hi >= upper {
            return Err(Error::NotBracketed { target, lower, upper });
        }
        lo = hi;
        hi = (2.0 * hi).min(upper);
        f_hi = eval(hi)?;
    }
    while hi / lo > 1.0 + TAU_SEARCH_REL_TOL {
        let mid = (lo * hi).sqrt();
        let f_mid = eval(mid)?;
        if f_mid >= target {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
        }
    }
    Ok(TauSearch { tau0: hi, fidelity: f_hi, evaluations, at_lower_bound: false })
}

/// Free-fermion duration-time searches for several chain lengths, ordered by size.
pub fn tau_star_scan(sizes: &[usize], lambda_i: f64, lambda_f: f64, target: f64) -> Result<Vec<(usize, TauSearch)>> {
    let mut out: Vec<(usize, TauSearch)> = sizes
        .par_iter()
        .map(|&n| critical_tau_search(QuenchModel::FreeFermion { n }, lambda_i, lambda_f, target).map(|s| (n, s)))
        .collect::<Result<_>>()?;
    out.sort_by_key(|(n, _)| *n);
    Ok(out)
}
