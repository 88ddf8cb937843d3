use adiabatic_lab::ed_oracle::{ground_fidelity, IsingRing, ModelBuilder, SpinModelSpec};
use adiabatic_lab::ising_ff::{self, default_sweep_dt, quench_ground_fidelity};
use adiabatic_lab::numkernel::eigh;
use adiabatic_lab::quench_lab::{
    critical_tau_search, default_ed_dt, ed_quench_fidelity, evolve_protocol, tau_star_scan, QuenchModel, QuenchProtocol,
};

#[test]
fn free_fermions_agree_with_exact_dynamics() {
    let ring = IsingRing::periodic(8);
    for tau0 in [0.1, 1.0, 10.0] {
        let ff = QuenchModel::FreeFermion { n: 8 }.final_fidelity(3.0, 0.5, tau0, None).unwrap();
        let ed = QuenchModel::Exact(&ring).final_fidelity(3.0, 0.5, tau0, None).unwrap();
        assert!((ff - ed).abs() < 1e-4, "tau0={tau0}: {ff} vs {ed}");
    }
}

#[test]
fn gapped_sweep_is_adiabatic_at_long_duration() {
    let spec = SpinModelSpec::ising(8, 3.0).unwrap();
    let p = QuenchProtocol::new(3.0, 2.0, 50.0, 1).unwrap();
    let dt = default_ed_dt(&spec, 3.0, 2.0, 50.0).unwrap();
    let traj = evolve_protocol(&spec, &p, dt).unwrap();
    assert!(traj.final_fidelity() > 0.99, "{}", traj.final_fidelity());
    assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    assert!(traj.samples.iter().all(|s| (0.0..=1.0).contains(&s.fidelity)));
}

#[test]
fn sudden_sweep_reproduces_ground_state_overlap() {
    let spec = SpinModelSpec::ising(8, 3.0).unwrap();
    let p = QuenchProtocol::new(3.0, 2.0, 0.01, 1).unwrap();
    let dt = default_ed_dt(&spec, 3.0, 2.0, 0.01).unwrap();
    let f = evolve_protocol(&spec, &p, dt).unwrap().final_fidelity();
    let a = eigh(&spec.build(3.0).unwrap()).unwrap();
    let b = eigh(&spec.build(2.0).unwrap()).unwrap();
    let sudden = ground_fidelity(&a, &b).unwrap();
    assert!((f - sudden).abs() < 1e-3, "{f} vs {sudden}");
}

#[test]
fn halving_dt_changes_fidelity_by_less_than_tolerance() {
    let spec = SpinModelSpec::ising(6, 3.0).unwrap();
    for tau0 in [0.5, 5.0] {
        let dt = default_ed_dt(&spec, 3.0, 0.5, tau0).unwrap();
        let coarse = ed_quench_fidelity(&spec, 3.0, 0.5, tau0, dt).unwrap();
        let fine = ed_quench_fidelity(&spec, 3.0, 0.5, tau0, 0.5 * dt).unwrap();
        assert!((coarse - fine).abs() < 1e-6, "ED tau0={tau0}");
    }
    for tau0 in [1.0, 30.0] {
        let dt = default_sweep_dt(tau0, 3.0, 0.0);
        let coarse = quench_ground_fidelity(32, 3.0, 0.0, tau0, dt).unwrap();
        let fine = quench_ground_fidelity(32, 3.0, 0.0, tau0, 0.5 * dt).unwrap();
        assert!((coarse - fine).abs() < 1e-6, "free fermion tau0={tau0}");
    }
}

#[test]
fn fidelity_grows_with_duration() {
    let mut last = 0.0;
    for tau0 in [0.1, 1.0, 10.0, 100.0, 1e4] {
        let f = QuenchModel::FreeFermion { n: 32 }.final_fidelity(3.0, 0.0, tau0, None).unwrap();
        assert!(f >= last - 1e-9, "tau0={tau0}: {f} < {last}");
        last = f;
    }
    assert!(last > 0.999);
}

#[test]
#[ignore = "several minutes of integration at the default step"]
fn adiabatic_limit_at_very_long_duration() {
    let f = QuenchModel::FreeFermion { n: 32 }.final_fidelity(3.0, 0.0, 1e6, None).unwrap();
    assert!(f > 0.999);
}

#[test]
fn critical_duration_time_grows_with_size() {
    let scan = tau_star_scan(&[16, 32, 64], 3.0, 0.0, 0.9).unwrap();
    let taus: Vec<f64> = scan.iter().map(|(_, s)| s.tau0).collect();
    assert!(taus.windows(2).all(|w| w[1] >= w[0]), "{taus:?}");
    let ratio = taus[2] / taus[1];
    assert!((ratio / 4.0 - 1.0).abs() < 0.25, "ratio {ratio}");
}

#[test]
fn gapped_duration_time_ratio_is_bounded() {
    let a = critical_tau_search(QuenchModel::FreeFermion { n: 32 }, 3.0, 2.0, 0.9).unwrap();
    let b = critical_tau_search(QuenchModel::FreeFermion { n: 64 }, 3.0, 2.0, 0.9).unwrap();
    assert!(b.tau0 / a.tau0 <= 2.2, "{} / {}", b.tau0, a.tau0);
}

#[test]
fn landau_zener_for_slow_modes() {
    let n = 128;
    for j in [1usize, 2] {
        let k = (2 * j - 1) as f64 * std::f64::consts::PI / n as f64;
        let tau0 = 0.5 / (k * k);
        let p = ising_ff::lz_mode_sweep(k, 3.0, 0.0, tau0, default_sweep_dt(tau0, 3.0, 0.0)).unwrap();
        let lz = ising_ff::landau_zener_probability(k, tau0);
        assert!((p / lz - 1.0).abs() < 0.1, "k={k}: {p} vs {lz}");
    }
}
