use adiabatic_lab::ed_oracle::{
    build_ising, build_lmg, chi_f_finite_difference, chi_f_perturbative, ising_driving, lmg_driving, SpinModelSpec,
};
use adiabatic_lab::ising_ff;
use adiabatic_lab::numkernel::{eigh, HermitianMatrix};
use adiabatic_lab::C64;

const SIZES: [usize; 4] = [4, 6, 8, 10];
const FIELDS: [f64; 6] = [0.25, 0.5, 0.9, 1.0, 1.1, 2.0];

#[test]
fn exact_diagonalization_matches_free_fermions() {
    for n in SIZES {
        let drive = ising_driving(n).unwrap();
        for h in FIELDS {
            let dec = eigh(&build_ising(n, h).unwrap()).unwrap();
            let ed = chi_f_perturbative(&dec, &drive).unwrap();
            let ff = ising_ff::chi_f(n, h).unwrap();
            assert!(((ed - ff) / ff).abs() < 1e-8, "N={n} h={h}: {ed} vs {ff}");
        }
    }
}

// -(1/N) sum_{i<j} (X_i X_j + g Y_i Y_j) - h sum_i Z_i on the full 2^N space,
// built from Pauli strings. Bit i set means spin i is down.
fn lmg_full_space(n: usize, h: f64, gamma: f64) -> HermitianMatrix {
    let dim = 1usize << n;
    let mut e = vec![C64::new(0.0, 0.0); dim * dim];
    for s in 0..dim {
        let z: f64 = (0..n).map(|i| if s >> i & 1 == 1 { -1.0 } else { 1.0 }).sum();
        e[s * dim + s] += -h * z;
        for i in 0..n {
            for j in i + 1..n {
                let t = s ^ (1 << i) ^ (1 << j);
                let same = (s >> i & 1) == (s >> j & 1);
                let yy = if same { -1.0 } else { 1.0 };
                e[t * dim + s] += -(1.0 + gamma * yy) / n as f64;
            }
        }
    }
    HermitianMatrix::new(dim, e).unwrap()
}

fn assert_subspectrum(sector: &[f64], full: &[f64], tol: f64) {
    for &x in sector {
        let nearest = full.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
        assert!(nearest < tol, "sector level {x} missing from full spectrum");
    }
}

#[test]
fn lmg_sector_matches_full_space() {
    for n in [2usize, 3, 4, 5, 6, 8, 10] {
        for (h, gamma) in [(0.5, 0.0), (1.0, 0.0), (2.0, 0.0), (0.7, 0.4)] {
            let sector = eigh(&build_lmg(n, h, gamma).unwrap()).unwrap();
            let full = eigh(&lmg_full_space(n, h, gamma)).unwrap();
            assert_eq!(sector.dim(), n + 1);
            assert_subspectrum(sector.energies(), full.energies(), 1e-9);
            assert!((sector.ground_energy() - full.ground_energy()).abs() < 1e-9, "N={n} h={h}");
        }
    }
}

#[test]
fn lmg_two_sites_is_triplet_plus_singlet() {
    let gamma = 0.3;
    let h = 0.8;
    let sector = eigh(&build_lmg(2, h, gamma).unwrap()).unwrap();
    let full = eigh(&lmg_full_space(2, h, gamma)).unwrap();
    let mut expected: Vec<f64> = sector.energies().to_vec();
    expected.push((1.0 + gamma) / 2.0);
    expected.sort_by(f64::total_cmp);
    for (a, b) in expected.iter().zip(full.energies()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn lmg_driving_is_field_derivative() {
    let n = 12;
    let d = lmg_driving(n).unwrap();
    let a = build_lmg(n, 0.9, 0.2).unwrap();
    let b = build_lmg(n, 1.4, 0.2).unwrap();
    let diff = b.scaled_add(-1.0, &a).unwrap().scale(1.0 / 0.5);
    for (x, y) in diff.entries().iter().zip(d.entries()) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn finite_difference_error_is_linear_in_step() {
    let spec = SpinModelSpec::ising(6, 0.7).unwrap();
    let exact = chi_f_perturbative(&eigh(&spec.hamiltonian().unwrap()).unwrap(), &ising_driving(6).unwrap()).unwrap();
    let ladder = [4e-3, 2e-3, 1e-3, 5e-4];
    let errs: Vec<f64> =
        ladder.iter().map(|&d| (chi_f_finite_difference(&spec, 0.7, d).unwrap() - exact).abs()).collect();
    let c = errs[0] / ladder[0];
    for (e, d) in errs.iter().zip(ladder) {
        assert!(*e <= 2.0 * c * d + 1e-9, "error {e} at step {d} exceeds {c} * step");
    }
}
