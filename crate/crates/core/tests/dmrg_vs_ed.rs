use phasescout::dmrg::{exact_diag_oracle, lanczos_ground, run_dmrg, DmrgConfig};
use phasescout::model::{build_mpo, ModelParams};

fn config(chi: usize) -> DmrgConfig {
    DmrgConfig { chi_max: chi, ..DmrgConfig::default() }
}

#[test]
fn energies_match_exact_diagonalization() {
    for (t, u, v) in [(1.0, 4.0, 0.0), (1.0, 2.0, 3.0), (1.0, 0.5, 4.0)] {
        let p = ModelParams::new(t, u, v, 2, 6).unwrap();
        let (e_ed, _) = exact_diag_oracle(&p, 6).unwrap();
        let (psi, report) = run_dmrg(&p, &config(64), 6, None).unwrap();
        assert!(report.converged, "{report:?}");
        assert!((report.final_energy - e_ed).abs() < 1e-8, "U={u} V={v}: {} vs {e_ed}", report.final_energy);
        assert!(report.final_energy >= e_ed - 1e-10);
        assert!((psi.norm_squared() - 1.0).abs() < 1e-10);
        let e_mpo = build_mpo(&p).unwrap().expectation(&psi).unwrap();
        assert!((e_mpo - report.final_energy).abs() < 1e-12);
    }
}

#[test]
fn classical_and_hardcore_limits() {
    let p = ModelParams::new(0.0, 10.0, 1.0, 3, 4).unwrap();
    let (_, r) = run_dmrg(&p, &config(16), 4, None).unwrap();
    assert!((r.final_energy - 3.0).abs() < 1e-9);
    let p = ModelParams::new(0.0, 1.0, 10.0, 3, 4).unwrap();
    let (_, r) = run_dmrg(&p, &config(16), 4, None).unwrap();
    assert!((r.final_energy - 2.0).abs() < 1e-9);
    let p = ModelParams::new(1.0, 0.0, 0.0, 1, 4).unwrap();
    let (_, r) = run_dmrg(&p, &config(16), 2, None).unwrap();
    assert!((r.final_energy + 5f64.sqrt()).abs() < 1e-9, "{}", r.final_energy);
}

#[test]
#[ignore]
fn timing_l32() {
    let p = ModelParams::new(1.0, 2.0, 1.0, 3, 32).unwrap();
    let t0 = std::time::Instant::now();
    let (_, r) = run_dmrg(&p, &config(50), 32, None).unwrap();
    eprintln!("{:?} {:?}", t0.elapsed(), r);
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let n = 50;
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &a + a.transpose();
    let exact = h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let r = lanczos_ground(
        |x, y| {
            let v = &h * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        },
        &start,
        50,
        1e-12,
    )
    .unwrap();
    assert!((r.energy - exact).abs() < 1e-9, "{} vs {exact}", r.energy);
}

#[test]
fn sweeps_without_mixer_are_monotone() {
    // chi 100 exceeds every bond rank (at most 3^4), so nothing is truncated
    let p = ModelParams::new(1.0, 3.0, 1.5, 2, 8).unwrap();
    let cfg = DmrgConfig { chi_max: 100, chi_start: 100, mixer_strength: 0.0, noise: 0.0, ..DmrgConfig::default() };
    let (psi, r) = run_dmrg(&p, &cfg, 8, None).unwrap();
    assert!(r.discarded_weight_max < 1e-20);
    for w in r.energy_per_half_sweep.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{:?}", r.energy_per_half_sweep);
    }
    let tol = cfg.energy_tol_for(8);
    for w in r.energy_per_sweep.windows(2) {
        assert!(w[1] <= w[0] + 10.0 * tol);
    }
    assert_eq!(psi.total_particles(), 8);
    let n = phasescout::model::operators::number(3);
    let total: f64 = (0..8).map(|i| psi.expect_local(i, n.view()).unwrap()).sum();
    assert!((total - 8.0).abs() < 1e-10);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let p = ModelParams::new(1.0, 2.5, 2.0, 3, 12).unwrap();
    let cfg = DmrgConfig { chi_max: 20, seed: 9, ..DmrgConfig::default() };
    let (a, ra) = run_dmrg(&p, &cfg, 12, None).unwrap();
    let (b, rb) = run_dmrg(&p, &cfg, 12, None).unwrap();
    assert_eq!(ra, rb);
    for bond in 1..12 {
        assert_eq!(a.schmidt_spectrum(bond).unwrap(), b.schmidt_spectrum(bond).unwrap());
    }
}

#[test]
fn unreachable_filling_is_rejected() {
    let p = ModelParams::new(1.0, 1.0, 0.0, 2, 4).unwrap();
    assert!(run_dmrg(&p, &config(8), 9, None).is_err());
    assert!(run_dmrg(&p, &config(8), -1, None).is_err());
}
