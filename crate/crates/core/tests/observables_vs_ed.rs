mod common;

use common::{dense_coefficients, ed_correlator, index_of, max_diff};
use phasescout::dmrg::{exact_diag_oracle, run_dmrg, DmrgConfig, SectorBasis, SectorHamiltonian};
use phasescout::model::operators::number;
use phasescout::model::{
    build_mpo, charge_gap, correlation_length, correlator_matrix, CorrelatorKind, Diagnostics, ModelParams,
};
use phasescout::tn::MpsState;

fn config(chi: usize) -> DmrgConfig {
    DmrgConfig { chi_max: chi, ..DmrgConfig::default() }
}

#[test]
fn observables_match_exact_diagonalization() {
    for (t, u, v) in [(1.0, 4.0, 0.0), (1.0, 2.0, 3.0), (1.0, 0.5, 4.0)] {
        let p = ModelParams::new(t, u, v, 2, 6).unwrap();
        let (_, gs) = exact_diag_oracle(&p, 6).unwrap();
        let (psi, report) = run_dmrg(&p, &config(64), 6, None).unwrap();
        assert!(report.converged);
        for i in 0..6 {
            let want = gs.expect_product(&[(i, number(3).view())]);
            assert!((psi.expect_local(i, number(3).view()).unwrap() - want).abs() < 1e-7);
        }
        for kind in [CorrelatorKind::Sf, CorrelatorKind::Dw, CorrelatorKind::Hi] {
            let got = correlator_matrix(&psi, kind).unwrap();
            let want = ed_correlator(&gs, 3, kind);
            assert!(max_diff(&got, &want) < 1e-7, "U={u} V={v} {kind:?}: {}", max_diff(&got, &want));
            assert!(max_diff(&got, &got.t().to_owned()) < 1e-10);
        }
        for bond in 1..6 {
            let want = gs.schmidt_values(bond);
            let got = psi.schmidt_spectrum(bond).unwrap();
            for (k, a) in got.values().iter().enumerate() {
                assert!((a - want[k]).abs() < 1e-6, "bond {bond} value {k}");
            }
        }
        let mean: f64 = Diagnostics::compute(&psi, 0).unwrap().observables.density_profile.iter().sum::<f64>() / 6.0;
        assert!((mean - 1.0).abs() < 1e-10);
    }
}

#[test]
fn string_correlator_at_l8_matches_exact_diagonalization() {
    let p = ModelParams::new(1.0, 5.0, 3.0, 3, 8).unwrap();
    let (_, gs) = exact_diag_oracle(&p, 8).unwrap();
    let (psi, report) = run_dmrg(&p, &config(128), 8, None).unwrap();
    assert!(report.converged);
    let got = correlator_matrix(&psi, CorrelatorKind::Hi).unwrap();
    let want = ed_correlator(&gs, 4, CorrelatorKind::Hi);
    assert!(max_diff(&got, &want) < 1e-7, "{}", max_diff(&got, &want));
}

/// Sector coefficients of an MPS, read off the dense contraction.
fn sector_vector(state: &MpsState, basis: &SectorBasis) -> Vec<f64> {
    let psi = dense_coefficients(state);
    basis.states.iter().map(|c| psi[index_of(c, state.d())]).collect()
}

#[test]
fn mpo_expectation_matches_dense_hamiltonian() {
    let p = ModelParams::new(0.7, 2.3, 1.1, 2, 5).unwrap();
    let mpo = build_mpo(&p).unwrap();
    let h = SectorHamiltonian::new(&p, 5).unwrap();
    let dense = h.dense();
    for seed in 0..20 {
        let s = MpsState::random_state(5, 3, 5, 3, seed).unwrap();
        let v = ndarray::Array1::from(sector_vector(&s, &h.basis));
        let want = v.dot(&dense.dot(&v));
        let got = mpo.expectation(&s).unwrap();
        assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
    }
    // matrix elements between basis states, including off-diagonal hops
    let small = ModelParams::new(0.7, 2.3, 1.1, 2, 4).unwrap();
    let mpo = build_mpo(&small).unwrap();
    let h = SectorHamiltonian::new(&small, 4).unwrap();
    for (r, bra) in h.basis.states.iter().enumerate() {
        for (c, ket) in h.basis.states.iter().enumerate() {
            let got = mpo.matrix_element(bra, ket);
            assert!((got - h.element(r, c)).abs() < 1e-12);
            assert!((got - mpo.matrix_element(ket, bra)).abs() < 1e-12);
        }
    }
}

#[test]
fn diagonal_elements_by_hand() {
    let p = ModelParams::new(1.3, 4.0, 0.6, 3, 4).unwrap();
    let mpo = build_mpo(&p).unwrap();
    assert!((mpo.matrix_element(&[1, 1, 1, 1], &[1, 1, 1, 1]) - 0.6 * 3.0).abs() < 1e-14);
    assert!((mpo.matrix_element(&[2, 0, 2, 0], &[2, 0, 2, 0]) - 8.0).abs() < 1e-14);
}

#[test]
fn charge_gap_limits_and_mott_phase() {
    // t = 0 with V: on an open chain the extra particle sits at an edge site
    // with one neighbor, so E(N+1) - E(N) = U + V and E_C = U - V + V = 9
    let p = ModelParams::new(0.0, 10.0, 1.0, 3, 4).unwrap();
    let g = charge_gap(&p, &config(16), 4).unwrap();
    assert!((g.energies[1] - 3.0).abs() < 1e-10);
    assert!((g.energies[2] - 14.0).abs() < 1e-10);
    assert!((g.energies[0] - 1.0).abs() < 1e-10);
    assert!((g.e_c - 9.0).abs() < 1e-10);

    // deep Mott insulator: cross-check against ED at L=6 first
    let p6 = ModelParams::new(1.0, 8.0, 0.0, 3, 6).unwrap();
    let ed: Vec<f64> = [5, 6, 7].iter().map(|&n| exact_diag_oracle(&p6, n).unwrap().0).collect();
    let g6 = charge_gap(&p6, &config(64), 6).unwrap();
    assert!((g6.e_c - (ed[0] + ed[2] - 2.0 * ed[1])).abs() < 1e-7);
    let p8 = ModelParams::new(1.0, 8.0, 0.0, 3, 8).unwrap();
    let g8 = charge_gap(&p8, &config(64), 8).unwrap();
    assert!(g8.converged());
    assert!(g8.e_c > 1.0, "{}", g8.e_c);
}

#[test]
fn correlation_length_follows_superfluid_decay_in_mott_phase() {
    let p = ModelParams::new(1.0, 8.0, 0.0, 3, 24).unwrap();
    let (psi, _) = run_dmrg(&p, &config(32), 24, None).unwrap();
    let r = correlation_length(&psi, 8).unwrap();
    assert!(r.mu2 > 0.0 && r.mu2 < 1.0);
    // log-linear fit of C_SF(8, 8 + r) at distances where the decay is
    // already exponential
    let c = correlator_matrix(&psi, CorrelatorKind::Sf).unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = (3..=8).map(|r| (r as f64, c[[8, 8 + r]].abs().ln())).unzip();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let xi_fit = -1.0 / slope;
    assert!((r.xi - xi_fit).abs() < 0.25 * xi_fit, "transfer {r:?}, fit {xi_fit}");
    assert!(r.xi < 2.5, "{r:?}");
}

#[test]
fn correlation_length_grows_with_bond_dimension_in_superfluid() {
    let p = ModelParams::new(1.0, 3.0, 0.1, 3, 32).unwrap();
    let xi: Vec<f64> = [20, 50]
        .iter()
        .map(|&chi| {
            let (psi, _) = run_dmrg(&p, &config(chi), 32, None).unwrap();
            correlation_length(&psi, 8).unwrap().xi
        })
        .collect();
    assert!(xi[1] > xi[0], "{xi:?}");
}
