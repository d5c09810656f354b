use std::fs;
use std::sync::OnceLock;

use phasescout::ae::{ArchConfig, ShortcutMode, TrainConfig};
use phasescout::dmrg::{exact_diag_oracle, DmrgConfig};
use phasescout::model::ModelParams;
use phasescout::pipeline::export::{fmt_f64, labels_table, loss_map_table, Table};
use phasescout::pipeline::{
    discover_phases, extract_input, propose_region, CellMask, DiscoverConfig, GroundStateCache, GroundStateRecord,
    InputKind, LossMap, PhaseLabeling, StopReason, SweepGrid,
};
use phasescout::Error;
use proptest::prelude::*;

fn small_grid(n: usize, length: usize) -> SweepGrid {
    SweepGrid {
        u_range: (0.5, 4.5),
        v_range: (0.0, 4.0),
        n_u: n,
        n_v: n,
        model: ModelParams::new(1.0, 0.0, 0.0, 3, length).unwrap(),
        dmrg: DmrgConfig { chi_max: 30, ..DmrgConfig::default() },
        particles: None,
    }
}

/// Records of the 4x4, L=6 grid, computed once per test binary.
fn small_records() -> &'static (SweepGrid, Vec<GroundStateRecord>) {
    static CELLS: OnceLock<(SweepGrid, Vec<GroundStateRecord>)> = OnceLock::new();
    CELLS.get_or_init(|| {
        let grid = small_grid(4, 6);
        let recs = grid.cells().into_iter().map(|c| GroundStateRecord::compute(&grid, c).unwrap()).collect();
        (grid, recs)
    })
}

fn tiny_discover(max_iterations: usize) -> DiscoverConfig {
    DiscoverConfig {
        kind: InputKind::Es,
        arch: ArchConfig { filters: 4, kernel: 3, shortcuts: ShortcutMode::Inner },
        train: TrainConfig { epochs: 30, batch_size: 4, learning_rate: 3e-3, ..TrainConfig::default() },
        model_seed: 11,
        max_iterations,
        first_block: 2,
        min_region_cells: 2,
    }
}

#[test]
fn record_round_trip_and_checksum() {
    let (_, recs) = small_records();
    let r = &recs[5];
    let bytes = r.to_bytes().unwrap();
    let back = GroundStateRecord::from_bytes(&bytes).unwrap();
    assert_eq!(&back, r);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    for pos in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        let mut bad = bytes.clone();
        bad[pos] ^= 0x20;
        assert!(GroundStateRecord::from_bytes(&bad).is_err(), "flip at {pos} accepted");
    }
    assert!(GroundStateRecord::from_bytes(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn sweep_energies_match_exact_diagonalization() {
    let (grid, recs) = small_records();
    for r in recs.iter().step_by(3) {
        let (e_ed, ed) = exact_diag_oracle(&grid.params(r.cell), 6).unwrap();
        assert!(r.converged(), "{:?}", r.cell);
        assert!((r.energy - e_ed).abs() < 1e-8, "{:?}: {} vs {e_ed}", r.cell, r.energy);
        let sv = ed.schmidt_values(3);
        let ours = r.central_spectrum().unwrap();
        for (k, s) in sv.iter().take(6).enumerate() {
            assert!((ours[k] - s).abs() < 1e-6, "{:?} Schmidt {k}: {} vs {s}", r.cell, ours[k]);
        }
        let n: f64 = r.density_profile.iter().sum();
        assert!((n - 6.0).abs() < 1e-9);
    }
}

#[test]
fn cache_sweep_is_idempotent_deterministic_and_self_healing() {
    let dir = tempfile::tempdir().unwrap();
    let cache = GroundStateCache::open(dir.path()).unwrap();
    let grid = small_grid(3, 6);
    assert!(matches!(cache.load_grid(&grid), Err(Error::RecordIncomplete(_))));
    let first = cache.sweep(&grid, None).unwrap();
    assert_eq!((first.computed, first.cached), (9, 0));
    let snapshot: Vec<Vec<u8>> = grid.cells().iter().map(|&c| fs::read(cache.record_path(c)).unwrap()).collect();

    let again = cache.sweep(&grid, None).unwrap();
    assert_eq!((again.computed, again.cached), (0, 9));

    // corrupted and stale records are recomputed, bit-identically
    let victim = cache.record_path((1, 2));
    let mut bytes = fs::read(&victim).unwrap();
    let mid = bytes.len() / 3;
    bytes[mid] ^= 1;
    fs::write(&victim, &bytes).unwrap();
    let mut shifted = grid.clone();
    shifted.dmrg.seed += 1;
    assert_eq!(cache.missing_cells(&shifted).len(), 9);
    let healed = cache.sweep(&grid, None).unwrap();
    assert_eq!(healed.computed, 1);
    for (c, old) in grid.cells().iter().zip(&snapshot) {
        assert_eq!(&fs::read(cache.record_path(*c)).unwrap(), old, "{c:?}");
    }

    let manifest = cache.read_manifest().unwrap();
    assert_eq!(manifest.len(), 9);
    assert!(manifest.iter().all(|(_, sha, _)| sha.len() == 64));
    assert_eq!(cache.load_grid(&grid).unwrap().len(), 9);
}

/// `t = 0`, `V < U/2`: the unique ground state is one boson per site.
fn mott_product_record() -> GroundStateRecord {
    let mut grid = small_grid(2, 8);
    grid.model.t = 0.0;
    grid.u_range = (2.0, 3.0);
    grid.v_range = (0.0, 0.5);
    let r = GroundStateRecord::compute(&grid, (0, 0)).unwrap();
    assert!(r.energy.abs() < 1e-10, "{}", r.energy);
    r
}

#[test]
fn extracted_inputs_of_a_product_state() {
    let r = mott_product_record();
    let es = extract_input(&r, InputKind::Es).unwrap();
    assert_eq!(es.shape(), &[1, 32]);
    assert!((es.data()[0] - 1.0).abs() < 1e-12);
    assert!(es.data()[1..].iter().all(|&x| x.abs() < 1e-12));

    let th = extract_input(&r, InputKind::Theta).unwrap();
    assert_eq!(th.shape(), &[4, 32, 32]);
    let plane = 32 * 32;
    for (i, &x) in th.data().iter().enumerate() {
        let want = if i == plane { 1.0 } else { 0.0 };
        assert!((x.abs() - want).abs() < 1e-12, "entry {i}: {x}");
    }

    let csf = extract_input(&r, InputKind::Csf).unwrap();
    assert_eq!(csf.shape(), &[8, 8]);
    assert_eq!(InputKind::Csf.shape(50, 4, 32), vec![32, 32]);
    assert_eq!(InputKind::Es.shape(50, 4, 32), vec![1, 52]);
    assert_eq!(InputKind::Theta.shape(50, 4, 32), vec![4, 52, 52]);
    // C_SF of a Mott product state is the identity: <b_i^+ b_i> = 1
    for i in 0..8 {
        for j in 0..8 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((csf.data()[i * 8 + j] - want).abs() < 1e-12);
        }
    }
}

fn loss_map(n: usize, losses: Vec<f64>, train: &CellMask) -> LossMap {
    LossMap { n_u: n, n_v: n, losses, train_region: train.clone(), kind: InputKind::Es, checkpoint: None }
}

#[test]
fn plateau_proposal_is_its_interior() {
    let n = 8;
    let train = CellMask::rect(n, n, (0, 2), (0, 2));
    let mut losses = vec![1.0; n * n];
    for iu in 3..8 {
        for iv in 3..8 {
            losses[iu * n + iv] = 10.0;
        }
    }
    let map = loss_map(n, losses, &train);
    let mut lab = PhaseLabeling::new(n, n);
    let thr = map.threshold().unwrap();
    assert_eq!(thr, 1.0);
    lab.assign(&map, thr, 1, 1);
    let p = propose_region(&map, &lab, thr, 4);
    assert_eq!(p.component, CellMask::rect(n, n, (3, 7), (3, 7)));
    assert_eq!(p.region, CellMask::rect(n, n, (4, 6), (4, 6)));
    assert!(p.score.is_infinite());
}

#[test]
fn lower_variance_component_wins() {
    let n = 7;
    let train = CellMask::rect(n, n, (0, 0), (0, 0));
    let mut losses = vec![0.0; n * n];
    // two 2x3 blocks separated by a low column
    for iu in 2..4 {
        for iv in 0..3 {
            losses[iu * n + iv] = 5.0 + (iu + iv) as f64;
        }
        for iv in 4..7 {
            losses[iu * n + iv] = 5.0 + 0.01 * (iu + iv) as f64;
        }
    }
    let map = loss_map(n, losses, &train);
    let mut lab = PhaseLabeling::new(n, n);
    lab.assign(&map, 1.0, 1, 1);
    let p = propose_region(&map, &lab, 1.0, 4);
    assert!(p.component.get((2, 4)) && !p.component.get((2, 0)));
    // a 2x3 box only shrinks along V
    assert_eq!(p.region.cells(), vec![(2, 5), (3, 5)]);

    // below the size floor nothing qualifies
    assert!(propose_region(&map, &lab, 1.0, 7).is_empty());
}

#[test]
fn nothing_anomalous_gives_an_empty_proposal() {
    let n = 5;
    let train = CellMask::rect(n, n, (0, 1), (0, 1));
    let mut losses = vec![1.0; n * n];
    for (k, c) in train.cells().into_iter().enumerate() {
        losses[c.0 * n + c.1] = 0.5 * (k + 1) as f64;
    }
    let map = loss_map(n, losses, &train);
    let mut lab = PhaseLabeling::new(n, n);
    let thr = map.threshold().unwrap();
    lab.assign(&map, thr, 1, 1);
    assert_eq!(lab.unassigned_count(), 0);
    assert!(propose_region(&map, &lab, thr, 1).is_empty());
}

proptest! {
    #[test]
    fn labeling_is_sound(losses in proptest::collection::vec(0.0f64..10.0, 36), thr in 0.0f64..10.0, seed_cells in proptest::collection::vec((0usize..6, 0usize..6), 1..5)) {
        let train = CellMask::from_cells(6, 6, &seed_cells);
        let map = loss_map(6, losses.clone(), &train);
        let mut lab = PhaseLabeling::new(6, 6);
        let fresh = lab.assign(&map, thr, 1, 1);
        for i in 0..36 {
            let labeled = lab.labels[i].is_some();
            prop_assert_eq!(labeled, train.bits[i] || losses[i] <= thr);
        }
        prop_assert_eq!(fresh + lab.unassigned_count(), 36);
        // a second pass never relabels
        let before = lab.clone();
        let map2 = loss_map(6, vec![0.0; 36], &CellMask::empty(6, 6));
        lab.assign(&map2, 0.5, 2, 2);
        for i in 0..36 {
            if before.labels[i].is_some() {
                prop_assert_eq!(lab.labels[i], before.labels[i]);
                prop_assert_eq!(lab.provenance[i], Some(1));
            }
        }
        let p = propose_region(&map, &before, thr, 1);
        for c in p.region.cells() {
            prop_assert!(p.component.get(c));
            prop_assert!(before.label(c).is_none() && map.loss(c) > thr);
        }
    }
}

#[test]
fn discovery_iterations_shrink_the_residual() {
    let (grid, recs) = small_records();
    let one = discover_phases(recs, grid.n_u, grid.n_v, &tiny_discover(1), |_| {}).unwrap();
    assert_eq!(one.iterations.len(), 1);
    let it = &one.iterations[0];
    assert_eq!(it.region, CellMask::rect(4, 4, (0, 1), (0, 1)));
    for c in grid.cells() {
        match one.labeling.label(c) {
            Some(l) => {
                assert_eq!(l, 1);
                assert!(it.region.get(c) || it.loss_map.loss(c) <= it.threshold);
            }
            None => assert!(it.loss_map.loss(c) > it.threshold),
        }
    }
    assert!(matches!(one.stop, StopReason::MaxIterations | StopReason::Exhausted));

    let mut seen = Vec::new();
    let many = discover_phases(recs, grid.n_u, grid.n_v, &tiny_discover(4), |s| seen.push(s.newly_labeled)).unwrap();
    assert_eq!(seen.len(), many.iterations.len());
    assert!(seen.iter().all(|&k| k >= 1));
    assert_eq!(seen.iter().sum::<usize>() + many.labeling.unassigned_count(), 16);
    // the first iteration is the same computation as before
    assert_eq!(many.iterations[0].loss_map.losses, it.loss_map.losses);
    for (k, step) in many.iterations.iter().enumerate() {
        for c in step.region.cells() {
            assert_eq!(many.labeling.iteration(c), Some(k + 1));
        }
    }
}

#[test]
fn loss_map_csv_round_trips_exactly() {
    let (grid, recs) = small_records();
    let d = discover_phases(recs, grid.n_u, grid.n_v, &tiny_discover(1), |_| {}).unwrap();
    let it = &d.iterations[0];
    let t = loss_map_table(grid, &it.loss_map, &d.labeling);
    let text = t.render();
    let back = Table::parse(&text).unwrap();
    assert_eq!(back.render(), text);
    let col = back.column("loss").unwrap();
    for (row, &x) in back.rows.iter().zip(&it.loss_map.losses) {
        assert_eq!(row[col].parse::<f64>().unwrap().to_bits(), x.to_bits());
        assert_eq!(row[col], fmt_f64(x));
    }
    let labels = labels_table(grid, &d.labeling);
    assert_eq!(labels.rows.len(), 16);
    assert_eq!(labels.header, ["iu", "iv", "U", "V", "label", "iteration"]);
}
