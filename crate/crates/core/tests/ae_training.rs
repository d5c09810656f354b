use phasescout::ae::{checkpoint, mean_loss, train, AeModel, ArchConfig, TensorBuffer, TrainConfig};
use phasescout::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Normalized exponentially decaying spectrum, zero-padded to `len`.
fn spectrum(len: usize, kept: usize, decay: f64) -> TensorBuffer {
    let mut v: Vec<f64> = (0..len).map(|k| if k < kept { (-(k as f64) / decay).exp() } else { 0.0 }).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    TensorBuffer::new(vec![1, len], v).unwrap()
}

#[test]
fn single_sample_overfit() {
    let x = spectrum(100, 30, 4.0);
    let model = AeModel::standard(vec![1, 100], &ArchConfig::default(), 0).unwrap();
    let cfg = TrainConfig { epochs: 500, batch_size: 1, ..TrainConfig::default() };
    let out = train(&model, &[x.clone()], &cfg).unwrap();
    assert!(!out.diverged);
    let first_below = out.loss_curve.iter().position(|&l| l < 1e-4);
    println!("initial {:.3e}, best {:.3e} at epoch {}, first < 1e-4 at {first_below:?}", out.loss_curve[0], out.best_loss(), out.best_epoch);
    assert!(first_below.is_some_and(|e| e <= 500));
    assert!((out.model.loss(&x).unwrap() - out.best_loss()).abs() < 1e-15);
    assert!(out.best_loss() < 0.05 * out.loss_curve[0]);
}

fn random_set(n: usize, len: usize, seed: u64) -> Vec<TensorBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| TensorBuffer::new(vec![1, len], (0..len).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()).collect()
}

#[test]
fn loss_curve_is_finite_on_random_samples() {
    let data = random_set(64, 32, 1);
    let model = AeModel::standard(vec![1, 32], &ArchConfig::default(), 1).unwrap();
    let cfg = TrainConfig { epochs: 50, ..TrainConfig::default() };
    let out = train(&model, &data, &cfg).unwrap();
    assert_eq!(out.loss_curve.len(), 51);
    assert!(out.loss_curve.iter().all(|l| l.is_finite()));
    assert!(!out.diverged);
    assert!(out.best_loss() <= out.loss_curve[0]);
}

#[test]
fn same_seed_gives_identical_curves_regardless_of_sample_order() {
    let data = random_set(20, 16, 2);
    let model = AeModel::standard(vec![1, 16], &ArchConfig { filters: 8, ..ArchConfig::default() }, 4).unwrap();
    let cfg = TrainConfig { epochs: 15, batch_size: 4, seed: 9, ..TrainConfig::default() };
    let a = train(&model, &data, &cfg).unwrap();
    let b = train(&model, &data, &cfg).unwrap();
    assert_eq!(a.loss_curve, b.loss_curve);
    assert_eq!(a.model.params(), b.model.params());

    let mut reversed = data.clone();
    reversed.reverse();
    let c = train(&model, &reversed, &cfg).unwrap();
    assert_eq!(a.loss_curve, c.loss_curve);
    assert_eq!(a.model.params(), c.model.params());

    let d = train(&model, &data, &TrainConfig { seed: 10, ..cfg.clone() }).unwrap();
    assert_ne!(a.loss_curve, d.loss_curve);
}

#[test]
fn divergence_sets_the_abort_flag() {
    let data = random_set(8, 16, 3);
    let model = AeModel::standard(vec![1, 16], &ArchConfig { filters: 8, ..ArchConfig::default() }, 0).unwrap();
    let cfg = TrainConfig { epochs: 50, learning_rate: 50.0, ..TrainConfig::default() };
    let out = train(&model, &data, &cfg).unwrap();
    assert!(out.diverged);
    assert!(out.loss_curve.len() < 51);
    let initial = out.loss_curve[0];
    assert!(out.loss_curve.last().is_some_and(|&l| !(l <= 10.0 * initial)));
    assert!(out.best_loss() <= initial);
}

#[test]
fn refuses_bad_inputs() {
    let model = AeModel::standard(vec![1, 16], &ArchConfig { filters: 4, ..ArchConfig::default() }, 0).unwrap();
    assert!(matches!(train(&model, &[], &TrainConfig::default()), Err(Error::Domain(_))));
    let wrong = TensorBuffer::zeros(vec![1, 8]).unwrap();
    assert!(matches!(train(&model, &[wrong], &TrainConfig::default()), Err(Error::Shape(_))));
    let x = TensorBuffer::zeros(vec![1, 16]).unwrap();
    let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
    assert!(matches!(train(&model, &[x], &cfg), Err(Error::Config(_))));
}

#[test]
fn checkpoint_round_trip_preserves_losses() {
    let data = random_set(6, 16, 4);
    let model = AeModel::standard(vec![1, 16], &ArchConfig { filters: 6, ..ArchConfig::default() }, 2).unwrap();
    let out = train(&model, &data, &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ae");
    checkpoint::save(&out.model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back, out.model);
    assert_eq!(mean_loss(&back, &data).unwrap().to_bits(), mean_loss(&out.model, &data).unwrap().to_bits());
    std::fs::write(&path, b"AEMODEL2").unwrap();
    assert!(matches!(checkpoint::load(&path), Err(Error::Format(_))));
}
