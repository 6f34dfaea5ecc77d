use weakcal::autodiff::AdamConfig;
use weakcal::characterize::ce_loss;
use weakcal::rnn::{batch_loss, rnn_probabilities, train_rnn, GruModel, LossWeights, RnnConfig};
use weakcal::sdelearn::{train_sde, PackKind, SpamModel, SpamSource, TrainConfig};
use weakcal::sme::{generate_dataset, ConstrainedParams, Split};
use weakcal::{Dataset, DatasetMeta, PhysicalModel, TrajectoryRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_set() -> Dataset {
    let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
    let mut meta = DatasetMeta::new(m, 0.04, 0.004, vec![0.0, 0.4, 0.8, 1.2], vec![6; 4], 3);
    meta.store_truth = false;
    generate_dataset(&meta).unwrap()
}

#[test]
fn sde_training_runs_and_reports() {
    let d = small_set();
    let cfg = TrainConfig {
        adam: AdamConfig { lr: 0.02, ..AdamConfig::default() },
        batch_size: 64,
        epochs: 4,
        patience: 4,
        ensemble: 2,
        seed: 1,
        spam: SpamSource::Ideal,
        ..TrainConfig::default()
    };
    let r = train_sde(&d, PackKind::Constrained, &cfg).unwrap();
    assert_eq!(r.model, "sde");
    assert_eq!(r.members.len(), 2);
    assert!(r.best_val_loss.is_finite());
    assert!(r.best_val_loss <= r.init_val_loss + 1e-12);
    assert!(!r.epochs.is_empty() && r.epochs.len() <= 4);
    let v = r.constrained_view.unwrap();
    assert!(v.omega_r > 0.0 && v.gamma_d > 0.0 && (0.0..1.0).contains(&v.eta));
    // identical seeds reproduce the report
    let again = train_sde(&d, PackKind::Constrained, &cfg).unwrap();
    assert_eq!(again.best_raw, r.best_raw);
}

#[test]
fn black_box_weights_reduce_to_cross_entropy() {
    let d = small_set();
    let shots: Vec<&TrajectoryRecord> = d.shots.iter().filter(|s| !s.record.is_empty()).collect();
    let m = GruModel::init(5, &mut ChaCha8Rng::seed_from_u64(4));
    let spam = SpamModel::ideal();
    let w = LossWeights::BLACK_BOX;
    let parts = batch_loss(&m, &shots, &spam, &w);
    let pi = rnn_probabilities(&m, &spam, &shots);
    let y: Vec<i8> = shots.iter().map(|s| s.outcome).collect();
    let ce = ce_loss(&pi, &y);
    assert!((parts.total(&w) - ce).abs() < 1e-12, "{} vs {ce}", parts.total(&w));
    assert!(parts.posit >= 0.0 && parts.prep > 0.0 && parts.pred > 0.0);
}

#[test]
fn rnn_training_runs_and_reports() {
    let d = small_set();
    let cfg = RnnConfig { hidden: 6, batch_size: 32, epochs: 3, patience: 3, seed: 2, spam: SpamSource::Ideal, ..RnnConfig::default() };
    let (model, r) = train_rnn(&d, LossWeights::default(), &cfg).unwrap();
    assert_eq!(model.hidden, 6);
    assert_eq!(r.model, "rnn");
    assert_eq!(r.objective, "physics_inspired");
    assert!(r.best_val_ce.unwrap().is_finite());
    let test = d.split(Split::Test);
    let pi = rnn_probabilities(&model, r.spam.as_ref().unwrap(), &test);
    assert!(pi.iter().all(|p| (0.0..=1.0).contains(p)));
    let (again, _) = train_rnn(&d, LossWeights::default(), &cfg).unwrap();
    assert_eq!(again, model);
}

#[test]
fn zero_duration_shots_only_feed_tomography_by_default() {
    let m = PhysicalModel::constrained(ConstrainedParams::DEVICE).unwrap();
    let d = generate_dataset(&DatasetMeta::new(m, 0.04, 0.004, vec![0.0], vec![10], 5)).unwrap();
    let cfg = RnnConfig { hidden: 3, epochs: 1, ..RnnConfig::default() };
    assert!(matches!(train_rnn(&d, LossWeights::default(), &cfg), Err(weakcal::rnn::RnnError::MissingSplit)));
    let cfg = RnnConfig { zero_duration_in_loss: true, ..cfg };
    assert!(train_rnn(&d, LossWeights::default(), &cfg).is_ok());
}
