//! Training loop: softmax cross-entropy, Adam updates over shuffled
//! mini-batches, validation-loss plateau LR reduction, early stopping, and
//! multi-start restarts.

use rand::seq::SliceRandom;

use super::{Adam, Network, NnError, Scalar, Tensor};
use crate::session::Dataset;
use crate::space::Genome;

/// Learning-rate reduction when the validation loss plateaus.
#[derive(Debug, Clone)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig { factor: 0.1, patience: 10, min_lr: 1e-6 }
    }
}

/// Stop once the validation loss has not improved for `patience` epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopConfig {
    pub patience: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig { patience: 15 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub lr0: f64,
    pub batch_size: usize,
    pub plateau: PlateauConfig,
    pub early_stop: EarlyStopConfig,
    /// An epoch improves only if val loss drops below best − min_delta.
    pub min_delta: f64,
    pub multi_start: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 100,
            lr0: 1e-3,
            batch_size: 128,
            plateau: PlateauConfig::default(),
            early_stop: EarlyStopConfig::default(),
            min_delta: 1e-4,
            multi_start: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.max_epochs == 0 {
            return Err(NnError::BadConfig("max_epochs must be ≥ 1".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(NnError::BadConfig("lr0 must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::BadConfig("batch_size must be ≥ 1".into()));
        }
        if !(self.plateau.factor > 0.0 && self.plateau.factor < 1.0) {
            return Err(NnError::BadConfig("plateau factor must be in (0, 1)".into()));
        }
        if self.plateau.patience == 0 || self.early_stop.patience == 0 {
            return Err(NnError::BadConfig("patience must be ≥ 1".into()));
        }
        if !(self.plateau.min_lr >= 0.0) {
            return Err(NnError::BadConfig("min_lr must be ≥ 0".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(NnError::BadConfig("min_delta must be ≥ 0".into()));
        }
        if self.multi_start == 0 {
            return Err(NnError::BadConfig("multi_start must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One line of the per-epoch schedule log; `lr` is the rate the epoch's
/// updates actually used (a plateau reduction applies from the next epoch).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// A finished training run, with the network restored to the weights of the
/// minimum-validation-loss epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network<f32>,
    pub best_val_accuracy: f64,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub epoch_log: Vec<EpochRecord>,
}

/// Plateau/early-stop counter state, factored out of the epoch loop so the
/// counter semantics can be exercised against synthetic loss sequences.
#[derive(Debug, Clone)]
struct Schedule {
    lr: f64,
    best: f64,
    min_delta: f64,
    plateau: PlateauConfig,
    early_patience: usize,
    plateau_wait: usize,
    early_wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Observed {
    improved: bool,
    stop: bool,
}

impl Schedule {
    fn new(cfg: &TrainConfig) -> Self {
        Schedule {
            lr: cfg.lr0,
            best: f64::INFINITY,
            min_delta: cfg.min_delta,
            plateau: cfg.plateau.clone(),
            early_patience: cfg.early_stop.patience,
            plateau_wait: 0,
            early_wait: 0,
        }
    }

    /// Feeds one epoch's validation loss; may lower `self.lr` for the
    /// following epochs.
    fn observe(&mut self, val_loss: f64) -> Observed {
        if val_loss < self.best - self.min_delta {
            self.best = val_loss;
            self.plateau_wait = 0;
            self.early_wait = 0;
            return Observed { improved: true, stop: false };
        }
        self.plateau_wait += 1;
        self.early_wait += 1;
        if self.early_wait >= self.early_patience {
            return Observed { improved: false, stop: true };
        }
        if self.plateau_wait >= self.plateau.patience {
            self.lr = (self.lr * self.plateau.factor).max(self.plateau.min_lr);
            self.plateau_wait = 0;
        }
        Observed { improved: false, stop: false }
    }
}

/// Mean softmax cross-entropy over the batch and its logit gradient
/// `(softmax − onehot)/batch`, computed with max subtraction.
///
/// # Panics
/// If the label count differs from the batch or a label is out of range.
pub fn loss_softmax_xent<S: Scalar>(logits: &Tensor<S>, labels: &[u32]) -> (f64, Tensor<S>) {
    assert_eq!(logits.batch, labels.len(), "one label per batch row");
    let classes = logits.sample_elems();
    let inv_batch = S::of(1.0 / logits.batch as f64);
    let mut dlogits = Tensor::zeros(logits.batch, logits.len, logits.ch);
    let mut total = 0.0f64;
    for (bi, &label) in labels.iter().enumerate() {
        let label = label as usize;
        assert!(label < classes, "label {label} out of range for {classes} classes");
        let row = logits.row(bi);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut sum = S::zero();
        for &v in row {
            sum = sum + (v - max).exp();
        }
        let lse = sum.ln();
        total += (lse - (row[label] - max)).as_f64();
        let drow = &mut dlogits.data[bi * classes..(bi + 1) * classes];
        for (j, g) in drow.iter_mut().enumerate() {
            let p = (row[j] - max - lse).exp();
            let onehot = if j == label { S::one() } else { S::zero() };
            *g = (p - onehot) * inv_batch;
        }
    }
    (total / logits.batch as f64, dlogits)
}

/// Infer-mode loss and accuracy over a dataset, processed in batches.
pub fn evaluate<S: Scalar>(
    net: &Network<S>,
    ds: &Dataset,
    batch_size: usize,
) -> Result<(f64, f64), NnError> {
    if ds.is_empty() {
        return Err(NnError::EmptySplit("evaluation"));
    }
    let n = ds.len();
    let mut total_loss = 0.0f64;
    let mut correct = 0usize;
    let mut at = 0usize;
    while at < n {
        let end = (at + batch_size).min(n);
        let rows: Vec<&[f32]> = ds.samples[at..end].iter().map(|s| s.as_slice()).collect();
        let labels = &ds.labels[at..end];
        let logits = net.forward_infer(Tensor::from_samples(&rows))?;
        let (loss, _) = loss_softmax_xent(&logits, labels);
        total_loss += loss * (end - at) as f64;
        let classes = logits.sample_elems();
        for (bi, &label) in labels.iter().enumerate() {
            let row = logits.row(bi);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            debug_assert!(best < classes);
            if best as u32 == label {
                correct += 1;
            }
        }
        at = end;
    }
    Ok((total_loss / n as f64, correct as f64 / n as f64))
}

/// Trains one network: seeded shuffled mini-batches, Adam, plateau LR
/// reduction, early stopping, best weights kept from the
/// minimum-validation-loss epoch.
pub fn train(
    genome: &Genome,
    input_len: usize,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(NnError::EmptySplit("validation"));
    }
    if train_set.num_classes != genome.head.num_classes {
        return Err(NnError::BadConfig(format!(
            "dataset has {} classes, genome head expects {}",
            train_set.num_classes, genome.head.num_classes
        )));
    }

    let mut net = Network::<f32>::new(genome, input_len, cfg.seed)?;
    let sizes: Vec<usize> = net.trainable().iter().map(|a| a.len()).collect();
    let mut adam = Adam::<f32>::new(&sizes);
    let mut rng = crate::search::derive_rng(cfg.seed, 0x7472_6169); // "trai"
    let mut sched = Schedule::new(cfg);

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best_state = net.snapshot();
    let mut best_val_loss = f64::INFINITY;
    let mut best_val_accuracy = 0.0f64;
    let mut epoch_log = Vec::new();
    let mut epochs_run = 0usize;

    for epoch in 1..=cfg.max_epochs {
        epochs_run = epoch;
        let lr_used = sched.lr;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f32]> =
                chunk.iter().map(|&i| train_set.samples[i].as_slice()).collect();
            let labels: Vec<u32> = chunk.iter().map(|&i| train_set.labels[i]).collect();
            let (logits, caches) = net.forward_train(Tensor::from_samples(&rows), &mut rng)?;
            let (loss, dlogits) = loss_softmax_xent(&logits, &labels);
            loss_sum += loss * chunk.len() as f64;
            let grads = net.backward(caches, dlogits);
            let mut params = net.trainable_mut();
            adam.step(&mut params, &grads, lr_used);
        }
        let train_loss = loss_sum / n as f64;
        let (val_loss, val_acc) = evaluate(&net, val_set, cfg.batch_size)?;
        log::info!(
            "epoch={epoch} lr={lr_used:.3e} train_loss={train_loss:.6} \
             val_loss={val_loss:.6} val_acc={val_acc:.4}"
        );
        epoch_log.push(EpochRecord { epoch, lr: lr_used, train_loss, val_loss, val_acc });

        let seen = sched.observe(val_loss);
        if seen.improved {
            best_state = net.snapshot();
            best_val_loss = val_loss;
            best_val_accuracy = val_acc;
        }
        if seen.stop {
            break;
        }
    }

    net.restore(&best_state);
    Ok(TrainOutcome { net, best_val_accuracy, best_val_loss, epochs_run, epoch_log })
}

/// Runs `cfg.multi_start` independent trainings with seeds `seed + i` and
/// returns the best: highest validation accuracy, ties broken by lower
/// validation loss, then by lower restart index.
pub fn multi_start_train(
    genome: &Genome,
    input_len: usize,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    let mut best: Option<TrainOutcome> = None;
    for i in 0..cfg.multi_start {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = cfg.seed + i as u64;
        let outcome = train(genome, input_len, train_set, val_set, &run_cfg)?;
        let better = match &best {
            None => true,
            Some(b) => {
                outcome.best_val_accuracy > b.best_val_accuracy
                    || (outcome.best_val_accuracy == b.best_val_accuracy
                        && outcome.best_val_loss < b.best_val_loss)
            }
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("multi_start ≥ 1 was validated"))
}
