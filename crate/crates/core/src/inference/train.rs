//! Mini-batch momentum SGD over the masked multi-task loss.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::dataset::{Dataset, DatasetRecord};
use crate::inference::loss::{loss_value, total_loss, Labels, LossBreakdown, LossWeights};
use crate::inference::model::{ModelBundle, Normalization, TargetScale};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant,
    /// Multiply the step by `factor` every `every` epochs.
    Step { every: usize, factor: f64 },
    /// Cosine decay from the base step to `floor` times it at the last epoch.
    Cosine { floor: f64 },
}

impl Schedule {
    pub fn rate(&self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::Step { every, factor } => base * factor.powi((epoch / every.max(1)) as i32),
            Schedule::Cosine { floor } => {
                let progress = if epochs > 1 {
                    epoch as f64 / (epochs - 1) as f64
                } else {
                    0.0
                };
                base * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub loss_weights: LossWeights,
    pub learning_rate: f64,
    pub momentum: f64,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_layers: Vec<usize>,
    /// Leading fraction of each cell's windows used for training.
    pub train_fraction: f64,
    /// Augmentation policies whose copies join the training set.
    pub train_augmentations: Vec<String>,
    pub contact_threshold: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            loss_weights: LossWeights::default(),
            learning_rate: 1e-3,
            momentum: 0.9,
            schedule: Schedule::Constant,
            batch_size: 32,
            epochs: 200,
            hidden_layers: vec![128, 64, 32],
            train_fraction: 2.0 / 3.0,
            train_augmentations: Vec::new(),
            contact_threshold: 0.5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_weights.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("training.learning_rate", format!("must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("training.momentum", format!("must lie in [0, 1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("training.batch_size", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("training.epochs", "must be >= 1"));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::config("training.hidden_layers", "need at least one layer, all widths >= 1"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(
                "training.train_fraction",
                format!("must lie in (0, 1), got {}", self.train_fraction),
            ));
        }
        if !(self.contact_threshold > 0.0 && self.contact_threshold < 1.0) {
            return Err(Error::config("training.contact_threshold", "must lie in (0, 1)"));
        }
        match self.schedule {
            Schedule::Step { every, factor } if every == 0 || !(factor > 0.0) => {
                Err(Error::config("training.schedule", "step schedule needs every >= 1 and factor > 0"))
            }
            Schedule::Cosine { floor } if !(0.0..=1.0).contains(&floor) => {
                Err(Error::config("training.schedule.floor", "must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Temporal split: within each cell, windows before the cutoff train and the
/// rest test. Augmented copies follow their source window.
pub fn temporal_split(records: &[DatasetRecord], train_fraction: f64) -> Vec<Split> {
    let mut windows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for r in records {
        windows.entry(r.cell).or_default().push(r.window);
    }
    let cutoffs: BTreeMap<usize, usize> = windows
        .into_iter()
        .map(|(cell, mut w)| {
            w.sort_unstable();
            w.dedup();
            let n = w.len();
            let keep = ((n as f64 * train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
            (cell, w[keep - 1])
        })
        .collect();
    records
        .iter()
        .map(|r| {
            if r.window <= cutoffs[&r.cell] {
                Split::Train
            } else {
                Split::Test
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_records: usize,
    pub epochs: Vec<EpochReport>,
}

impl TrainingReport {
    pub const CSV_HEADER: &'static str = "epoch,learning_rate,total,contact,slip,location,force";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.epochs.iter().map(|e| {
            format!(
                "{},{},{},{},{},{},{}",
                e.epoch, e.learning_rate, e.loss.total, e.loss.contact, e.loss.slip, e.loss.location, e.loss.force
            )
        })
    }
}

/// Records a bundle trained with `config` learns from.
pub fn training_records<'a>(dataset: &'a Dataset, config: &TrainingConfig) -> Vec<&'a DatasetRecord> {
    let split = temporal_split(&dataset.records, config.train_fraction);
    dataset
        .records
        .iter()
        .zip(split)
        .filter(|(r, s)| {
            *s == Split::Train
                && r.policy()
                    .is_none_or(|p| config.train_augmentations.iter().any(|name| name == p))
        })
        .map(|(r, _)| r)
        .collect()
}

/// Held-out records, optionally restricted to one augmentation policy
/// (`None` selects the clean windows).
pub fn test_records<'a>(dataset: &'a Dataset, train_fraction: f64, policy: Option<&str>) -> Vec<&'a DatasetRecord> {
    let split = temporal_split(&dataset.records, train_fraction);
    dataset
        .records
        .iter()
        .zip(split)
        .filter(|(r, s)| *s == Split::Test && r.policy() == policy)
        .map(|(r, _)| r)
        .collect()
}

/// Fits normalization on the training split, then runs momentum SGD.
pub fn train(dataset: &Dataset, config: &TrainingConfig) -> Result<(ModelBundle, TrainingReport)> {
    config.validate()?;
    dataset.validate()?;
    let records = training_records(dataset, config);
    let (mut bundle, report) = train_on(&records, &dataset.header.layout_hash, config)?;
    bundle.metadata.training_data = Some(dataset.fingerprint());
    bundle.metadata.train_fraction = Some(config.train_fraction);
    bundle.metadata.features = dataset.header.features;
    Ok((bundle, report))
}

/// As [`train`], on an explicit record list.
pub fn train_on(records: &[&DatasetRecord], layout_hash: &str, config: &TrainingConfig) -> Result<(ModelBundle, TrainingReport)> {
    config.validate()?;
    if !records.iter().any(|r| r.labels.contact) || !records.iter().any(|r| !r.labels.contact) {
        return Err(Error::Dataset(
            "training data needs both contact and no-contact records".into(),
        ));
    }
    let normalization = Normalization::fit(records.iter().map(|r| r.features.as_slice()))?;
    let positives: Vec<&Labels> = records.iter().map(|r| &r.labels).filter(|l| l.contact).collect();
    let xs: Vec<f64> = positives.iter().map(|l| l.location).collect();
    let fs: Vec<f64> = positives.iter().map(|l| l.force).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut bundle = ModelBundle::initialise(normalization, &config.hidden_layers, layout_hash.to_string(), &mut rng);
    bundle.location_scale = TargetScale::fit(&xs);
    bundle.force_scale = TargetScale::fit(&fs);
    bundle.contact_threshold = config.contact_threshold;
    bundle.metadata.training_config_hash = config.hash();

    let data: Vec<(&[f64], Labels)> = records.iter().map(|r| (r.features.as_slice(), r.labels)).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = bundle.parameters();
    let mut velocity = vec![0.0; params.len()];
    let mut report = TrainingReport {
        train_records: data.len(),
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        let lr = config.schedule.rate(config.learning_rate, epoch, config.epochs);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|i| data[*i]));
            let (loss, grad) = total_loss(&bundle, &batch, &config.loss_weights)?;
            if !loss.total.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("batch loss is {}", loss.total),
                });
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(grad.parameters()) {
                *v = config.momentum * *v - lr * g;
                *p += *v;
            }
            bundle.set_parameters(&params)?;
        }
        let loss = loss_value(&bundle, &data, &config.loss_weights)?;
        if !loss.total.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: format!("loss became {}", loss.total),
            });
        }
        report.epochs.push(EpochReport {
            epoch,
            learning_rate: lr,
            loss,
        });
    }
    Ok((bundle, report))
}
