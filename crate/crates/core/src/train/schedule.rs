use crate::autodiff::OptimizerKind;
use crate::config::KvFile;
use crate::error::{Error, Result};

pub const DEFAULT_BATCH_SIZES: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const LR_FIRST: f64 = 1e-3;
pub const LR_LAST: f64 = 5e-5;

/// Batch-size / learning-rate staircase with early stopping per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    /// Epochs without validation-loss improvement before a stage ends.
    pub patience: usize,
    pub max_epochs: usize,
    /// SNR of the fresh AWGN drawn for every training batch.
    pub train_snr_db: f64,
    pub huber_delta: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

/// Geometric interpolation from `first` to `last` over `n` stages.
pub fn geometric_rates(n: usize, first: f64, last: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![first],
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    last
                } else {
                    first * (last / first).powf(t)
                }
            })
            .collect(),
    }
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self::staircase(&DEFAULT_BATCH_SIZES, 200, 0)
    }
}

impl TrainSchedule {
    /// Stages for the given batch sizes, learning rates descending
    /// geometrically from 1e-3 to 5e-5.
    pub fn staircase(batch_sizes: &[usize], max_epochs: usize, seed: u64) -> Self {
        Self {
            batch_sizes: batch_sizes.to_vec(),
            learning_rates: geometric_rates(batch_sizes.len(), LR_FIRST, LR_LAST),
            patience: 10,
            max_epochs,
            train_snr_db: 20.0,
            huber_delta: 1.0,
            optimizer: OptimizerKind::Adam,
            seed,
        }
    }

    /// Single stage, as used for finetuning.
    pub fn single_stage(batch_size: usize, lr: f64, max_epochs: usize, seed: u64) -> Self {
        Self {
            batch_sizes: vec![batch_size],
            learning_rates: vec![lr],
            ..Self::staircase(&[batch_size], max_epochs, seed)
        }
    }

    pub fn n_stages(&self) -> usize {
        self.batch_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_sizes.is_empty() || self.batch_sizes.len() != self.learning_rates.len() {
            return bad("need one learning rate per batch-size stage".into());
        }
        if self.batch_sizes.contains(&0) || self.batch_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("batch sizes {:?} must be positive and strictly increasing", self.batch_sizes));
        }
        if self.learning_rates.iter().any(|&r| !(r > 0.0 && r.is_finite()))
            || self.learning_rates.windows(2).any(|w| w[1] > w[0])
        {
            return bad(format!(
                "learning rates {:?} must be positive and non-increasing",
                self.learning_rates
            ));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return bad("max_epochs and patience must be >= 1".into());
        }
        if !(self.huber_delta > 0.0) || self.train_snr_db.is_nan() {
            return bad("huber delta must be > 0 and train SNR a number".into());
        }
        Ok(())
    }

    /// Whether the staircase spans the full 16→512 / 1e-3→5e-5 range.
    pub fn spans_full_staircase(&self) -> bool {
        self.batch_sizes.first() == Some(&16)
            && self.batch_sizes.last() == Some(&512)
            && self.learning_rates.first() == Some(&LR_FIRST)
            && self.learning_rates.last() == Some(&LR_LAST)
    }

    pub fn to_kv(&self, kv: &mut KvFile, section: &str) {
        let join = |v: Vec<String>| v.join(",");
        kv.set(section, "batch_sizes", &join(self.batch_sizes.iter().map(|b| b.to_string()).collect()));
        kv.set(
            section,
            "learning_rates",
            &join(self.learning_rates.iter().map(|r| r.to_string()).collect()),
        );
        kv.set(section, "patience", &self.patience.to_string());
        kv.set(section, "max_epochs", &self.max_epochs.to_string());
        kv.set(section, "train_snr_db", &self.train_snr_db.to_string());
        kv.set(section, "huber_delta", &self.huber_delta.to_string());
        let opt = match self.optimizer {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        };
        kv.set(section, "optimizer", opt);
        kv.set(section, "seed", &self.seed.to_string());
    }

    /// Reads `section`, falling back to `base`. When only `batch_sizes` is
    /// given, learning rates are re-derived geometrically.
    pub fn from_kv(kv: &KvFile, section: &str, base: &TrainSchedule) -> Result<Self> {
        let batch_sizes: Vec<usize> = kv.parse_list(section, "batch_sizes")?.unwrap_or_else(|| base.batch_sizes.clone());
        let learning_rates = match kv.parse_list(section, "learning_rates")? {
            Some(r) => r,
            None if batch_sizes != base.batch_sizes => geometric_rates(batch_sizes.len(), LR_FIRST, LR_LAST),
            None => base.learning_rates.clone(),
        };
        let optimizer = match kv.get(section, "optimizer") {
            None => base.optimizer,
            Some("adam") => OptimizerKind::Adam,
            Some("sgd") => OptimizerKind::Sgd,
            Some(o) => return Err(Error::Config(format!("unknown optimizer '{o}'"))),
        };
        let s = Self {
            batch_sizes,
            learning_rates,
            patience: kv.value_or(section, "patience", base.patience)?,
            max_epochs: kv.value_or(section, "max_epochs", base.max_epochs)?,
            train_snr_db: kv.value_or(section, "train_snr_db", base.train_snr_db)?,
            huber_delta: kv.value_or(section, "huber_delta", base.huber_delta)?,
            optimizer,
            seed: kv.value_or(section, "seed", base.seed)?,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Short low-learning-rate continuation on calibration data.
#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneSchedule {
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub train_snr_db: f64,
    pub seed: u64,
}

impl Default for FinetuneSchedule {
    fn default() -> Self {
        Self {
            lr: LR_LAST,
            max_epochs: 50,
            batch_size: 16,
            patience: 10,
            train_snr_db: 20.0,
            seed: 0,
        }
    }
}

impl FinetuneSchedule {
    pub fn as_schedule(&self) -> TrainSchedule {
        TrainSchedule {
            patience: self.patience,
            train_snr_db: self.train_snr_db,
            ..TrainSchedule::single_stage(self.batch_size, self.lr, self.max_epochs, self.seed)
        }
    }

    pub fn from_kv(kv: &KvFile, section: &str, base: &FinetuneSchedule) -> Result<Self> {
        let s = Self {
            lr: kv.value_or(section, "lr", base.lr)?,
            max_epochs: kv.value_or(section, "max_epochs", base.max_epochs)?,
            batch_size: kv.value_or(section, "batch_size", base.batch_size)?,
            patience: kv.value_or(section, "patience", base.patience)?,
            train_snr_db: kv.value_or(section, "train_snr_db", base.train_snr_db)?,
            seed: kv.value_or(section, "seed", base.seed)?,
        };
        s.as_schedule().validate()?;
        Ok(s)
    }

    pub fn to_kv(&self, kv: &mut KvFile, section: &str) {
        kv.set(section, "lr", &self.lr.to_string());
        kv.set(section, "max_epochs", &self.max_epochs.to_string());
        kv.set(section, "batch_size", &self.batch_size.to_string());
        kv.set(section, "patience", &self.patience.to_string());
        kv.set(section, "train_snr_db", &self.train_snr_db.to_string());
        kv.set(section, "seed", &self.seed.to_string());
    }
}
