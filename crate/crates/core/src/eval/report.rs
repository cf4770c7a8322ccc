use std::fmt::Write as _;

use super::metrics::{de_cdf, distance_errors, mda, mde};
use crate::dataset::CsiDataset;
use crate::error::Result;
use crate::model::PositioningNet;
use crate::rng;
use crate::train::noisy_csi;

/// Experiment context attached to an evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalMeta {
    pub preset: String,
    pub antennas: usize,
    pub stride: usize,
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub des: Vec<f64>,
    pub mde: f64,
    pub mda: f64,
    pub cdf: Vec<(f64, f64)>,
    pub meta: EvalMeta,
}

pub const CDF_POINTS: usize = 101;

impl EvalReport {
    pub fn from_predictions(preds: &[[f64; 3]], labels: &[[f64; 3]], meta: EvalMeta) -> Result<Self> {
        Ok(Self {
            des: distance_errors(preds, labels)?,
            mde: mde(preds, labels)?,
            mda: mda(preds, labels)?,
            cdf: de_cdf(preds, labels, CDF_POINTS)?,
            meta,
        })
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "preset,antennas,stride,snr_db,samples,mde,mda\n{},{},{},{},{},{},{}\n",
            self.meta.preset,
            self.meta.antennas,
            self.meta.stride,
            self.meta.snr_db,
            self.des.len(),
            self.mde,
            self.mda
        )
    }

    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("distance_error,fraction\n");
        for (q, p) in &self.cdf {
            let _ = writeln!(s, "{q},{p}");
        }
        s
    }
}

/// Copy of `ds` with one AWGN realisation at `snr_db` per sample (clean copy
/// for an infinite SNR).
pub fn noisy_dataset(ds: &CsiDataset, snr_db: f64, seed: u64) -> CsiDataset {
    let samples = ds
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            s.csi = noisy_csi(&s.csi, snr_db, rng::derive(seed, &[i as u64]));
            s
        })
        .collect();
    ds.with_samples(samples)
}

/// Predicts `ds` with test-time AWGN at `snr_db` and scores the result.
pub fn evaluate(net: &PositioningNet, ds: &CsiDataset, snr_db: f64, seed: u64, meta: EvalMeta) -> Result<EvalReport> {
    let noisy = noisy_dataset(ds, snr_db, seed);
    let preds = net.predict(&noisy)?;
    EvalReport::from_predictions(&preds, &ds.labels(), EvalMeta { snr_db, ..meta })
}
