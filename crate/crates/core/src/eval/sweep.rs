use std::fmt::Write as _;

use rayon::prelude::*;

use super::metrics::median;
use super::report::{evaluate, EvalMeta};
use crate::dataset::{self, CsiDataset};
use crate::error::{domain, Error, Result};
use crate::model::{InitMethod, NetConfig, PositioningNet};
use crate::rng;
use crate::sim::Preset;
use crate::train::{train, TrainSchedule};

const STREAM_SPLIT: u64 = 11;
const STREAM_VAL: u64 = 12;
const STREAM_TEST_NOISE: u64 = 13;
const STREAM_CELL: u64 = 14;

/// Everything a sweep needs besides the swept variable.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Layer widths; each cell resizes it to its own input.
    pub net: NetConfig,
    /// Stage layout; the seed is replaced per cell.
    pub schedule: TrainSchedule,
    /// Independently seeded trainings per cell.
    pub replicates: usize,
    pub test_fraction: f64,
    /// Express phases relative to the first antenna before training.
    pub reference_phase: bool,
    /// Share of the (thinned) training pool held out for early stopping.
    pub val_fraction: f64,
    /// SNRs at which test MDE is reported.
    pub eval_snrs: Vec<f64>,
    pub seed: u64,
    /// Worker threads for independent cells.
    pub jobs: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            schedule: TrainSchedule::default(),
            replicates: 3,
            test_fraction: 0.2,
            reference_phase: true,
            val_fraction: 0.1,
            eval_snrs: vec![0.0, 10.0, 20.0, 30.0],
            seed: 0,
            jobs: 1,
        }
    }
}

/// One trained-and-evaluated network.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    /// Value of the swept variable.
    pub key: usize,
    pub replicate: usize,
    pub n_train: usize,
    /// At the preset SNR.
    pub mde: f64,
    pub mda: f64,
    /// Test MDE at each of `SweepTable::snrs`.
    pub mde_by_snr: Vec<f64>,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    /// Column name of the swept variable.
    pub key_name: String,
    /// Printed instead of the numeric key when non-empty (indexed by key).
    pub key_labels: Vec<String>,
    pub snrs: Vec<f64>,
    pub cells: Vec<CellResult>,
}

impl SweepTable {
    /// Swept values in first-seen order.
    pub fn keys(&self) -> Vec<usize> {
        let mut keys: Vec<usize> = Vec::new();
        for c in &self.cells {
            if !keys.contains(&c.key) {
                keys.push(c.key);
            }
        }
        keys
    }

    fn label(&self, key: usize) -> String {
        self.key_labels.get(key).cloned().unwrap_or_else(|| key.to_string())
    }

    fn of(&self, key: usize) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.key == key)
    }

    pub fn median_mde(&self, key: usize) -> f64 {
        median(&self.of(key).map(|c| c.mde).collect::<Vec<_>>())
    }

    pub fn median_mda(&self, key: usize) -> f64 {
        median(&self.of(key).map(|c| c.mda).collect::<Vec<_>>())
    }

    pub fn median_mde_at(&self, key: usize, snr_index: usize) -> f64 {
        median(&self.of(key).map(|c| c.mde_by_snr[snr_index]).collect::<Vec<_>>())
    }

    /// One row per swept value with medians over replicates.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},replicates,n_train,mde,mda", self.key_name);
        for snr in &self.snrs {
            let _ = write!(s, ",mde_snr_{snr}");
        }
        s.push('\n');
        for key in self.keys() {
            let cells: Vec<&CellResult> = self.of(key).collect();
            let _ = write!(
                s,
                "{},{},{},{},{}",
                self.label(key),
                cells.len(),
                cells[0].n_train,
                self.median_mde(key),
                self.median_mda(key)
            );
            for i in 0..self.snrs.len() {
                let _ = write!(s, ",{}", self.median_mde_at(key, i));
            }
            s.push('\n');
        }
        s
    }

    /// One row per trained network.
    pub fn cells_csv(&self) -> String {
        let mut s = format!("{},replicate,n_train,epochs,mde,mda", self.key_name);
        for snr in &self.snrs {
            let _ = write!(s, ",mde_snr_{snr}");
        }
        s.push('\n');
        for c in &self.cells {
            let _ = write!(s, "{},{},{},{},{},{}", self.label(c.key), c.replicate, c.n_train, c.epochs, c.mde, c.mda);
            for m in &c.mde_by_snr {
                let _ = write!(s, ",{m}");
            }
            s.push('\n');
        }
        s
    }
}

/// Preset data with guard bands zeroed (and optionally phase-referenced to
/// the first antenna), split into a training pool and a held-out test set.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub pool: CsiDataset,
    pub test: CsiDataset,
    pub preset: String,
    pub snr_db: f64,
}

impl PreparedData {
    pub fn new(preset: &Preset, ds: &CsiDataset, test_fraction: f64, reference_phase: bool, seed: u64) -> Result<Self> {
        let mut ds = ds.zero_guard_bands(preset.ofdm.guard_fraction)?;
        if reference_phase {
            ds = ds.reference_phase();
        }
        let (pool, test) = ds.split(test_fraction, rng::derive(seed, &[STREAM_SPLIT]))?;
        Ok(Self {
            pool,
            test,
            preset: preset.name.clone(),
            snr_db: preset.snr_db,
        })
    }

    pub fn generate(preset: &Preset, test_fraction: f64, reference_phase: bool, seed: u64) -> Result<Self> {
        Self::new(preset, &dataset::generate(preset)?, test_fraction, reference_phase, seed)
    }
}

/// Seed of replicate `r` of the cell keyed `key` in sweep `tag`.
pub fn cell_seed(seed: u64, tag: u64, key: usize, r: usize) -> u64 {
    rng::derive(seed, &[STREAM_CELL, tag, key as u64, r as u64])
}

/// Splits `pool` into train/validation, trains a fresh network and evaluates
/// it on `test` at every SNR in `spec.eval_snrs` and at `eval_snr`.
pub fn train_and_evaluate(
    spec: &SweepSpec,
    pool: &CsiDataset,
    test: &CsiDataset,
    eval_snr: f64,
    meta: EvalMeta,
    seed: u64,
) -> Result<(PositioningNet, CellResult)> {
    let (tr, va) = pool.split(spec.val_fraction, rng::derive(spec.seed, &[STREAM_VAL]))?;
    let cfg = spec.net.resized(pool.n_sub, pool.n_ant);
    let mut net = PositioningNet::build(cfg, InitMethod::XavierUniform, rng::derive(seed, &[0]))?;
    net.init_output_bias(&tr.labels());
    let schedule = TrainSchedule {
        seed: rng::derive(seed, &[1]),
        ..spec.schedule.clone()
    };
    let report = train(&mut net, &tr, &va, &schedule)?;
    let noise_seed = rng::derive(spec.seed, &[STREAM_TEST_NOISE]);
    let at = evaluate(&net, test, eval_snr, noise_seed, meta.clone())?;
    let mde_by_snr = spec
        .eval_snrs
        .iter()
        .map(|&snr| Ok(evaluate(&net, test, snr, noise_seed, meta.clone())?.mde))
        .collect::<Result<_>>()?;
    let cell = CellResult {
        key: 0,
        replicate: 0,
        n_train: tr.len(),
        mde: at.mde,
        mda: at.mda,
        mde_by_snr,
        epochs: report.epochs.len(),
    };
    Ok((net, cell))
}

/// Runs `f` over every (key, replicate) cell on a pool of `jobs` threads.
/// Results come back in key-major order regardless of scheduling.
pub fn run_cells<F>(keys: &[usize], replicates: usize, jobs: usize, f: F) -> Result<Vec<CellResult>>
where
    F: Fn(usize, usize) -> Result<CellResult> + Sync,
{
    if replicates == 0 {
        return domain("a sweep needs at least one replicate");
    }
    let cells: Vec<(usize, usize)> = keys
        .iter()
        .flat_map(|&k| (0..replicates).map(move |r| (k, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, r)| {
                let mut c = f(k, r)?;
                c.key = k;
                c.replicate = r;
                Ok(c)
            })
            .collect()
    })
}

/// Runs `f` once per replicate on a pool of `jobs` threads; each call may
/// yield several cells. Cells come back sorted by (key, replicate).
pub fn run_replicates<F>(replicates: usize, jobs: usize, f: F) -> Result<Vec<CellResult>>
where
    F: Fn(usize) -> Result<Vec<CellResult>> + Sync,
{
    let keys: Vec<usize> = (0..replicates).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    let per: Vec<Vec<CellResult>> = pool.install(|| {
        keys.par_iter()
            .map(|&r| {
                let mut cells = f(r)?;
                for c in &mut cells {
                    c.replicate = r;
                }
                Ok(cells)
            })
            .collect::<Result<_>>()
    })?;
    let mut cells: Vec<CellResult> = per.into_iter().flatten().collect();
    cells.sort_by_key(|c| (c.key, c.replicate));
    Ok(cells)
}

/// Trains and evaluates one network per antenna count (contiguous
/// sub-arrays of the preset's patch array) and replicate.
pub fn antenna_sweep(preset: &Preset, counts: &[usize], spec: &SweepSpec) -> Result<SweepTable> {
    let data = PreparedData::generate(preset, spec.test_fraction, spec.reference_phase, spec.seed)?;
    antenna_sweep_on(preset, &data, counts, spec)
}

pub fn antenna_sweep_on(
    preset: &Preset,
    data: &PreparedData,
    counts: &[usize],
    spec: &SweepSpec,
) -> Result<SweepTable> {
    let subsets = counts
        .iter()
        .map(|&c| preset.array.contiguous_subset(c))
        .collect::<Result<Vec<_>>>()?;
    let cells = run_cells(counts, spec.replicates, spec.jobs, |count, r| {
        let ants = &subsets[counts.iter().position(|&c| c == count).expect("known count")];
        let (pool, test) = if count == data.pool.n_ant {
            (data.pool.clone(), data.test.clone())
        } else {
            (data.pool.select_antennas(ants)?, data.test.select_antennas(ants)?)
        };
        let meta = EvalMeta {
            preset: data.preset.clone(),
            antennas: count,
            stride: 1,
            snr_db: data.snr_db,
        };
        let seed = cell_seed(spec.seed, 1, count, r);
        Ok(train_and_evaluate(spec, &pool, &test, data.snr_db, meta, seed)?.1)
    })?;
    Ok(SweepTable {
        key_name: "antennas".into(),
        key_labels: Vec::new(),
        snrs: spec.eval_snrs.clone(),
        cells,
    })
}

/// Trains on the grid thinned by each stride and evaluates on the
/// full-resolution held-out set.
pub fn sample_distance_sweep(preset: &Preset, strides: &[usize], spec: &SweepSpec) -> Result<SweepTable> {
    let data = PreparedData::generate(preset, spec.test_fraction, spec.reference_phase, spec.seed)?;
    sample_distance_sweep_on(&data, strides, spec)
}

pub fn sample_distance_sweep_on(data: &PreparedData, strides: &[usize], spec: &SweepSpec) -> Result<SweepTable> {
    let pools = strides
        .iter()
        .map(|&s| {
            let p = data.pool.subsample_grid(s)?;
            if p.len() < 4 {
                return domain(format!("stride {s} leaves only {} training samples", p.len()));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = run_cells(strides, spec.replicates, spec.jobs, |stride, r| {
        let pool = &pools[strides.iter().position(|&s| s == stride).expect("known stride")];
        let meta = EvalMeta {
            preset: data.preset.clone(),
            antennas: pool.n_ant,
            stride,
            snr_db: data.snr_db,
        };
        let seed = cell_seed(spec.seed, 2, stride, r);
        Ok(train_and_evaluate(spec, pool, &data.test, data.snr_db, meta, seed)?.1)
    })?;
    Ok(SweepTable {
        key_name: "stride".into(),
        key_labels: Vec::new(),
        snrs: spec.eval_snrs.clone(),
        cells,
    })
}
