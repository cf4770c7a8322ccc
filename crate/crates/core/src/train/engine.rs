use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex32;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::schedule::{FinetuneSchedule, TrainSchedule};
use crate::autodiff::{Optimizer, Tape, Tensor};
use crate::dataset::CsiDataset;
use crate::error::{domain, shape, Error, Result};
use crate::eval::{mda, mde};
use crate::model::{assemble_batch, forward, InitMethod, NetConfig, PositioningNet, OUTPUT_WIDTH};
use crate::rng;

/// Samples per gradient chunk. Batches are split into chunks of this size
/// and chunk gradients are summed in order, so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 16;

const STREAM_SHUFFLE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_LAYERS: u64 = 3;
const STREAM_VAL: u64 = 4;
const STREAM_PRETRAIN: u64 = 5;
const STREAM_MASK: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_loss: f64,
    pub val_mde: f64,
    pub val_mda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub first_epoch: usize,
    pub epochs: usize,
    /// Validation loss of the restored parameters.
    pub best_val_loss: f64,
    /// Epoch whose parameters were restored; `None` when no epoch improved on
    /// the stage's starting point.
    pub best_epoch: Option<usize>,
    pub stop: StopReason,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stages: Vec<StageRecord>,
    pub wall_clock_secs: f64,
    pub checkpoint_id: String,
}

pub const EPOCH_CSV_HEADER: &str = "epoch,stage,batch_size,lr,loss,val_loss,val_mde,val_mda";

impl TrainReport {
    /// Per-epoch CSV. Wall-clock time is left out so that reruns compare
    /// byte for byte.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(EPOCH_CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e.epoch, e.stage, e.batch_size, e.lr, e.loss, e.val_loss, e.val_mde, e.val_mda
            );
        }
        s
    }

    /// One-row summary CSV.
    pub fn summary_csv(&self) -> String {
        let last = self.epochs.last();
        let best_mde = self.epochs.iter().map(|e| e.val_mde).fold(f64::INFINITY, f64::min);
        format!(
            "stages,epochs,final_val_loss,final_val_mde,final_val_mda,best_val_mde,checkpoint\n{},{},{},{},{},{},{}\n",
            self.stages.len(),
            self.epochs.len(),
            self.stages.last().map_or(f64::NAN, |s| s.best_val_loss),
            last.map_or(f64::NAN, |e| e.val_mde),
            last.map_or(f64::NAN, |e| e.val_mda),
            best_mde,
            self.checkpoint_id
        )
    }

    /// Concatenates `other` after `self`, renumbering epochs and stages.
    pub fn append(&mut self, other: TrainReport) {
        let (e0, s0) = (self.epochs.len(), self.stages.len());
        self.epochs.extend(other.epochs.into_iter().map(|mut e| {
            e.epoch += e0;
            e.stage += s0;
            e
        }));
        self.stages.extend(other.stages.into_iter().map(|mut s| {
            s.stage += s0;
            s.first_epoch += e0;
            s.best_epoch = s.best_epoch.map(|b| b + e0);
            s
        }));
        self.wall_clock_secs += other.wall_clock_secs;
        self.checkpoint_id = other.checkpoint_id;
    }
}

/// Copy of `csi` with complex AWGN at `snr_db` relative to the mean power of
/// its non-zero entries. Zero entries (guard bands, masked subcarriers) stay
/// zero.
pub fn noisy_csi(csi: &[Complex32], snr_db: f64, seed: u64) -> Vec<Complex32> {
    if snr_db == f64::INFINITY {
        return csi.to_vec();
    }
    let (sum, n) = csi
        .iter()
        .filter(|c| c.re != 0.0 || c.im != 0.0)
        .fold((0.0f64, 0usize), |(s, n), c| (s + c.norm_sqr() as f64, n + 1));
    if n == 0 {
        return csi.to_vec();
    }
    let sigma = (sum / n as f64 / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut r = rng::rng(seed);
    csi.iter()
        .map(|&c| {
            if c.re == 0.0 && c.im == 0.0 {
                return c;
            }
            let nr: f64 = StandardNormal.sample(&mut r);
            let ni: f64 = StandardNormal.sample(&mut r);
            Complex32::new(c.re + (sigma * nr) as f32, c.im + (sigma * ni) as f32)
        })
        .collect()
}

/// Mean elementwise Huber loss between predictions and labels.
pub fn huber_mean(preds: &[[f64; 3]], labels: &[[f64; 3]], delta: f64) -> f64 {
    let mut total = 0.0;
    for (p, l) in preds.iter().zip(labels) {
        for (a, b) in p.iter().zip(l) {
            let e = (a - b).abs();
            total += if e <= delta { 0.5 * e * e } else { delta * (e - 0.5 * delta) };
        }
    }
    total / (preds.len() * OUTPUT_WIDTH).max(1) as f64
}

fn check_shapes(net: &PositioningNet, ds: &CsiDataset, what: &str) -> Result<()> {
    if ds.is_empty() {
        return domain(format!("{what} dataset is empty"));
    }
    if ds.n_sub != net.config.n_sub || ds.n_ant != net.config.n_ant {
        return shape(format!(
            "{what} dataset is {}x{} (subcarriers x antennas), network expects {}x{}",
            ds.n_sub, ds.n_ant, net.config.n_sub, net.config.n_ant
        ));
    }
    Ok(())
}

/// Loss and parameter gradients of one chunk, already weighted by
/// `weight` (the chunk's share of the batch).
fn chunk_gradients(
    net: &PositioningNet,
    csis: &[Vec<Complex32>],
    labels: &[[f64; 3]],
    delta: f64,
    weight: f64,
    seed: u64,
) -> Result<(f64, Vec<Tensor<f32>>)> {
    let cfg = &net.config;
    let refs: Vec<&[Complex32]> = csis.iter().map(Vec::as_slice).collect();
    let batch = assemble_batch(&refs, cfg.n_sub, cfg.n_ant)?;
    let mut tape = Tape::<f32>::new();
    let params = net.leaves(&mut tape);
    let x = tape.constant(batch);
    let out = forward(cfg, &mut tape, &params, x, true, seed)?;
    let flat: Vec<f32> = labels.iter().flat_map(|l| l.map(|v| v as f32)).collect();
    let y = tape.constant(Tensor::new(vec![labels.len(), OUTPUT_WIDTH], flat)?);
    let loss = tape.huber_loss(out, y, delta)?;
    let value = tape.value(loss).item() as f64;
    let mut grads = tape.backward(loss)?;
    let w = weight as f32;
    let gs = params
        .iter()
        .zip(&net.params)
        .map(|(&v, p)| {
            let mut g = grads.take(v).unwrap_or_else(|| Tensor::zeros(p.value.shape()));
            for x in g.data_mut() {
                *x *= w;
            }
            g
        })
        .collect();
    Ok((value * weight, gs))
}

struct Validation {
    csis: Vec<Vec<Complex32>>,
    labels: Vec<[f64; 3]>,
    delta: f64,
}

impl Validation {
    /// Validation inputs carry one fixed AWGN realisation at the training SNR.
    fn new(ds: &CsiDataset, snr_db: f64, seed: u64, delta: f64) -> Self {
        let csis = ds
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| noisy_csi(&s.csi, snr_db, rng::derive(seed, &[STREAM_VAL, i as u64])))
            .collect();
        Self {
            csis,
            labels: ds.labels(),
            delta,
        }
    }

    fn evaluate(&self, net: &PositioningNet) -> Result<(f64, f64, f64)> {
        let refs: Vec<&[Complex32]> = self.csis.iter().map(Vec::as_slice).collect();
        let preds = net.predict_csi(&refs)?;
        Ok((
            huber_mean(&preds, &self.labels, self.delta),
            mde(&preds, &self.labels)?,
            mda(&preds, &self.labels)?,
        ))
    }
}

/// Trains `net` in place through every stage of `schedule`.
///
/// Each stage shuffles the training set every epoch, draws fresh AWGN for
/// every sample, and stops after `patience` epochs without a lower
/// validation loss (or at `max_epochs`); the best parameters seen in the
/// stage, including its starting point, are restored before the next stage.
pub fn train(
    net: &mut PositioningNet,
    train_ds: &CsiDataset,
    val_ds: &CsiDataset,
    schedule: &TrainSchedule,
) -> Result<TrainReport> {
    schedule.validate()?;
    check_shapes(net, train_ds, "training")?;
    check_shapes(net, val_ds, "validation")?;
    let started = Instant::now();
    let seed = schedule.seed;
    let val = Validation::new(val_ds, schedule.train_snr_db, seed, schedule.huber_delta);
    let labels = train_ds.labels();
    let mut opt = Optimizer::new(schedule.optimizer);
    for p in &mut net.params {
        p.reset_moments();
    }
    let mut report = TrainReport::default();
    let (mut cur_val, _, _) = val.evaluate(net)?;
    for (stage, (&bs, &lr)) in schedule.batch_sizes.iter().zip(&schedule.learning_rates).enumerate() {
        let first_epoch = report.epochs.len();
        let mut best = (cur_val, None, net.params.iter().map(|p| p.value.clone()).collect::<Vec<_>>());
        let mut since_best = 0;
        let mut stop = StopReason::MaxEpochs;
        for local in 0..schedule.max_epochs {
            let epoch = report.epochs.len();
            let mut order: Vec<usize> = (0..train_ds.len()).collect();
            order.shuffle(&mut rng::rng_for(seed, &[STREAM_SHUFFLE, stage as u64, local as u64]));
            let mut loss_sum = 0.0;
            for (bi, idx) in order.chunks(bs).enumerate() {
                let csis: Vec<Vec<Complex32>> = idx
                    .iter()
                    .map(|&i| {
                        let s = rng::derive(seed, &[STREAM_NOISE, epoch as u64, i as u64]);
                        noisy_csi(&train_ds.samples[i].csi, schedule.train_snr_db, s)
                    })
                    .collect();
                let lbl: Vec<[f64; 3]> = idx.iter().map(|&i| labels[i]).collect();
                let n = idx.len() as f64;
                let parts: Vec<(f64, Vec<Tensor<f32>>)> = csis
                    .par_chunks(CHUNK)
                    .zip(lbl.par_chunks(CHUNK))
                    .enumerate()
                    .map(|(ci, (c, l))| {
                        let s = rng::derive(seed, &[STREAM_LAYERS, epoch as u64, bi as u64, ci as u64]);
                        chunk_gradients(net, c, l, schedule.huber_delta, c.len() as f64 / n, s)
                    })
                    .collect::<Result<_>>()?;
                let mut batch_loss = 0.0;
                for p in &mut net.params {
                    p.zero_grad();
                }
                for (l, gs) in parts {
                    batch_loss += l;
                    for (p, g) in net.params.iter_mut().zip(gs) {
                        for (a, b) in p.grad.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                }
                if !batch_loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        stage,
                        epoch,
                        partial_report: report.to_csv(),
                    });
                }
                opt.step(&mut net.params, lr)?;
                loss_sum += batch_loss * n;
            }
            let (val_loss, val_mde, val_mda) = val.evaluate(net)?;
            if !val_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage,
                    epoch,
                    partial_report: report.to_csv(),
                });
            }
            report.epochs.push(EpochRecord {
                epoch,
                stage,
                batch_size: bs,
                lr,
                loss: loss_sum / train_ds.len() as f64,
                val_loss,
                val_mde,
                val_mda,
            });
            log::debug!("stage {stage} epoch {epoch}: val_loss {val_loss:.5} val_mde {val_mde:.4}");
            if val_loss < best.0 {
                best = (val_loss, Some(epoch), net.params.iter().map(|p| p.value.clone()).collect());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= schedule.patience {
                    stop = StopReason::EarlyStop;
                    break;
                }
            }
        }
        let (best_val, best_epoch, values) = best;
        for (p, v) in net.params.iter_mut().zip(values) {
            p.value = v;
        }
        cur_val = best_val;
        report.stages.push(StageRecord {
            stage,
            batch_size: bs,
            lr,
            first_epoch,
            epochs: report.epochs.len() - first_epoch,
            best_val_loss: best_val,
            best_epoch,
            stop,
        });
    }
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    report.checkpoint_id = net.checkpoint_id();
    Ok(report)
}

/// Continues training an already trained network on a small calibration
/// set with a single low-learning-rate stage. Validation uses `val_ds` when
/// given, otherwise the calibration set itself. An empty calibration set
/// leaves the network untouched.
pub fn finetune(
    net: &mut PositioningNet,
    calib_ds: &CsiDataset,
    val_ds: Option<&CsiDataset>,
    schedule: &FinetuneSchedule,
) -> Result<TrainReport> {
    if calib_ds.is_empty() {
        return Ok(TrainReport {
            checkpoint_id: net.checkpoint_id(),
            ..TrainReport::default()
        });
    }
    train(net, calib_ds, val_ds.unwrap_or(calib_ds), &schedule.as_schedule())
}

#[derive(Clone, Debug, PartialEq)]
pub enum PretrainMethod {
    /// Xavier initialisation, then plain training on the target data.
    Random,
    /// Full training on a simulated dataset first.
    SimulatedPretrain,
    /// Pre-training on `masks` copies of the target training set, each with
    /// only `n_keep` random subcarriers left non-zero.
    SubcarrierSubset { n_keep: usize, masks: usize },
}

impl PretrainMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PretrainMethod::Random => "random",
            PretrainMethod::SimulatedPretrain => "simulated-pretrain",
            PretrainMethod::SubcarrierSubset { .. } => "subcarrier-subset-pretrain",
        }
    }
}

fn concat_datasets(parts: &[CsiDataset]) -> CsiDataset {
    let samples = parts.iter().flat_map(|d| d.samples.iter().cloned()).collect();
    let mut out = parts[0].with_samples(samples);
    out.grid_spacing = None;
    out
}

/// Builds a network for the target data with one of the initialisation
/// protocols and trains it.
///
/// `pretrain` is the simulated dataset used by
/// [`PretrainMethod::SimulatedPretrain`]; it is split 90/10 for validation.
pub fn pretrain_transfer(
    config: &NetConfig,
    target_train: &CsiDataset,
    target_val: &CsiDataset,
    method: &PretrainMethod,
    pretrain: Option<&CsiDataset>,
    schedule: &TrainSchedule,
    init_seed: u64,
) -> Result<(PositioningNet, TrainReport)> {
    let mut net = PositioningNet::build(config.clone(), InitMethod::XavierUniform, init_seed)?;
    let pre_schedule = TrainSchedule {
        seed: rng::derive(schedule.seed, &[STREAM_PRETRAIN]),
        ..schedule.clone()
    };
    let mut report = match method {
        PretrainMethod::Random => {
            net.init_output_bias(&target_train.labels());
            TrainReport::default()
        }
        PretrainMethod::SimulatedPretrain => {
            let sim = pretrain.ok_or_else(|| {
                Error::Config("simulated pre-training needs a pre-training dataset".into())
            })?;
            let (sim_train, sim_val) = sim.split(0.1, pre_schedule.seed)?;
            net.init_output_bias(&sim_train.labels());
            train(&mut net, &sim_train, &sim_val, &pre_schedule)?
        }
        &PretrainMethod::SubcarrierSubset { n_keep, masks } => {
            if masks == 0 {
                return domain("subcarrier-subset pre-training needs at least one mask");
            }
            let mut tr = Vec::with_capacity(masks);
            let mut va = Vec::with_capacity(masks);
            for m in 0..masks {
                let s = rng::derive(schedule.seed, &[STREAM_MASK, m as u64]);
                let (t, keep) = target_train.subcarrier_subset(n_keep, s)?;
                let drop: Vec<usize> = (0..target_val.n_sub).filter(|k| keep.binary_search(k).is_err()).collect();
                tr.push(t);
                va.push(target_val.zero_columns(&drop));
            }
            net.init_output_bias(&target_train.labels());
            train(&mut net, &concat_datasets(&tr), &concat_datasets(&va), &pre_schedule)?
        }
    };
    let fin = train(&mut net, target_train, target_val, schedule)?;
    report.append(fin);
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetConfig;
    use crate::sim::{Preset, Rect};

    fn scene(nx: usize, ny: usize) -> CsiDataset {
        let p = Preset::scene("t", true, Rect::new(1.0, -1.0, 3.0, 1.0), nx, ny, 2, 4, 32, 3).unwrap();
        crate::dataset::generate(&p).unwrap()
    }

    fn quiet(n_sub: usize, n_ant: usize) -> NetConfig {
        NetConfig {
            dropout: 0.0,
            noise_sigma: 0.0,
            ..NetConfig::desk(n_sub, n_ant)
        }
    }

    fn fresh(cfg: NetConfig, ds: &CsiDataset, seed: u64) -> PositioningNet {
        let mut net = PositioningNet::build(cfg, InitMethod::XavierUniform, seed).unwrap();
        net.init_output_bias(&ds.labels());
        net
    }

    #[test]
    fn memorises_twenty_samples() {
        let ds = scene(5, 4);
        let mut net = fresh(quiet(ds.n_sub, ds.n_ant), &ds, 1);
        let mut s = TrainSchedule::single_stage(4, 3e-3, 400, 2);
        s.train_snr_db = f64::INFINITY;
        s.patience = 400;
        train(&mut net, &ds, &ds, &s).unwrap();
        let err = mde(&net.predict(&ds).unwrap(), &ds.labels()).unwrap();
        assert!(err < 0.05, "training-set mde {err}");
    }

    #[test]
    fn constant_dataset_stops_early() {
        let ds = scene(3, 3);
        let one = ds.samples[0].clone();
        let ds = ds.with_samples(vec![one; 8]);
        let mut net = fresh(quiet(ds.n_sub, ds.n_ant), &ds, 1);
        let before = net.clone();
        let mut s = TrainSchedule::single_stage(4, 1e-3, 100, 0);
        s.patience = 3;
        s.train_snr_db = f64::INFINITY;
        let r = train(&mut net, &ds, &ds, &s).unwrap();
        assert_eq!(r.stages[0].stop, StopReason::EarlyStop);
        assert!(r.epochs.len() < 100);
        // The output bias already is the label mean; nothing can improve on it
        // by more than rounding, so the entry parameters may be kept.
        if r.stages[0].best_epoch.is_none() {
            assert_eq!(net, before);
        }
    }

    #[test]
    fn stages_follow_the_staircase() {
        let ds = scene(4, 4);
        let mut net = fresh(quiet(ds.n_sub, ds.n_ant), &ds, 1);
        let s = TrainSchedule::staircase(&[2, 4, 8], 2, 5);
        let r = train(&mut net, &ds, &ds, &s).unwrap();
        assert_eq!(r.stages.len(), 3);
        let bs: Vec<usize> = r.stages.iter().map(|s| s.batch_size).collect();
        assert_eq!(bs, [2, 4, 8]);
        assert!(r.stages.windows(2).all(|w| w[1].lr <= w[0].lr));
        assert_eq!(r.epochs.len(), 6);
        for (i, e) in r.epochs.iter().enumerate() {
            assert_eq!(e.epoch, i);
            assert_eq!(e.stage, i / 2);
        }
        assert_eq!(r.to_csv().lines().count(), 7);
    }

    #[test]
    fn training_is_deterministic_across_thread_counts() {
        let ds = scene(5, 5);
        let s = TrainSchedule::staircase(&[16, 32], 2, 9);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut net = fresh(NetConfig::desk(ds.n_sub, ds.n_ant), &ds, 4);
                let r = train(&mut net, &ds, &ds, &s).unwrap();
                (net, r.to_csv())
            })
        };
        let (a, ca) = run(1);
        let (b, cb) = run(3);
        assert_eq!(ca, cb);
        assert_eq!(a, b);
    }

    #[test]
    fn augmentation_noise_is_fresh_each_epoch() {
        let csi = scene(2, 2).samples[0].csi.clone();
        let a = noisy_csi(&csi, 20.0, rng::derive(7, &[STREAM_NOISE, 0, 0]));
        let b = noisy_csi(&csi, 20.0, rng::derive(7, &[STREAM_NOISE, 1, 0]));
        assert_ne!(a, b);
        assert_eq!(a, noisy_csi(&csi, 20.0, rng::derive(7, &[STREAM_NOISE, 0, 0])));
    }

    #[test]
    fn noise_keeps_zeros_and_hits_the_snr() {
        let mut csi = vec![Complex32::new(0.6, -0.8); 4000];
        csi[..100].fill(Complex32::new(0.0, 0.0));
        assert_eq!(noisy_csi(&csi, f64::INFINITY, 1), csi);
        let noisy = noisy_csi(&csi, 10.0, 1);
        assert!(noisy[..100].iter().all(|z| *z == Complex32::new(0.0, 0.0)));
        let p: f64 = noisy[100..]
            .iter()
            .zip(&csi[100..])
            .map(|(a, b)| (a - b).norm_sqr() as f64)
            .sum::<f64>()
            / 3900.0;
        let snr = 10.0 * (1.0 / p).log10();
        assert!((snr - 10.0).abs() < 0.2, "{snr}");
    }

    #[test]
    fn empty_finetune_is_identity() {
        let ds = scene(3, 3);
        let mut net = fresh(quiet(ds.n_sub, ds.n_ant), &ds, 1);
        let before = net.clone();
        let r = finetune(&mut net, &ds.subset(&[]), None, &FinetuneSchedule::default()).unwrap();
        assert!(r.epochs.is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn random_method_equals_plain_training() {
        let ds = scene(4, 4);
        let cfg = NetConfig::desk(ds.n_sub, ds.n_ant);
        let s = TrainSchedule::staircase(&[4, 8], 2, 3);
        let (a, ra) = pretrain_transfer(&cfg, &ds, &ds, &PretrainMethod::Random, None, &s, 11).unwrap();
        let mut b = fresh(cfg, &ds, 11);
        let rb = train(&mut b, &ds, &ds, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.to_csv(), rb.to_csv());
    }

    #[test]
    fn subset_pretraining_concatenates_histories() {
        let ds = scene(3, 3);
        let cfg = NetConfig::desk(ds.n_sub, ds.n_ant);
        let s = TrainSchedule::staircase(&[4, 8], 2, 3);
        let method = PretrainMethod::SubcarrierSubset { n_keep: ds.n_sub, masks: 2 };
        let (_, r) = pretrain_transfer(&cfg, &ds, &ds, &method, None, &s, 1).unwrap();
        assert_eq!(r.stages.len(), 4);
        assert_eq!(r.epochs.len(), 8);
        assert!(r.epochs.iter().enumerate().all(|(i, e)| e.epoch == i));
        let bad = PretrainMethod::SubcarrierSubset { n_keep: ds.n_sub + 1, masks: 1 };
        assert!(pretrain_transfer(&cfg, &ds, &ds, &bad, None, &s, 1).is_err());
        let sim = pretrain_transfer(&cfg, &ds, &ds, &PretrainMethod::SimulatedPretrain, None, &s, 1);
        assert!(matches!(sim, Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let ds = scene(3, 3);
        let mut net = fresh(NetConfig::desk(64, 8), &ds, 1);
        let s = TrainSchedule::single_stage(4, 1e-3, 1, 0);
        assert!(matches!(train(&mut net, &ds, &ds, &s), Err(Error::Shape(_))));
    }
}
