//! Config-driven experiments.
//!
//! Every command reads one plain-text config (see [`KvFile`]), resolves it
//! into an [`ExperimentConfig`], and writes its outputs into a fresh run
//! directory named after the command, the experiment name and a hash of the
//! resolved config. The directory holds a copy of that config, so running
//! the same command on `<run>/config.txt` reproduces every CSV byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{preset_from_kv, KvFile};
use crate::dataset::{self, CsiDataset};
use crate::error::{Error, Result};
use crate::eval::{
    antenna_sweep_on, cell_seed, evaluate, run_cells, run_replicates, sample_distance_sweep_on,
    train_and_evaluate, CellResult, EvalMeta, EvalReport, PreparedData, SweepSpec, SweepTable,
};
use crate::model::{NetConfig, PositioningNet};
use crate::rng;
use crate::sim::Preset;
use crate::train::{
    finetune, pretrain_transfer, FinetuneSchedule, PretrainMethod, TrainReport, TrainSchedule,
};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CSILOC_OUT";
pub const DEFAULT_OUT: &str = "runs";

const SEED_SPLIT: u64 = 1;
const SEED_INIT: u64 = 2;
const SEED_SCHEDULE: u64 = 3;
const SEED_EVAL: u64 = 4;
const SEED_CALIB: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Gen,
    Train,
    Finetune,
    Eval,
    Sweep,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::Finetune => "finetune",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Antenna,
    SampleDistance,
    PhaseAblation,
    Finetune,
    Pretrain,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "antenna" => SweepKind::Antenna,
            "sample-distance" => SweepKind::SampleDistance,
            "phase-ablation" => SweepKind::PhaseAblation,
            "finetune" => SweepKind::Finetune,
            "pretrain" => SweepKind::Pretrain,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep kind '{other}' (antenna, sample-distance, phase-ablation, finetune, pretrain)"
                )))
            }
        })
    }
}

/// Sweep settings (`[sweep]` section).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub kind: SweepKind,
    pub antennas: Vec<usize>,
    pub strides: Vec<usize>,
    pub replicates: usize,
    pub eval_snrs: Vec<f64>,
    /// Calibration set sizes for the finetune sweep.
    pub calib_samples: Vec<usize>,
    /// Day whose drift is applied in the finetune sweep.
    pub drift_day: u32,
    pub methods: Vec<PretrainMethod>,
    /// Grid stride of the target set in the pretrain sweep.
    pub target_stride: usize,
    /// Scene seed of the simulated pre-training environment.
    pub sim_scene_seed: u64,
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Resolved source, written to every run directory.
    pub kv: KvFile,
    pub name: String,
    pub seed: u64,
    pub jobs: usize,
    pub preset: Preset,
    /// Dataset file; when absent the preset is generated.
    pub dataset: Option<PathBuf>,
    /// Output file of `gen`; defaults to the run directory.
    pub gen_path: Option<PathBuf>,
    pub test_fraction: f64,
    pub val_fraction: f64,
    /// `data.reference_phase`: phases relative to the first antenna.
    pub reference_phase: bool,
    /// Network template; resized to the data.
    pub net: NetConfig,
    pub schedule: TrainSchedule,
    pub finetune: FinetuneSchedule,
    /// Calibration set size for `finetune`.
    pub calib_samples: usize,
    /// Checkpoint read by `eval` and `finetune`.
    pub checkpoint: Option<PathBuf>,
    /// Whether `eval` scores the whole dataset or only the test split.
    pub eval_all: bool,
    pub eval_snr: f64,
    pub sweep: SweepParams,
}

fn parse_methods(v: &str, n_keep: usize, masks: usize) -> Result<Vec<PretrainMethod>> {
    v.split(',')
        .map(|m| match m.trim() {
            "random" => Ok(PretrainMethod::Random),
            "simulated-pretrain" => Ok(PretrainMethod::SimulatedPretrain),
            "subcarrier-subset-pretrain" => Ok(PretrainMethod::SubcarrierSubset { n_keep, masks }),
            other => Err(Error::Config(format!("unknown pre-training method '{other}'"))),
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_kv(kv: KvFile) -> Result<Self> {
        let seed = kv.value_or("experiment", "seed", 0u64)?;
        let preset = preset_from_kv(&kv)?;
        let (n_sub, n_ant) = (preset.ofdm.n_subcarriers, preset.array.n_antennas());
        let net_base = match kv.get("net", "base").unwrap_or("desk") {
            "desk" => NetConfig::desk(n_sub, n_ant),
            "full" => NetConfig::sized_for(n_sub, n_ant),
            other => return Err(Error::Config(format!("unknown net base '{other}' (desk, full)"))),
        };
        let sched_base = TrainSchedule {
            seed: rng::derive(seed, &[SEED_SCHEDULE]),
            ..TrainSchedule::default()
        };
        let ft_base = FinetuneSchedule {
            seed: rng::derive(seed, &[SEED_SCHEDULE, 1]),
            ..FinetuneSchedule::default()
        };
        let n_keep = kv.value_or("sweep", "n_keep", (n_sub / 2).max(1))?;
        let masks = kv.value_or("sweep", "masks", 4usize)?;
        let sweep = SweepParams {
            kind: SweepKind::parse(kv.get("sweep", "kind").unwrap_or("antenna"))?,
            antennas: kv.parse_list("sweep", "antennas")?.unwrap_or_else(|| vec![n_ant]),
            strides: kv.parse_list("sweep", "strides")?.unwrap_or_else(|| vec![1, 2, 3, 4]),
            replicates: kv.value_or("sweep", "replicates", 3usize)?,
            eval_snrs: kv.parse_list("sweep", "eval_snrs")?.unwrap_or_else(|| vec![0.0, 10.0, 20.0, 30.0]),
            calib_samples: kv.parse_list("sweep", "calib_samples")?.unwrap_or_else(|| vec![125]),
            drift_day: kv.value_or("sweep", "drift_day", 1u32)?,
            methods: parse_methods(
                kv.get("sweep", "methods")
                    .unwrap_or("random,simulated-pretrain,subcarrier-subset-pretrain"),
                n_keep,
                masks,
            )?,
            target_stride: kv.value_or("sweep", "target_stride", 4usize)?,
            sim_scene_seed: kv.value_or("sweep", "sim_scene_seed", preset.seed.wrapping_add(1000))?,
        };
        let cfg = Self {
            name: kv.get("experiment", "name").unwrap_or(&preset.name).to_string(),
            seed,
            jobs: kv.value_or("experiment", "jobs", 1usize)?,
            dataset: kv.get("data", "path").map(PathBuf::from),
            gen_path: kv.get("gen", "path").map(PathBuf::from),
            test_fraction: kv.value_or("data", "test_fraction", 0.2)?,
            val_fraction: kv.value_or("data", "val_fraction", 0.1)?,
            reference_phase: kv.value_or("data", "reference_phase", true)?,
            net: NetConfig::from_kv(&kv, "net", &net_base)?,
            schedule: TrainSchedule::from_kv(&kv, "schedule", &sched_base)?,
            finetune: FinetuneSchedule::from_kv(&kv, "finetune", &ft_base)?,
            calib_samples: kv.value_or("finetune", "samples", 125usize)?,
            checkpoint: kv.get("model", "checkpoint").map(PathBuf::from),
            eval_all: kv.get("eval", "split").unwrap_or("test") == "all",
            eval_snr: kv.value_or("eval", "snr_db", preset.snr_db)?,
            sweep,
            preset,
            kv,
        };
        for (what, f) in [("test", cfg.test_fraction), ("validation", cfg.val_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{what} fraction {f} not in (0, 1)")));
            }
        }
        if cfg.sweep.replicates == 0 {
            return Err(Error::Config("sweep.replicates must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Parses `text`, applies `section.key=value` overrides, then resolves.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        for o in overrides {
            kv.apply_override(o)?;
        }
        Self::from_kv(kv)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text, overrides)
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            net: self.net.clone(),
            schedule: self.schedule.clone(),
            replicates: self.sweep.replicates,
            test_fraction: self.test_fraction,
            reference_phase: self.reference_phase,
            val_fraction: self.val_fraction,
            eval_snrs: self.sweep.eval_snrs.clone(),
            seed: self.seed,
            jobs: self.jobs,
        }
    }

    /// Named seeds used by the run, for the run directory.
    pub fn seeds_csv(&self) -> String {
        let rows = [
            ("master", self.seed),
            ("preset", self.preset.seed),
            ("drift", self.preset.drift_seed),
            ("split", rng::derive(self.seed, &[SEED_SPLIT])),
            ("init", rng::derive(self.seed, &[SEED_INIT])),
            ("schedule", self.schedule.seed),
            ("finetune", self.finetune.seed),
            ("eval_noise", rng::derive(self.seed, &[SEED_EVAL])),
        ];
        let mut s = String::from("name,seed\n");
        for (n, v) in rows {
            let _ = writeln!(s, "{n},{v}");
        }
        s
    }

    fn data(&self) -> Result<CsiDataset> {
        match &self.dataset {
            Some(p) => dataset::load(p),
            None => dataset::generate(&self.preset),
        }
    }

    fn prepared(&self) -> Result<PreparedData> {
        PreparedData::new(&self.preset, &self.data()?, self.test_fraction, self.reference_phase, self.seed)
    }

    fn checkpoint(&self) -> Result<PositioningNet> {
        let path = self
            .checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("model.checkpoint is required for this command".into()))?;
        PositioningNet::load(path)
    }

    fn meta(&self, n_ant: usize) -> EvalMeta {
        EvalMeta {
            preset: self.preset.name.clone(),
            antennas: n_ant,
            stride: 1,
            snr_db: self.eval_snr,
        }
    }
}

/// A created run directory.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<root>/<command>-<name>-<hash>`; if that exists (a rerun),
    /// a numbered sibling is used so earlier outputs are never overwritten.
    pub fn create(root: &Path, command: Command, cfg: &ExperimentConfig) -> Result<Self> {
        let text = cfg.kv.to_string();
        let digest = Sha256::digest(format!("{}\n{text}", command.name()).as_bytes());
        let hash = &hex::encode(digest)[..12];
        let safe: String = cfg
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let base = format!("{}-{safe}-{hash}", command.name());
        std::fs::create_dir_all(root)?;
        let mut n = 1;
        let path = loop {
            let name = if n == 1 { base.clone() } else { format!("{base}.{n}") };
            let p = root.join(name);
            match std::fs::create_dir(&p) {
                Ok(()) => break p,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(e.into()),
            }
        };
        let dir = Self { path };
        dir.write("config.txt", &text)?;
        dir.write("seeds.csv", &cfg.seeds_csv())?;
        Ok(dir)
    }

    pub fn write(&self, file: &str, contents: &str) -> Result<()> {
        std::fs::write(self.path.join(file), contents)?;
        Ok(())
    }

    pub fn file(&self, file: &str) -> PathBuf {
        self.path.join(file)
    }
}

/// Result of a command: its run directory and human-readable lines.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub run_dir: Option<PathBuf>,
    pub lines: Vec<String>,
}

/// Output root: explicit flag, else the environment variable, else `runs`.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn eval_csvs(dir: &RunDir, prefix: &str, rep: &EvalReport) -> Result<()> {
    dir.write(&format!("{prefix}.csv"), &rep.summary_csv())?;
    dir.write(&format!("{prefix}_cdf.csv"), &rep.cdf_csv())
}

/// Generates the preset and writes a CSID file (plus manifest).
pub fn cmd_gen(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    let ds = dataset::generate(&cfg.preset)?;
    let (run_dir, path) = match &cfg.gen_path {
        Some(p) => (None, p.clone()),
        None => {
            let dir = RunDir::create(root, Command::Gen, cfg)?;
            let p = dir.file(&format!("{}.csid", cfg.preset.name));
            (Some(dir.path), p)
        }
    };
    dataset::save(&ds, &path)?;
    let a = cfg.preset.grid.coverage();
    Ok(Outcome {
        run_dir,
        lines: vec![
            format!("wrote {}", path.display()),
            format!(
                "preset {}: {} samples, {} antennas x {} subcarriers",
                cfg.preset.name,
                ds.len(),
                ds.n_ant,
                ds.n_sub
            ),
            format!(
                "area x [{}, {}] m, y [{}, {}] m ({} m x {} m)",
                a.x_min,
                a.x_max,
                a.y_min,
                a.y_max,
                a.width(),
                a.height()
            ),
        ],
    })
}

/// Trains on the training pool, evaluates on the held-out test split.
pub fn cmd_train(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    let data = cfg.prepared()?;
    let dir = RunDir::create(root, Command::Train, cfg)?;
    let (tr, va) = data.pool.split(cfg.val_fraction, rng::derive(cfg.seed, &[SEED_SPLIT, 1]))?;
    let net_cfg = cfg.net.resized(tr.n_sub, tr.n_ant);
    let mut net = PositioningNet::build(
        net_cfg,
        crate::model::InitMethod::XavierUniform,
        rng::derive(cfg.seed, &[SEED_INIT]),
    )?;
    net.init_output_bias(&tr.labels());
    let report = crate::train::train(&mut net, &tr, &va, &cfg.schedule).map_err(|e| {
        if let Error::NonFiniteLoss { partial_report, .. } = &e {
            let _ = dir.write("train.csv", partial_report);
        }
        e
    })?;
    finish_training(cfg, &dir, &net, &report, &data.test)
}

fn finish_training(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    net: &PositioningNet,
    report: &TrainReport,
    test: &CsiDataset,
) -> Result<Outcome> {
    let id = net.save(&dir.file("model.ckpt"))?;
    dir.write("train.csv", &report.to_csv())?;
    dir.write("summary.csv", &report.summary_csv())?;
    let rep = evaluate(net, test, cfg.eval_snr, rng::derive(cfg.seed, &[SEED_EVAL]), cfg.meta(test.n_ant))?;
    eval_csvs(dir, "eval", &rep)?;
    let params = net
        .layer_param_counts()
        .iter()
        .map(|(n, c)| format!("{n}={c}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Outcome {
        run_dir: Some(dir.path.clone()),
        lines: vec![
            format!("parameters: {} ({params})", net.total_params()),
            format!(
                "trained {} epochs over {} stages in {:.1} s, checkpoint {id}",
                report.epochs.len(),
                report.stages.len(),
                report.wall_clock_secs
            ),
            format!("test ({} samples @ {} dB): mde {:.4} m, mda {:.4} m", rep.des.len(), rep.meta.snr_db, rep.mde, rep.mda),
        ],
    })
}

/// Finetunes a checkpoint on calibration samples drawn from the training
/// pool of the configured data, and scores the test split before and after.
pub fn cmd_finetune(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    let mut net = cfg.checkpoint()?;
    let data = cfg.prepared()?;
    let dir = RunDir::create(root, Command::Finetune, cfg)?;
    let calib = data.pool.sample_n(cfg.calib_samples, rng::derive(cfg.seed, &[SEED_CALIB]));
    let noise = rng::derive(cfg.seed, &[SEED_EVAL]);
    let before = evaluate(&net, &data.test, cfg.eval_snr, noise, cfg.meta(data.test.n_ant))?;
    let report = finetune(&mut net, &calib, None, &cfg.finetune)?;
    let after = evaluate(&net, &data.test, cfg.eval_snr, noise, cfg.meta(data.test.n_ant))?;
    let id = net.save(&dir.file("model.ckpt"))?;
    dir.write("finetune.csv", &report.to_csv())?;
    dir.write(
        "eval.csv",
        &format!(
            "stage,calib_samples,mde,mda\nbefore,{n},{},{}\nafter,{n},{},{}\n",
            before.mde,
            before.mda,
            after.mde,
            after.mda,
            n = calib.len()
        ),
    )?;
    Ok(Outcome {
        run_dir: Some(dir.path.clone()),
        lines: vec![
            format!("finetuned on {} samples for {} epochs, checkpoint {id}", calib.len(), report.epochs.len()),
            format!("mda {:.4} m -> {:.4} m, mde {:.4} m -> {:.4} m", before.mda, after.mda, before.mde, after.mde),
        ],
    })
}

/// Scores a checkpoint on the test split (or the whole dataset with
/// `eval.split = all`).
pub fn cmd_eval(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    let net = cfg.checkpoint()?;
    let ds = if cfg.eval_all {
        cfg.data()?
    } else {
        cfg.prepared()?.test
    };
    let dir = RunDir::create(root, Command::Eval, cfg)?;
    let rep = evaluate(&net, &ds, cfg.eval_snr, rng::derive(cfg.seed, &[SEED_EVAL]), cfg.meta(ds.n_ant))?;
    eval_csvs(&dir, "eval", &rep)?;
    Ok(Outcome {
        run_dir: Some(dir.path.clone()),
        lines: vec![format!(
            "{} samples @ {} dB: mde {:.4} m, mda {:.4} m",
            rep.des.len(),
            rep.meta.snr_db,
            rep.mde,
            rep.mda
        )],
    })
}

/// Runs the configured sweep and writes `sweep.csv` (medians per swept
/// value) and `cells.csv` (one row per trained network).
pub fn cmd_sweep(cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    let table = run_sweep(cfg)?;
    let dir = RunDir::create(root, Command::Sweep, cfg)?;
    let csv = table.to_csv();
    dir.write("sweep.csv", &csv)?;
    dir.write("cells.csv", &table.cells_csv())?;
    Ok(Outcome {
        run_dir: Some(dir.path.clone()),
        lines: csv.lines().map(str::to_string).collect(),
    })
}

/// Runs the sweep selected by `cfg.sweep.kind`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    let spec = cfg.sweep_spec();
    match cfg.sweep.kind {
        SweepKind::Antenna => antenna_sweep_on(&cfg.preset, &cfg.prepared()?, &cfg.sweep.antennas, &spec),
        SweepKind::SampleDistance => sample_distance_sweep_on(&cfg.prepared()?, &cfg.sweep.strides, &spec),
        SweepKind::PhaseAblation => phase_ablation(&cfg.prepared()?, &spec),
        SweepKind::Finetune => finetune_sweep(cfg, &spec),
        SweepKind::Pretrain => pretrain_sweep(cfg, &spec),
    }
}

/// Paired trainings with (key 0) and without (key 1) the phase branch.
pub fn phase_ablation(data: &PreparedData, spec: &SweepSpec) -> Result<SweepTable> {
    let cells = run_cells(&[0, 1], spec.replicates, spec.jobs, |key, r| {
        let spec = SweepSpec {
            net: if key == 0 { spec.net.clone() } else { spec.net.disable_phase_branch() },
            ..spec.clone()
        };
        let meta = EvalMeta {
            preset: data.preset.clone(),
            antennas: data.pool.n_ant,
            stride: 1,
            snr_db: data.snr_db,
        };
        // Both variants of a replicate share their seeds.
        let seed = cell_seed(spec.seed, 3, 0, r);
        Ok(train_and_evaluate(&spec, &data.pool, &data.test, data.snr_db, meta, seed)?.1)
    })?;
    Ok(SweepTable {
        key_name: "phase_branch".into(),
        key_labels: vec!["with".into(), "without".into()],
        snrs: spec.eval_snrs.clone(),
        cells,
    })
}

/// Keys of the finetune sweep: 0 baseline (undrifted test), 1 drifted test
/// without finetuning, `2 + i` drifted test after finetuning on
/// `calib_samples[i]` samples.
pub fn finetune_sweep(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepTable> {
    let base_preset = Preset { day: 0, ..cfg.preset.clone() };
    let day = cfg.sweep.drift_day.max(1);
    let drift_preset = Preset { day, ..cfg.preset.clone() };
    let base = PreparedData::generate(&base_preset, spec.test_fraction, spec.reference_phase, spec.seed)?;
    let drifted = PreparedData::generate(&drift_preset, spec.test_fraction, spec.reference_phase, spec.seed)?;
    let counts = cfg.sweep.calib_samples.clone();
    let cells = run_replicates(spec.replicates, spec.jobs, |r| {
        let meta = EvalMeta {
            preset: base.preset.clone(),
            antennas: base.pool.n_ant,
            stride: 1,
            snr_db: base.snr_db,
        };
        let seed = cell_seed(spec.seed, 4, 0, r);
        let (net, c0) = train_and_evaluate(spec, &base.pool, &base.test, base.snr_db, meta.clone(), seed)?;
        let noise = rng::derive(spec.seed, &[SEED_EVAL]);
        let score = |net: &PositioningNet, key: usize, n: usize| -> Result<CellResult> {
            let rep = evaluate(net, &drifted.test, drifted.snr_db, noise, meta.clone())?;
            Ok(CellResult {
                key,
                replicate: r,
                n_train: n,
                mde: rep.mde,
                mda: rep.mda,
                mde_by_snr: Vec::new(),
                epochs: 0,
            })
        };
        let mut cells = vec![
            CellResult {
                mde_by_snr: Vec::new(),
                ..c0
            },
            score(&net, 1, 0)?,
        ];
        for (i, &n) in counts.iter().enumerate() {
            let calib = drifted.pool.sample_n(n, rng::derive(seed, &[SEED_CALIB, n as u64]));
            let mut ft = net.clone();
            let sched = FinetuneSchedule {
                seed: rng::derive(seed, &[SEED_SCHEDULE, n as u64]),
                ..cfg.finetune.clone()
            };
            let rep = finetune(&mut ft, &calib, None, &sched)?;
            let mut c = score(&ft, 2 + i, calib.len())?;
            c.epochs = rep.epochs.len();
            cells.push(c);
        }
        Ok(cells)
    })?;
    let mut labels = vec!["baseline".to_string(), format!("day{day}-no-finetune")];
    labels.extend(counts.iter().map(|n| format!("day{day}-finetune-{n}")));
    Ok(SweepTable {
        key_name: "condition".into(),
        key_labels: labels,
        snrs: Vec::new(),
        cells,
    })
}

/// Compares initialisation protocols on a grid-thinned target set. Key `i`
/// is `cfg.sweep.methods[i]`. The simulated pre-training set comes from the
/// same room geometry with an independently drawn scatterer layout.
pub fn pretrain_sweep(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepTable> {
    let data = cfg.prepared()?;
    let target = data.pool.subsample_grid(cfg.sweep.target_stride)?;
    let (tr, va) = target.split(spec.val_fraction, rng::derive(spec.seed, &[SEED_SPLIT, 2]))?;
    let methods = &cfg.sweep.methods;
    let sim = if methods.contains(&PretrainMethod::SimulatedPretrain) {
        let mut p = Preset::scene(
            &format!("{}-sim", cfg.preset.name),
            cfg.preset.environment.los_enabled,
            cfg.preset.environment.area,
            1,
            1,
            cfg.preset.array.rows,
            cfg.preset.array.cols,
            cfg.preset.ofdm.n_subcarriers,
            cfg.sweep.sim_scene_seed,
        )?;
        p.grid = cfg.preset.grid.clone();
        p.ue_height = cfg.preset.ue_height;
        let ds = dataset::generate(&p)?;
        let ds = ds.zero_guard_bands(p.ofdm.guard_fraction)?;
        Some(if cfg.reference_phase { ds.reference_phase() } else { ds })
    } else {
        None
    };
    let keys: Vec<usize> = (0..methods.len()).collect();
    let net_cfg = spec.net.resized(tr.n_sub, tr.n_ant);
    let cells = run_cells(&keys, spec.replicates, spec.jobs, |key, r| {
        let seed = cell_seed(spec.seed, 5, 0, r);
        let schedule = TrainSchedule {
            seed: rng::derive(seed, &[1]),
            ..spec.schedule.clone()
        };
        let (net, report) = pretrain_transfer(
            &net_cfg,
            &tr,
            &va,
            &methods[key],
            sim.as_ref(),
            &schedule,
            rng::derive(seed, &[0]),
        )?;
        let meta = EvalMeta {
            preset: data.preset.clone(),
            antennas: tr.n_ant,
            stride: cfg.sweep.target_stride,
            snr_db: data.snr_db,
        };
        let rep = evaluate(&net, &data.test, data.snr_db, rng::derive(spec.seed, &[SEED_EVAL]), meta)?;
        Ok(CellResult {
            key,
            replicate: r,
            n_train: tr.len(),
            mde: rep.mde,
            mda: rep.mda,
            mde_by_snr: Vec::new(),
            epochs: report.epochs.len(),
        })
    })?;
    Ok(SweepTable {
        key_name: "method".into(),
        key_labels: methods.iter().map(|m| m.name().to_string()).collect(),
        snrs: Vec::new(),
        cells,
    })
}

/// Summarises an existing run directory.
pub fn cmd_report(run_dir: &Path) -> Result<Outcome> {
    let config = run_dir.join("config.txt");
    if !config.is_file() {
        return Err(Error::MissingFile(config.display().to_string()));
    }
    let mut lines = vec![format!("run {}", run_dir.display())];
    let mut files: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    files.sort();
    for f in files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let show = matches!(name.as_str(), "summary.csv" | "eval.csv" | "sweep.csv");
        lines.push(format!("  {name} ({} bytes)", std::fs::metadata(&f)?.len()));
        if show {
            lines.extend(std::fs::read_to_string(&f)?.lines().map(|l| format!("    {l}")));
        }
    }
    Ok(Outcome { run_dir: Some(run_dir.to_path_buf()), lines })
}

/// Dispatches `command` on a loaded config.
pub fn run(command: Command, cfg: &ExperimentConfig, root: &Path) -> Result<Outcome> {
    match command {
        Command::Gen => cmd_gen(cfg, root),
        Command::Train => cmd_train(cfg, root),
        Command::Finetune => cmd_finetune(cfg, root),
        Command::Eval => cmd_eval(cfg, root),
        Command::Sweep => cmd_sweep(cfg, root),
        Command::Report => Err(Error::Config("report takes a run directory, not a config".into())),
    }
}
