//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria can be selected by number: `cargo test --test acceptance -- 1 4 10`.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use csiloc::autodiff::{grad_check, Padding, Tape, Tensor, Var};
use csiloc::dataset::{self, CsiDataset};
use csiloc::error::Result;
use csiloc::eval::{mda, mde, SweepTable};
use csiloc::experiment::{self, Command, ExperimentConfig};
use csiloc::model::{forward, InitMethod, NetConfig, PositioningNet};
use csiloc::rng;
use csiloc::sim::{
    add_awgn, synth_csi, ArrayGeometry, Environment, OfdmConfig, Rect, Scatterer, Vec3,
    SPEED_OF_LIGHT,
};
use csiloc::train::noisy_csi;
use num_complex::{Complex32, Complex64};
use rand::Rng as _;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

type Criterion = (usize, &'static str, fn() -> Result<Verdict>);

const CRITERIA: &[Criterion] = &[
    (1, "autodiff gradients match finite differences", c1_gradients),
    (2, "kernels match independent oracles", c2_oracles),
    (3, "simulator physics", c3_physics),
    (4, "parameter budget", c4_budget),
    (5, "phase branch lowers LoS MDE by >= 10 %", c5_phase_branch),
    (6, "more antennas help", c6_antennas),
    (7, "sparse grids hurt NLoS more than LoS", c7_sample_distance),
    (8, "finetuning recovers half the drift gap", c8_finetune),
    (9, "pre-training is no worse than random init", c9_pretrain),
    (10, "reruns are byte-identical", c10_reproducible),
];

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for &(n, name, run) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let v = run().unwrap_or_else(|e| Verdict {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !v.pass {
            failed += 1;
        }
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let secs = t.elapsed().as_secs_f64();
        let _ = writeln!(out, "criterion {n:>2} {tag}: {name}: {} ({secs:.1} s)", v.detail);
        let _ = out.flush();
    }
    if failed > 0 {
        let _ = writeln!(out, "{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn random(shape: &[usize], lo: f64, hi: f64, r: &mut rng::Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| r.gen_range(lo..hi)).collect()).unwrap()
}

/// Values in ±[0.05, 1]: keeps ReLU probes away from the kink.
fn off_zero(shape: &[usize], r: &mut rng::Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = r.gen_range(0.05..1.0);
            if r.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Quadratic-regime Huber loss against a fixed random target, used to turn
/// any node into a scalar with non-trivial upstream gradients.
fn reduce(t: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = t.value(y).shape().to_vec();
    let target = random(&shape, -1.0, 1.0, &mut rng::rng(seed));
    let c = t.constant(target);
    t.huber_loss(y, c, 1e3)
}

fn run_in(root: &Path, command: Command, text: &str) -> Result<std::path::PathBuf> {
    let cfg = ExperimentConfig::parse(text, &[])?;
    let out = experiment::run(command, &cfg, root)?;
    Ok(out.run_dir.expect("commands that take a config create a run directory"))
}

fn sweep(text: &str) -> Result<SweepTable> {
    experiment::run_sweep(&ExperimentConfig::parse(text, &[])?)
}

/// Training settings shared by the trend criteria: a three-step staircase
/// from the full schedule's first to its last learning rate.
const TREND_SCHEDULE: &str = "
[schedule]
batch_sizes = 16,64,512
max_epochs = 15
patience = 5
";

// ---------------------------------------------------------------- criteria

fn c1_gradients() -> Result<Verdict> {
    type Graph = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>;
    let mut r = rng::rng(101);
    let x4 = off_zero(&[2, 6, 5, 3], &mut r);
    let layers: Vec<(&str, Graph, Vec<Tensor<f64>>)> = vec![
        (
            "conv2d same stride 2x1",
            Box::new(|t, v| {
                let y = t.conv2d(v[0], v[1], (2, 1), Padding::Same)?;
                reduce(t, y, 1)
            }),
            vec![x4.clone(), random(&[3, 3, 3, 4], -1.0, 1.0, &mut r)],
        ),
        (
            "conv2d valid",
            Box::new(|t, v| {
                let y = t.conv2d(v[0], v[1], (1, 2), Padding::Valid)?;
                reduce(t, y, 2)
            }),
            vec![x4.clone(), random(&[2, 3, 3, 2], -1.0, 1.0, &mut r)],
        ),
        (
            "bias_add",
            Box::new(|t, v| {
                let y = t.bias_add(v[0], v[1])?;
                reduce(t, y, 3)
            }),
            vec![x4.clone(), random(&[3], -1.0, 1.0, &mut r)],
        ),
        (
            "dense",
            Box::new(|t, v| {
                let y = t.dense(v[0], v[1], v[2])?;
                reduce(t, y, 4)
            }),
            vec![
                random(&[3, 5], -1.0, 1.0, &mut r),
                random(&[5, 4], -1.0, 1.0, &mut r),
                random(&[4], -1.0, 1.0, &mut r),
            ],
        ),
        (
            "relu",
            Box::new(|t, v| {
                let y = t.relu(v[0]);
                reduce(t, y, 5)
            }),
            vec![x4.clone()],
        ),
        (
            "avg_pool",
            Box::new(|t, v| {
                let y = t.avg_pool(v[0], 2, 2)?;
                reduce(t, y, 6)
            }),
            vec![x4.clone()],
        ),
        (
            "dropout",
            Box::new(|t, v| {
                let y = t.dropout(v[0], 0.3, true, 9)?;
                reduce(t, y, 7)
            }),
            vec![x4.clone()],
        ),
        (
            "gaussian_noise",
            Box::new(|t, v| {
                let y = t.gaussian_noise(v[0], 0.2, true, 9)?;
                reduce(t, y, 8)
            }),
            vec![x4.clone()],
        ),
        (
            "flatten + concat",
            Box::new(|t, v| {
                let a = t.flatten(v[0])?;
                let y = t.concat(a, v[1], 1)?;
                reduce(t, y, 9)
            }),
            vec![x4.clone(), random(&[2, 4], -1.0, 1.0, &mut r)],
        ),
        (
            "reshape + mean_axis",
            Box::new(|t, v| {
                let a = t.reshape(v[0], &[2, 90])?;
                let y = t.mean_axis(a, 0)?;
                reduce(t, y, 10)
            }),
            vec![x4.clone()],
        ),
        (
            "add + add_const + sum",
            Box::new(|t, v| {
                let a = t.add(v[0], v[1])?;
                let b = t.add_const(a, &[0.5, -0.25, 1.0])?;
                let s = t.sum(b);
                let sq = t.reshape(s, &[1, 1])?;
                reduce(t, sq, 11)
            }),
            vec![random(&[2, 3], -1.0, 1.0, &mut r), random(&[2, 3], -1.0, 1.0, &mut r)],
        ),
        (
            "huber_loss (both regimes)",
            Box::new(|t, v| t.huber_loss(v[0], v[1], 0.7)),
            vec![random(&[4, 3], -2.0, 2.0, &mut r), random(&[4, 3], -2.0, 2.0, &mut r)],
        ),
        (
            "phase_features",
            Box::new(|t, v| {
                let y = t.phase_features(v[0])?;
                reduce(t, y, 12)
            }),
            vec![random(&[2, 7, 4, 2], -1.0, 1.0, &mut r)],
        ),
    ];
    let mut worst = (0.0f64, "");
    for (name, graph, inputs) in &layers {
        let e = grad_check(graph, inputs, 1e-6, 400, 7)?;
        if e > worst.0 {
            worst = (e, name);
        }
    }

    let cfg = NetConfig::desk(32, 8);
    let net = PositioningNet::build(cfg.clone(), InitMethod::XavierUniform, 21)?;
    let mut inputs = vec![random(&[2, 32, 8, 2], -1.0, 1.0, &mut r)];
    inputs.extend(net.params.iter().map(|p| p.value.cast::<f64>()));
    let target = random(&[2, 3], -1.0, 1.0, &mut r);
    let mut e2e = 0.0f64;
    for training in [true, false] {
        let e = grad_check(
            |t, v| {
                let y = t.constant(target.clone());
                let out = forward(&cfg, t, &v[1..], v[0], training, 5)?;
                t.huber_loss(out, y, 1.0)
            },
            &inputs,
            1e-6,
            12,
            23,
        )?;
        e2e = e2e.max(e);
    }
    verdict(
        worst.0 < 1e-5 && e2e < 1e-5,
        format!(
            "{} layers, worst {:.2e} ({}); end-to-end 8x32 model {:.2e}; limit 1e-5",
            layers.len(),
            worst.0,
            worst.1,
            e2e
        ),
    )
}

/// Direct NHWC convolution with the same zero-padding split as `Padding::Same`.
fn conv_oracle(
    x: &[f64],
    [b, h, w, cin]: [usize; 4],
    k: &[f64],
    [kh, kw, _, cout]: [usize; 4],
    (sh, sw): (usize, usize),
    same: bool,
) -> (Vec<f64>, usize, usize) {
    let (oh, ow, pt, pl) = if same {
        let (oh, ow) = (h.div_ceil(sh), w.div_ceil(sw));
        let ph = ((oh - 1) * sh + kh).saturating_sub(h);
        let pw = ((ow - 1) * sw + kw).saturating_sub(w);
        (oh, ow, ph / 2, pw / 2)
    } else {
        ((h - kh) / sh + 1, (w - kw) / sw + 1, 0, 0)
    };
    let mut y = vec![0.0; b * oh * ow * cout];
    for n in 0..b {
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for u in 0..kh {
                        for v in 0..kw {
                            let (yi, xj) = ((i * sh + u) as isize - pt as isize, (j * sw + v) as isize - pl as isize);
                            if yi < 0 || xj < 0 || yi >= h as isize || xj >= w as isize {
                                continue;
                            }
                            for c in 0..cin {
                                let xv = x[((n * h + yi as usize) * w + xj as usize) * cin + c];
                                acc += xv * k[((u * kw + v) * cin + c) * cout + o];
                            }
                        }
                    }
                    y[((n * oh + i) * ow + j) * cout + o] = acc;
                }
            }
        }
    }
    (y, oh, ow)
}

fn c2_oracles() -> Result<Verdict> {
    let mut r = rng::rng(202);
    let instances = 30;

    let mut conv_err = 0.0f64;
    for _ in 0..instances {
        let (b, h, w, cin, cout) = (
            r.gen_range(1..3),
            r.gen_range(1..10),
            r.gen_range(1..10),
            r.gen_range(1..4),
            r.gen_range(1..5),
        );
        let (kh, kw) = (r.gen_range(1..6), r.gen_range(1..6));
        let stride = (r.gen_range(1..4), r.gen_range(1..4));
        let same = r.gen_bool(0.5) || kh > h || kw > w;
        let x = random(&[b, h, w, cin], -1.0, 1.0, &mut r);
        let k = random(&[kh, kw, cin, cout], -1.0, 1.0, &mut r);
        let (want, oh, ow) = conv_oracle(x.data(), [b, h, w, cin], k.data(), [kh, kw, cin, cout], stride, same);
        // the f32 training path against the f64 oracle
        let mut t = Tape::<f32>::new();
        let xv = t.leaf(x.cast());
        let kv = t.leaf(k.cast());
        let pad = if same { Padding::Same } else { Padding::Valid };
        let y = t.conv2d(xv, kv, stride, pad)?;
        if t.value(y).shape() != [b, oh, ow, cout] {
            return verdict(false, format!("conv output shape {:?}", t.value(y).shape()));
        }
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let diff = t
            .value(y)
            .data()
            .iter()
            .zip(&want)
            .fold(0.0f64, |m, (a, b)| m.max((*a as f64 - b).abs()));
        conv_err = conv_err.max(diff / scale);
    }

    let mut mde_err = 0.0f64;
    let mut mda_exact = true;
    for _ in 0..instances {
        let n = r.gen_range(1..400);
        let mut pt = || [r.gen_range(-30.0..30.0), r.gen_range(-30.0..30.0), r.gen_range(-3.0..3.0)];
        let preds: Vec<[f64; 3]> = (0..n).map(|_| pt()).collect();
        let labels: Vec<[f64; 3]> = (0..n).map(|_| pt()).collect();
        let mut des = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let (dx, dy, dz) = (
                preds[i][0] - labels[i][0],
                preds[i][1] - labels[i][1],
                preds[i][2] - labels[i][2],
            );
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            des.push(d);
            total += d;
        }
        let want_mde = total / n as f64;
        mde_err = mde_err.max((mde(&preds, &labels)? - want_mde).abs() / want_mde);
        des.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want_mda = if n % 2 == 1 { des[n / 2] } else { (des[n / 2 - 1] + des[n / 2]) / 2.0 };
        mda_exact &= mda(&preds, &labels)? == want_mda;
    }

    let mut phase_err = 0.0f64;
    for _ in 0..instances {
        let (b, ns, na) = (r.gen_range(1..4), r.gen_range(1..40), r.gen_range(1..9));
        let mut x = random(&[b, ns, na, 2], -1.0, 1.0, &mut r);
        // sprinkle exact zeros (guard bands) and one all-zero antenna column
        let zero_ant = r.gen_range(0..na);
        for bi in 0..b {
            for k in 0..ns {
                for m in 0..na {
                    if m == zero_ant && na > 1 || r.gen_bool(0.2) {
                        let i = ((bi * ns + k) * na + m) * 2;
                        x.data_mut()[i] = 0.0;
                        x.data_mut()[i + 1] = 0.0;
                    }
                }
            }
        }
        let mut t = Tape::<f64>::new();
        let xv = t.leaf(x.clone());
        let y = t.phase_features(xv)?;
        for bi in 0..b {
            for m in 0..na {
                let (mut sr, mut si) = (0.0f64, 0.0f64);
                for k in 0..ns {
                    let i = ((bi * ns + k) * na + m) * 2;
                    let z = Complex64::new(x.data()[i], x.data()[i + 1]);
                    if z.norm() > 0.0 {
                        sr += z.re / z.norm();
                        si += z.im / z.norm();
                    }
                }
                let want = if sr == 0.0 && si == 0.0 { 0.0 } else { si.atan2(sr) };
                let got = t.value(y).data()[bi * na + m];
                let d = (got - want).abs();
                phase_err = phase_err.max(d.min((d - 2.0 * std::f64::consts::PI).abs()));
            }
        }
    }

    verdict(
        conv_err <= 1e-5 && mde_err <= 1e-12 && mda_exact && phase_err <= 1e-6,
        format!(
            "{instances} instances each: conv2d rel {conv_err:.2e} (<=1e-5), mde rel {mde_err:.2e} (<=1e-12), \
             mda exact {mda_exact}, phase features {phase_err:.2e} (<=1e-6)"
        ),
    )
}

fn c3_physics() -> Result<Verdict> {
    let area = Rect::new(0.5, -3.0, 6.0, 3.0);
    let ofdm = OfdmConfig {
        n_subcarriers: 64,
        ..OfdmConfig::default()
    };
    let array = ArrayGeometry::half_wavelength(2, 4, ofdm.carrier_freq)?;
    let ue = Vec3::new(3.7, 1.1, -1.2);
    let los_only = Environment {
        los_enabled: true,
        scatterers: vec![],
        area,
        pedestrians: vec![],
    };
    let h = synth_csi(&los_only, &array, &ofdm, ue)?;
    let wrap = |a: f64| {
        let t = std::f64::consts::TAU;
        a - t * ((a + std::f64::consts::PI) / t).floor()
    };
    let mut slope_err = 0.0f64;
    for m in 0..array.n_antennas() {
        let tau = array.element_position(m).distance(ue) / SPEED_OF_LIGHT;
        let want = wrap(-std::f64::consts::TAU * ofdm.subcarrier_spacing() * tau);
        for k in 0..ofdm.n_subcarriers - 1 {
            let got = (h.at(m, k + 1) * h.at(m, k).conj()).arg();
            let d = (got - want).abs();
            slope_err = slope_err.max(d.min(std::f64::consts::TAU - d));
        }
    }

    let scat = |seed: u64| Environment::random_scatterers(&area, 5, (0.3, 1.0), (-1.5, 1.5), seed);
    let (s1, s2) = (scat(1), scat(2));
    let env = |los: bool, s: Vec<Scatterer>| Environment {
        los_enabled: los,
        scatterers: s,
        area,
        pedestrians: vec![],
    };
    let a = synth_csi(&env(true, s1.clone()), &array, &ofdm, ue)?;
    let b = synth_csi(&env(false, s2.clone()), &array, &ofdm, ue)?;
    let both = synth_csi(&env(true, [s1, s2].concat()), &array, &ofdm, ue)?;
    let scale = both.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let sup_err = both
        .values
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .fold(0.0f64, |m, (ab, (x, y))| m.max((ab - (x + y)).norm()))
        / scale;

    // empirical SNR of both noise paths over 10^4 snapshots
    let target = 10.0;
    let snaps = 10_000;
    let signal = h.mean_power();
    let (mut sim_noise, mut train_noise) = (0.0f64, 0.0f64);
    let h32: Vec<Complex32> = h.values.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
    let p32 = h32.iter().map(|z| z.norm_sqr() as f64).sum::<f64>() / h32.len() as f64;
    for s in 0..snaps {
        let n = add_awgn(&h, target, s as u64);
        sim_noise += n.values.iter().zip(&h.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        let n32 = noisy_csi(&h32, target, s as u64);
        train_noise += n32.iter().zip(&h32).map(|(a, b)| (a - b).norm_sqr() as f64).sum::<f64>();
    }
    let count = (snaps * h.values.len()) as f64;
    let snr_sim = 10.0 * (signal / (sim_noise / count)).log10();
    let snr_train = 10.0 * (p32 / (train_noise / count)).log10();
    let snr_ok = (snr_sim - target).abs() <= 0.1 && (snr_train - target).abs() <= 0.1;

    verdict(
        slope_err <= 1e-9 && sup_err <= 1e-12 && snr_ok,
        format!(
            "phase slope {slope_err:.2e} rad (<=1e-9), superposition rel {sup_err:.2e} (<=1e-12), \
             AWGN {snr_sim:.3}/{snr_train:.3} dB for {target} dB target (+-0.1)"
        ),
    )
}

fn c4_budget() -> Result<Verdict> {
    let net = PositioningNet::build(NetConfig::default(), InitMethod::Zeros, 0)?;
    let (total, phase) = (net.total_params(), net.phase_branch_params());
    verdict(
        (400_000..=480_000).contains(&total) && (18_000..=26_000).contains(&phase),
        format!("total {total} in [400k, 480k], phase branch {phase} in [18k, 26k]"),
    )
}

fn c5_phase_branch() -> Result<Verdict> {
    let t = sweep(&format!(
        "[experiment]\nseed = 5\n[preset]\nbase = desk-los\n[sweep]\nkind = phase-ablation\nreplicates = 3\neval_snrs =\n{TREND_SCHEDULE}"
    ))?;
    let (with, without) = (t.median_mde(0), t.median_mde(1));
    let gain = 1.0 - with / without;
    verdict(
        gain >= 0.10,
        format!("median MDE with {with:.4} m, without {without:.4} m, reduction {:.1} % (>= 10 %)", 100.0 * gain),
    )
}

fn c6_antennas() -> Result<Verdict> {
    let nlos = sweep(&format!(
        "[experiment]\nseed = 6\n[preset]\nbase = desk-nlos-wide\n[sweep]\nkind = antenna\nantennas = 8,32\nreplicates = 3\neval_snrs =\n{TREND_SCHEDULE}"
    ))?;
    let los = sweep(&format!(
        "[experiment]\nseed = 6\n[preset]\nbase = desk-los-wide\nsnr_db = 20\n[sweep]\nkind = antenna\nantennas = 8,16,32\nreplicates = 3\neval_snrs =\n{TREND_SCHEDULE}"
    ))?;
    let nlos_mda = [nlos.median_mda(8), nlos.median_mda(32)];
    let los_mde = [los.median_mde(8), los.median_mde(16), los.median_mde(32)];
    verdict(
        nlos_mda[1] < nlos_mda[0] && los_mde[1] <= los_mde[0] && los_mde[2] <= los_mde[1],
        format!(
            "NLoS MDA 8/32 ant: {:.4}/{:.4} m (strictly decreasing); LoS MDE 8/16/32 ant: {:.4}/{:.4}/{:.4} m (non-increasing)",
            nlos_mda[0], nlos_mda[1], los_mde[0], los_mde[1], los_mde[2]
        ),
    )
}

fn c7_sample_distance() -> Result<Verdict> {
    let run = |base: &str| -> Result<f64> {
        let t = sweep(&format!(
            "[experiment]\nseed = 7\n[preset]\nbase = {base}\n[sweep]\nkind = sample-distance\nstrides = 1,4\nreplicates = 3\neval_snrs =\n{TREND_SCHEDULE}"
        ))?;
        Ok(t.median_mde(4) / t.median_mde(1) - 1.0)
    };
    let (nlos, los) = (run("desk-nlos")?, run("desk-los")?);
    verdict(
        nlos > los,
        format!(
            "MDE degradation stride 1 -> 4: NLoS {:.1} %, LoS {:.1} % (NLoS must be larger)",
            100.0 * nlos,
            100.0 * los
        ),
    )
}

fn c8_finetune() -> Result<Verdict> {
    let t = sweep(&format!(
        "[experiment]\nseed = 8\n[preset]\nbase = desk-los\n[sweep]\nkind = finetune\ndrift_day = 1\ncalib_samples = 125\nreplicates = 3\n{TREND_SCHEDULE}"
    ))?;
    let (base, drifted, tuned) = (t.median_mda(0), t.median_mda(1), t.median_mda(2));
    let recovered = (drifted - tuned) / (drifted - base);
    verdict(
        drifted > base && recovered >= 0.5,
        format!(
            "median MDA baseline {base:.4} m, drifted {drifted:.4} m, finetuned on 125 samples {tuned:.4} m; \
             recovered {:.0} % of the gap (>= 50 %)",
            100.0 * recovered
        ),
    )
}

fn c9_pretrain() -> Result<Verdict> {
    let t = sweep(&format!(
        "[experiment]\nseed = 9\n[preset]\nbase = desk-los\n[sweep]\nkind = pretrain\ntarget_stride = 4\nreplicates = 3\n\
         methods = random,simulated-pretrain,subcarrier-subset-pretrain\n{TREND_SCHEDULE}"
    ))?;
    let (random, sim, subset) = (t.median_mda(0), t.median_mda(1), t.median_mda(2));
    verdict(
        sim <= random && subset <= random,
        format!("median MDA random {random:.4} m, simulated pre-training {sim:.4} m, subcarrier-subset {subset:.4} m"),
    )
}

fn same_csvs(a: &Path, b: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(a)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for n in &names {
        if std::fs::read(a.join(n))? != std::fs::read(b.join(n))? {
            differing.push(n.clone());
        }
    }
    Ok(if names.is_empty() { vec!["<no csv>".into()] } else { differing })
}

fn c10_reproducible() -> Result<Verdict> {
    let tmp = tempfile::tempdir()?;
    let root = tmp.path().join("runs");
    let base = "
[experiment]
name = repro
seed = 10
[preset]
base = desk-los
[ofdm]
subcarriers = 32
[array]
rows = 2
cols = 4
[grid]
nx = 12
ny = 12
[schedule]
batch_sizes = 8,32
max_epochs = 3
[sweep]
kind = antenna
antennas = 4,8
replicates = 2
eval_snrs = 0,20
";
    let mut checked = Vec::new();
    let mut differing = Vec::new();
    let train_dir = run_in(&root, Command::Train, base)?;
    let ckpt = train_dir.join("model.ckpt");
    let with_model = format!("{base}[model]\ncheckpoint = {}\n[finetune]\nsamples = 20\nmax_epochs = 2\n", ckpt.display());
    let first = [
        (Command::Train, train_dir),
        (Command::Sweep, run_in(&root, Command::Sweep, base)?),
        (Command::Eval, run_in(&root, Command::Eval, &with_model)?),
        (Command::Finetune, run_in(&root, Command::Finetune, &with_model)?),
    ];
    for (cmd, dir) in &first {
        let text = std::fs::read_to_string(dir.join("config.txt"))?;
        let again = run_in(&root, *cmd, &text)?;
        checked.push(cmd.name());
        differing.extend(same_csvs(dir, &again)?.into_iter().map(|f| format!("{}/{f}", cmd.name())));
    }

    // dataset persistence
    let preset = ExperimentConfig::parse(base, &[])?.preset;
    let ds = dataset::generate(&preset)?;
    let path = tmp.path().join("d.csid");
    dataset::save(&ds, &path)?;
    let back: CsiDataset = dataset::load(&path)?;
    let bits = |d: &CsiDataset| -> Vec<u32> {
        d.samples
            .iter()
            .flat_map(|s| s.csi.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
            .collect()
    };
    let labels = |d: &CsiDataset| -> Vec<u64> {
        d.samples.iter().flat_map(|s| s.label.map(f64::to_bits)).collect()
    };
    let roundtrip = bits(&ds) == bits(&back)
        && labels(&ds) == labels(&back)
        && std::fs::read(&path)? == dataset::encode(&back)?;

    verdict(
        differing.is_empty() && roundtrip,
        format!(
            "reran {} from their run-directory configs: {}; dataset round trip bit-exact: {roundtrip}",
            checked.join(", "),
            if differing.is_empty() { "all CSVs identical".to_string() } else { format!("differ: {}", differing.join(" ")) }
        ),
    )
}
