use std::path::Path;

use num_complex::Complex32;
use rand::Rng as _;
use rayon::prelude::*;

use super::config::{NetConfig, OUTPUT_WIDTH};
use crate::autodiff::{
    checkpoint_id, decode_checkpoint, encode_checkpoint, Padding, Parameter, Scalar, Tape, Tensor, Var,
};
use crate::config::KvFile;
use crate::dataset::CsiDataset;
use crate::error::{shape, Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitMethod {
    #[default]
    XavierUniform,
    Zeros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Phase,
    Head,
}

/// One weight layer: parameters `2·index` (weights) and `2·index + 1` (bias).
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
    pub weight_shape: Vec<usize>,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        self.weight_shape.iter().product::<usize>() + self.weight_shape.last().copied().unwrap_or(0)
    }

    fn fans(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Conv => {
                let s = &self.weight_shape;
                (s[0] * s[1] * s[2], s[0] * s[1] * s[3])
            }
            _ => (self.weight_shape[0], self.weight_shape[1]),
        }
    }
}

/// Layer table for a configuration, in parameter order.
pub fn layers(cfg: &NetConfig) -> Result<Vec<Layer>> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut cin = 2;
    for (i, &c) in cfg.conv_channels.iter().enumerate() {
        let (kh, kw) = if i == 0 { cfg.first_kernel } else { cfg.cell_kernel };
        out.push(Layer {
            name: format!("conv{i}"),
            kind: LayerKind::Conv,
            weight_shape: vec![kh, kw, cin, c],
        });
        cin = c;
    }
    if cfg.phase_branch {
        let mut n = cfg.n_ant;
        for (i, &w) in cfg.phase_widths.iter().enumerate() {
            out.push(Layer {
                name: format!("phase{i}"),
                kind: LayerKind::Phase,
                weight_shape: vec![n, w],
            });
            n = w;
        }
    }
    let mut n = cfg.conv_flat_width()? + cfg.phase_out_width();
    let widths = cfg.head_widths.iter().copied().chain([OUTPUT_WIDTH]);
    for (i, w) in widths.enumerate() {
        out.push(Layer {
            name: format!("head{i}"),
            kind: LayerKind::Head,
            weight_shape: vec![n, w],
        });
        n = w;
    }
    Ok(out)
}

/// Per-snapshot RMS normalisation and transposition from antenna-major
/// complex storage into a `[B, n_sub, n_ant, 2]` tensor.
pub fn assemble_batch(csis: &[&[Complex32]], n_sub: usize, n_ant: usize) -> Result<Tensor<f32>> {
    let per = n_sub * n_ant;
    let mut data = vec![0f32; csis.len() * per * 2];
    for (b, csi) in csis.iter().enumerate() {
        if csi.len() != per {
            return shape(format!("snapshot has {} entries, expected {per}", csi.len()));
        }
        let power: f64 = csi.iter().map(|c| c.norm_sqr() as f64).sum::<f64>() / per as f64;
        let scale = if power > 0.0 { (1.0 / power.sqrt()) as f32 } else { 0.0 };
        let out = &mut data[b * per * 2..(b + 1) * per * 2];
        for m in 0..n_ant {
            for k in 0..n_sub {
                let c = csi[m * n_sub + k];
                let o = (k * n_ant + m) * 2;
                out[o] = c.re * scale;
                out[o + 1] = c.im * scale;
            }
        }
    }
    Tensor::new(vec![csis.len(), n_sub, n_ant, 2], data)
}

/// Forward pass over tape variables.
///
/// `params` are the parameter leaves in [`layers`] order (weights, bias per
/// layer). Stochastic input layers are active only when `training`.
pub fn forward<T: Scalar>(
    cfg: &NetConfig,
    tape: &mut Tape<T>,
    params: &[Var],
    input: Var,
    training: bool,
    seed: u64,
) -> Result<Var> {
    let s = tape.value(input).shape();
    if s.len() != 4 || s[1] != cfg.n_sub || s[2] != cfg.n_ant || s[3] != 2 {
        return shape(format!(
            "input {s:?} does not match [B, {}, {}, 2]",
            cfg.n_sub, cfg.n_ant
        ));
    }
    let expected = 2 * layers(cfg)?.len();
    if params.len() != expected {
        return shape(format!("expected {expected} parameter tensors, got {}", params.len()));
    }
    let mut p = params.chunks(2);
    let mut next = || {
        let c = p.next().expect("length checked");
        (c[0], c[1])
    };

    let x = tape.gaussian_noise(input, cfg.noise_sigma, training, rng::derive(seed, &[1]))?;
    let x = tape.dropout(x, cfg.dropout, training, rng::derive(seed, &[2]))?;

    let mut h = x;
    for (i, &(ph, pw)) in cfg.pools.iter().enumerate() {
        let (w, b) = next();
        let stride = if i == 0 { cfg.first_stride } else { (1, 1) };
        h = tape.conv2d(h, w, stride, Padding::Same)?;
        h = tape.bias_add(h, b)?;
        h = tape.relu(h);
        if (ph, pw) != (1, 1) {
            h = tape.avg_pool(h, ph, pw)?;
        }
    }
    let mut feat = tape.flatten(h)?;

    if cfg.phase_branch {
        let mut ph = tape.phase_features(x)?;
        for _ in &cfg.phase_widths {
            let (w, b) = next();
            ph = tape.dense(ph, w, b)?;
            ph = tape.relu(ph);
        }
        feat = tape.concat(feat, ph, 1)?;
    }

    let n_head = cfg.head_widths.len() + 1;
    for i in 0..n_head {
        let (w, b) = next();
        feat = tape.dense(feat, w, b)?;
        if i + 1 < n_head {
            feat = tape.relu(feat);
        }
    }
    Ok(feat)
}

/// The dual-branch positioning network: config plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PositioningNet {
    pub config: NetConfig,
    pub layers: Vec<Layer>,
    pub params: Vec<Parameter>,
}

impl PositioningNet {
    pub fn build(config: NetConfig, init: InitMethod, seed: u64) -> Result<Self> {
        let layers = layers(&config)?;
        let mut params = Vec::with_capacity(layers.len() * 2);
        for (li, layer) in layers.iter().enumerate() {
            let n: usize = layer.weight_shape.iter().product();
            let w = match init {
                InitMethod::Zeros => vec![0f32; n],
                InitMethod::XavierUniform => {
                    let (fi, fo) = layer.fans();
                    let limit = (6.0 / (fi + fo) as f64).sqrt();
                    let mut r = rng::rng_for(seed, &[li as u64]);
                    (0..n).map(|_| r.gen_range(-limit..limit) as f32).collect()
                }
            };
            let cout = *layer.weight_shape.last().unwrap();
            params.push(Parameter::new(
                format!("{}.weight", layer.name),
                Tensor::new(layer.weight_shape.clone(), w)?,
            ));
            params.push(Parameter::new(format!("{}.bias", layer.name), Tensor::zeros(&[cout])));
        }
        Ok(Self { config, layers, params })
    }

    /// Parameter count per layer, in order.
    pub fn layer_param_counts(&self) -> Vec<(String, usize)> {
        self.layers.iter().map(|l| (l.name.clone(), l.param_count())).collect()
    }

    pub fn total_params(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Weights that exist only because of the phase branch: its dense layers
    /// and the first head layer's rows that consume the branch output.
    pub fn phase_branch_params(&self) -> usize {
        if !self.config.phase_branch {
            return 0;
        }
        let branch: usize = self
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::Phase)
            .map(Layer::param_count)
            .sum();
        branch + self.config.phase_out_width() * self.first_head_width()
    }

    fn first_head_width(&self) -> usize {
        self.config.head_widths.first().copied().unwrap_or(OUTPUT_WIDTH)
    }

    /// Index of the output layer's bias parameter.
    fn output_bias_index(&self) -> usize {
        self.params.len() - 1
    }

    pub fn output_bias(&self) -> [f32; 3] {
        let d = self.params[self.output_bias_index()].value.data();
        [d[0], d[1], d[2]]
    }

    /// Sets the output bias to the mean training label so that an untrained
    /// network predicts the centre of the area.
    pub fn init_output_bias(&mut self, labels: &[[f64; 3]]) {
        if labels.is_empty() {
            return;
        }
        let n = labels.len() as f64;
        let mut mean = [0f64; 3];
        for l in labels {
            for (m, v) in mean.iter_mut().zip(l) {
                *m += v / n;
            }
        }
        let i = self.output_bias_index();
        for (d, m) in self.params[i].value.data_mut().iter_mut().zip(mean) {
            *d = m as f32;
        }
    }

    /// Puts every parameter on `tape` and returns the leaves.
    pub fn leaves<T: Scalar>(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.cast::<T>())).collect()
    }

    /// Forward pass on a prepared batch; returns `[B, 3]` positions.
    pub fn forward_batch(&self, batch: &Tensor<f32>, training: bool, seed: u64) -> Result<Tensor<f32>> {
        let mut tape = Tape::new();
        let params = self.leaves(&mut tape);
        let x = tape.leaf(batch.clone());
        let out = forward(&self.config, &mut tape, &params, x, training, seed)?;
        Ok(tape.value(out).clone())
    }

    /// Inference over a whole dataset (no stochastic layers).
    pub fn predict(&self, ds: &CsiDataset) -> Result<Vec<[f64; 3]>> {
        self.predict_csi(&ds.samples.iter().map(|s| s.csi.as_slice()).collect::<Vec<_>>())
    }

    /// Inference over raw antenna-major snapshots.
    pub fn predict_csi(&self, csis: &[&[Complex32]]) -> Result<Vec<[f64; 3]>> {
        const CHUNK: usize = 32;
        let (ns, na) = (self.config.n_sub, self.config.n_ant);
        let parts: Vec<Vec<[f64; 3]>> = csis
            .par_chunks(CHUNK)
            .map(|chunk| {
                let batch = assemble_batch(chunk, ns, na)?;
                let out = self.forward_batch(&batch, false, 0)?;
                Ok(out
                    .data()
                    .chunks(OUTPUT_WIDTH)
                    .map(|r| [r[0] as f64, r[1] as f64, r[2] as f64])
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(parts.concat())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut kv = KvFile::default();
        self.config.to_kv(&mut kv, "net");
        let tensors: Vec<(&str, &Tensor<f32>)> =
            self.params.iter().map(|p| (p.name.as_str(), &p.value)).collect();
        encode_checkpoint(&kv.to_string(), &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, tensors) = decode_checkpoint(bytes)?;
        let kv = KvFile::parse(&meta)?;
        let config = NetConfig::from_kv(&kv, "net", &NetConfig::default())?;
        let mut net = Self::build(config, InitMethod::Zeros, 0)?;
        if tensors.len() != net.params.len() {
            return Err(Error::Corrupt(format!(
                "checkpoint has {} tensors, config implies {}",
                tensors.len(),
                net.params.len()
            )));
        }
        for (p, (name, t)) in net.params.iter_mut().zip(tensors) {
            if p.name != name || p.value.shape() != t.shape() {
                return Err(Error::Corrupt(format!(
                    "checkpoint tensor {name} {:?} does not match {} {:?}",
                    t.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = t;
        }
        Ok(net)
    }

    /// Content id of the current parameters.
    pub fn checkpoint_id(&self) -> String {
        checkpoint_id(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        std::fs::write(path, &bytes)?;
        Ok(checkpoint_id(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::from_bytes(&bytes)
    }

    /// Copies parameter values from `other` (same architecture).
    pub fn copy_params_from(&mut self, other: &PositioningNet) -> Result<()> {
        if self.layers != other.layers {
            return Err(Error::Config("cannot copy parameters between different architectures".into()));
        }
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            p.value = q.value.clone();
        }
        Ok(())
    }
}

/// Circular-mean phase features of a prepared batch.
pub fn phase_features(batch: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut tape = Tape::<f32>::new();
    let x = tape.leaf(batch.clone());
    let p = tape.phase_features(x)?;
    Ok(tape.value(p).clone())
}
