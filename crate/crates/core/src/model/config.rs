use crate::config::{parse_csv_list, KvFile};
use crate::error::{Error, Result};

/// Shape of the dual-branch positioning network.
///
/// Input is `[B, n_sub, n_ant, 2]` (real/imaginary as channels). The
/// convolutional branch has one cell per entry of `conv_channels`; cell `i`
/// is conv → bias → ReLU → `pools[i]` average pooling. The first cell uses
/// `first_kernel`/`first_stride` over (subcarrier, antenna) and spans both
/// input channels; later cells use `cell_kernel` with stride 1.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub n_sub: usize,
    pub n_ant: usize,
    pub first_kernel: (usize, usize),
    pub first_stride: (usize, usize),
    pub cell_kernel: (usize, usize),
    pub conv_channels: Vec<usize>,
    pub pools: Vec<(usize, usize)>,
    pub phase_branch: bool,
    pub phase_widths: Vec<usize>,
    /// Hidden widths of the head; a linear 3-wide output layer follows.
    pub head_widths: Vec<usize>,
    pub dropout: f64,
    pub noise_sigma: f64,
}

pub const OUTPUT_WIDTH: usize = 3;

impl Default for NetConfig {
    /// Full-size network for 1024 subcarriers × 64 antennas (≈440k weights).
    fn default() -> Self {
        Self {
            n_sub: 1024,
            n_ant: 64,
            first_kernel: (7, 5),
            first_stride: (1, 1),
            cell_kernel: (3, 3),
            conv_channels: vec![16, 16, 24, 24, 32],
            pools: vec![(2, 2); 5],
            phase_branch: true,
            phase_widths: vec![96, 48],
            head_widths: vec![180, 128, 64],
            dropout: 0.10,
            noise_sigma: 0.01,
        }
    }
}

/// Pool sizes that halve each axis while it is at least two long.
fn halving_pools(cells: usize, mut h: usize, mut w: usize) -> Vec<(usize, usize)> {
    (0..cells)
        .map(|_| {
            let ph = if h >= 2 { 2 } else { 1 };
            let pw = if w >= 2 { 2 } else { 1 };
            h /= ph;
            w /= pw;
            (ph, pw)
        })
        .collect()
}

impl NetConfig {
    /// Default architecture with pooling adapted to the given input size.
    pub fn sized_for(n_sub: usize, n_ant: usize) -> Self {
        Self::default().resized(n_sub, n_ant)
    }

    /// Same layer widths for a different input size. Each cell halves an
    /// axis while it is at least two positions long, so small arrays are
    /// pooled down to a single antenna position.
    pub fn resized(&self, n_sub: usize, n_ant: usize) -> Self {
        let h = n_sub.div_ceil(self.first_stride.0.max(1));
        let w = n_ant.div_ceil(self.first_stride.1.max(1));
        Self {
            n_sub,
            n_ant,
            pools: halving_pools(self.conv_channels.len(), h, w),
            ..self.clone()
        }
    }

    /// Narrow variant of the architecture for CPU-scale experiments: same
    /// topology (5 conv cells, 2-layer phase branch, 4-layer head), fewer
    /// channels and a strided first cell along the subcarrier axis.
    pub fn desk(n_sub: usize, n_ant: usize) -> Self {
        Self {
            first_kernel: (7, 5),
            first_stride: (2, 1),
            cell_kernel: (3, 3),
            conv_channels: vec![8, 8, 12, 12, 16],
            phase_branch: true,
            phase_widths: vec![64, 32],
            head_widths: vec![96, 64, 32],
            dropout: 0.10,
            noise_sigma: 0.01,
            ..Self::default()
        }
        .resized(n_sub, n_ant)
    }

    /// Copy without the phase branch; the head input shrinks accordingly.
    pub fn disable_phase_branch(&self) -> Self {
        Self {
            phase_branch: false,
            ..self.clone()
        }
    }

    /// Spatial size after each conv cell (after pooling).
    pub fn cell_dims(&self) -> Result<Vec<(usize, usize)>> {
        let mut h = self.n_sub.div_ceil(self.first_stride.0.max(1));
        let mut w = self.n_ant.div_ceil(self.first_stride.1.max(1));
        let mut dims = Vec::with_capacity(self.pools.len());
        for (i, &(ph, pw)) in self.pools.iter().enumerate() {
            if ph == 0 || pw == 0 || h < ph || w < pw {
                return Err(Error::Config(format!(
                    "conv cell {i}: pooling {ph}x{pw} reduces a {h}x{w} map below 1"
                )));
            }
            h /= ph;
            w /= pw;
            dims.push((h, w));
        }
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sub == 0 || self.n_ant == 0 {
            return bad("input dimensions must be non-zero");
        }
        if self.conv_channels.is_empty() || self.conv_channels.len() != self.pools.len() {
            return bad("need one pool entry per conv cell (and at least one cell)");
        }
        if self.conv_channels.contains(&0) || self.head_widths.contains(&0) {
            return bad("layer widths must be non-zero");
        }
        if self.phase_branch && (self.phase_widths.is_empty() || self.phase_widths.contains(&0)) {
            return bad("phase branch needs non-zero dense widths");
        }
        let k = [self.first_kernel, self.first_stride, self.cell_kernel];
        if k.iter().any(|&(a, b)| a == 0 || b == 0) {
            return bad("kernel and stride sizes must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise sigma must be >= 0");
        }
        self.cell_dims()?;
        Ok(())
    }

    /// Width of the flattened conv branch output.
    pub fn conv_flat_width(&self) -> Result<usize> {
        let &(h, w) = self.cell_dims()?.last().expect("validated non-empty");
        Ok(h * w * self.conv_channels.last().copied().unwrap_or(0))
    }

    pub fn phase_out_width(&self) -> usize {
        if self.phase_branch {
            *self.phase_widths.last().unwrap_or(&0)
        } else {
            0
        }
    }

    pub fn to_kv(&self, kv: &mut KvFile, section: &str) {
        let pair = |p: (usize, usize)| format!("{},{}", p.0, p.1);
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        kv.set(section, "n_sub", &self.n_sub.to_string());
        kv.set(section, "n_ant", &self.n_ant.to_string());
        kv.set(section, "first_kernel", &pair(self.first_kernel));
        kv.set(section, "first_stride", &pair(self.first_stride));
        kv.set(section, "cell_kernel", &pair(self.cell_kernel));
        kv.set(section, "conv_channels", &list(&self.conv_channels));
        let pools: Vec<String> = self.pools.iter().map(|&(a, b)| format!("{a}x{b}")).collect();
        kv.set(section, "pools", &pools.join(","));
        kv.set(section, "phase_branch", &self.phase_branch.to_string());
        kv.set(section, "phase_widths", &list(&self.phase_widths));
        kv.set(section, "head_widths", &list(&self.head_widths));
        kv.set(section, "dropout", &self.dropout.to_string());
        kv.set(section, "noise_sigma", &self.noise_sigma.to_string());
    }

    /// Reads a config from `section`, starting from `base` for missing keys.
    pub fn from_kv(kv: &KvFile, section: &str, base: &NetConfig) -> Result<Self> {
        let pair = |key: &str, d: (usize, usize)| -> Result<(usize, usize)> {
            match kv.get(section, key) {
                None => Ok(d),
                Some(v) => {
                    let xs: Vec<usize> = parse_csv_list(v, section, key)?;
                    match xs[..] {
                        [a, b] => Ok((a, b)),
                        _ => Err(Error::Config(format!("{section}.{key} needs two values"))),
                    }
                }
            }
        };
        let list = |key: &str, d: &[usize]| -> Result<Vec<usize>> {
            Ok(kv.parse_list(section, key)?.unwrap_or_else(|| d.to_vec()))
        };
        let pools = match kv.get(section, "pools") {
            None => base.pools.clone(),
            Some(v) => v
                .split(',')
                .map(|p| {
                    let (a, b) = p.trim().split_once('x').ok_or_else(|| {
                        Error::Config(format!("pool '{p}' is not of the form AxB"))
                    })?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad pool size '{p}'")))
                    };
                    Ok((parse(a)?, parse(b)?))
                })
                .collect::<Result<_>>()?,
        };
        let cfg = Self {
            n_sub: kv.value_or(section, "n_sub", base.n_sub)?,
            n_ant: kv.value_or(section, "n_ant", base.n_ant)?,
            first_kernel: pair("first_kernel", base.first_kernel)?,
            first_stride: pair("first_stride", base.first_stride)?,
            cell_kernel: pair("cell_kernel", base.cell_kernel)?,
            conv_channels: list("conv_channels", &base.conv_channels)?,
            pools,
            phase_branch: kv.value_or(section, "phase_branch", base.phase_branch)?,
            phase_widths: list("phase_widths", &base.phase_widths)?,
            head_widths: list("head_widths", &base.head_widths)?,
            dropout: kv.value_or(section, "dropout", base.dropout)?,
            noise_sigma: kv.value_or(section, "noise_sigma", base.noise_sigma)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
