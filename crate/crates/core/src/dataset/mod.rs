//! Labeled CSI datasets, their binary persistence and the transformations
//! applied before training.

mod format;
mod generate;

use num_complex::Complex32;
use rand::seq::{index, SliceRandom};

use crate::error::{domain, shape, Result};
use crate::rng;

pub use format::{decode, encode, encoded_len, load, manifest_path, save, HEADER_LEN, META_LEN};
pub use generate::generate;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleMeta {
    pub day_index: u32,
    pub disturbed: bool,
    /// (row, col) on the sampling grid, when the sample came from one.
    pub grid: Option<(u32, u32)>,
}

/// One fingerprint: CSI (antenna-major, `n_ant × n_sub`) and its position label.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiSample {
    pub csi: Vec<Complex32>,
    pub label: [f64; 3],
    pub meta: SampleMeta,
}

/// Where a dataset came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub preset: String,
    pub seeds: Vec<(String, u64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsiDataset {
    pub n_ant: usize,
    pub n_sub: usize,
    pub samples: Vec<CsiSample>,
    pub provenance: Provenance,
    /// Grid spacing (dx, dy) in meters, if samples lie on a grid.
    pub grid_spacing: Option<(f64, f64)>,
}

impl CsiDataset {
    pub fn new(n_ant: usize, n_sub: usize, samples: Vec<CsiSample>) -> Result<Self> {
        let ds = Self {
            n_ant,
            n_sub,
            samples,
            provenance: Provenance::default(),
            grid_spacing: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let width = self.n_ant * self.n_sub;
        for (i, s) in self.samples.iter().enumerate() {
            if s.csi.len() != width {
                return shape(format!(
                    "sample {i} holds {} values, expected {width}",
                    s.csi.len()
                ));
            }
            if s.label.iter().any(|v| !v.is_finite()) {
                return domain(format!("sample {i} has a non-finite label"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Same header, new samples.
    pub fn with_samples(&self, samples: Vec<CsiSample>) -> Self {
        Self {
            n_ant: self.n_ant,
            n_sub: self.n_sub,
            samples,
            provenance: self.provenance.clone(),
            grid_spacing: self.grid_spacing,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        self.with_samples(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Sets the listed subcarriers (all antennas) to zero in every sample.
    pub fn zero_columns(&self, columns: &[usize]) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            for m in 0..self.n_ant {
                let row = &mut s.csi[m * self.n_sub..(m + 1) * self.n_sub];
                for &k in columns {
                    row[k] = Complex32::new(0.0, 0.0);
                }
            }
        }
        out
    }

    /// Number of subcarriers zeroed at each band edge for `guard_fraction`.
    pub fn guard_width(n_sub: usize, guard_fraction: f64) -> usize {
        let w = (guard_fraction * n_sub as f64 / 2.0 - 1e-9).ceil().max(0.0) as usize;
        w.min(n_sub / 2)
    }

    /// Zeroes the lowest and highest `⌈guard_fraction·N_sub/2⌉` subcarriers.
    pub fn zero_guard_bands(&self, guard_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&guard_fraction) {
            return domain(format!("guard fraction {guard_fraction} not in [0, 1)"));
        }
        let w = Self::guard_width(self.n_sub, guard_fraction);
        let cols: Vec<usize> = (0..w).chain(self.n_sub - w..self.n_sub).collect();
        Ok(self.zero_columns(&cols))
    }

    /// Rotates every subcarrier so antenna 0 has zero phase, leaving
    /// magnitudes untouched. What remains is the phase of each antenna
    /// relative to the first one; a common phase per subcarrier (oscillator
    /// offset, timing slope) drops out. Subcarriers where antenna 0 is zero
    /// are left as they are.
    pub fn reference_phase(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            for k in 0..self.n_sub {
                let r = s.csi[k];
                let n = r.norm();
                if n == 0.0 {
                    continue;
                }
                let rot = r.conj() / n;
                for m in 0..self.n_ant {
                    s.csi[m * self.n_sub + k] *= rot;
                }
            }
        }
        out
    }

    /// Keeps samples whose grid row and column are both multiples of `stride`.
    pub fn subsample_grid(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return domain("grid stride must be >= 1");
        }
        let Some((dx, dy)) = self.grid_spacing else {
            return domain("dataset carries no grid spacing");
        };
        let mut kept = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let Some((r, c)) = s.meta.grid else {
                return domain(format!("sample {i} has no grid index"));
            };
            if r as usize % stride == 0 && c as usize % stride == 0 {
                kept.push(s.clone());
            }
        }
        if kept.is_empty() {
            return domain(format!("stride {stride} leaves no samples"));
        }
        let mut out = self.with_samples(kept);
        out.grid_spacing = Some((dx * stride as f64, dy * stride as f64));
        Ok(out)
    }

    /// Keeps `n_keep` random subcarriers (one mask shared by all samples) and
    /// zeroes the rest. Returns the dataset and the sorted kept indices.
    pub fn subcarrier_subset(&self, n_keep: usize, seed: u64) -> Result<(Self, Vec<usize>)> {
        if n_keep == 0 || n_keep > self.n_sub {
            return domain(format!("n_keep {n_keep} not in 1..={}", self.n_sub));
        }
        let mut r = rng::rng_for(seed, &[0x5B5E]);
        let mut keep = index::sample(&mut r, self.n_sub, n_keep).into_vec();
        keep.sort_unstable();
        let mut drop = vec![true; self.n_sub];
        for &k in &keep {
            drop[k] = false;
        }
        let cols: Vec<usize> = (0..self.n_sub).filter(|&k| drop[k]).collect();
        Ok((self.zero_columns(&cols), keep))
    }

    /// Seeded shuffle, then the first `round(test_fraction·N)` samples go to
    /// the test set. Both parts keep their original relative order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (train, test) = self.split_indices(test_fraction, seed)?;
        Ok((self.subset(&train), self.subset(&test)))
    }

    pub fn split_indices(&self, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return domain(format!("test fraction {test_fraction} not in (0, 1)"));
        }
        if self.len() < 2 {
            return domain("need at least two samples to split");
        }
        let n = self.len();
        let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::rng_for(seed, &[0x5911]));
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Ok((train, test))
    }

    /// `n` samples drawn without replacement (seeded), in original order.
    pub fn sample_n(&self, n: usize, seed: u64) -> Self {
        let n = n.min(self.len());
        let mut idx = index::sample(&mut rng::rng_for(seed, &[0x7A4E]), self.len(), n).into_vec();
        idx.sort_unstable();
        self.subset(&idx)
    }

    /// Restricts every sample to the listed antennas.
    pub fn select_antennas(&self, antennas: &[usize]) -> Result<Self> {
        if antennas.is_empty() {
            return domain("antenna selection is empty");
        }
        if let Some(&bad) = antennas.iter().find(|&&m| m >= self.n_ant) {
            return domain(format!("antenna {bad} out of range for {} antennas", self.n_ant));
        }
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut csi = Vec::with_capacity(antennas.len() * self.n_sub);
                for &m in antennas {
                    csi.extend_from_slice(&s.csi[m * self.n_sub..(m + 1) * self.n_sub]);
                }
                CsiSample { csi, ..s.clone() }
            })
            .collect();
        let mut out = self.with_samples(samples);
        out.n_ant = antennas.len();
        Ok(out)
    }

    /// Number of entries equal to 0+0j over the whole dataset.
    pub fn zero_count(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.csi.iter().filter(|v| v.re == 0.0 && v.im == 0.0).count())
            .sum()
    }
}
