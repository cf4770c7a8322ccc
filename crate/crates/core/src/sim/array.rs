use crate::error::{domain, Result};
use crate::sim::geometry::Vec3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform rectangular patch array in the y-z plane, centered on `origin`.
///
/// Element `m = row * cols + col` sits at
/// `origin + (0, (col - (cols-1)/2)·d, ((rows-1)/2 - row)·d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub element_spacing: f64,
    pub origin: Vec3,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, element_spacing: f64, origin: Vec3) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain("array needs at least one row and one column");
        }
        if !(element_spacing > 0.0 && element_spacing.is_finite()) {
            return domain(format!("element spacing must be positive, got {element_spacing}"));
        }
        Ok(Self {
            rows,
            cols,
            element_spacing,
            origin,
        })
    }

    /// Half-wavelength spaced array at the origin.
    pub fn half_wavelength(rows: usize, cols: usize, carrier_freq: f64) -> Result<Self> {
        Self::new(rows, cols, SPEED_OF_LIGHT / carrier_freq / 2.0, Vec3::default())
    }

    pub fn n_antennas(&self) -> usize {
        self.rows * self.cols
    }

    pub fn element_position(&self, m: usize) -> Vec3 {
        let (r, c) = (m / self.cols, m % self.cols);
        let dy = (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.element_spacing;
        let dz = ((self.rows as f64 - 1.0) / 2.0 - r as f64) * self.element_spacing;
        self.origin + Vec3::new(0.0, dy, dz)
    }

    pub fn element_positions(&self) -> Vec<Vec3> {
        (0..self.n_antennas()).map(|m| self.element_position(m)).collect()
    }

    /// Antenna indices of the contiguous `sub_rows × sub_cols` sub-rectangle
    /// anchored at element (0, 0).
    pub fn subarray_indices(&self, sub_rows: usize, sub_cols: usize) -> Result<Vec<usize>> {
        if sub_rows == 0 || sub_cols == 0 || sub_rows > self.rows || sub_cols > self.cols {
            return domain(format!(
                "sub-array {sub_rows}x{sub_cols} does not fit a {}x{} array",
                self.rows, self.cols
            ));
        }
        Ok((0..sub_rows)
            .flat_map(|r| (0..sub_cols).map(move |c| r * self.cols + c))
            .collect())
    }

    /// Most square contiguous sub-rectangle holding exactly `count` elements.
    pub fn contiguous_subset(&self, count: usize) -> Result<Vec<usize>> {
        if count == 0 || count > self.n_antennas() {
            return domain(format!(
                "antenna count {count} not in 1..={}",
                self.n_antennas()
            ));
        }
        let best = (1..=self.rows)
            .filter(|r| count % r == 0 && count / r <= self.cols)
            .min_by_key(|&r| (r as i64 - (count / r) as i64).abs());
        match best {
            Some(r) => self.subarray_indices(r, count / r),
            None => domain(format!(
                "no contiguous sub-rectangle of {count} elements in a {}x{} array",
                self.rows, self.cols
            )),
        }
    }
}

/// OFDM numerology. Subcarrier `k` sits at `carrier + (k - n/2)·Δf`.
#[derive(Clone, Debug, PartialEq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub bandwidth: f64,
    pub carrier_freq: f64,
    pub guard_fraction: f64,
    pub cp_fraction: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 1024,
            bandwidth: 20e6,
            carrier_freq: 1.25e9,
            guard_fraction: 0.10,
            cp_fraction: 0.125,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 2 {
            return domain("need at least 2 subcarriers");
        }
        if !(self.bandwidth > 0.0 && self.carrier_freq > 0.0) {
            return domain("bandwidth and carrier frequency must be positive");
        }
        if !(0.0..1.0).contains(&self.guard_fraction) {
            return domain(format!("guard fraction {} not in [0, 1)", self.guard_fraction));
        }
        if !(0.0..1.0).contains(&self.cp_fraction) {
            return domain(format!("cp fraction {} not in [0, 1)", self.cp_fraction));
        }
        Ok(())
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.n_subcarriers as f64
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.carrier_freq + (k as f64 - (self.n_subcarriers / 2) as f64) * self.subcarrier_spacing()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }
}
