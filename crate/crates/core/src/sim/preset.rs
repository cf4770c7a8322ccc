//! Named simulator presets mirroring the dataset table of the measurement
//! campaign, plus smaller "desk" presets sized for CPU experiments.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;
use crate::sim::array::{ArrayGeometry, OfdmConfig};
use crate::sim::channel::{apply_disturbance, synth_csi, ChannelSnapshot};
use crate::sim::drift::{apply_day_drift, DriftParams, DriftStrength};
use crate::sim::environment::{Environment, Pedestrian};
use crate::sim::geometry::{Rect, Vec3};
use crate::sim::grid::{grid_sample_xy, GridPoint};

/// UE antenna height relative to the array center (the array is mounted
/// 1.2 m above the UE plane).
pub const DEFAULT_UE_HEIGHT: f64 = -1.2;

/// Sampling lattice of a preset. `area` holds the outermost sample positions
/// (inclusive endpoints).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub area: Rect,
    pub dx: f64,
    pub dy: f64,
}

impl GridSpec {
    /// Lattice of `nx × ny` cell centers tiling `cover` exactly.
    pub fn cell_centers(cover: Rect, nx: usize, ny: usize) -> Self {
        let dx = cover.width() / nx as f64;
        let dy = cover.height() / ny as f64;
        Self {
            area: Rect::new(
                cover.x_min + dx / 2.0,
                cover.y_min + dy / 2.0,
                cover.x_max - dx / 2.0,
                cover.y_max - dy / 2.0,
            ),
            dx,
            dy,
        }
    }

    /// Area covered by the grid cells.
    pub fn coverage(&self) -> Rect {
        Rect::new(
            self.area.x_min - self.dx / 2.0,
            self.area.y_min - self.dy / 2.0,
            self.area.x_max + self.dx / 2.0,
            self.area.y_max + self.dy / 2.0,
        )
    }
}

/// Random pedestrians between BS and UE, re-drawn for every sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisturbanceModel {
    pub pedestrians: usize,
    /// Body width of the blocking segment, meters.
    pub width: f64,
    pub attenuation_db: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            pedestrians: 2,
            width: 0.5,
            attenuation_db: 15.0,
        }
    }
}

impl DisturbanceModel {
    /// Places each pedestrian at a random fraction of the BS→UE line with a
    /// lateral offset and a random orientation.
    pub fn sample(&self, ue: Vec3, seed: u64) -> Vec<Pedestrian> {
        let mut rng = rng::rng_for(seed, &[0xBED5]);
        (0..self.pedestrians)
            .map(|_| {
                let t: f64 = rng.gen_range(0.15..0.95);
                let lateral: f64 = rng.gen_range(-0.6..0.6);
                let (ux, uy) = (ue.x, ue.y);
                let len = (ux * ux + uy * uy).sqrt().max(1e-9);
                let cx = t * ux - lateral * uy / len;
                let cy = t * uy + lateral * ux / len;
                let theta: f64 = rng.gen_range(0.0..PI);
                let (s, c) = theta.sin_cos();
                let h = self.width / 2.0;
                Pedestrian {
                    a: [cx - h * c, cy - h * s],
                    b: [cx + h * c, cy + h * s],
                    attenuation_db: self.attenuation_db,
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: String,
    pub environment: Environment,
    pub array: ArrayGeometry,
    pub ofdm: OfdmConfig,
    pub grid: GridSpec,
    pub ue_height: f64,
    /// SNR used when evaluating on this preset.
    pub snr_db: f64,
    pub disturbance: Option<DisturbanceModel>,
    pub day: u32,
    pub drift: DriftStrength,
    /// Seed of the drift draws; day `k` uses `(drift_seed, k)`.
    pub drift_seed: u64,
    /// Seed of the scatterer layout and per-sample disturbances.
    pub seed: u64,
}

/// Scatterer counts of the LoS and NLoS scenes.
const LOS_SCATTERERS: usize = 8;
const NLOS_SCATTERERS: usize = 24;

pub const PRESET_NAMES: &[&str] = &[
    "los-indoor",
    "nlos-indoor",
    "los-weekdays",
    "disturbed",
    "nlos-corridor",
    "desk-los",
    "desk-nlos",
    "desk-los-wide",
    "desk-nlos-wide",
    "day-<k>",
];

impl Preset {
    /// Builds a scene over `cover` with a freshly drawn scatterer layout.
    #[allow(clippy::too_many_arguments)]
    pub fn scene(
        name: &str,
        los: bool,
        cover: Rect,
        nx: usize,
        ny: usize,
        rows: usize,
        cols: usize,
        n_sub: usize,
        seed: u64,
    ) -> Result<Self> {
        let ofdm = OfdmConfig {
            n_subcarriers: n_sub,
            ..OfdmConfig::default()
        };
        let array = ArrayGeometry::half_wavelength(rows, cols, ofdm.carrier_freq)?;
        let n_scat = if los { LOS_SCATTERERS } else { NLOS_SCATTERERS };
        let gain = if los { (0.2, 0.7) } else { (0.4, 1.0) };
        let scatterers = Environment::random_scatterers(&cover, n_scat, gain, (-1.7, 1.5), seed);
        Ok(Self {
            name: name.to_string(),
            environment: Environment {
                los_enabled: los,
                scatterers,
                area: cover,
                pedestrians: vec![],
            },
            array,
            ofdm,
            grid: GridSpec::cell_centers(cover, nx, ny),
            ue_height: DEFAULT_UE_HEIGHT,
            snr_db: 20.0,
            disturbance: None,
            day: 0,
            drift: DriftStrength::default(),
            drift_seed: seed,
            seed,
        })
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        let indoor = Rect::new(1.0, -5.0, 11.0, 5.0);
        let weekdays = Rect::new(1.0, -1.0, 41.0, 1.0);
        let desk = Rect::new(1.0, -2.5, 6.0, 2.5);
        match name {
            "los-indoor" => Self::scene(name, true, indoor, 100, 100, 8, 8, 1024, seed),
            "nlos-indoor" => Self::scene(name, false, indoor, 100, 100, 8, 8, 1024, seed),
            "los-weekdays" => Self::scene(name, true, weekdays, 400, 15, 8, 8, 1024, seed),
            "disturbed" => {
                let mut p = Self::scene(name, true, weekdays, 290, 20, 8, 8, 1024, seed)?;
                p.disturbance = Some(DisturbanceModel::default());
                Ok(p)
            }
            "nlos-corridor" => {
                Self::scene(name, false, Rect::new(1.0, -9.0, 3.0, 9.0), 20, 135, 8, 8, 1024, seed)
            }
            "desk-los" => Self::scene(name, true, desk, 50, 50, 4, 4, 128, seed),
            "desk-nlos" => Self::scene(name, false, desk, 50, 50, 4, 4, 128, seed),
            "desk-los-wide" => Self::scene(name, true, desk, 50, 50, 4, 8, 64, seed),
            "desk-nlos-wide" => Self::scene(name, false, desk, 50, 50, 4, 8, 64, seed),
            other => match other.strip_prefix("day-").map(str::parse::<u32>) {
                Some(Ok(day)) => {
                    let mut p = Self::by_name("los-weekdays", seed)?;
                    p.name = other.to_string();
                    p.day = day;
                    Ok(p)
                }
                _ => Err(Error::Config(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESET_NAMES.join(", ")
                ))),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.environment.validate()?;
        let g = &self.grid;
        let cover = self.environment.area;
        if !(cover.contains(g.area.x_min, g.area.y_min) && cover.contains(g.area.x_max, g.area.y_max))
        {
            return Err(Error::Config(
                "sampling grid extends outside the environment area".into(),
            ));
        }
        Ok(())
    }

    pub fn grid_points(&self) -> Result<Vec<GridPoint>> {
        grid_sample_xy(&self.grid.area, self.grid.dx, self.grid.dy, self.ue_height)
    }

    pub fn day_drift(&self) -> DriftParams {
        DriftParams::for_day(self.day, self.array.n_antennas(), self.drift, self.drift_seed)
    }

    /// Renders the noiseless snapshot for one sample of this preset.
    /// `index` selects the per-sample disturbance draw.
    pub fn snapshot(&self, ue: Vec3, index: u64, drift: &DriftParams) -> Result<ChannelSnapshot> {
        let mut snap = match &self.disturbance {
            Some(model) => {
                let mut env = self.environment.clone();
                env.pedestrians = model.sample(ue, rng::derive(self.seed, &[index]));
                apply_disturbance(&env, &self.array, &self.ofdm, ue)?
            }
            None => synth_csi(&self.environment, &self.array, &self.ofdm, ue)?,
        };
        if self.day != 0 {
            snap = apply_day_drift(&snap, drift, &self.ofdm)?;
        }
        snap.meta.day_index = self.day;
        Ok(snap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_counts() {
        let counts = [
            ("los-indoor", 10_000),
            ("nlos-indoor", 10_000),
            ("los-weekdays", 6000),
            ("disturbed", 5800),
            ("nlos-corridor", 2700),
            ("desk-los", 2500),
        ];
        for (name, n) in counts {
            let p = Preset::by_name(name, 1).unwrap();
            p.validate().unwrap();
            assert_eq!(p.grid_points().unwrap().len(), n, "{name}");
        }
        let c = Preset::by_name("nlos-corridor", 1).unwrap().grid.coverage();
        assert!((c.width() - 2.0).abs() < 1e-9 && (c.height() - 18.0).abs() < 1e-9);
    }

    #[test]
    fn day_presets() {
        let p = Preset::by_name("day-3", 1).unwrap();
        assert_eq!(p.day, 3);
        assert!(Preset::by_name("day-x", 1).is_err());
        assert!(Preset::by_name("nope", 1).is_err());
    }

    #[test]
    fn nlos_has_no_los_and_many_scatterers() {
        let p = Preset::by_name("nlos-indoor", 4).unwrap();
        assert!(!p.environment.los_enabled);
        assert!(p.environment.scatterers.len() >= 20);
    }
}
