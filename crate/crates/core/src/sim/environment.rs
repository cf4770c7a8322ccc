use num_complex::Complex64;
use rand::Rng as _;

use crate::error::{domain, Result};
use crate::rng;
use crate::sim::geometry::{Rect, Vec3};

/// Margin (meters) around the UE area inside which scatterers must lie.
pub const SCATTERER_MARGIN: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Scatterer {
    pub id: u32,
    pub position: Vec3,
    pub reflection_gain: Complex64,
}

/// A blocker modeled as a 2D segment; every path leg crossing it loses
/// `attenuation_db`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pedestrian {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub attenuation_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub los_enabled: bool,
    pub scatterers: Vec<Scatterer>,
    pub area: Rect,
    pub pedestrians: Vec<Pedestrian>,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !self.area.is_valid() {
            return domain("area bounds are not a valid rectangle");
        }
        let bounds = self.area.expanded(SCATTERER_MARGIN);
        for s in &self.scatterers {
            if !s.position.is_finite() || !bounds.contains(s.position.x, s.position.y) {
                return domain(format!("scatterer {} outside the expanded area", s.id));
            }
            if s.reflection_gain.norm() > 1.0 + 1e-12 {
                return domain(format!("scatterer {} has |gain| > 1", s.id));
            }
        }
        for p in &self.pedestrians {
            if !(p.attenuation_db >= 0.0) {
                return domain("pedestrian attenuation must be >= 0 dB");
            }
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        usize::from(self.los_enabled) + self.scatterers.len()
    }

    /// Random scatterer layout around `area`: uniform in the expanded box,
    /// rejecting points inside the UE area (plus `clearance`) or within 1 m of
    /// the array, with gains of random phase and magnitude in `gain_range`.
    pub fn random_scatterers(
        area: &Rect,
        count: usize,
        gain_range: (f64, f64),
        z_range: (f64, f64),
        seed: u64,
    ) -> Vec<Scatterer> {
        let mut rng = rng::rng_for(seed, &[0x5CA7]);
        let outer = area.expanded(SCATTERER_MARGIN);
        let keep_out = area.expanded(0.3);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = rng.gen_range(outer.x_min..=outer.x_max);
            let y = rng.gen_range(outer.y_min..=outer.y_max);
            let z = rng.gen_range(z_range.0..=z_range.1);
            let mag = rng.gen_range(gain_range.0..=gain_range.1);
            let phase = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let p = Vec3::new(x, y, z);
            if keep_out.contains(x, y) || p.norm() < 1.0 {
                continue;
            }
            out.push(Scatterer {
                id: out.len() as u32,
                position: p,
                reflection_gain: Complex64::from_polar(mag, phase),
            });
        }
        out
    }
}
