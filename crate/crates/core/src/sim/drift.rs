use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{shape, Result};
use crate::rng;
use crate::sim::array::OfdmConfig;
use crate::sim::channel::ChannelSnapshot;

/// Hardware state after a power cycle: per-antenna phase and gain error plus
/// a common timing offset.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftParams {
    pub phase: Vec<f64>,
    pub gain: Vec<f64>,
    pub timing_offset: f64,
    pub seed: u64,
}

/// Spread of the sampled drift parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftStrength {
    /// Std of the per-antenna phase offset, radians.
    pub phase_std: f64,
    /// Std of the per-antenna gain, dB.
    pub gain_std_db: f64,
    /// Std of the timing offset, seconds.
    pub timing_std: f64,
}

impl Default for DriftStrength {
    fn default() -> Self {
        Self {
            phase_std: 0.35,
            gain_std_db: 1.0,
            timing_std: 2e-9,
        }
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_phase(a: f64) -> f64 {
    let w = a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl DriftParams {
    pub fn identity(n_ant: usize) -> Self {
        Self {
            phase: vec![0.0; n_ant],
            gain: vec![1.0; n_ant],
            timing_offset: 0.0,
            seed: 0,
        }
    }

    /// The drift of measurement day `day`. Day 0 is the reference day and has
    /// no drift; other days are sampled from `seed` mixed with the day index.
    pub fn for_day(day: u32, n_ant: usize, strength: DriftStrength, seed: u64) -> Self {
        if day == 0 {
            return Self::identity(n_ant);
        }
        let day_seed = rng::derive(seed, &[0xD41F, u64::from(day)]);
        let mut rng = rng::rng(day_seed);
        let phase_dist = Normal::new(0.0, strength.phase_std.max(0.0)).unwrap();
        let gain_dist = Normal::new(0.0, strength.gain_std_db.max(0.0)).unwrap();
        let phase = (0..n_ant)
            .map(|_| wrap_phase(phase_dist.sample(&mut rng)))
            .collect();
        let gain = (0..n_ant)
            .map(|_| 10f64.powf(gain_dist.sample(&mut rng) / 20.0))
            .collect();
        let timing_offset = if strength.timing_std > 0.0 {
            rng.gen_range(-1.0..=1.0) * strength.timing_std * 3f64.sqrt()
        } else {
            0.0
        };
        Self {
            phase,
            gain,
            timing_offset,
            seed: day_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase.len() != self.gain.len() {
            return shape("drift phase and gain lengths differ");
        }
        if self.gain.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return crate::error::domain("drift gains must be strictly positive");
        }
        if self.phase.iter().any(|&p| !(p > -PI && p <= PI)) {
            return crate::error::domain("drift phases must lie in (-pi, pi]");
        }
        Ok(())
    }
}

/// `h[m][k] ← h[m][k] · gain[m] · exp(j·(phase[m] − 2π·f_k·t₀))`.
pub fn apply_day_drift(
    snap: &ChannelSnapshot,
    drift: &DriftParams,
    ofdm: &OfdmConfig,
) -> Result<ChannelSnapshot> {
    drift.validate()?;
    if drift.phase.len() != snap.n_ant {
        return shape(format!(
            "drift has {} antennas, snapshot has {}",
            drift.phase.len(),
            snap.n_ant
        ));
    }
    if ofdm.n_subcarriers != snap.n_sub {
        return shape("OFDM config does not match the snapshot");
    }
    let mut out = snap.clone();
    let timing: Vec<Complex64> = (0..snap.n_sub)
        .map(|k| {
            let cycles = (ofdm.frequency(k) * drift.timing_offset).fract();
            Complex64::from_polar(1.0, -2.0 * PI * cycles)
        })
        .collect();
    for m in 0..snap.n_ant {
        let c = Complex64::from_polar(drift.gain[m], drift.phase[m]);
        for (v, t) in out.values[m * snap.n_sub..(m + 1) * snap.n_sub]
            .iter_mut()
            .zip(&timing)
        {
            *v *= c * t;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn identity_drift() {
        let ofdm = OfdmConfig {
            n_subcarriers: 4,
            ..OfdmConfig::default()
        };
        let mut s = ChannelSnapshot::zeros(3, 4);
        for (i, v) in s.values.iter_mut().enumerate() {
            *v = Complex64::new(i as f64, -(i as f64));
        }
        let out = apply_day_drift(&s, &DriftParams::identity(3), &ofdm).unwrap();
        assert_eq!(out.values, s.values);
        assert!(apply_day_drift(&s, &DriftParams::identity(2), &ofdm).is_err());
    }

    #[test]
    fn day_draws_are_reproducible_and_valid() {
        let s = DriftStrength::default();
        let a = DriftParams::for_day(3, 16, s, 7);
        assert_eq!(a, DriftParams::for_day(3, 16, s, 7));
        assert_ne!(a, DriftParams::for_day(4, 16, s, 7));
        a.validate().unwrap();
        assert_eq!(DriftParams::for_day(0, 16, s, 7), DriftParams::identity(16));
    }
}
