use num_complex::Complex64;

use crate::error::{domain, shape, Error, Result};
use crate::sim::array::{ArrayGeometry, OfdmConfig, SPEED_OF_LIGHT};
use crate::sim::environment::{Environment, Pedestrian};
use crate::sim::geometry::{segments_intersect, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SnapshotMeta {
    pub day_index: u32,
    pub disturbed: bool,
}

/// Complex CSI over antennas × subcarriers, antenna-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSnapshot {
    pub n_ant: usize,
    pub n_sub: usize,
    pub values: Vec<Complex64>,
    pub snr_db: Option<f64>,
    pub meta: SnapshotMeta,
}

impl ChannelSnapshot {
    pub fn zeros(n_ant: usize, n_sub: usize) -> Self {
        Self {
            n_ant,
            n_sub,
            values: vec![Complex64::new(0.0, 0.0); n_ant * n_sub],
            snr_db: None,
            meta: SnapshotMeta::default(),
        }
    }

    #[inline]
    pub fn at(&self, m: usize, k: usize) -> Complex64 {
        self.values[m * self.n_sub + k]
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.values[m * self.n_sub..(m + 1) * self.n_sub]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Mean |h|² over all entries.
    pub fn mean_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }
}

/// One propagation path to one antenna.
#[derive(Clone, Debug)]
pub struct PathContribution {
    pub amplitude: Complex64,
    pub delay: f64,
    /// Path legs as point pairs, BS side first.
    pub legs: Vec<(Vec3, Vec3)>,
}

/// Enumerates the LoS and single-bounce paths from `ue` to antenna position
/// `ant`.
pub fn paths_to(env: &Environment, wavelength: f64, ant: Vec3, ue: Vec3) -> Vec<PathContribution> {
    let fs = |d: f64| wavelength / (4.0 * std::f64::consts::PI * d);
    let mut out = Vec::with_capacity(env.n_paths());
    if env.los_enabled {
        let d = ant.distance(ue);
        out.push(PathContribution {
            amplitude: Complex64::new(fs(d), 0.0),
            delay: d / SPEED_OF_LIGHT,
            legs: vec![(ant, ue)],
        });
    }
    for s in &env.scatterers {
        let d1 = ant.distance(s.position);
        let d2 = s.position.distance(ue);
        out.push(PathContribution {
            amplitude: s.reflection_gain * (fs(d1) * fs(d2)),
            delay: (d1 + d2) / SPEED_OF_LIGHT,
            legs: vec![(ant, s.position), (s.position, ue)],
        });
    }
    out
}

/// Linear amplitude factor from all pedestrians crossed by the path legs
/// (attenuations compound in dB).
pub fn blockage_factor(legs: &[(Vec3, Vec3)], pedestrians: &[Pedestrian]) -> f64 {
    let mut loss_db = 0.0;
    for (p, q) in legs {
        for ped in pedestrians {
            if segments_intersect(p.xy(), q.xy(), ped.a, ped.b) {
                loss_db += ped.attenuation_db;
            }
        }
    }
    10f64.powf(-loss_db / 20.0)
}

/// Adds `amp · exp(-j·2π·f_k·τ)` to every entry of `row`. The phasor is
/// advanced by recurrence and re-anchored exactly every few subcarriers.
fn accumulate_delay(row: &mut [Complex64], ofdm: &OfdmConfig, amp: Complex64, delay: f64) {
    const ANCHOR: usize = 16;
    let two_pi = 2.0 * std::f64::consts::PI;
    let step = Complex64::from_polar(1.0, -two_pi * ofdm.subcarrier_spacing() * delay);
    for (chunk_idx, chunk) in row.chunks_mut(ANCHOR).enumerate() {
        let k0 = chunk_idx * ANCHOR;
        let mut ph = Complex64::from_polar(1.0, -two_pi * (ofdm.frequency(k0) * delay).fract());
        for v in chunk.iter_mut() {
            *v += amp * ph;
            ph *= step;
        }
    }
}

fn check_inputs(env: &Environment, ofdm: &OfdmConfig, ue: Vec3) -> Result<()> {
    ofdm.validate()?;
    if !ue.is_finite() || !env.area.contains(ue.x, ue.y) {
        return domain(format!(
            "UE position ({}, {}, {}) outside the area bounds",
            ue.x, ue.y, ue.z
        ));
    }
    if env.n_paths() == 0 {
        return Err(Error::DegenerateEnvironment);
    }
    Ok(())
}

fn render(
    env: &Environment,
    array: &ArrayGeometry,
    ofdm: &OfdmConfig,
    ue: Vec3,
    blockers: &[Pedestrian],
) -> Result<ChannelSnapshot> {
    check_inputs(env, ofdm, ue)?;
    let lambda = ofdm.wavelength();
    let mut snap = ChannelSnapshot::zeros(array.n_antennas(), ofdm.n_subcarriers);
    let n_sub = ofdm.n_subcarriers;
    for m in 0..array.n_antennas() {
        let ant = array.element_position(m);
        let row = &mut snap.values[m * n_sub..(m + 1) * n_sub];
        for p in paths_to(env, lambda, ant, ue) {
            let amp = if blockers.is_empty() {
                p.amplitude
            } else {
                p.amplitude * blockage_factor(&p.legs, blockers)
            };
            accumulate_delay(row, ofdm, amp, p.delay);
        }
    }
    snap.meta.disturbed = !blockers.is_empty();
    Ok(snap)
}

/// Synthesizes the CSI seen by `array` from a UE at `ue_pos`:
/// `h[m][k] = Σ_p a_p(m)·exp(-j·2π·f_k·τ_p(m))`. Pedestrians are ignored here;
/// see [`apply_disturbance`].
pub fn synth_csi(
    env: &Environment,
    array: &ArrayGeometry,
    ofdm: &OfdmConfig,
    ue_pos: Vec3,
) -> Result<ChannelSnapshot> {
    render(env, array, ofdm, ue_pos, &[])
}

/// Like [`synth_csi`], but every path leg crossing one of the environment's
/// pedestrians is attenuated before summation.
pub fn apply_disturbance(
    env: &Environment,
    array: &ArrayGeometry,
    ofdm: &OfdmConfig,
    ue_pos: Vec3,
) -> Result<ChannelSnapshot> {
    render(env, array, ofdm, ue_pos, &env.pedestrians)
}

/// Keeps only the listed antennas, in order.
pub fn select_antennas(snap: &ChannelSnapshot, antennas: &[usize]) -> Result<ChannelSnapshot> {
    if let Some(&bad) = antennas.iter().find(|&&m| m >= snap.n_ant) {
        return shape(format!("antenna {bad} out of range for {} antennas", snap.n_ant));
    }
    let mut values = Vec::with_capacity(antennas.len() * snap.n_sub);
    for &m in antennas {
        values.extend_from_slice(snap.row(m));
    }
    Ok(ChannelSnapshot {
        n_ant: antennas.len(),
        n_sub: snap.n_sub,
        values,
        snr_db: snap.snr_db,
        meta: snap.meta,
    })
}
