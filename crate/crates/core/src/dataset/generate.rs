use num_complex::Complex32;
use rayon::prelude::*;

use super::{CsiDataset, CsiSample, Provenance, SampleMeta};
use crate::error::Result;
use crate::sim::Preset;

/// Renders every grid position of `preset` into a noiseless labeled dataset
/// (guard bands not yet zeroed). Positions are rendered in parallel; the
/// result does not depend on the thread count.
pub fn generate(preset: &Preset) -> Result<CsiDataset> {
    preset.validate()?;
    let points = preset.grid_points()?;
    let drift = preset.day_drift();
    let samples = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let snap = preset.snapshot(p.position, i as u64, &drift)?;
            Ok(CsiSample {
                csi: snap
                    .values
                    .iter()
                    .map(|v| Complex32::new(v.re as f32, v.im as f32))
                    .collect(),
                label: p.position.to_array(),
                meta: SampleMeta {
                    day_index: snap.meta.day_index,
                    disturbed: snap.meta.disturbed,
                    grid: Some((p.row, p.col)),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CsiDataset {
        n_ant: preset.array.n_antennas(),
        n_sub: preset.ofdm.n_subcarriers,
        samples,
        provenance: Provenance {
            preset: preset.name.clone(),
            seeds: vec![
                ("scene".into(), preset.seed),
                ("drift".into(), preset.drift_seed),
                ("day".into(), u64::from(preset.day)),
            ],
        },
        grid_spacing: Some((preset.grid.dx, preset.grid.dy)),
    })
}
