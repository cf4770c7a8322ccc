use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::rng;
use crate::sim::channel::ChannelSnapshot;

/// Adds circularly-symmetric complex Gaussian noise at `snr_db` relative to
/// the snapshot's mean power. `f64::INFINITY` returns the input unchanged.
pub fn add_awgn(snap: &ChannelSnapshot, snr_db: f64, seed: u64) -> ChannelSnapshot {
    let mut out = snap.clone();
    if snr_db == f64::INFINITY {
        return out;
    }
    let noise_power = snap.mean_power() / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    let mut rng = rng::rng_for(seed, &[0xA3C6]);
    for v in out.values.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(re * sigma, im * sigma);
    }
    out.snr_db = Some(snr_db);
    out
}
