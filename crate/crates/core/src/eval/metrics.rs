use crate::error::{domain, shape, Result};

fn check(preds: &[[f64; 3]], labels: &[[f64; 3]]) -> Result<()> {
    if preds.len() != labels.len() {
        return shape(format!("{} predictions vs {} labels", preds.len(), labels.len()));
    }
    if preds.is_empty() {
        return domain("metrics need at least one sample");
    }
    Ok(())
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Euclidean distance error per sample.
pub fn distance_errors(preds: &[[f64; 3]], labels: &[[f64; 3]]) -> Result<Vec<f64>> {
    if preds.len() != labels.len() {
        return shape(format!("{} predictions vs {} labels", preds.len(), labels.len()));
    }
    Ok(preds.iter().zip(labels).map(|(p, l)| dist(p, l)).collect())
}

/// Mean distance error.
pub fn mde(preds: &[[f64; 3]], labels: &[[f64; 3]]) -> Result<f64> {
    check(preds, labels)?;
    let des = distance_errors(preds, labels)?;
    Ok(des.iter().sum::<f64>() / des.len() as f64)
}

/// Median of a non-empty set; even counts use the midpoint of the two
/// central order statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median distance error (the accuracy half of the users achieve).
pub fn mda(preds: &[[f64; 3]], labels: &[[f64; 3]]) -> Result<f64> {
    check(preds, labels)?;
    Ok(median(&distance_errors(preds, labels)?))
}

/// Empirical DE CDF sampled at `n_points` evenly spaced probabilities in
/// `[0, 1]`: entry `i` is `(q, i/(n_points-1))` with `q` the corresponding
/// quantile (lower order statistic, except at 0.5 which uses the median
/// convention so that the curve passes through `(mda, 0.5)` when sampled).
pub fn de_cdf(preds: &[[f64; 3]], labels: &[[f64; 3]], n_points: usize) -> Result<Vec<(f64, f64)>> {
    check(preds, labels)?;
    if n_points < 2 {
        return domain("a CDF needs at least two points");
    }
    let mut des = distance_errors(preds, labels)?;
    des.sort_by(f64::total_cmp);
    let n = des.len();
    let med = median(&des);
    Ok((0..n_points)
        .map(|i| {
            let p = i as f64 / (n_points - 1) as f64;
            let q = if 2 * i == n_points - 1 {
                med
            } else {
                let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
                des[idx]
            };
            (q, p)
        })
        .collect())
}

/// Fraction of distance errors `<= x`.
pub fn cdf_at(des: &[f64], x: f64) -> f64 {
    des.iter().filter(|&&d| d <= x).count() as f64 / des.len().max(1) as f64
}
