use crate::error::{domain, Result};
use crate::sim::geometry::{Rect, Vec3};

/// A sampled UE position with its grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub position: Vec3,
    pub row: u32,
    pub col: u32,
}

fn axis_count(extent: f64, spacing: f64) -> usize {
    // tolerance absorbs decimal spacings such as 0.1
    (extent / spacing + 1e-9).floor() as usize + 1
}

/// Samples `area` on a grid with inclusive endpoints, `dx` apart along x and
/// `dy` apart along y, in meander order: row `r` (constant y) runs toward +x
/// when `r` is even and toward −x when odd.
pub fn grid_sample_xy(area: &Rect, dx: f64, dy: f64, height: f64) -> Result<Vec<GridPoint>> {
    if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
        return domain("grid spacing must be positive");
    }
    if !area.is_valid() {
        return domain("invalid sampling area");
    }
    let nx = axis_count(area.width(), dx);
    let ny = axis_count(area.height(), dy);
    let mut out = Vec::with_capacity(nx * ny);
    for r in 0..ny {
        let y = area.y_min + r as f64 * dy;
        for i in 0..nx {
            let c = if r % 2 == 0 { i } else { nx - 1 - i };
            out.push(GridPoint {
                position: Vec3::new(area.x_min + c as f64 * dx, y, height),
                row: r as u32,
                col: c as u32,
            });
        }
    }
    Ok(out)
}

/// Square-grid version of [`grid_sample_xy`].
pub fn grid_sample(area: &Rect, spacing: f64, height: f64) -> Result<Vec<GridPoint>> {
    grid_sample_xy(area, spacing, spacing, height)
}
