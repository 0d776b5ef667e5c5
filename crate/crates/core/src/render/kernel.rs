use crate::error::{Error, Result};

/// Antialiased uniform disk PSF on an odd square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskKernel {
    diameter_px: f64,
    side: usize,
    taps: Vec<f64>,
}

impl DiskKernel {
    pub fn identity() -> Self {
        DiskKernel {
            diameter_px: 0.0,
            side: 1,
            taps: vec![1.0],
        }
    }

    pub fn diameter_px(&self) -> f64 {
        self.diameter_px
    }

    /// Grid side length (always odd).
    pub fn side(&self) -> usize {
        self.side
    }

    /// Half-width of the grid: `side = 2 * radius + 1`.
    pub fn radius(&self) -> usize {
        self.side / 2
    }

    /// Row-major weights, `side * side` entries.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.taps[((dy + r) as usize) * self.side + (dx + r) as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.side == 1
    }
}

/// Builds a disk kernel of the given diameter.
///
/// Each tap is the exact area of its unit cell covered by the disk, then
/// the grid is normalized to unit sum. Diameters below one pixel give the
/// 1×1 identity. Grid side is `ceil(diameter) + 2`, bumped to odd.
pub fn disk_kernel(diameter_px: f64) -> Result<DiskKernel> {
    if !diameter_px.is_finite() || diameter_px < 0.0 {
        return Err(Error::domain(format!(
            "kernel diameter must be finite and non-negative, got {diameter_px}"
        )));
    }
    if diameter_px < 1.0 {
        return Ok(DiskKernel::identity());
    }
    let mut side = diameter_px.ceil() as usize + 2;
    if side.is_multiple_of(2) {
        side += 1;
    }
    let half = (side / 2) as isize;
    let r = diameter_px / 2.0;

    // Weights depend only on (min(|i|,|j|), max(|i|,|j|)), which makes the
    // grid exactly invariant under 90° rotations and reflections.
    let n = half as usize + 1;
    let mut octant = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a..n {
            let (i, j) = (a as f64, b as f64);
            octant[a * n + b] = cell_coverage(i - 0.5, i + 0.5, j - 0.5, j + 0.5, r);
        }
    }
    let mut taps = Vec::with_capacity(side * side);
    for dy in -half..=half {
        for dx in -half..=half {
            let (a, b) = (dx.unsigned_abs(), dy.unsigned_abs());
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            taps.push(octant[a * n + b]);
        }
    }
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    Ok(DiskKernel {
        diameter_px,
        side,
        taps,
    })
}

/// Area of the disk of radius `r` centered at the origin inside the box
/// `[x0, x1] × [y0, y1]`.
pub(crate) fn cell_coverage(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let area = corner_area(x1, y1, r) - corner_area(x0, y1, r) - corner_area(x1, y0, r)
        + corner_area(x0, y0, r);
    area.max(0.0)
}

// Signed area of the disk inside [0, x] × [0, y]; odd in each argument.
fn corner_area(x: f64, y: f64, r: f64) -> f64 {
    let sign = x.signum() * y.signum();
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let x = x.abs().min(r);
    let y = y.abs().min(r);
    if x * x + y * y <= r * r {
        return sign * x * y;
    }
    // Beyond u_star the circle boundary drops below y.
    let u_star = (r * r - y * y).max(0.0).sqrt();
    let arc = |u: f64| 0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).clamp(-1.0, 1.0).asin());
    sign * (y * u_star + arc(x) - arc(u_star))
}
