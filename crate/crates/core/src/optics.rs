//! Thin-lens defocus model.
//!
//! A point at depth `z` in front of a lens focused at `z_fp` images to a
//! disk on the sensor whose diameter is
//!
//! ```text
//! eps = (f / N) * (f / (z_fp - f)) * |z - z_fp| / z
//! ```
//!
//! All distances are meters. [`coc_diameter_px`] divides by the pixel pitch
//! so callers work in sensor pixels; the value is a diameter, not a radius.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};

/// Physical lens and sensor parameters of a simulated camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub focal_length_m: f64,
    pub f_number: f64,
    pub pixel_size_m: f64,
    pub focus_distance_m: f64,
    #[serde(default)]
    pub description: String,
}

impl CameraConfig {
    pub fn new(
        focal_length_m: f64,
        f_number: f64,
        pixel_size_m: f64,
        focus_distance_m: f64,
        description: impl Into<String>,
    ) -> Result<Self> {
        let cam = CameraConfig {
            focal_length_m,
            f_number,
            pixel_size_m,
            focus_distance_m,
            description: description.into(),
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Builds a camera from the unit conventions used on the command line
    /// and in job config files (mm, µm, m).
    pub fn from_lens_units(
        focal_length_mm: f64,
        f_number: f64,
        pixel_size_um: f64,
        focus_m: f64,
        description: impl Into<String>,
    ) -> Result<Self> {
        Self::new(
            focal_length_mm * 1e-3,
            f_number,
            pixel_size_um * 1e-6,
            focus_m,
            description,
        )
    }

    /// 80 mm f/2.8 lens, 4.4 µm pixels, focused at 400 m. Strong near-field
    /// defocus with a nearly sharp far field.
    pub fn tele_80mm() -> Self {
        Self::from_lens_units(80.0, 2.8, 4.4, 400.0, "80mm")
            .expect("preset parameters are valid")
    }

    /// Same sensor and aperture ratio as [`CameraConfig::tele_80mm`] with a
    /// 60 mm lens, which softens the defocus at every depth.
    pub fn tele_60mm() -> Self {
        Self::from_lens_units(60.0, 2.8, 4.4, 400.0, "60mm")
            .expect("preset parameters are valid")
    }

    /// Returns a copy focused at a different distance.
    pub fn with_focus(&self, focus_distance_m: f64) -> Result<Self> {
        let mut cam = self.clone();
        cam.focus_distance_m = focus_distance_m;
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("focal length", self.focal_length_m)?;
        positive("f-number", self.f_number)?;
        positive("pixel size", self.pixel_size_m)?;
        positive("focus distance", self.focus_distance_m)?;
        if self.focus_distance_m <= self.focal_length_m {
            return Err(Error::domain(format!(
                "focus distance {} m must exceed the focal length {} m",
                self.focus_distance_m, self.focal_length_m
            )));
        }
        Ok(())
    }

    /// Aperture diameter `f / N` in meters.
    pub fn aperture_m(&self) -> f64 {
        self.focal_length_m / self.f_number
    }

    /// Limit of the CoC diameter (pixels) as depth goes to infinity.
    pub fn far_asymptote_px(&self) -> f64 {
        self.scale_px()
    }

    // (f/N) * f / (z_fp - f) / p
    fn scale_px(&self) -> f64 {
        self.aperture_m() * (self.focal_length_m / (self.focus_distance_m - self.focal_length_m))
            / self.pixel_size_m
    }

    /// Signed CoC in pixels: negative in front of the focal plane, positive
    /// behind it. Strictly increasing in `z`. Callers must pass `z > 0`.
    pub fn signed_coc_px(&self, z: f64) -> f64 {
        self.scale_px() * ((z - self.focus_distance_m) / z)
    }

    /// Inverse of [`CameraConfig::signed_coc_px`]. Returns `f64::INFINITY`
    /// for values at or above the far asymptote.
    pub fn depth_for_signed_coc(&self, signed_px: f64) -> f64 {
        let ratio = signed_px / self.scale_px();
        if ratio >= 1.0 {
            f64::INFINITY
        } else {
            self.focus_distance_m / (1.0 - ratio)
        }
    }

    /// Column label used in curve tables.
    pub fn label(&self) -> String {
        if self.description.trim().is_empty() {
            format!(
                "f{}mm_N{}_z{}m",
                self.focal_length_m * 1e3,
                self.f_number,
                self.focus_distance_m
            )
        } else {
            self.description
                .trim()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect()
        }
    }
}

/// Circle-of-confusion diameter in pixels for a point at depth `z` meters.
pub fn coc_diameter_px(z: f64, cam: &CameraConfig) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::domain(format!("depth must be positive and finite, got {z}")));
    }
    cam.validate()?;
    Ok(coc_unchecked(z, cam))
}

#[inline]
pub(crate) fn coc_unchecked(z: f64, cam: &CameraConfig) -> f64 {
    cam.aperture_m()
        * (cam.focal_length_m / (cam.focus_distance_m - cam.focal_length_m))
        * ((z - cam.focus_distance_m).abs() / z)
        / cam.pixel_size_m
}

/// Per-pixel CoC diameters for a depth map.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurField {
    pub width: usize,
    pub height: usize,
    pub coc: Vec<f64>,
    pub invalid_mask: Vec<bool>,
}

impl BlurField {
    pub fn min(&self) -> f64 {
        self.coc.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.coc.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.coc.is_empty() {
            return 0.0;
        }
        self.coc.iter().sum::<f64>() / self.coc.len() as f64
    }
}

/// Applies [`coc_diameter_px`] per pixel.
///
/// Invalid depth pixels are flagged and given the CoC of the nearest valid
/// depth in the map, which is the strongest blur on the near side of focus.
pub fn blur_field(depth: &DepthMap, cam: &CameraConfig) -> Result<BlurField> {
    cam.validate()?;
    let nearest = depth
        .valid_depths()
        .fold(f64::INFINITY, f64::min);
    let has_invalid = depth.valid.iter().any(|v| !v);
    if has_invalid && !nearest.is_finite() {
        return Err(Error::data("depth map has no valid pixels"));
    }
    let fill = if nearest.is_finite() { coc_unchecked(nearest, cam) } else { 0.0 };
    let coc = depth
        .depth
        .iter()
        .zip(&depth.valid)
        .map(|(&z, &ok)| if ok { coc_unchecked(z, cam) } else { fill })
        .collect();
    Ok(BlurField {
        width: depth.width,
        height: depth.height,
        coc,
        invalid_mask: depth.valid.iter().map(|v| !v).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(Error::usage(format!("unknown spacing '{other}' (expected linear|log)"))),
        }
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        })
    }
}

/// Blur-versus-depth table: one depth column and one CoC column per camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub spacing: Spacing,
    pub z_m: Vec<f64>,
    pub labels: Vec<String>,
    /// `columns[c][i]` is the CoC of camera `c` at `z_m[i]`.
    pub columns: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn header(&self) -> String {
        let mut h = String::from("z_m");
        for label in &self.labels {
            let _ = write!(h, ",eps_px_{label}");
        }
        h
    }

    /// Writes CSV with shortest round-trippable float formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header())?;
        for (i, z) in self.z_m.iter().enumerate() {
            write!(out, "{z}")?;
            for col in &self.columns {
                write!(out, ",{}", col[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Depth grid for blur curves. Grid points nearest to each camera's focus
/// distance are snapped onto it so the zero crossing is sampled exactly.
pub fn depth_grid(
    z_min: f64,
    z_max: f64,
    samples: usize,
    spacing: Spacing,
    focus_points: &[f64],
) -> Result<Vec<f64>> {
    if !(z_min.is_finite() && z_max.is_finite() && z_min > 0.0) {
        return Err(Error::domain(format!(
            "depth range must be positive and finite, got [{z_min}, {z_max}]"
        )));
    }
    if z_min > z_max {
        return Err(Error::domain(format!("z_min {z_min} exceeds z_max {z_max}")));
    }
    if samples < 2 {
        return Err(Error::usage(format!("need at least 2 samples, got {samples}")));
    }
    let last = (samples - 1) as f64;
    let mut grid: Vec<f64> = (0..samples)
        .map(|i| {
            let t = i as f64 / last;
            match spacing {
                _ if z_min == z_max => z_min,
                Spacing::Linear => z_min + t * (z_max - z_min),
                Spacing::Log => (z_min.ln() + t * (z_max.ln() - z_min.ln())).exp(),
            }
        })
        .collect();
    grid[0] = z_min;
    grid[samples - 1] = z_max;
    for &zf in focus_points {
        if zf < z_min || zf > z_max {
            continue;
        }
        let nearest = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - zf).abs().total_cmp(&(b.1 - zf).abs()))
            .map(|(i, _)| i)
            .expect("grid is non-empty");
        grid[nearest] = zf;
    }
    Ok(grid)
}

/// Samples the CoC of each camera over `[z_min, z_max]`.
pub fn blur_depth_curve(
    cams: &[CameraConfig],
    z_min: f64,
    z_max: f64,
    samples: usize,
    spacing: Spacing,
) -> Result<CurveTable> {
    if cams.is_empty() {
        return Err(Error::usage("at least one camera configuration is required"));
    }
    for cam in cams {
        cam.validate()?;
    }
    let focus: Vec<f64> = cams.iter().map(|c| c.focus_distance_m).collect();
    let z_m = depth_grid(z_min, z_max, samples, spacing, &focus)?;
    let columns = cams
        .iter()
        .map(|cam| {
            z_m.iter()
                .map(|&z| coc_diameter_px(z, cam))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut labels: Vec<String> = cams.iter().map(CameraConfig::label).collect();
    for i in 0..labels.len() {
        if labels[..i].contains(&labels[i]) {
            labels[i] = format!("{}_{}", labels[i], i);
        }
    }
    Ok(CurveTable {
        spacing,
        z_m,
        labels,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent route: thin-lens image distances and similar triangles.
    // v = 1 / (1/f - 1/z); blur = A * |v_fp - v| / v.
    fn similar_triangles_coc_px(z: f64, cam: &CameraConfig) -> f64 {
        let f = cam.focal_length_m;
        let v = 1.0 / (1.0 / f - 1.0 / z);
        let v_fp = 1.0 / (1.0 / f - 1.0 / cam.focus_distance_m);
        let aperture = f / cam.f_number;
        aperture * (v_fp - v).abs() / v / cam.pixel_size_m
    }

    #[test]
    fn in_focus_plane_is_exactly_zero() {
        let cam = CameraConfig::tele_80mm();
        assert_eq!(coc_diameter_px(400.0, &cam).unwrap(), 0.0);
    }

    #[test]
    fn ten_meters_matches_similar_triangles() {
        let cam = CameraConfig::tele_80mm();
        let oracle = similar_triangles_coc_px(10.0, &cam);
        // exact rational evaluation gives 50.65948254585...
        assert!((oracle - 50.659_482_545_859).abs() < 1e-9, "oracle {oracle}");
        let got = coc_diameter_px(10.0, &cam).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn longer_lens_blurs_more() {
        let a = CameraConfig::tele_80mm();
        let b = CameraConfig::tele_60mm();
        for z in [0.6, 1.0, 10.0, 100.0, 399.0, 401.0, 1e4, 1e6] {
            assert!(coc_diameter_px(z, &a).unwrap() > coc_diameter_px(z, &b).unwrap(), "z={z}");
        }
    }

    #[test]
    fn rejects_bad_depth_and_camera() {
        let cam = CameraConfig::tele_80mm();
        for z in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(coc_diameter_px(z, &cam), Err(Error::Domain(_))));
        }
        assert!(CameraConfig::new(0.08, 2.8, 4.4e-6, 0.05, "").is_err());
        assert!(CameraConfig::new(0.0, 2.8, 4.4e-6, 10.0, "").is_err());
        assert!(CameraConfig::new(0.08, -1.0, 4.4e-6, 10.0, "").is_err());
    }

    #[test]
    fn far_asymptote_approached_from_below() {
        let cam = CameraConfig::tele_80mm();
        let asym = cam.far_asymptote_px();
        let far = coc_diameter_px(1e6, &cam).unwrap();
        assert!(far < asym);
        assert!((asym - far) / asym < 0.01);
    }

    #[test]
    fn pixel_pitch_scales_inversely() {
        let cam = CameraConfig::tele_80mm();
        let mut half = cam.clone();
        half.pixel_size_m = cam.pixel_size_m * 2.0;
        for z in [1.0, 10.0, 1000.0] {
            let a = coc_diameter_px(z, &cam).unwrap();
            let b = coc_diameter_px(z, &half).unwrap();
            assert_eq!(b, a / 2.0);
        }
        let mut scaled = cam.clone();
        scaled.pixel_size_m = cam.pixel_size_m * 3.7;
        let a = coc_diameter_px(10.0, &cam).unwrap();
        let b = coc_diameter_px(10.0, &scaled).unwrap();
        assert!((b - a / 3.7).abs() <= 1e-12 * a);
    }

    #[test]
    fn signed_coc_inverts() {
        let cam = CameraConfig::tele_80mm();
        for z in [0.5, 3.0, 40.0, 400.0, 9000.0] {
            let s = cam.signed_coc_px(z);
            assert!((s.abs() - coc_unchecked(z, &cam)).abs() < 1e-9);
            let back = cam.depth_for_signed_coc(s);
            assert!((back - z).abs() / z < 1e-9, "{z} -> {back}");
        }
    }

    #[test]
    fn curve_matches_point_calls_and_hits_focus() {
        let cams = [CameraConfig::tele_80mm(), CameraConfig::tele_60mm()];
        let t = blur_depth_curve(&cams, 1.0, 600.0, 200, Spacing::Log).unwrap();
        assert_eq!(t.z_m.len(), 200);
        assert!(t.z_m.contains(&400.0));
        for (c, cam) in cams.iter().enumerate() {
            for (i, &z) in t.z_m.iter().enumerate() {
                assert_eq!(t.columns[c][i].to_bits(), coc_diameter_px(z, cam).unwrap().to_bits());
            }
        }
        assert_eq!(t.header(), "z_m,eps_px_80mm,eps_px_60mm");
    }

    #[test]
    fn curve_value_at_ten_meters_is_definitional() {
        let cam = CameraConfig::tele_80mm();
        let t = blur_depth_curve(std::slice::from_ref(&cam), 10.0, 20.0, 11, Spacing::Linear).unwrap();
        assert_eq!(t.z_m[0], 10.0);
        assert_eq!(t.columns[0][0], coc_diameter_px(10.0, &cam).unwrap());
    }

    #[test]
    fn degenerate_grid_at_focus() {
        let cam = CameraConfig::tele_80mm();
        let t = blur_depth_curve(&[cam], 400.0, 400.0, 2, Spacing::Log).unwrap();
        assert_eq!(t.z_m, vec![400.0, 400.0]);
        assert_eq!(t.columns[0], vec![0.0, 0.0]);
    }

    #[test]
    fn blur_field_at_focus_is_zero() {
        let cam = CameraConfig::tele_80mm();
        let d = DepthMap::constant(5, 4, 400.0).unwrap();
        let f = blur_field(&d, &cam).unwrap();
        assert!(f.coc.iter().all(|&c| c == 0.0));
        assert!(f.invalid_mask.iter().all(|m| !m));
        assert_eq!((f.width, f.height), (5, 4));
    }

    #[test]
    fn blur_field_invalid_pixel_gets_strongest_near_blur() {
        let cam = CameraConfig::tele_80mm();
        let d = DepthMap::with_missing(3, 1, vec![8.0, 0.0, 50.0]).unwrap();
        let f = blur_field(&d, &cam).unwrap();
        assert_eq!(f.invalid_mask, vec![false, true, false]);
        assert_eq!(f.coc[1], coc_diameter_px(8.0, &cam).unwrap());
        assert_eq!(f.coc[1], f.max());
    }

    #[test]
    fn blur_field_two_values() {
        let cam = CameraConfig::tele_80mm();
        let d = DepthMap::from_meters(2, 2, vec![10.0, 400.0, 400.0, 10.0]).unwrap();
        let f = blur_field(&d, &cam).unwrap();
        let mut vals = f.coc.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert_eq!(vals.len(), 2);
        assert_eq!(vals[0], 0.0);
        assert!((vals[1] - 50.659_482_545_86).abs() < 1e-9);
    }

    #[test]
    fn curve_rejects_empty_camera_list() {
        assert!(matches!(
            blur_depth_curve(&[], 1.0, 2.0, 10, Spacing::Log),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn csv_round_trips_floats() {
        let t = blur_depth_curve(&[CameraConfig::tele_80mm()], 1.0, 600.0, 7, Spacing::Log).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 8);
        for (i, row) in rows[1..].iter().enumerate() {
            let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells[0].to_bits(), t.z_m[i].to_bits());
            assert_eq!(cells[1].to_bits(), t.columns[0][i].to_bits());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn strictly_monotone_on_each_side(a in 0.5f64..2000.0, b in 0.5f64..2000.0) {
                let cam = CameraConfig::tele_80mm();
                prop_assume!((a - b).abs() > 1e-6);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let e_lo = coc_diameter_px(lo, &cam).unwrap();
                let e_hi = coc_diameter_px(hi, &cam).unwrap();
                if hi <= 400.0 {
                    prop_assert!(e_lo > e_hi);
                } else if lo >= 400.0 {
                    prop_assert!(e_lo < e_hi);
                }
            }

            #[test]
            fn positive_off_focus(z in 0.1f64..1e7) {
                let cam = CameraConfig::tele_80mm();
                prop_assume!(z != 400.0);
                let e = coc_diameter_px(z, &cam).unwrap();
                prop_assert!(e > 0.0 && e.is_finite());
            }
        }
    }
}
