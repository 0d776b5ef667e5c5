//! Clamp-to-edge convolution with symmetric disk kernels.
//!
//! Two interchangeable back ends: a direct tap loop and an FFT path over a
//! tile just large enough to avoid wrap-around. Both read the source through
//! replicate padding and produce the same values to within float rounding.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::kernel::DiskKernel;

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn full(width: usize, height: usize) -> Self {
        Rect {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Grows by `margin` on every side, clipped to `width × height`.
    pub fn grow(&self, margin: usize, width: usize, height: usize) -> Self {
        Rect {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(width),
            y1: (self.y1 + margin).min(height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Direct,
    Fft,
    /// Pick whichever is cheaper for the kernel and region size.
    Auto,
}

/// Convolves each plane (all `width × height`) over `region`, returning one
/// `region.area()` buffer per plane.
pub fn blur_planes(
    planes: &[&[f64]],
    width: usize,
    height: usize,
    region: Rect,
    kernel: &DiskKernel,
    backend: Backend,
) -> Vec<Vec<f64>> {
    for p in planes {
        assert_eq!(p.len(), width * height, "plane size mismatch");
    }
    if kernel.is_identity() {
        return planes.iter().map(|p| crop(p, width, region)).collect();
    }
    let backend = match backend {
        Backend::Auto => choose_backend(region, kernel, planes.len()),
        b => b,
    };
    let tiles: Vec<Vec<f64>> = planes
        .iter()
        .map(|p| padded_tile(p, width, height, region, kernel.radius()))
        .collect();
    match backend {
        Backend::Direct => tiles.iter().map(|t| direct_valid(t, region, kernel)).collect(),
        _ => fft_valid(&tiles, region, kernel),
    }
}

/// Whole-image direct convolution; the reference implementation.
pub fn convolve_direct(plane: &[f64], width: usize, height: usize, kernel: &DiskKernel) -> Vec<f64> {
    blur_planes(&[plane], width, height, Rect::full(width, height), kernel, Backend::Direct)
        .pop()
        .expect("one plane in, one plane out")
}

fn choose_backend(region: Rect, kernel: &DiskKernel, planes: usize) -> Backend {
    let r = kernel.radius();
    let direct = (kernel.side() * kernel.side()) as f64 * region.area() as f64 * planes as f64;
    let nw = fast_len(region.width() + 2 * r) as f64;
    let nh = fast_len(region.height() + 2 * r) as f64;
    let n = nw * nh;
    let transforms = 2.0 * planes.div_ceil(2) as f64 + 1.0;
    let fft = 5.0 * n * n.log2() * transforms;
    if direct <= fft {
        Backend::Direct
    } else {
        Backend::Fft
    }
}

fn crop(plane: &[f64], width: usize, region: Rect) -> Vec<f64> {
    let mut out = Vec::with_capacity(region.area());
    for y in region.y0..region.y1 {
        out.extend_from_slice(&plane[y * width + region.x0..y * width + region.x1]);
    }
    out
}

// Region grown by `r` on every side, sampled with clamp-to-edge.
fn padded_tile(plane: &[f64], width: usize, height: usize, region: Rect, r: usize) -> Vec<f64> {
    let tw = region.width() + 2 * r;
    let th = region.height() + 2 * r;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let cols: Vec<usize> = (0..tw)
        .map(|t| clamp(region.x0 as isize - r as isize + t as isize, width))
        .collect();
    let mut tile = vec![0.0; tw * th];
    tile.par_chunks_mut(tw).enumerate().for_each(|(t, row)| {
        let y = clamp(region.y0 as isize - r as isize + t as isize, height);
        let src = &plane[y * width..(y + 1) * width];
        for (dst, &x) in row.iter_mut().zip(&cols) {
            *dst = src[x];
        }
    });
    tile
}

fn direct_valid(tile: &[f64], region: Rect, kernel: &DiskKernel) -> Vec<f64> {
    let (w, h) = (region.width(), region.height());
    let side = kernel.side();
    let tw = w + side - 1;
    let taps = kernel.taps();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for ky in 0..side {
            let src = &tile[(y + ky) * tw..(y + ky + 1) * tw];
            let krow = &taps[ky * side..(ky + 1) * side];
            for (kx, &k) in krow.iter().enumerate() {
                if k == 0.0 {
                    continue;
                }
                for (o, s) in row.iter_mut().zip(&src[kx..kx + w]) {
                    *o += k * s;
                }
            }
        }
    });
    out
}

/// Smallest `n >= target` whose only prime factors are 2, 3, 5 and 7.
pub(crate) fn fast_len(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5, 7] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

struct Plan2d {
    nw: usize,
    nh: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plan2d {
    fn new(nw: usize, nh: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plan2d {
            nw,
            nh,
            row_fwd: planner.plan_fft_forward(nw),
            col_fwd: planner.plan_fft_forward(nh),
            row_inv: planner.plan_fft_inverse(nw),
            col_inv: planner.plan_fft_inverse(nh),
        }
    }

    // nh × nw spatial -> nw × nh (transposed) spectrum
    fn forward(&self, data: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        let mut data = data;
        run_rows(&*self.row_fwd, &mut data, self.nw);
        let mut t = transpose(&data, self.nw, self.nh);
        run_rows(&*self.col_fwd, &mut t, self.nh);
        t
    }

    // nw × nh spectrum -> nh × nw spatial, unnormalized
    fn inverse(&self, spectrum: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        let mut spectrum = spectrum;
        run_rows(&*self.col_inv, &mut spectrum, self.nh);
        let mut data = transpose(&spectrum, self.nh, self.nw);
        run_rows(&*self.row_inv, &mut data, self.nw);
        data
    }
}

fn run_rows(fft: &dyn Fft<f64>, data: &mut [Complex<f64>], len: usize) {
    const ROWS_PER_TASK: usize = 16;
    data.par_chunks_mut(len * ROWS_PER_TASK).for_each(|chunk| {
        let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

// `data` is rows × cols, result is cols × rows.
fn transpose(data: &[Complex<f64>], cols: usize, rows: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, dst)| {
        for (r, d) in dst.iter_mut().enumerate() {
            *d = data[r * cols + c];
        }
    });
    out
}

fn fft_valid(tiles: &[Vec<f64>], region: Rect, kernel: &DiskKernel) -> Vec<Vec<f64>> {
    let r = kernel.radius();
    let side = kernel.side();
    let (w, h) = (region.width(), region.height());
    let (tw, th) = (w + 2 * r, h + 2 * r);
    // Circular convolution of size >= tile never wraps into the valid window.
    let plan = Plan2d::new(fast_len(tw), fast_len(th));
    let (nw, nh) = (plan.nw, plan.nh);

    let mut kbuf = vec![Complex::new(0.0, 0.0); nw * nh];
    for ky in 0..side {
        for kx in 0..side {
            kbuf[ky * nw + kx] = Complex::new(kernel.taps()[ky * side + kx], 0.0);
        }
    }
    let kspec = plan.forward(kbuf);
    let scale = 1.0 / (nw * nh) as f64;

    let mut outputs = Vec::with_capacity(tiles.len());
    // Two real planes share one complex transform: re and im stay separate
    // because the kernel is real.
    for pair in tiles.chunks(2) {
        let mut buf = vec![Complex::new(0.0, 0.0); nw * nh];
        for y in 0..th {
            for x in 0..tw {
                let re = pair[0][y * tw + x];
                let im = pair.get(1).map_or(0.0, |t| t[y * tw + x]);
                buf[y * nw + x] = Complex::new(re, im);
            }
        }
        let mut spec = plan.forward(buf);
        spec.par_iter_mut().zip(kspec.par_iter()).for_each(|(s, k)| *s *= k);
        let spatial = plan.inverse(spec);
        let extract = |part: fn(&Complex<f64>) -> f64| {
            let mut out = Vec::with_capacity(w * h);
            for y in 0..h {
                let row = &spatial[(y + 2 * r) * nw + 2 * r..(y + 2 * r) * nw + 2 * r + w];
                out.extend(row.iter().map(|c| part(c) * scale));
            }
            out
        };
        outputs.push(extract(|c| c.re));
        if pair.len() == 2 {
            outputs.push(extract(|c| c.im));
        }
    }
    outputs
}

#[cfg(test)]
mod tests {
    use super::super::kernel::disk_kernel;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_plane(w: usize, h: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..w * h).map(|_| rng.gen::<f64>()).collect()
    }

    // Straight from the definition, no tiling.
    fn naive(plane: &[f64], w: usize, h: usize, k: &DiskKernel) -> Vec<f64> {
        let r = k.radius() as isize;
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                        let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                        acc += k.tap(dx, dy) * plane[sy * w + sx];
                    }
                }
                out[y as usize * w + x as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(fast_len(1), 1);
        assert_eq!(fast_len(11), 12);
        assert_eq!(fast_len(97), 98);
        assert_eq!(fast_len(1024), 1024);
    }

    #[test]
    fn direct_matches_naive() {
        let (w, h) = (23, 17);
        let p = random_plane(w, h, 1);
        let k = disk_kernel(6.3).unwrap();
        let a = convolve_direct(&p, w, h, &k);
        let b = naive(&p, w, h, &k);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_on_regions() {
        let (w, h) = (40, 31);
        let p0 = random_plane(w, h, 2);
        let p1 = random_plane(w, h, 3);
        let p2 = random_plane(w, h, 4);
        let planes = [&p0[..], &p1[..], &p2[..]];
        for d in [2.5, 9.0, 25.0] {
            let k = disk_kernel(d).unwrap();
            for region in [Rect::full(w, h), Rect { x0: 5, y0: 3, x1: 22, y1: 30 }] {
                let a = blur_planes(&planes, w, h, region, &k, Backend::Direct);
                let b = blur_planes(&planes, w, h, region, &k, Backend::Fft);
                for (pa, pb) in a.iter().zip(&b) {
                    for (x, y) in pa.iter().zip(pb) {
                        assert!((x - y).abs() < 1e-10, "d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_plane_is_preserved() {
        let (w, h) = (30, 20);
        let p = vec![0.37; w * h];
        let k = disk_kernel(15.0).unwrap();
        for backend in [Backend::Direct, Backend::Fft] {
            let out = blur_planes(&[&p], w, h, Rect::full(w, h), &k, backend);
            assert!(out[0].iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }
}
