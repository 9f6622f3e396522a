//! Sampled optical fields and camera-like images.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fiber::ModeBasis;
use crate::labels::ModeWeights;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T> {
    pub grid: Array2<Complex<T>>,
    /// Metres per pixel.
    pub pixel_pitch: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntensityImage<T> {
    pub grid: Array2<T>,
    /// Metres per pixel.
    pub pixel_pitch: T,
}

impl<T: Real> ComplexField<T> {
    pub fn zeros(size: usize, pixel_pitch: T) -> Self {
        ComplexField {
            grid: Array2::from_elem((size, size), Complex::new(T::zero(), T::zero())),
            pixel_pitch,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.dim()
    }

    /// Multiplies every sample by `exp(jα)`.
    pub fn rotated(&self, alpha: T) -> Self {
        let phasor = Complex::from_polar(T::one(), alpha);
        ComplexField { grid: self.grid.mapv(|z| z * phasor), pixel_pitch: self.pixel_pitch }
    }

    pub fn conj(&self) -> Self {
        ComplexField { grid: self.grid.mapv(|z| z.conj()), pixel_pitch: self.pixel_pitch }
    }

    /// `|E|` as an image.
    pub fn amplitude(&self) -> IntensityImage<T> {
        IntensityImage { grid: self.grid.mapv(|z| z.norm()), pixel_pitch: self.pixel_pitch }
    }

    /// `arg E` wrapped to `[0, 2π)`.
    pub fn phase(&self) -> IntensityImage<T> {
        let two_pi = T::PI() + T::PI();
        IntensityImage {
            grid: self.grid.mapv(|z| {
                let p = z.arg();
                if p < T::zero() { p + two_pi } else { p }
            }),
            pixel_pitch: self.pixel_pitch,
        }
    }

    /// Total power `Σ |E|² · pixel area`.
    pub fn power(&self) -> T {
        let area = self.pixel_pitch * self.pixel_pitch;
        self.grid.iter().map(|z| z.norm_sqr()).sum::<T>() * area
    }

    pub fn peak_amplitude(&self) -> T {
        self.grid.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Recombines an amplitude image and a phase image.
    pub fn from_polar(amplitude: &IntensityImage<T>, phase: &IntensityImage<T>) -> Result<Self> {
        check_same_shape(amplitude.grid.dim(), phase.grid.dim())?;
        let grid = Zip::from(&amplitude.grid)
            .and(&phase.grid)
            .map_collect(|&a, &p| Complex::from_polar(a, p));
        Ok(ComplexField { grid, pixel_pitch: amplitude.pixel_pitch })
    }
}

impl<T: Real> IntensityImage<T> {
    pub fn new(grid: Array2<T>, pixel_pitch: T) -> Result<Self> {
        if grid.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("intensity entries must be finite and non-negative".into()));
        }
        Ok(IntensityImage { grid, pixel_pitch })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.dim()
    }

    pub fn peak(&self) -> T {
        self.grid.iter().copied().fold(T::zero(), T::max)
    }

    /// `Σ I · pixel area`.
    pub fn integrated(&self) -> T {
        self.grid.iter().copied().sum::<T>() * self.pixel_pitch * self.pixel_pitch
    }

    /// Scaled so the brightest pixel is exactly one.
    pub fn peak_normalized(&self) -> Result<Self> {
        let peak = self.peak();
        if peak <= T::zero() {
            return Err(Error::InvalidArgument("cannot peak-normalise an all-zero image".into()));
        }
        Ok(IntensityImage { grid: self.grid.mapv(|v| v / peak), pixel_pitch: self.pixel_pitch })
    }

    /// Pointwise square root, for handing intensities to amplitude-based code.
    pub fn sqrt(&self) -> Self {
        IntensityImage { grid: self.grid.mapv(|v| v.sqrt()), pixel_pitch: self.pixel_pitch }
    }

    pub fn squared(&self) -> Self {
        IntensityImage { grid: self.grid.mapv(|v| v * v), pixel_pitch: self.pixel_pitch }
    }
}

/// Pixels entering the correlation coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiMask {
    mask: Array2<bool>,
}

impl RoiMask {
    pub fn new(mask: Array2<bool>) -> Result<Self> {
        let count = mask.iter().filter(|&&b| b).count();
        if count < 2 {
            return Err(Error::InvalidRoi(format!("needs at least 2 selected pixels, got {count}")));
        }
        Ok(RoiMask { mask })
    }

    /// Every pixel of a `size × size` grid.
    pub fn full(size: usize) -> Self {
        RoiMask { mask: Array2::from_elem((size, size), true) }
    }

    /// Disc centred on the grid with radius `radius_fraction × size / 2`
    /// (pixel centres inside the disc are selected).
    pub fn circular(size: usize, radius_fraction: f64) -> Result<Self> {
        let half = size as f64 / 2.0;
        let radius = radius_fraction * half;
        let mask = Array2::from_shape_fn((size, size), |(r, c)| {
            let y = r as f64 + 0.5 - half;
            let x = c as f64 + 0.5 - half;
            x.hypot(y) <= radius
        });
        Self::new(mask)
    }

    /// Disc covering the fibre core of `basis` scaled by `factor`.
    pub fn core<T: Real>(basis: &ModeBasis<T>, factor: f64) -> Result<Self> {
        let fraction = factor * 2.0 * basis.spec.core_radius / basis.spec.window_side;
        Self::circular(basis.grid_size(), fraction)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Row-major flat indices of the selected pixels.
    pub fn indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }
}

pub(crate) fn check_same_shape(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch { expected, actual });
    }
    Ok(())
}

/// `Σ_i c_i ψ_i` for complex coefficients.
pub fn synthesize<T: Real>(coeffs: &[Complex<T>], basis: &ModeBasis<T>) -> Result<ComplexField<T>> {
    if coeffs.len() != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), actual: coeffs.len() });
    }
    let mut field = ComplexField::zeros(basis.grid_size(), basis.pixel_pitch());
    for (c, psi) in coeffs.iter().zip(&basis.fields) {
        if c.re == T::zero() && c.im == T::zero() {
            continue;
        }
        Zip::from(&mut field.grid).and(psi).for_each(|e, &p| *e = *e + c.scale(p));
    }
    Ok(field)
}

/// `E = Σ_i ρ_i exp(jφ_i) ψ_i`.
pub fn superpose<T: Real>(weights: &ModeWeights<T>, basis: &ModeBasis<T>) -> Result<ComplexField<T>> {
    synthesize(&weights.to_complex(), basis)
}

/// Pointwise `|E|²`.
pub fn intensity<T: Real>(field: &ComplexField<T>) -> IntensityImage<T> {
    IntensityImage { grid: field.grid.mapv(|z| z.norm_sqr()), pixel_pitch: field.pixel_pitch }
}

/// Pearson correlation coefficient of two images over the ROI.
pub fn cross_correlation<T: Real>(target: &IntensityImage<T>, other: &IntensityImage<T>, roi: &RoiMask) -> Result<T> {
    check_same_shape(target.shape(), other.shape())?;
    check_same_shape(target.shape(), roi.shape())?;
    let selected = || {
        target
            .grid
            .iter()
            .zip(other.grid.iter())
            .zip(roi.mask.iter())
            .filter(|(_, &keep)| keep)
            .map(|(pair, _)| pair)
    };
    let count = T::lit(roi.count() as f64);
    let (sum_t, sum_o) = selected().fold((T::zero(), T::zero()), |(a, b), (&t, &o)| (a + t, b + o));
    let mean_t = sum_t / count;
    let mean_o = sum_o / count;
    let (mut cross, mut var_t, mut var_o) = (T::zero(), T::zero(), T::zero());
    for (&t, &o) in selected() {
        let dt = t - mean_t;
        let d_o = o - mean_o;
        cross += dt * d_o;
        var_t += dt * dt;
        var_o += d_o * d_o;
    }
    if var_t == T::zero() || var_o == T::zero() {
        return Err(Error::ConstantImage);
    }
    let gamma = cross / (var_t * var_o).sqrt();
    Ok(gamma.max(-T::one()).min(T::one()))
}

/// Row-stochastic weights mapping `old` samples onto `new` by overlap area.
fn area_weights(old: usize, new: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = old as f64 / new as f64;
    (0..new)
        .map(|k| {
            let lo = k as f64 * ratio;
            let hi = (k + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(old);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min(i as f64 + 1.0) - lo.max(i as f64);
                    (overlap > 1e-12).then_some((i, overlap / ratio))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted resampling onto a coarser `new_size × new_size` grid.
/// Integrated intensity is preserved.
pub fn downsample<T: Real>(image: &IntensityImage<T>, new_size: usize) -> Result<IntensityImage<T>> {
    let (rows, cols) = image.shape();
    if new_size < 2 {
        return Err(Error::InvalidArgument(format!("downsample target size must be >= 2, got {new_size}")));
    }
    if new_size > rows || new_size > cols {
        return Err(Error::InvalidArgument(format!("cannot downsample {rows}x{cols} to larger size {new_size}")));
    }
    let wr = area_weights(rows, new_size);
    let wc = area_weights(cols, new_size);
    // separable: rows first, then columns
    let mut partial = Array2::<f64>::zeros((new_size, cols));
    for (k, taps) in wr.iter().enumerate() {
        for &(i, w) in taps {
            for c in 0..cols {
                partial[[k, c]] += w * image.grid[[i, c]].to_f64_lossy();
            }
        }
    }
    let mut out = Array2::<T>::zeros((new_size, new_size));
    for r in 0..new_size {
        for (k, taps) in wc.iter().enumerate() {
            let v: f64 = taps.iter().map(|&(c, w)| w * partial[[r, c]]).sum();
            out[[r, k]] = T::lit(v);
        }
    }
    let pitch = image.pixel_pitch * T::lit(rows as f64 / new_size as f64);
    Ok(IntensityImage { grid: out, pixel_pitch: pitch })
}

/// Downsamples a complex field as an amplitude image and a phase image:
/// amplitudes by area averaging, phases by the area-weighted circular mean
/// so that averaging never runs across a `2π` wrap.
pub fn downsample_field<T: Real>(field: &ComplexField<T>, new_size: usize) -> Result<ComplexField<T>> {
    let amplitude = downsample(&field.amplitude(), new_size)?;
    let unit = field.grid.mapv(|z| {
        let n = z.norm();
        if n > T::zero() { z.unscale(n) } else { Complex::new(T::zero(), T::zero()) }
    });
    let re = downsample_signed(&unit.mapv(|z| z.re), new_size);
    let im = downsample_signed(&unit.mapv(|z| z.im), new_size);
    let grid = Zip::from(&amplitude.grid).and(&re).and(&im).map_collect(|&a, &x, &y| {
        let p = Complex::new(x, y);
        let n = p.norm();
        if n > T::zero() { p.scale(a / n) } else { Complex::new(a, T::zero()) }
    });
    Ok(ComplexField { grid, pixel_pitch: amplitude.pixel_pitch })
}

fn downsample_signed<T: Real>(grid: &Array2<T>, new_size: usize) -> Array2<T> {
    let (rows, cols) = grid.dim();
    let wr = area_weights(rows, new_size);
    let wc = area_weights(cols, new_size);
    Array2::from_shape_fn((new_size, new_size), |(r, c)| {
        let mut acc = 0.0;
        for &(i, w1) in &wr[r] {
            for &(j, w2) in &wc[c] {
                acc += w1 * w2 * grid[[i, j]].to_f64_lossy();
            }
        }
        T::lit(acc)
    })
}

/// Camera degradation: Gaussian read noise of `sigma × peak`, clamped at
/// zero, optionally quantised to 256 levels of the clean peak (values above
/// full scale saturate). Deterministic in `seed`.
pub fn add_camera_noise<T: Real>(image: &IntensityImage<T>, sigma: T, quantize: bool, seed: u64) -> Result<IntensityImage<T>> {
    if !(sigma >= T::zero()) {
        return Err(Error::InvalidArgument("noise sigma must be >= 0".into()));
    }
    let peak = image.peak();
    let mut rng = crate::rng::stream(seed, 0);
    let std = sigma * peak;
    let levels = T::lit(255.0);
    let grid = image.grid.mapv(|v| {
        let mut out = v;
        if sigma > T::zero() {
            let z: f64 = StandardNormal.sample(&mut rng);
            out = (out + std * T::lit(z)).max(T::zero());
        }
        if quantize && peak > T::zero() {
            let q = (out / peak * levels).round().min(levels);
            out = q / levels * peak;
        }
        out
    });
    Ok(IntensityImage { grid, pixel_pitch: image.pixel_pitch })
}
