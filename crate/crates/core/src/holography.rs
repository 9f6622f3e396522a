//! Reference-based decomposition and off-axis holography.
//!
//! A hologram records `|E + R|²` with a tilted plane reference
//! `R = r·exp(j2π(f_x·x + f_y·y))`, `x` the column and `y` the row index.
//! Its spectrum holds `E·R*` around `−f` and the conjugate copy `E*·R`
//! around `+f`; reconstruction cuts out the `E·R*` order with a hard disc of
//! radius `|f|/2`, undoes the tilt and divides by `r`, which returns `E`
//! itself rather than its conjugate.

use ndarray::{Array2, Zip};
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fiber::ModeBasis;
use crate::field::{check_same_shape, ComplexField};
use crate::scalar::Real;

/// Fraction of sideband energy that defines the object bandwidth.
pub const BANDWIDTH_ENERGY_FRACTION: f64 = 0.95;

/// Share of total spectral energy below which a sideband is treated as absent.
const NEGLIGIBLE_ENERGY: f64 = 1e-12;

/// Complex mode coefficients of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionVector<T> {
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> DecompositionVector<T> {
    pub fn new(coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("decomposition coefficients must be finite".into()));
        }
        Ok(DecompositionVector { coeffs })
    }

    pub fn unit(n: usize, k: usize) -> Self {
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); n];
        coeffs[k] = Complex::new(T::one(), T::zero());
        DecompositionVector { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ |c_i|²`.
    pub fn power(&self) -> T {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_error(&self, other: &Self) -> T {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }
}

/// `c_i = ⟨ψ_i, E⟩ · pixel area`.
pub fn holographic_decompose<T: Real>(field: &ComplexField<T>, basis: &ModeBasis<T>) -> Result<DecompositionVector<T>> {
    check_same_shape(basis.shape(), field.shape())?;
    let area = basis.pixel_area();
    let coeffs = basis
        .fields
        .iter()
        .map(|psi| {
            let mut acc = Complex::new(T::zero(), T::zero());
            Zip::from(psi).and(&field.grid).for_each(|&p, &e| acc = acc + e.scale(p));
            acc.scale(area)
        })
        .collect();
    DecompositionVector::new(coeffs)
}

/// Reference tilt expressed as fringe frequency in cycles per pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Carrier {
    pub fx: f64,
    pub fy: f64,
}

impl Carrier {
    pub fn new(fx: f64, fy: f64) -> Result<Self> {
        let c = Carrier { fx, fy };
        let m = c.magnitude();
        if !(m > 0.0 && m < 0.5) || fx.abs() >= 0.5 || fy.abs() >= 0.5 {
            return Err(Error::InvalidArgument(format!(
                "carrier ({fx}, {fy}) cycles/px must have magnitude in (0, 0.5)"
            )));
        }
        Ok(c)
    }

    /// Carrier of the given magnitude along the image diagonal.
    pub fn diagonal(magnitude: f64) -> Result<Self> {
        let f = magnitude / std::f64::consts::SQRT_2;
        Self::new(f, f)
    }

    pub fn magnitude(&self) -> f64 {
        self.fx.hypot(self.fy)
    }

    /// Radius of the band-pass disc.
    pub fn passband_radius(&self) -> f64 {
        0.5 * self.magnitude()
    }

    fn phasor<T: Real>(&self, row: usize, col: usize) -> Complex<T> {
        // reduce the phase in f64 before casting so f32 fields stay accurate
        let cycles = (self.fx * col as f64 + self.fy * row as f64).rem_euclid(1.0);
        let (s, c) = (2.0 * std::f64::consts::PI * cycles).sin_cos();
        Complex::new(T::lit(c), T::lit(s))
    }
}

impl Default for Carrier {
    fn default() -> Self {
        Carrier::diagonal(0.25).expect("valid default carrier")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hologram<T> {
    pub grid: Array2<T>,
    pub carrier: Carrier,
    pub reference_amplitude: T,
    pub pixel_pitch: T,
}

/// `I = |E + R|²` pointwise.
pub fn record_hologram<T: Real>(object: &ComplexField<T>, carrier: Carrier, reference_amplitude: T) -> Result<Hologram<T>> {
    if !(reference_amplitude > T::zero()) || !reference_amplitude.is_finite() {
        return Err(Error::InvalidArgument("reference amplitude must be finite and > 0".into()));
    }
    let carrier = Carrier::new(carrier.fx, carrier.fy)?;
    let (rows, cols) = object.shape();
    if rows != cols {
        return Err(Error::GridMismatch { expected: (rows, rows), actual: (rows, cols) });
    }
    let mut spectrum = object.grid.clone();
    fft2(&mut spectrum, false);
    let bandwidth = energy_radius(&spectrum, (0.0, 0.0), |_, _| true);
    check_separable(bandwidth, &carrier)?;

    let grid = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let total = object.grid[[r, c]] + carrier.phasor::<T>(r, c).scale(reference_amplitude);
        total.norm_sqr()
    });
    Ok(Hologram { grid, carrier, reference_amplitude, pixel_pitch: object.pixel_pitch })
}

fn check_separable(bandwidth: f64, carrier: &Carrier) -> Result<()> {
    let radius = carrier.passband_radius();
    if bandwidth >= radius {
        return Err(Error::SidebandOverlap { bandwidth, radius });
    }
    Ok(())
}

/// Recovers the object field from an off-axis hologram.
pub fn angular_spectrum_reconstruct<T: Real>(holo: &Hologram<T>) -> Result<ComplexField<T>> {
    let (filtered, _) = filtered_sideband(holo)?;
    let mut field = filtered;
    fft2(&mut field, true);
    let inv_r = T::one() / holo.reference_amplitude;
    for ((r, c), z) in field.indexed_iter_mut() {
        *z = (*z * holo.carrier.phasor::<T>(r, c)).scale(inv_r);
    }
    Ok(ComplexField { grid: field, pixel_pitch: holo.pixel_pitch })
}

/// Energy inside the band-pass disc in the discrete Parseval sense,
/// `Σ |S|² / (H·W)`; for a clean recording this is `r² Σ |E|²`.
pub fn sideband_energy<T: Real>(holo: &Hologram<T>) -> Result<f64> {
    let (filtered, _) = filtered_sideband(holo)?;
    let n = (filtered.nrows() * filtered.ncols()) as f64;
    Ok(filtered.iter().map(|z| z.norm_sqr().to_f64_lossy()).sum::<f64>() / n)
}

/// Estimated object bandwidth (cycles/px) seen in the hologram spectrum.
pub fn sideband_bandwidth<T: Real>(holo: &Hologram<T>) -> Result<f64> {
    Ok(filtered_sideband(holo)?.1)
}

fn filtered_sideband<T: Real>(holo: &Hologram<T>) -> Result<(Array2<Complex<T>>, f64)> {
    let (rows, cols) = holo.grid.dim();
    if rows != cols {
        return Err(Error::GridMismatch { expected: (rows, rows), actual: (rows, cols) });
    }
    let carrier = Carrier::new(holo.carrier.fx, holo.carrier.fy)?;
    let mut spectrum = holo.grid.mapv(|v| Complex::new(v, T::zero()));
    fft2(&mut spectrum, false);

    let centre = (-carrier.fx, -carrier.fy);
    // Voronoi cell of the sideband among the three spectral orders.
    let cell = |fx: f64, fy: f64| {
        let d_side = (fx - centre.0).hypot(fy - centre.1);
        d_side < fx.hypot(fy) && d_side < (fx - carrier.fx).hypot(fy - carrier.fy)
    };
    let bandwidth = energy_radius(&spectrum, centre, cell);
    check_separable(bandwidth, &carrier)?;

    let radius = carrier.passband_radius();
    let fr = frequencies(rows);
    let fc = frequencies(cols);
    for ((r, c), z) in spectrum.indexed_iter_mut() {
        if (fc[c] - centre.0).hypot(fr[r] - centre.1) > radius {
            *z = Complex::new(T::zero(), T::zero());
        }
    }
    Ok((spectrum, bandwidth))
}

/// Radius about `centre` enclosing the configured fraction of spectral
/// energy within `region`, after removing a white-noise floor. Noise power
/// per bin is exponentially distributed, so its mean is `median / ln 2`;
/// subtracting the mean without clamping lets noise cancel on average
/// instead of inflating the radius. A region holding a negligible share of
/// the total energy counts as empty.
fn energy_radius<T: Real>(spectrum: &Array2<Complex<T>>, centre: (f64, f64), region: impl Fn(f64, f64) -> bool) -> f64 {
    let (rows, cols) = spectrum.dim();
    let fr = frequencies(rows);
    let fc = frequencies(cols);
    let mut power: Vec<f64> = spectrum.iter().map(|z| z.norm_sqr().to_f64_lossy()).collect();
    let everything: f64 = power.iter().sum();
    let floor = {
        let mid = power.len() / 2;
        *power.select_nth_unstable_by(mid, f64::total_cmp).1 / std::f64::consts::LN_2
    };
    power.clear();
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for ((r, c), z) in spectrum.indexed_iter() {
        let (x, y) = (fc[c], fr[r]);
        if !region(x, y) {
            continue;
        }
        let p = z.norm_sqr().to_f64_lossy() - floor;
        samples.push(((x - centre.0).hypot(y - centre.1), p));
    }
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if total <= NEGLIGIBLE_ENERGY * everything {
        return 0.0;
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (radius, p) in samples {
        acc += p;
        if acc >= BANDWIDTH_ENERGY_FRACTION * total {
            return radius;
        }
    }
    f64::INFINITY
}

/// Signed FFT frequencies in cycles per sample, `numpy.fft.fftfreq` order.
fn frequencies(n: usize) -> Vec<f64> {
    (0..n).map(|k| if k < n.div_ceil(2) { k as f64 / n as f64 } else { (k as f64 - n as f64) / n as f64 }).collect()
}

/// In-place 2D DFT; the inverse is normalised by `1/(H·W)`.
fn fft2<T: Real>(grid: &mut Array2<Complex<T>>, inverse: bool) {
    let (rows, cols) = grid.dim();
    let mut planner = FftPlanner::<T>::new();
    let row_fft = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    let col_fft = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    let mut buffer: Vec<Complex<T>> = Vec::with_capacity(rows.max(cols));
    for mut row in grid.rows_mut() {
        buffer.clear();
        buffer.extend(row.iter().copied());
        row_fft.process(&mut buffer);
        row.iter_mut().zip(&buffer).for_each(|(dst, &src)| *dst = src);
    }
    for mut col in grid.columns_mut() {
        buffer.clear();
        buffer.extend(col.iter().copied());
        col_fft.process(&mut buffer);
        col.iter_mut().zip(&buffer).for_each(|(dst, &src)| *dst = src);
    }
    if inverse {
        let scale = T::one() / T::lit((rows * cols) as f64);
        grid.mapv_inplace(|z| z.scale(scale));
    }
}
