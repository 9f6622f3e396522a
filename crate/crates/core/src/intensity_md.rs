//! Reference-free decomposition by alternating projections.
//!
//! The two constraint sets are the measured modulus and the span of the
//! mode basis. Each iteration synthesises the current field, keeps its phase
//! while imposing the measured amplitude, and projects back onto the modes.

use ndarray::Zip;
use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::ModeBasis;
use crate::field::{check_same_shape, cross_correlation, intensity, synthesize, IntensityImage, RoiMask};
use crate::holography::holographic_decompose;
use crate::labels::{canonicalize, ModeWeights};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GsConfig {
    pub max_iters: usize,
    pub restarts: usize,
    /// Stop once `|ΔΓ|` between iterations drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for GsConfig {
    fn default() -> Self {
        GsConfig { max_iters: 500, restarts: 16, tol: 1e-10, seed: 0 }
    }
}

impl GsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("max_iters and restarts must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GsResult<T> {
    /// Canonical weights of the best iterate of the best restart.
    pub weights: ModeWeights<T>,
    /// Γ between its intensity and the measured intensity.
    pub gamma: T,
    pub best_restart: usize,
    /// Γ after each iteration of the best restart.
    pub trace: Vec<T>,
    /// Best Γ reached by every restart, in restart order.
    pub restart_gammas: Vec<T>,
}

struct RestartOutcome<T> {
    coeffs: Vec<Complex<T>>,
    gamma: T,
    trace: Vec<T>,
}

/// Decomposes a measured amplitude image `√I` into mode weights.
pub fn gs_decompose<T: Real>(measured_amplitude: &IntensityImage<T>, basis: &ModeBasis<T>, cfg: &GsConfig) -> Result<GsResult<T>> {
    gs_decompose_roi(measured_amplitude, basis, cfg, &RoiMask::full(basis.grid_size()))
}

/// As [`gs_decompose`], scoring Γ over `roi`.
pub fn gs_decompose_roi<T: Real>(
    measured_amplitude: &IntensityImage<T>,
    basis: &ModeBasis<T>,
    cfg: &GsConfig,
    roi: &RoiMask,
) -> Result<GsResult<T>> {
    cfg.validate()?;
    check_same_shape(basis.shape(), measured_amplitude.shape())?;
    check_same_shape(basis.shape(), roi.shape())?;
    if measured_amplitude.peak() <= T::zero() {
        return Err(Error::InvalidArgument("measured amplitude is zero everywhere".into()));
    }
    let measured_intensity = measured_amplitude.squared();
    let outcomes: Vec<RestartOutcome<T>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| run_restart(measured_amplitude, &measured_intensity, basis, cfg, roi, restart))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.gamma > outcomes[best].gamma {
            best = i;
        }
    }
    let restart_gammas = outcomes.iter().map(|o| o.gamma).collect();
    let winner = &outcomes[best];
    let weights = canonicalize(&ModeWeights::from_complex(&winner.coeffs)?)?;
    Ok(GsResult { weights, gamma: winner.gamma, best_restart: best, trace: winner.trace.clone(), restart_gammas })
}

fn run_restart<T: Real>(
    amplitude: &IntensityImage<T>,
    measured_intensity: &IntensityImage<T>,
    basis: &ModeBasis<T>,
    cfg: &GsConfig,
    roi: &RoiMask,
    restart: usize,
) -> Result<RestartOutcome<T>> {
    let n = basis.len();
    let mut rng = crate::rng::stream(cfg.seed, restart as u64);
    let start = T::one() / T::lit(n as f64).sqrt();
    let mut coeffs: Vec<Complex<T>> = (0..n)
        .map(|_| Complex::from_polar(start, T::lit(rng.random::<f64>() * std::f64::consts::TAU)))
        .collect();

    let score = |c: &[Complex<T>]| -> Result<(T, crate::field::ComplexField<T>)> {
        let field = synthesize(c, basis)?;
        let gamma = match cross_correlation(measured_intensity, &intensity(&field), roi) {
            Ok(g) => g,
            Err(Error::ConstantImage) => -T::one(),
            Err(e) => return Err(e),
        };
        Ok((gamma, field))
    };

    let (mut gamma, mut field) = score(&coeffs)?;
    let mut best = RestartOutcome { coeffs: coeffs.clone(), gamma, trace: vec![gamma] };
    for _ in 0..cfg.max_iters {
        // modulus constraint: measured amplitude, current phase
        Zip::from(&mut field.grid).and(&amplitude.grid).for_each(|e, &a| {
            let m = e.norm();
            *e = if m > T::zero() { e.scale(a / m) } else { Complex::new(a, T::zero()) };
        });
        coeffs = holographic_decompose(&field, basis)?.coeffs;
        let previous = gamma;
        (gamma, field) = score(&coeffs)?;
        best.trace.push(gamma);
        if gamma > best.gamma {
            best.gamma = gamma;
            best.coeffs.clone_from(&coeffs);
        }
        if (gamma - previous).abs().to_f64_lossy() < cfg.tol {
            break;
        }
    }
    Ok(best)
}
