//! Mode weights and their ambiguity-free label encoding.
//!
//! A label stores the `N` amplitudes followed by `(cos φ_i + 1) / 2` for every
//! higher-order mode, with phases taken relative to LP01. The cosine removes
//! both the global-phase and the conjugate ambiguity of intensity images, so
//! decoding has to pick the arccos branch of each mode; it does so by trying
//! every sign pattern and keeping the one whose intensity best matches the
//! measured image.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::ModeBasis;
use crate::field::{check_same_shape, IntensityImage, RoiMask};
use crate::scalar::Real;

/// Below this amplitude a mode's phase carries no information and is
/// encoded as `φ = 0`.
pub const ZERO_AMPLITUDE: f64 = 1e-6;

/// Tolerance for the `φ_0 = 0`, unit-power checks of `encode`.
pub const CANONICAL_TOLERANCE: f64 = 1e-9;

/// Upper bound on modes for the exhaustive sign search (2^23 candidates).
pub const MAX_SIGN_SEARCH_MODES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct ModeWeights<T> {
    pub amplitudes: Vec<T>,
    /// Radians.
    pub phases: Vec<T>,
}

impl<T: Real> ModeWeights<T> {
    pub fn new(amplitudes: Vec<T>, phases: Vec<T>) -> Result<Self> {
        if amplitudes.len() != phases.len() {
            return Err(Error::LengthMismatch { expected: amplitudes.len(), actual: phases.len() });
        }
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("mode weights need at least one mode".into()));
        }
        if amplitudes.iter().any(|&a| !(a >= T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidArgument("amplitudes must be finite and non-negative".into()));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("phases must be finite".into()));
        }
        Ok(ModeWeights { amplitudes, phases })
    }

    pub fn from_complex(coeffs: &[Complex<T>]) -> Result<Self> {
        let amplitudes = coeffs.iter().map(|c| c.norm()).collect();
        let phases = coeffs.iter().map(|c| wrap_phase(c.arg())).collect();
        Self::new(amplitudes, phases)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn to_complex(&self) -> Vec<Complex<T>> {
        self.amplitudes.iter().zip(&self.phases).map(|(&r, &p)| Complex::from_polar(r, p)).collect()
    }

    /// `Σ ρ_i²`.
    pub fn power(&self) -> T {
        self.amplitudes.iter().map(|&a| a * a).sum()
    }

    /// Joint conjugation `φ_i → −φ_i`.
    pub fn conj(&self) -> Self {
        ModeWeights { amplitudes: self.amplitudes.clone(), phases: self.phases.iter().map(|&p| wrap_phase(-p)).collect() }
    }

    /// Largest `|c_i − c'_i|` between the complex coefficients.
    pub fn max_complex_distance(&self, other: &Self) -> T {
        self.to_complex().iter().zip(other.to_complex()).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    /// Distance to `other` allowing for joint conjugation.
    pub fn distance_up_to_conjugation(&self, other: &Self) -> T {
        self.max_complex_distance(other).min(self.max_complex_distance(&other.conj()))
    }

    pub fn is_canonical(&self) -> bool {
        let tol = T::lit(CANONICAL_TOLERANCE);
        (self.power() - T::one()).abs() <= tol && self.phases[0].abs() <= tol
    }
}

/// Wraps an angle to `[0, 2π)`.
pub fn wrap_phase<T: Real>(p: T) -> T {
    let two_pi = T::PI() + T::PI();
    let w = p % two_pi;
    let w = if w < T::zero() { w + two_pi } else { w };
    // `-tiny + 2π` rounds to exactly 2π
    if w >= two_pi { T::zero() } else { w }
}

/// Rotates every phase by `−φ_0` and rescales to unit power.
pub fn canonicalize<T: Real>(weights: &ModeWeights<T>) -> Result<ModeWeights<T>> {
    let power = weights.power();
    if power <= T::zero() {
        return Err(Error::ZeroWeights);
    }
    let norm = power.sqrt();
    let reference = weights.phases[0];
    Ok(ModeWeights {
        amplitudes: weights.amplitudes.iter().map(|&a| a / norm).collect(),
        phases: weights.phases.iter().map(|&p| wrap_phase(p - reference)).collect(),
    })
}

/// `2N − 1` values in `[0, 1]`: amplitudes, then encoded phase cosines.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVector<T> {
    values: Vec<T>,
}

impl<T: Real> LabelVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() % 2 == 0 {
            return Err(Error::InvalidArgument(format!("label length must be 2N-1, got {}", values.len())));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!("label entry {i} is {v}, outside [0, 1]")));
        }
        Ok(LabelVector { values })
    }

    /// Accepts raw network output, clamping every entry into `[0, 1]`.
    /// Non-finite entries are rejected.
    pub fn clamped(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("label entries must be finite".into()));
        }
        Self::new(values.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect())
    }

    pub fn n_modes(&self) -> usize {
        self.values.len().div_ceil(2)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn amplitudes(&self) -> &[T] {
        &self.values[..self.n_modes()]
    }

    /// Stored `(cos φ_i + 1) / 2` for modes `1..N`.
    pub fn phase_codes(&self) -> &[T] {
        &self.values[self.n_modes()..]
    }
}

/// Encodes canonical weights.
pub fn encode<T: Real>(weights: &ModeWeights<T>) -> Result<LabelVector<T>> {
    if !weights.is_canonical() {
        return Err(Error::NotCanonical(format!(
            "power {} and reference phase {} (expected 1 and 0)",
            weights.power(),
            weights.phases[0]
        )));
    }
    let half = T::lit(0.5);
    let mut values: Vec<T> = weights.amplitudes.iter().map(|&a| a.min(T::one())).collect();
    for (&a, &p) in weights.amplitudes.iter().zip(&weights.phases).skip(1) {
        let code = if a < T::lit(ZERO_AMPLITUDE) { T::one() } else { (p.cos() + T::one()) * half };
        values.push(code.max(T::zero()).min(T::one()));
    }
    LabelVector::new(values)
}

/// Arccos branch per higher-order mode. Pattern indices enumerate
/// lexicographically with `+` before `−` and mode 1 most significant, so
/// index 0 is all `+`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignPattern {
    negative: Vec<bool>,
}

impl SignPattern {
    pub fn from_index(index: u64, len: usize) -> Self {
        let negative = (0..len).map(|k| (index >> (len - 1 - k)) & 1 == 1).collect();
        SignPattern { negative }
    }

    pub fn index(&self) -> u64 {
        self.negative.iter().fold(0, |acc, &neg| (acc << 1) | neg as u64)
    }

    pub fn len(&self) -> usize {
        self.negative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.negative.is_empty()
    }

    /// `+1` or `−1` for higher-order mode `k + 1`.
    pub fn sign(&self, k: usize) -> i8 {
        if self.negative[k] { -1 } else { 1 }
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.len()).map(|k| self.sign(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded<T> {
    pub weights: ModeWeights<T>,
    pub signs: SignPattern,
    pub gamma: T,
    /// Number of sign patterns evaluated.
    pub candidates: u64,
}

/// Weights obtained from a label and a sign pattern, before any search.
pub fn weights_from_label<T: Real>(label: &LabelVector<T>, signs: &SignPattern) -> Result<ModeWeights<T>> {
    let n = label.n_modes();
    if signs.len() + 1 != n {
        return Err(Error::LengthMismatch { expected: n - 1, actual: signs.len() });
    }
    let (amplitudes, angles) = label_amplitudes_and_angles(label)?;
    let mut phases = vec![T::zero(); n];
    for k in 0..n - 1 {
        let theta = angles[k];
        phases[k + 1] = wrap_phase(if signs.negative[k] { -theta } else { theta });
    }
    ModeWeights::new(amplitudes, phases)
}

/// Unit-power amplitudes and `arccos Ψ ∈ [0, π]` per higher-order mode.
fn label_amplitudes_and_angles<T: Real>(label: &LabelVector<T>) -> Result<(Vec<T>, Vec<T>)> {
    let raw = label.amplitudes();
    let power: T = raw.iter().map(|&a| a * a).sum();
    if power <= T::zero() {
        return Err(Error::ZeroWeights);
    }
    let norm = power.sqrt();
    let amplitudes = raw.iter().map(|&a| a / norm).collect();
    let two = T::lit(2.0);
    let angles = label
        .phase_codes()
        .iter()
        .map(|&v| (two * v - T::one()).max(-T::one()).min(T::one()).acos())
        .collect();
    Ok((amplitudes, angles))
}

/// Decodes a (possibly predicted) label against the intensity it should
/// explain, trying all `2^(N−1)` arccos sign patterns.
///
/// Each candidate's field is `R + j Σ s_i B_i` with `R = Σ ρ_i cos φ_i ψ_i`
/// and `B_i = ρ_i sin φ_i ψ_i`, which is exactly what synthesising the
/// candidate weights would give. The imaginary part is summed in a fixed
/// order, so a pattern and its complement produce bit-identical
/// intensities and ties resolve to the lower index.
pub fn decode_with_sign_search<T: Real>(
    label: &LabelVector<T>,
    target: &IntensityImage<T>,
    basis: &ModeBasis<T>,
    roi: &RoiMask,
) -> Result<Decoded<T>> {
    let n = label.n_modes();
    if n != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), actual: n });
    }
    if n > MAX_SIGN_SEARCH_MODES {
        return Err(Error::InvalidArgument(format!(
            "sign search over {n} modes is infeasible (limit {MAX_SIGN_SEARCH_MODES})"
        )));
    }
    check_same_shape(basis.shape(), target.shape())?;
    check_same_shape(basis.shape(), roi.shape())?;

    let pixels = roi.indices();
    let flat = |a: &ndarray::Array2<T>| -> Vec<T> {
        let s = a.as_slice().expect("standard layout");
        pixels.iter().map(|&i| s[i]).collect()
    };
    let target_px = flat(&target.grid);
    let centred = Centred::new(&target_px).ok_or(Error::ConstantImage)?;

    let (amplitudes, angles) = label_amplitudes_and_angles(label)?;
    let mode_px: Vec<Vec<T>> = basis.fields.iter().map(flat).collect();
    let mut real = vec![T::zero(); pixels.len()];
    for (i, psi) in mode_px.iter().enumerate() {
        let cos = if i == 0 { T::one() } else { angles[i - 1].cos() };
        let c = amplitudes[i] * cos;
        for (r, &p) in real.iter_mut().zip(psi) {
            *r += c * p;
        }
    }
    let imag_terms: Vec<Vec<T>> = (1..n)
        .map(|i| {
            let c = amplitudes[i] * angles[i - 1].sin();
            mode_px[i].iter().map(|&p| c * p).collect()
        })
        .collect();

    let candidates = 1u64 << (n - 1);
    let evaluate = |index: u64| -> T {
        let mut out = Vec::with_capacity(real.len());
        for (px, &r) in real.iter().enumerate() {
            let mut s = T::zero();
            for (k, term) in imag_terms.iter().enumerate() {
                let negative = (index >> (n - 2 - k)) & 1 == 1;
                s = if negative { s - term[px] } else { s + term[px] };
            }
            out.push(r * r + s * s);
        }
        centred.correlate(&out).unwrap_or(T::neg_infinity())
    };
    let (gamma, best) = (0..candidates)
        .into_par_iter()
        .map(|index| (evaluate(index), index))
        .reduce(|| (T::neg_infinity(), u64::MAX), pick_better);
    if gamma == T::neg_infinity() {
        return Err(Error::ConstantImage);
    }
    let signs = SignPattern::from_index(best, n - 1);
    let weights = weights_from_label(label, &signs)?;
    Ok(Decoded { weights, signs, gamma: gamma.min(T::one()), candidates })
}

/// Higher Γ wins; equal Γ goes to the lower index. Associative and
/// commutative, so any reduction order gives the sequential answer.
fn pick_better<T: Real>(a: (T, u64), b: (T, u64)) -> (T, u64) {
    if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) { a } else { b }
}

/// A target image with its mean removed, reused across many correlations.
struct Centred<T> {
    values: Vec<T>,
    norm: T,
}

impl<T: Real> Centred<T> {
    fn new(values: &[T]) -> Option<Self> {
        let mean = values.iter().copied().sum::<T>() / T::lit(values.len() as f64);
        let values: Vec<T> = values.iter().map(|&v| v - mean).collect();
        let norm = values.iter().map(|&v| v * v).sum::<T>().sqrt();
        (norm > T::zero()).then_some(Centred { values, norm })
    }

    /// Pearson coefficient against `other`; `None` if `other` is constant.
    fn correlate(&self, other: &[T]) -> Option<T> {
        let mean = other.iter().copied().sum::<T>() / T::lit(other.len() as f64);
        let (mut cross, mut var) = (T::zero(), T::zero());
        for (&t, &o) in self.values.iter().zip(other) {
            let d = o - mean;
            cross += t * d;
            var += d * d;
        }
        (var > T::zero()).then(|| cross / (self.norm * var.sqrt()))
    }
}
