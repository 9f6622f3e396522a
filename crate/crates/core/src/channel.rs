//! Mode-basis channel simulation: transmission-matrix measurement, inverse
//! precoding and known-mode detection across two fibers.

use ndarray::Array2;
use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fiber::{ModeBasis, ModeLabel};
use crate::field::{check_same_shape, synthesize, ComplexField};
use crate::holography::{holographic_decompose, DecompositionVector};
use crate::linalg::{self, CMatrix};
use crate::scalar::Real;

/// Precoding refuses matrices whose 1-norm condition number exceeds this.
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMatrix<T> {
    pub entries: CMatrix<T>,
    /// [`ModeBasis::id`] of the basis the entries are expressed in.
    pub basis_id: String,
}

impl<T: Real> TransmissionMatrix<T> {
    pub fn new(entries: CMatrix<T>, basis_id: impl Into<String>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::InvalidArgument(format!("transmission matrix must be square, got {r}x{c}")));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("transmission matrix entries must be finite".into()));
        }
        Ok(TransmissionMatrix { entries, basis_id: basis_id.into() })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }
}

/// The simulated fiber. Each call to [`ChannelModel::propagate`] draws its
/// noise from a stream keyed by the propagation counter, so a run is
/// reproducible from the seed alone.
#[derive(Clone, Debug)]
pub struct ChannelModel<T> {
    pub t_true: TransmissionMatrix<T>,
    /// Noise norm relative to the input norm.
    pub sigma: f64,
    pub seed: u64,
    propagations: u64,
}

impl<T: Real> ChannelModel<T> {
    pub fn new(t_true: TransmissionMatrix<T>, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be finite and >= 0")));
        }
        Ok(ChannelModel { t_true, sigma, seed, propagations: 0 })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("noise sigma {sigma} must be finite and >= 0")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    /// Scales output mode `i` by `loss[i]`, making the channel lossy.
    pub fn with_mode_loss(mut self, loss: &[f64]) -> Result<Self> {
        let n = self.t_true.size();
        if loss.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: loss.len() });
        }
        if loss.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(Error::InvalidArgument("mode loss factors must lie in [0, 1]".into()));
        }
        for (mut row, &l) in self.t_true.entries.rows_mut().into_iter().zip(loss) {
            row.mapv_inplace(|z| z.scale(T::lit(l)));
        }
        Ok(self)
    }

    pub fn size(&self) -> usize {
        self.t_true.size()
    }

    pub fn propagations(&self) -> u64 {
        self.propagations
    }

    /// `y = T x + n`, with `n` complex Gaussian of expected norm `σ‖x‖`.
    pub fn propagate(&mut self, x: &DecompositionVector<T>) -> Result<DecompositionVector<T>> {
        let n = self.size();
        if x.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: x.len() });
        }
        let input = ndarray::Array1::from(x.coeffs.clone());
        let mut y = self.t_true.entries.dot(&input).to_vec();
        if self.sigma > 0.0 {
            let norm = x.power().to_f64_lossy().sqrt();
            // per component E|n_i|² = (σ‖x‖)² / N, split over re and im
            let scale = self.sigma * norm / (2.0 * n as f64).sqrt();
            let mut rng = crate::rng::stream(crate::rng::mix_seed(self.seed, 1), self.propagations);
            for v in y.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v = *v + Complex::new(T::lit(scale * re), T::lit(scale * im));
            }
        }
        self.propagations += 1;
        DecompositionVector::new(y)
    }
}

/// Unitary factor of the QR decomposition of a seeded complex Gaussian
/// matrix (Haar-distributed mode mixing).
pub fn random_unitary<T: Real>(n: usize, seed: u64) -> Result<CMatrix<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("channel needs at least one mode".into()));
    }
    let mut rng = crate::rng::stream(seed, 0);
    let g = Array2::from_shape_fn((n, n), |_| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex::new(T::lit(re), T::lit(im))
    });
    linalg::qr_unitary(&g)
}

/// Noise-free random unitary channel on `basis_id`.
pub fn random_channel<T: Real>(n: usize, seed: u64, basis_id: impl Into<String>) -> Result<ChannelModel<T>> {
    ChannelModel::new(TransmissionMatrix::new(random_unitary(n, seed)?, basis_id)?, 0.0, seed)
}

/// Anything that turns an output facet field into mode coefficients.
pub trait Decomposer<T> {
    fn decompose(&self, field: &ComplexField<T>) -> Result<DecompositionVector<T>>;
}

impl<T, F> Decomposer<T> for F
where
    F: Fn(&ComplexField<T>) -> Result<DecompositionVector<T>>,
{
    fn decompose(&self, field: &ComplexField<T>) -> Result<DecompositionVector<T>> {
        self(field)
    }
}

/// Projection onto an orthonormal basis (reference-based measurement).
pub struct HolographicDecomposer<'a, T> {
    pub basis: &'a ModeBasis<T>,
}

impl<T: Real> Decomposer<T> for HolographicDecomposer<'_, T> {
    fn decompose(&self, field: &ComplexField<T>) -> Result<DecompositionVector<T>> {
        holographic_decompose(field, self.basis)
    }
}

/// Launches each column of `inputs`, images the output facet through
/// `basis` and decomposes it; column `j` of the result is the measurement
/// for input `j`.
pub fn measure_with_inputs<T: Real>(
    ch: &mut ChannelModel<T>,
    inputs: &CMatrix<T>,
    basis: &ModeBasis<T>,
    decomposer: &dyn Decomposer<T>,
) -> Result<TransmissionMatrix<T>> {
    let n = ch.size();
    if basis.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: basis.len() });
    }
    if inputs.dim() != (n, n) {
        return Err(Error::GridMismatch { expected: (n, n), actual: inputs.dim() });
    }
    let mut measured = CMatrix::<T>::from_elem((n, n), Complex::new(T::zero(), T::zero()));
    for j in 0..n {
        let x = DecompositionVector::new(inputs.column(j).to_vec())?;
        let y = ch.propagate(&x)?;
        let field = synthesize(&y.coeffs, basis)?;
        let c = decomposer.decompose(&field)?;
        if c.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: c.len() });
        }
        for (i, v) in c.coeffs.into_iter().enumerate() {
            measured[[i, j]] = v;
        }
    }
    TransmissionMatrix::new(measured, basis.id())
}

/// Sequential single-mode excitation: exactly `N` propagations.
pub fn measure_t<T: Real>(
    ch: &mut ChannelModel<T>,
    basis: &ModeBasis<T>,
    decomposer: &dyn Decomposer<T>,
) -> Result<TransmissionMatrix<T>> {
    measure_with_inputs(ch, &linalg::identity(ch.size()), basis, decomposer)
}

/// `κ₁(A) = ‖A‖₁ ‖A⁻¹‖₁`, also returning the inverse.
pub fn condition_number<T: Real>(a: &CMatrix<T>) -> Result<(f64, CMatrix<T>)> {
    let inv = linalg::inverse(a)?;
    let kappa = linalg::norm1(a).to_f64_lossy() * linalg::norm1(&inv).to_f64_lossy();
    Ok((kappa, inv))
}

/// `P = T⁻¹` with every column scaled to unit power.
pub fn inverse_precode<T: Real>(t_measured: &TransmissionMatrix<T>) -> Result<CMatrix<T>> {
    if t_measured.entries.iter().all(|z| z.norm() == T::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let (kappa, mut p) = condition_number(&t_measured.entries)?;
    if !(kappa <= MAX_CONDITION) {
        return Err(Error::IllConditioned(kappa));
    }
    for mut col in p.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        col.mapv_inplace(|z| z.unscale(norm));
    }
    Ok(p)
}

/// `Σ|T_ii|² / Σ|T_ij|²`.
pub fn diag_fraction<T: Real>(t: &CMatrix<T>) -> Result<T> {
    let (r, c) = t.dim();
    if r != c {
        return Err(Error::InvalidArgument(format!("diag_fraction needs a square matrix, got {r}x{c}")));
    }
    let total: T = t.iter().map(|z| z.norm_sqr()).sum();
    if total == T::zero() {
        return Err(Error::ZeroMatrix);
    }
    let diag: T = (0..r).map(|i| t[[i, i]].norm_sqr()).sum();
    Ok(diag / total)
}

/// Outcome of fitting one fiber's facet image onto another fiber's modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection<T> {
    /// Least-squares coefficients on the receiving basis.
    pub coefficients: Vec<Complex<T>>,
    /// `|c_i|` scaled so the largest is 1.
    pub amplitudes: Vec<T>,
    pub argmax: usize,
}

/// Least-squares fit of `field` onto `basis` through the normal equations
/// `G c = Ψᵀ f` with `G` the grid Gram matrix. The images are compared pixel
/// for pixel; no orthogonality between the two fibers is assumed.
pub fn detect_from_field<T: Real>(field: &ComplexField<T>, basis: &ModeBasis<T>) -> Result<Detection<T>> {
    check_same_shape(basis.shape(), field.shape())?;
    let n = basis.len();
    let gram = Array2::from_shape_fn((n, n), |(i, j)| {
        basis.fields[i].iter().zip(basis.fields[j].iter()).map(|(&a, &b)| a * b).sum::<T>()
    });
    let project = |part: fn(&Complex<T>) -> T| -> Vec<T> {
        basis.fields.iter().map(|psi| psi.iter().zip(field.grid.iter()).map(|(&p, z)| p * part(z)).sum()).collect()
    };
    let re = linalg::solve_real(&gram, &project(|z| z.re))?;
    let im = linalg::solve_real(&gram, &project(|z| z.im))?;
    let coefficients: Vec<Complex<T>> = re.into_iter().zip(im).map(|(a, b)| Complex::new(a, b)).collect();
    let magnitudes: Vec<T> = coefficients.iter().map(|c| c.norm()).collect();
    let mut argmax = 0;
    for (i, &m) in magnitudes.iter().enumerate() {
        if m > magnitudes[argmax] {
            argmax = i;
        }
    }
    let peak = magnitudes[argmax];
    if peak == T::zero() {
        return Err(Error::ZeroWeights);
    }
    let amplitudes = magnitudes.iter().map(|&m| m / peak).collect();
    Ok(Detection { coefficients, amplitudes, argmax })
}

/// Excites `label` in the `source` fiber and fits the facet image onto the
/// `receiver` modes. Returns the detection and the receiver index of the
/// same label.
pub fn detect_known_modes<T: Real>(
    label: ModeLabel,
    source: &ModeBasis<T>,
    receiver: &ModeBasis<T>,
) -> Result<(Detection<T>, usize)> {
    let not_guided = || Error::ModeNotGuided(label.to_string());
    let src = source.index_of(label).ok_or_else(not_guided)?;
    let expected = receiver.index_of(label).ok_or_else(not_guided)?;
    let field = synthesize(&DecompositionVector::<T>::unit(source.len(), src).coeffs, source)?;
    Ok((detect_from_field(&field, receiver)?, expected))
}
