//! Guided LP modes of a weakly guiding step-index fiber, sampled on a square
//! pixel grid.
//!
//! The grid uses pixel-centre sampling, row-major storage and `y` increasing
//! downward (row 0 at the top), with the fibre axis at the window centre.
//! Mode order is the toolkit-wide index convention: ascending `u`, ties by
//! ascending `l`, even before odd.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;
use crate::special::{bessel_j_seq, bessel_k_ratio, bessel_k_scaled_seq};

/// Largest raw (pre-orthonormalisation) overlap between sampled modes that
/// is still accepted as a discretisation effect.
pub const MAX_RAW_OVERLAP: f64 = 0.05;
/// Off-diagonal tolerance of the final grid Gram matrix.
pub const GRAM_TOLERANCE: f64 = 1e-6;

const SCAN_STEP: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct FiberSpec {
    /// Core radius in metres.
    pub core_radius: f64,
    pub na: f64,
    /// Vacuum wavelength in metres.
    pub wavelength: f64,
    /// Pixels per side.
    pub grid_size: usize,
    /// Side length of the square sampling window in metres.
    pub window_side: f64,
}

impl FiberSpec {
    /// Spec with the default window of three core diameters.
    pub fn new(core_radius: f64, na: f64, wavelength: f64, grid_size: usize) -> Result<Self> {
        let spec = FiberSpec {
            core_radius,
            na,
            wavelength,
            grid_size,
            window_side: 6.0 * core_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_window(mut self, window_side: f64) -> Result<Self> {
        self.window_side = window_side;
        self.validate()?;
        Ok(self)
    }

    pub fn with_grid(mut self, grid_size: usize) -> Result<Self> {
        self.grid_size = grid_size;
        self.validate()?;
        Ok(self)
    }

    /// ø10 µm, NA 0.1 at 532 nm: ten guided modes.
    pub fn mmf10(grid_size: usize) -> Result<Self> {
        Self::new(5e-6, 0.1, 532e-9, grid_size)
    }

    /// ø25 µm, NA 0.1 at 532 nm: fifty-five guided modes.
    pub fn mmf55(grid_size: usize) -> Result<Self> {
        Self::new(12.5e-6, 0.1, 532e-9, grid_size)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.core_radius > 0.0 && self.core_radius.is_finite()) {
            return bad(format!("core_radius must be > 0, got {}", self.core_radius));
        }
        if !(self.na > 0.0 && self.na < 1.0) {
            return bad(format!("na must lie in (0, 1), got {}", self.na));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad(format!("wavelength must be > 0, got {}", self.wavelength));
        }
        if self.grid_size < 16 {
            return bad(format!("grid_size must be >= 16, got {}", self.grid_size));
        }
        if !(self.window_side >= 4.0 * self.core_radius * (1.0 - 1e-12)) || !self.window_side.is_finite() {
            return bad(format!(
                "window_side {} must be at least two core diameters ({})",
                self.window_side,
                4.0 * self.core_radius
            ));
        }
        Ok(())
    }

    pub fn v_number(&self) -> f64 {
        v_number(self)
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.window_side / self.grid_size as f64
    }

    /// Short identifier used to tag matrices expressed in a basis.
    pub fn id(&self) -> String {
        format!(
            "a={:e};na={};lambda={:e};grid={};window={:e}",
            self.core_radius, self.na, self.wavelength, self.grid_size, self.window_side
        )
    }
}

/// Normalised frequency `V = 2π a NA / λ`.
pub fn v_number(spec: &FiberSpec) -> f64 {
    2.0 * std::f64::consts::PI * spec.core_radius * spec.na / spec.wavelength
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    /// `cos(lθ)` orientation; the only one for `l = 0`.
    Even,
    /// `sin(lθ)` orientation.
    Odd,
}

/// Mode identity independent of the fibre: `LP_lm` plus orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub l: u32,
    pub m: u32,
    pub parity: Parity,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.l, self.parity) {
            (0, _) => write!(f, "LP{}{}", self.l, self.m),
            (_, Parity::Even) => write!(f, "LP{}{}e", self.l, self.m),
            (_, Parity::Odd) => write!(f, "LP{}{}o", self.l, self.m),
        }
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    /// Accepts `LP02`, `LP11e`, `LP11o`, `LP11,o`, `LP21-odd`, `LP3,1,e`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidArgument(format!("cannot parse mode label `{s}`"));
        let body = s.trim().strip_prefix("LP").or_else(|| s.trim().strip_prefix("lp")).ok_or_else(err)?;
        let lower = body.to_ascii_lowercase();
        let (digits, suffix): (String, String) = {
            let split = lower.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(lower.len());
            (lower[..split].chars().filter(|c| c.is_ascii_digit() || *c == ',').collect(), lower[split..].to_string())
        };
        let parts: Vec<&str> = digits.split(',').filter(|p| !p.is_empty()).collect();
        let (l, m) = match parts.as_slice() {
            [lm] if lm.len() == 2 => (lm[..1].parse().map_err(|_| err())?, lm[1..].parse().map_err(|_| err())?),
            [l, m] => (l.parse().map_err(|_| err())?, m.parse().map_err(|_| err())?),
            _ => return Err(err()),
        };
        let parity = match suffix.as_str() {
            "" | "e" | "even" => Parity::Even,
            "o" | "odd" => Parity::Odd,
            _ => return Err(err()),
        };
        if m == 0 || (l == 0 && parity == Parity::Odd) {
            return Err(err());
        }
        Ok(ModeLabel { l, m, parity })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpMode {
    pub l: u32,
    pub m: u32,
    pub parity: Parity,
    /// Core transverse parameter.
    pub u: f64,
    /// Cladding decay parameter.
    pub w: f64,
}

impl LpMode {
    pub fn label(&self) -> ModeLabel {
        ModeLabel { l: self.l, m: self.m, parity: self.parity }
    }
}

/// Residual of `u J_{l+1}(u)/J_l(u) = w K_{l+1}(w)/K_l(w)`.
pub fn characteristic_residual(l: u32, u: f64, w: f64) -> f64 {
    let j = bessel_j_seq(l as usize + 1, u);
    u * j[l as usize + 1] / j[l as usize] - w * bessel_k_ratio(l as usize, w)
}

/// Pole-free form of the characteristic equation: the residual multiplied
/// by `J_l(u)`. Its sign changes are exactly the mode roots.
fn characteristic_regular(l: usize, u: f64, v: f64) -> f64 {
    let w = ((v - u) * (v + u)).sqrt();
    let j = bessel_j_seq(l + 1, u);
    u * j[l + 1] - w * bessel_k_ratio(l, w) * j[l]
}

/// The same function parameterised by `w`, which stays resolvable when the
/// root crowds against `u = V`.
fn characteristic_regular_w(l: usize, w: f64, v: f64) -> f64 {
    let u = ((v - w) * (v + w)).sqrt();
    let j = bessel_j_seq(l + 1, u);
    u * j[l + 1] - w * bessel_k_ratio(l, w) * j[l]
}

/// Limit at `w → 0`: `w K_{l+1}/K_l` tends to `2l`.
fn characteristic_at_cutoff(l: usize, v: f64) -> f64 {
    let j = bessel_j_seq(l + 1, v);
    v * j[l + 1] - 2.0 * l as f64 * j[l]
}

fn bisect_u(l: usize, v: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = characteristic_regular(l, lo, v);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = characteristic_regular(l, mid, v);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Geometric bisection on `w` in `(w_lo, w_hi)`; returns `w`.
fn bisect_w(l: usize, v: f64, mut w_lo: f64, mut w_hi: f64) -> f64 {
    let mut f_lo = characteristic_regular_w(l, w_lo, v);
    loop {
        let mid = (w_lo * w_hi).sqrt();
        if mid <= w_lo || mid >= w_hi {
            return mid;
        }
        let f_mid = characteristic_regular_w(l, mid, v);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            w_lo = mid;
            f_lo = f_mid;
        } else {
            w_hi = mid;
        }
    }
}

const W_FLOOR: f64 = 1e-300;

/// Roots of order `l` as `(u, w)` pairs, scanning `u` in fixed steps and
/// bisecting every sign change of the pole-free characteristic function.
fn roots_for_order(l: usize, v: f64) -> Vec<(f64, f64)> {
    let step = SCAN_STEP.min(v / 64.0);
    let w_of = |u: f64| ((v - u) * (v + u)).sqrt();
    let mut roots = Vec::new();
    let mut u_prev = step;
    let mut f_prev = characteristic_regular(l, u_prev, v);
    while u_prev + 1.5 * step < v {
        let u = u_prev + step;
        let f = characteristic_regular(l, u, v);
        if f == 0.0 {
            roots.push((u, w_of(u)));
        } else if (f > 0.0) != (f_prev > 0.0) {
            let root = bisect_u(l, v, u_prev, u);
            roots.push((root, w_of(root)));
        }
        u_prev = u;
        f_prev = f;
    }
    // Last bracket [u_prev, V), searched in w so that roots hugging the
    // cutoff keep a representable, strictly positive w.
    let f_end = characteristic_at_cutoff(l, v);
    if f_end != 0.0 && (f_end > 0.0) != (f_prev > 0.0) {
        let w_hi = w_of(u_prev);
        let f_floor = characteristic_regular_w(l, W_FLOOR, v);
        if (f_floor > 0.0) != (f_prev > 0.0) {
            let w = bisect_w(l, v, W_FLOOR, w_hi);
            roots.push(((v - w).sqrt() * (v + w).sqrt(), w));
        }
    }
    roots
}

/// All guided LP modes, both orientations for `l > 0`, in canonical order.
pub fn solve_lp_modes(spec: &FiberSpec) -> Result<Vec<LpMode>> {
    spec.validate()?;
    let v = spec.v_number();
    let mut modes = Vec::new();
    for l in 0usize.. {
        let roots = roots_for_order(l, v);
        if roots.is_empty() {
            break;
        }
        for (idx, &(u, w)) in roots.iter().enumerate() {
            let parities: &[Parity] = if l == 0 { &[Parity::Even] } else { &[Parity::Even, Parity::Odd] };
            for &parity in parities {
                modes.push(LpMode { l: l as u32, m: idx as u32 + 1, parity, u, w });
            }
        }
    }
    if modes.is_empty() {
        return Err(Error::NoGuidedMode(v));
    }
    modes.sort_by(|a, b| {
        a.u.partial_cmp(&b.u)
            .unwrap()
            .then(a.l.cmp(&b.l))
            .then(a.parity.cmp(&b.parity))
    });
    Ok(modes)
}

/// Pixel-centre coordinates of row/column `i` relative to the window centre.
pub fn pixel_coordinate(i: usize, grid_size: usize, window_side: f64) -> f64 {
    ((i as f64 + 0.5) / grid_size as f64 - 0.5) * window_side
}

/// Unnormalised mode field: `J_l(ur/a)/J_l(u)` in the core,
/// `K_l(wr/a)/K_l(w)` in the cladding, times `cos(lθ)` or `sin(lθ)`.
pub fn sample_mode_field(spec: &FiberSpec, mode: &LpMode) -> Array2<f64> {
    let n = spec.grid_size;
    let l = mode.l as usize;
    let a = spec.core_radius;
    let j_edge = bessel_j_seq(l, mode.u)[l];
    let k_edge = bessel_k_scaled_seq(l, mode.w)[l];
    Array2::from_shape_fn((n, n), |(row, col)| {
        let x = pixel_coordinate(col, n, spec.window_side);
        let y = pixel_coordinate(row, n, spec.window_side);
        let r = x.hypot(y) / a;
        let radial = if r <= 1.0 {
            bessel_j_seq(l, mode.u * r)[l] / j_edge
        } else {
            bessel_k_scaled_seq(l, mode.w * r)[l] / k_edge * (-mode.w * (r - 1.0)).exp()
        };
        if l == 0 {
            return radial;
        }
        let angle = l as f64 * y.atan2(x);
        match mode.parity {
            Parity::Even => radial * angle.cos(),
            Parity::Odd => radial * angle.sin(),
        }
    })
}

/// Guided modes of one fibre sampled as a grid-orthonormal basis.
#[derive(Clone, Debug)]
pub struct ModeBasis<T> {
    pub spec: FiberSpec,
    pub modes: Vec<LpMode>,
    pub fields: Vec<Array2<T>>,
    /// Largest overlap between the sampled fields before orthonormalisation.
    pub raw_max_overlap: f64,
}

fn gram_of(fields: &[Array2<f64>], area: f64) -> Array2<f64> {
    let n = fields.len();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = fields[i].iter().zip(fields[j].iter()).map(|(a, b)| a * b).sum::<f64>() * area;
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

fn max_off_diagonal(g: &Array2<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for ((i, j), v) in g.indexed_iter() {
        if i != j {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Solves, samples and orthonormalises the guided modes of `spec`.
///
/// Each sampled field is scaled to unit power (`Σ ψ² · pixel area = 1`).
/// Pixel sampling leaves residual overlaps between modes of the same grid
/// symmetry class; these are removed with a symmetric (Löwdin)
/// orthonormalisation, the smallest change that makes the Gram matrix the
/// identity. Raw overlaps above [`MAX_RAW_OVERLAP`] mean the grid cannot
/// represent the modes and are reported as an error.
pub fn build_basis<T: Real>(spec: &FiberSpec) -> Result<ModeBasis<T>> {
    let modes = solve_lp_modes(spec)?;
    let area = spec.pixel_pitch() * spec.pixel_pitch();
    let mut raw: Vec<Array2<f64>> = modes.par_iter().map(|m| sample_mode_field(spec, m)).collect();
    for field in raw.iter_mut() {
        let power = field.iter().map(|v| v * v).sum::<f64>() * area;
        let scale = power.sqrt();
        field.mapv_inplace(|v| v / scale);
    }
    let gram = gram_of(&raw, area);
    let raw_max_overlap = max_off_diagonal(&gram);
    if raw_max_overlap > MAX_RAW_OVERLAP {
        return Err(Error::NotOrthonormal(raw_max_overlap));
    }

    let (values, vectors) = symmetric_eigen(&gram);
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::NotOrthonormal(raw_max_overlap));
    }
    let n = modes.len();
    let mut inv_sqrt = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            inv_sqrt[[i, j]] = (0..n).map(|k| vectors[[i, k]] * vectors[[j, k]] / values[k].sqrt()).sum();
        }
    }
    let fields: Vec<Array2<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Array2::<f64>::zeros(raw[0].raw_dim());
            for (j, f) in raw.iter().enumerate() {
                let c = inv_sqrt[[i, j]];
                if c != 0.0 {
                    out.scaled_add(c, f);
                }
            }
            out
        })
        .collect();

    let check = gram_of(&fields, area);
    let off = max_off_diagonal(&check);
    let diag = (0..n).map(|i| (check[[i, i]] - 1.0).abs()).fold(0.0, f64::max);
    if off > GRAM_TOLERANCE || diag > 1e-9 {
        return Err(Error::NotOrthonormal(off.max(diag)));
    }

    Ok(ModeBasis {
        spec: spec.clone(),
        modes,
        fields: fields.into_iter().map(|f| f.mapv(T::lit)).collect(),
        raw_max_overlap,
    })
}

impl<T: Real> ModeBasis<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn grid_size(&self) -> usize {
        self.spec.grid_size
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.grid_size, self.spec.grid_size)
    }

    pub fn pixel_pitch(&self) -> T {
        T::lit(self.spec.pixel_pitch())
    }

    pub fn pixel_area(&self) -> T {
        let p = self.pixel_pitch();
        p * p
    }

    pub fn id(&self) -> String {
        format!("{};modes={}", self.spec.id(), self.len())
    }

    /// The first `n` modes. The result stays orthonormal.
    pub fn truncated(&self, n: usize) -> Result<ModeBasis<T>> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!("cannot keep {n} of {} modes", self.len())));
        }
        Ok(ModeBasis {
            spec: self.spec.clone(),
            modes: self.modes[..n].to_vec(),
            fields: self.fields[..n].to_vec(),
            raw_max_overlap: self.raw_max_overlap,
        })
    }

    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.modes.iter().position(|m| m.label() == label)
    }

    /// Grid Gram matrix `⟨ψ_i, ψ_j⟩` including the pixel area.
    pub fn gram(&self) -> Array2<f64> {
        let fields: Vec<Array2<f64>> = self.fields.iter().map(|f| f.mapv(|v| v.to_f64_lossy())).collect();
        gram_of(&fields, self.spec.pixel_pitch().powi(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_number_examples() {
        let s10 = FiberSpec::mmf10(64).unwrap();
        let s55 = FiberSpec::mmf55(64).unwrap();
        // 2π · 5e-6 · 0.1 / 532e-9 evaluated in extended precision
        assert!((s10.v_number() - 5.905_249_348_852_995).abs() < 1e-12);
        assert!((s55.v_number() - 14.763_123_372_132_487).abs() < 1e-12);
        let doubled = FiberSpec::new(5e-6, 0.1, 2.0 * 532e-9, 64).unwrap();
        assert_eq!(doubled.v_number(), s10.v_number() / 2.0);
    }

    #[test]
    fn spec_validation() {
        assert!(FiberSpec::new(0.0, 0.1, 532e-9, 64).is_err());
        assert!(FiberSpec::new(5e-6, 1.0, 532e-9, 64).is_err());
        assert!(FiberSpec::new(5e-6, 0.1, -1.0, 64).is_err());
        assert!(FiberSpec::new(5e-6, 0.1, 532e-9, 15).is_err());
        let s = FiberSpec::mmf10(64).unwrap();
        assert!(s.clone().with_window(19e-6).is_err());
        assert!(s.with_window(20e-6).is_ok());
    }

    #[test]
    fn ten_mode_fiber_labels() {
        let modes = solve_lp_modes(&FiberSpec::mmf10(64).unwrap()).unwrap();
        assert_eq!(modes.len(), 10);
        let names: Vec<String> = modes.iter().map(|m| m.label().to_string()).collect();
        assert_eq!(names, ["LP01", "LP11e", "LP11o", "LP21e", "LP21o", "LP02", "LP31e", "LP31o", "LP12e", "LP12o"]);
        assert!(modes[0].u > 0.0 && modes[0].u < 2.405);
    }

    #[test]
    fn eigenvalues_match_independent_solver() {
        // brentq on scipy Bessel functions
        let want = [
            (0, 2.0499606648770037),
            (1, 3.250708656539065),
            (2, 4.329479283647002),
            (0, 4.620165541588895),
            (3, 5.3310878436871985),
            (1, 5.714563420575524),
        ];
        let modes = solve_lp_modes(&FiberSpec::mmf10(64).unwrap()).unwrap();
        let mut distinct: Vec<(u32, f64)> = modes.iter().map(|m| (m.l, m.u)).collect();
        distinct.dedup();
        for ((l, u), (wl, wu)) in distinct.iter().zip(want) {
            assert_eq!(*l, wl);
            assert!((u - wu).abs() < 1e-10, "l={l}: {u} vs {wu}");
        }
    }

    #[test]
    fn mode_invariants_hold() {
        for spec in [FiberSpec::mmf10(64).unwrap(), FiberSpec::mmf55(64).unwrap()] {
            let v = spec.v_number();
            for m in solve_lp_modes(&spec).unwrap() {
                assert!(((m.u * m.u + m.w * m.w) - v * v).abs() / (v * v) < 1e-9);
                assert!(m.u > 0.0 && m.u < v && m.w > 0.0);
                assert!(m.l > 0 || m.parity == Parity::Even);
                assert!(characteristic_residual(m.l, m.u, m.w).abs() < 1e-10, "{m:?}");
            }
        }
    }

    #[test]
    fn mode_count_monotone_in_v() {
        let mut last = 0;
        for k in 1..=60 {
            let wavelength = 532e-9 * 40.0 / k as f64;
            let spec = FiberSpec::new(5e-6, 0.1, wavelength, 64).unwrap();
            let count = solve_lp_modes(&spec).unwrap().len();
            assert!(count >= last, "count dropped at V = {}", spec.v_number());
            last = count;
        }
    }

    #[test]
    fn sampled_field_shape() {
        let spec = FiberSpec::mmf10(64).unwrap().with_grid(65).unwrap();
        let modes = solve_lp_modes(&spec).unwrap();
        let centre = 32;
        let f0 = sample_mode_field(&spec, &modes[0]);
        let j0u = crate::special::bessel_j(0, modes[0].u);
        assert!((f0[[centre, centre]] - 1.0 / j0u).abs() < 1e-12);
        // radially symmetric: compare mirrored and transposed pixels
        for (r, c) in [(10, 20), (5, 40), (30, 60)] {
            let v = f0[[r, c]];
            assert!((v - f0[[c, r]]).abs() < 1e-12);
            assert!((v - f0[[64 - r, c]]).abs() < 1e-12);
        }
        for m in &modes[1..] {
            if m.l > 0 {
                assert!(sample_mode_field(&spec, m)[[centre, centre]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn field_continuous_at_core_boundary() {
        let spec = FiberSpec::mmf10(64).unwrap();
        for m in solve_lp_modes(&spec).unwrap() {
            let l = m.l as usize;
            let inside = bessel_j_seq(l, m.u * (1.0 - 1e-9))[l] / bessel_j_seq(l, m.u)[l];
            let outside = bessel_k_scaled_seq(l, m.w * (1.0 + 1e-9))[l] / bessel_k_scaled_seq(l, m.w)[l]
                * (-m.w * 1e-9).exp();
            assert!((inside - 1.0).abs() < 1e-7 && (outside - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = build_basis::<f64>(&FiberSpec::mmf10(64).unwrap()).unwrap();
        assert_eq!(basis.modes[0].label().to_string(), "LP01");
        let g = basis.gram();
        for ((i, j), v) in g.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            let tol = if i == j { 1e-9 } else { GRAM_TOLERANCE };
            assert!((v - want).abs() <= tol, "G[{i},{j}] = {v}");
        }
        assert!(basis.raw_max_overlap < 1e-3);
    }

    #[test]
    fn finer_grid_stays_orthonormal() {
        let basis = build_basis::<f64>(&FiberSpec::mmf10(128).unwrap()).unwrap();
        assert!(max_off_diagonal(&basis.gram()) <= GRAM_TOLERANCE);
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let spec = FiberSpec::mmf55(16).unwrap();
        assert!(matches!(build_basis::<f64>(&spec), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn labels_round_trip_through_text() {
        for text in ["LP01", "LP11e", "LP11o", "LP21,o", "LP02", "LP21-odd", "LP3,1,e"] {
            let label: ModeLabel = text.parse().unwrap();
            let again: ModeLabel = label.to_string().parse().unwrap();
            assert_eq!(label, again);
        }
        assert!("LP01o".parse::<ModeLabel>().is_err());
        assert!("LP10".parse::<ModeLabel>().is_err());
        assert!("XY11".parse::<ModeLabel>().is_err());
    }
}
