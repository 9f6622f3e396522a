//! End-to-end evaluation: prediction files, scoring, the resolution
//! comparison and CSV reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;

use crate::channel::{self, ChannelModel, HolographicDecomposer, TransmissionMatrix};
use crate::dataset::{DatasetHeader, DatasetReader, Record};
use crate::error::{Error, Result};
use crate::fiber::{ModeBasis, ModeLabel};
use crate::field::{add_camera_noise, cross_correlation, downsample_field, intensity, superpose, synthesize, IntensityImage, RoiMask};
use crate::holography::{angular_spectrum_reconstruct, holographic_decompose, record_hologram, Carrier, DecompositionVector, Hologram};
use crate::intensity_md::{gs_decompose_roi, GsConfig};
use crate::labels::{canonicalize, decode_with_sign_search, LabelVector};
use crate::scalar::Real;

pub const PRED_MAGIC: [u8; 4] = *b"MMFP";
pub const PRED_VERSION: u32 = 1;
pub const PRED_HEADER_LEN: u64 = 20;

/// Records scored per parallel batch.
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PredictionHeader {
    pub n_modes: u32,
    pub count: u64,
}

impl PredictionHeader {
    pub fn label_len(&self) -> usize {
        2 * self.n_modes as usize - 1
    }

    pub fn file_bytes(&self) -> u64 {
        PRED_HEADER_LEN + self.count * 4 * self.label_len() as u64
    }
}

/// Writes a prediction file; `finish` checks the declared count.
pub struct PredictionWriter<W: Write> {
    inner: W,
    header: PredictionHeader,
    written: u64,
}

impl<W: Write> PredictionWriter<W> {
    pub fn new(mut inner: W, header: PredictionHeader) -> Result<Self> {
        if header.n_modes == 0 {
            return Err(Error::InvalidArgument("prediction file needs N >= 1".into()));
        }
        inner.write_all(&PRED_MAGIC)?;
        inner.write_all(&PRED_VERSION.to_le_bytes())?;
        inner.write_all(&header.n_modes.to_le_bytes())?;
        inner.write_all(&header.count.to_le_bytes())?;
        Ok(PredictionWriter { inner, header, written: 0 })
    }

    pub fn write(&mut self, values: &[f32]) -> Result<()> {
        if values.len() != self.header.label_len() {
            return Err(Error::LengthMismatch { expected: self.header.label_len(), actual: values.len() });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::LabelOutOfRange { index: self.written, position, value });
        }
        if self.written >= self.header.count {
            return Err(Error::InvalidArgument(format!("more than the declared {} predictions", self.header.count)));
        }
        let mut buf = Vec::with_capacity(4 * values.len());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.count {
            return Err(Error::InvalidArgument(format!(
                "declared {} predictions but wrote {}",
                self.header.count, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming prediction reader; same error semantics as the dataset reader.
pub struct PredictionReader<R: Read> {
    inner: R,
    header: PredictionHeader,
    next: u64,
    done: bool,
}

impl PredictionReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let reader = PredictionReader::new(BufReader::new(file))?;
        let expected = reader.header.file_bytes();
        if len < expected {
            let complete = len.saturating_sub(PRED_HEADER_LEN) / (4 * reader.header.label_len() as u64);
            return Err(Error::Truncated { index: complete });
        }
        if len > expected {
            return Err(Error::TrailingData { extra: len - expected });
        }
        Ok(reader)
    }
}

impl<R: Read> PredictionReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut bytes = [0u8; PRED_HEADER_LEN as usize];
        inner.read_exact(&mut bytes).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::InvalidArgument("file shorter than the prediction header".into()),
            _ => Error::Io(e),
        })?;
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != PRED_MAGIC {
            return Err(Error::BadMagic { expected: PRED_MAGIC, found: magic });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != PRED_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let n_modes = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if n_modes == 0 {
            return Err(Error::InvalidArgument("prediction file declares N = 0".into()));
        }
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        Ok(PredictionReader { inner, header: PredictionHeader { n_modes, count }, next: 0, done: false })
    }

    pub fn header(&self) -> &PredictionHeader {
        &self.header
    }

    fn read_next(&mut self) -> Result<Option<Vec<f32>>> {
        if self.next == self.header.count {
            let mut rest = Vec::new();
            self.inner.read_to_end(&mut rest)?;
            if !rest.is_empty() {
                return Err(Error::TrailingData { extra: rest.len() as u64 });
            }
            return Ok(None);
        }
        let index = self.next;
        let mut buf = vec![0u8; 4 * self.header.label_len()];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Truncated { index },
            _ => Error::Io(e),
        })?;
        let values: Vec<f32> = buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::LabelOutOfRange { index, position, value });
        }
        self.next += 1;
        Ok(Some(values))
    }
}

impl<R: Read> Iterator for PredictionReader<R> {
    type Item = Result<Vec<f32>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.read_next().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Predictions equal to the stored labels of `dataset` (perfect predictor).
pub fn write_exact_predictions(dataset: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<PredictionHeader> {
    let reader = DatasetReader::open(dataset)?;
    let header = PredictionHeader { n_modes: reader.header().n_modes, count: reader.header().count };
    let mut writer = PredictionWriter::new(BufWriter::new(File::create(out)?), header)?;
    for record in reader {
        writer.write(&record?.label)?;
    }
    writer.finish()?;
    Ok(header)
}

/// The same `value` for every entry of every record (degenerate predictor).
pub fn write_constant_predictions(dataset: impl AsRef<Path>, value: f32, out: impl AsRef<Path>) -> Result<PredictionHeader> {
    let reader = DatasetReader::open(dataset)?;
    let header = PredictionHeader { n_modes: reader.header().n_modes, count: reader.header().count };
    let mut writer = PredictionWriter::new(BufWriter::new(File::create(out)?), header)?;
    let row = vec![value; header.label_len()];
    for _ in 0..header.count {
        writer.write(&row)?;
    }
    writer.finish()?;
    Ok(header)
}

/// Per-record Γ of one method at one resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub gammas: Vec<f64>,
    pub method: String,
    pub resolution: String,
}

impl ScoreReport {
    pub fn new(method: impl Into<String>, resolution: impl Into<String>) -> Self {
        ScoreReport { gammas: Vec::new(), method: method.into(), resolution: resolution.into() }
    }

    pub fn count(&self) -> usize {
        self.gammas.len()
    }

    /// NaN when empty.
    pub fn mean(&self) -> f64 {
        self.gammas.iter().sum::<f64>() / self.gammas.len() as f64
    }

    /// Sample standard deviation (`n − 1`); zero for a single record and NaN
    /// when empty.
    pub fn std(&self) -> f64 {
        match self.gammas.len() {
            0 => f64::NAN,
            1 => 0.0,
            n => {
                let m = self.mean();
                (self.gammas.iter().map(|g| (g - m) * (g - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        }
    }

    /// NaN when empty.
    pub fn min(&self) -> f64 {
        if self.gammas.is_empty() {
            return f64::NAN;
        }
        self.gammas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn median(&self) -> f64 {
        if self.gammas.is_empty() {
            return f64::NAN;
        }
        let mut sorted = self.gammas.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) }
    }
}

fn image_from_record<T: Real>(record: &Record, basis: &ModeBasis<T>) -> Result<IntensityImage<T>> {
    let grid = ndarray::Array2::from_shape_vec(basis.shape(), record.image.iter().map(|&v| T::lit(v as f64)).collect())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    IntensityImage::new(grid, basis.pixel_pitch())
}

fn check_dataset_against_basis<T: Real>(header: &DatasetHeader, basis: &ModeBasis<T>) -> Result<()> {
    if header.n_modes as usize != basis.len() {
        return Err(Error::LengthMismatch { expected: basis.len(), actual: header.n_modes as usize });
    }
    let shape = (header.height as usize, header.width as usize);
    check_grid(basis.shape(), shape)
}

fn check_grid(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch { expected, actual });
    }
    Ok(())
}

/// Decodes every prediction against the stored intensity of the matching
/// dataset record and reports Γ between that intensity and the intensity
/// synthesised from the decoded weights.
pub fn score_predictions<T: Real>(
    dataset: impl AsRef<Path>,
    predictions: impl AsRef<Path>,
    basis: &ModeBasis<T>,
    roi: &RoiMask,
    method: &str,
) -> Result<ScoreReport> {
    let records = DatasetReader::open(dataset)?;
    let preds = PredictionReader::open(predictions)?;
    let (dh, ph) = (*records.header(), *preds.header());
    check_dataset_against_basis(&dh, basis)?;
    if ph.n_modes != dh.n_modes {
        return Err(Error::LengthMismatch { expected: dh.n_modes as usize, actual: ph.n_modes as usize });
    }
    if ph.count != dh.count {
        return Err(Error::InvalidArgument(format!(
            "prediction count {} does not match dataset count {}",
            ph.count, dh.count
        )));
    }
    let mut report = ScoreReport::new(method, basis.grid_size().to_string());
    let mut pairs = records.zip(preds);
    loop {
        let batch: Vec<(Record, Vec<f32>)> =
            pairs.by_ref().take(BATCH).map(|(r, p)| Ok((r?, p?))).collect::<Result<_>>()?;
        if batch.is_empty() {
            break;
        }
        let gammas: Vec<f64> = batch
            .par_iter()
            .map(|(record, pred)| score_one(record, pred, basis, roi))
            .collect::<Result<_>>()?;
        report.gammas.extend(gammas);
    }
    Ok(report)
}

fn score_one<T: Real>(record: &Record, prediction: &[f32], basis: &ModeBasis<T>, roi: &RoiMask) -> Result<f64> {
    let target = image_from_record(record, basis)?;
    let label = LabelVector::clamped(prediction.iter().map(|&v| T::lit(v as f64)).collect())?;
    let decoded = decode_with_sign_search(&label, &target, basis, roi)?;
    let candidate = intensity(&superpose(&decoded.weights, basis)?);
    Ok(cross_correlation(&target, &candidate, roi)?.to_f64_lossy())
}

/// Runs the GS baseline on (at most `limit`) dataset records, feeding it the
/// square root of each stored intensity.
pub fn gs_score_dataset<T: Real>(
    dataset: impl AsRef<Path>,
    basis: &ModeBasis<T>,
    cfg: &GsConfig,
    roi: &RoiMask,
    limit: Option<u64>,
) -> Result<ScoreReport> {
    let records = DatasetReader::open(dataset)?;
    check_dataset_against_basis(records.header(), basis)?;
    let mut report = ScoreReport::new("gs", basis.grid_size().to_string());
    let take = limit.unwrap_or(u64::MAX) as usize;
    for (k, record) in records.take(take).enumerate() {
        let target = image_from_record(&record?, basis)?;
        let run_cfg = GsConfig { seed: crate::rng::mix_seed(cfg.seed, k as u64), ..*cfg };
        let result = gs_decompose_roi(&target.sqrt(), basis, &run_cfg, roi)?;
        report.gammas.push(result.gamma.to_f64_lossy());
    }
    Ok(report)
}

/// Camera degradation applied to recorded holograms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Read noise as a fraction of the clean peak.
    pub sigma: f64,
    /// 8-bit quantisation.
    pub quantize: bool,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0, quantize: false };
}

/// Holography settings shared by the simulated experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoloSettings {
    pub carrier: Carrier,
    /// Reference amplitude as a multiple of the object's peak amplitude.
    pub reference_factor: f64,
    pub noise: NoiseSpec,
}

impl Default for HoloSettings {
    fn default() -> Self {
        HoloSettings { carrier: Carrier::default(), reference_factor: 2.0, noise: NoiseSpec::NONE }
    }
}

/// Random canonical weights of trial `k`, uniform amplitudes and phases.
pub fn trial_weights<T: Real>(seed: u64, k: u64, n: usize) -> Result<crate::labels::ModeWeights<T>> {
    let raw = crate::dataset::prmc_raw_weights(seed, k, n);
    canonicalize(&crate::labels::ModeWeights::new(
        raw.amplitudes.into_iter().map(T::lit).collect(),
        raw.phases.into_iter().map(T::lit).collect(),
    )?)
}

/// Records the hologram of `field`, degrades it and reconstructs.
pub fn measure_field<T: Real>(field: &crate::field::ComplexField<T>, settings: &HoloSettings, noise_seed: u64) -> Result<crate::field::ComplexField<T>> {
    let r = T::lit(settings.reference_factor) * field.peak_amplitude();
    let holo = record_hologram(field, settings.carrier, r)?;
    let holo = if settings.noise.sigma > 0.0 || settings.noise.quantize {
        let image = IntensityImage::new(holo.grid.clone(), holo.pixel_pitch)?;
        let noisy = add_camera_noise(&image, T::lit(settings.noise.sigma), settings.noise.quantize, noise_seed)?;
        Hologram { grid: noisy.grid, ..holo }
    } else {
        holo
    };
    angular_spectrum_reconstruct(&holo)
}

/// One trial of the hologram round trip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoloTrial {
    /// Amplitude-image Γ between original and reconstruction over the ROI.
    pub gamma: f64,
    /// Largest complex coefficient error after decomposition.
    pub max_error: f64,
}

/// Record, reconstruct and decompose `trials` random fields.
pub fn holo_roundtrip<T: Real>(trials: u64, basis: &ModeBasis<T>, settings: &HoloSettings, roi: &RoiMask, seed: u64) -> Result<Vec<HoloTrial>> {
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let w = trial_weights::<T>(seed, k, basis.len())?;
            let field = superpose(&w, basis)?;
            let back = measure_field(&field, settings, crate::rng::mix_seed(seed, k))?;
            let gamma = cross_correlation(&field.amplitude(), &back.amplitude(), roi)?.to_f64_lossy();
            let got = holographic_decompose(&back, basis)?;
            let want = DecompositionVector::new(w.to_complex())?;
            Ok(HoloTrial { gamma, max_error: got.max_error(&want).to_f64_lossy() })
        })
        .collect()
}

/// Paired outcome of [`compare_resolutions`].
#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionComparison {
    /// Decomposition at full resolution.
    pub full: ScoreReport,
    /// Decomposition of the downsampled field, scored against the same
    /// full-resolution measurement.
    pub downsampled: ScoreReport,
    /// Decomposition of the downsampled field scored against the
    /// downsampled measurement itself.
    pub downsampled_native: ScoreReport,
}

impl ResolutionComparison {
    /// `mean Γ(downsampled) / mean Γ(full)`.
    pub fn ratio(&self) -> f64 {
        self.downsampled.mean() / self.full.mean()
    }
}

/// Holographic decomposition at full resolution against decomposition
/// after downsampling amplitude and phase.
///
/// Each trial draws uniform random weights, records a noisy hologram of the
/// field on `full`'s grid and reconstructs it. The full pipeline decomposes
/// the reconstruction directly; the downsampled pipeline first resamples it
/// onto `low`'s grid. Both decompositions are then re-synthesised on the
/// full grid and correlated with the same reconstructed intensity, so the
/// two Γ values share one target.
pub fn compare_resolutions<T: Real>(
    trials: u64,
    full: &ModeBasis<T>,
    low: &ModeBasis<T>,
    settings: &HoloSettings,
    roi_full: &RoiMask,
    roi_low: &RoiMask,
    seed: u64,
) -> Result<ResolutionComparison> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if full.len() != low.len() || full.modes.iter().zip(&low.modes).any(|(a, b)| a.label() != b.label()) {
        return Err(Error::InvalidArgument("full and low bases must hold the same modes".into()));
    }
    if (full.spec.window_side - low.spec.window_side).abs() > 1e-12 * full.spec.window_side {
        return Err(Error::InvalidArgument("full and low bases must share the sampling window".into()));
    }
    check_grid(full.shape(), roi_full.shape())?;
    check_grid(low.shape(), roi_low.shape())?;
    let rows: Vec<(f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let w = trial_weights::<T>(seed, k, full.len())?;
            let field = superpose(&w, full)?;
            let measured = measure_field(&field, settings, crate::rng::mix_seed(seed, k))?;
            let target = intensity(&measured);

            let c_full = holographic_decompose(&measured, full)?;
            let fit_full = intensity(&synthesize(&c_full.coeffs, full)?);
            let g_full = cross_correlation(&target, &fit_full, roi_full)?;

            let small = downsample_field(&measured, low.grid_size())?;
            let c_low = holographic_decompose(&small, low)?;
            let fit_up = intensity(&synthesize(&c_low.coeffs, full)?);
            let g_low = cross_correlation(&target, &fit_up, roi_full)?;
            let fit_native = intensity(&synthesize(&c_low.coeffs, low)?);
            let g_native = cross_correlation(&intensity(&small), &fit_native, roi_low)?;
            Ok((g_full.to_f64_lossy(), g_low.to_f64_lossy(), g_native.to_f64_lossy()))
        })
        .collect::<Result<_>>()?;
    let (hi, lo) = (full.grid_size().to_string(), low.grid_size().to_string());
    let mut out = ResolutionComparison {
        full: ScoreReport::new("holographic", hi),
        downsampled: ScoreReport::new("holographic", lo.clone()),
        downsampled_native: ScoreReport::new("holographic-native", lo),
    };
    for (a, b, c) in rows {
        out.full.gammas.push(a);
        out.downsampled.gammas.push(b);
        out.downsampled_native.gammas.push(c);
    }
    Ok(out)
}

/// Channel experiment on one fiber plus detection of shared modes.
#[derive(Clone, Debug)]
pub struct MdmReport<T> {
    pub measured: TransmissionMatrix<T>,
    pub effective: TransmissionMatrix<T>,
    pub diag_before: f64,
    pub diag_after: f64,
    pub detections: Vec<DetectionRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRow {
    pub label: ModeLabel,
    pub expected: usize,
    pub detected: usize,
    pub amplitudes: Vec<f64>,
}

/// Measures a random channel on `fiber`, precodes with its inverse,
/// re-measures, and runs known-mode detection of every `receiver` mode
/// excited in `fiber`.
pub fn simulate_mdm<T: Real>(fiber: &ModeBasis<T>, receiver: &ModeBasis<T>, sigma: f64, seed: u64) -> Result<MdmReport<T>> {
    let mut ch: ChannelModel<T> = channel::random_channel(fiber.len(), seed, fiber.id())?.with_sigma(sigma)?;
    let dec = HolographicDecomposer { basis: fiber };
    let measured = channel::measure_t(&mut ch, fiber, &dec)?;
    let precoder = channel::inverse_precode(&measured)?;
    let effective = channel::measure_with_inputs(&mut ch, &precoder, fiber, &dec)?;
    let diag_before = channel::diag_fraction(&measured.entries)?.to_f64_lossy();
    let diag_after = channel::diag_fraction(&effective.entries)?.to_f64_lossy();
    let detections = receiver
        .modes
        .iter()
        .map(|m| {
            let label = m.label();
            let (d, expected) = channel::detect_known_modes(label, fiber, receiver)?;
            Ok(DetectionRow {
                label,
                expected,
                detected: d.argmax,
                amplitudes: d.amplitudes.iter().map(|a| a.to_f64_lossy()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(MdmReport { measured, effective, diag_before, diag_after, detections })
}

/// `|T_ij|` as a CSV grid (one matrix row per line, no header).
pub fn write_magnitude_grid<T: Real>(t: &ndarray::Array2<Complex<T>>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in t.rows() {
        w.write_record(row.iter().map(|z| z.norm().to_f64_lossy().to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_HEADER: [&str; 4] = ["index", "gamma", "method", "resolution"];
const SUMMARY_ROWS: [&str; 4] = ["mean", "std", "min", "count"];

/// Writes per-record rows for every report followed by summary rows.
/// With `ratio = Some((num, den))` a final `ratio` row holds
/// `mean(reports[num]) / mean(reports[den])`.
pub fn emit_report<W: Write>(reports: &[ScoreReport], ratio: Option<(usize, usize)>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        for (i, g) in r.gammas.iter().enumerate() {
            w.write_record([i.to_string(), g.to_string(), r.method.clone(), r.resolution.clone()])?;
        }
    }
    for r in reports {
        let values = [r.mean(), r.std(), r.min(), r.count() as f64];
        for (name, v) in SUMMARY_ROWS.iter().zip(values) {
            w.write_record([name.to_string(), v.to_string(), r.method.clone(), r.resolution.clone()])?;
        }
    }
    if let Some((num, den)) = ratio {
        let (a, b) = (&reports[num], &reports[den]);
        let value = a.mean() / b.mean();
        w.write_record([
            "ratio".to_string(),
            value.to_string(),
            format!("{}/{}", a.method, b.method),
            format!("{}/{}", a.resolution, b.resolution),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_report_file(reports: &[ScoreReport], ratio: Option<(usize, usize)>, path: impl AsRef<Path>) -> Result<()> {
    emit_report(reports, ratio, BufWriter::new(File::create(path)?))
}

/// Parsed report: the per-record reports plus the summary values as written.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedReport {
    pub reports: Vec<ScoreReport>,
    /// `(name, method, resolution, value)` for every summary row.
    pub summary: Vec<(String, String, String, f64)>,
}

pub fn parse_report<R: Read>(input: R) -> Result<ParsedReport> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected report header {headers:?}")));
    }
    let mut reports: Vec<ScoreReport> = Vec::new();
    let mut summary = Vec::new();
    for row in rd.records() {
        let row = row?;
        if row.len() != 4 {
            return Err(Error::InvalidArgument(format!("report row with {} columns", row.len())));
        }
        let value: f64 = row[1].parse().map_err(|_| Error::InvalidArgument(format!("bad gamma `{}`", &row[1])))?;
        let (method, resolution) = (row[2].to_string(), row[3].to_string());
        if row[0].parse::<usize>().is_ok() {
            let slot = match reports.iter_mut().position(|r| r.method == method && r.resolution == resolution) {
                Some(i) => i,
                None => {
                    reports.push(ScoreReport::new(method, resolution));
                    reports.len() - 1
                }
            };
            reports[slot].gammas.push(value);
        } else {
            if row[0] != *"ratio" && !reports.iter().any(|r| r.method == method && r.resolution == resolution) {
                reports.push(ScoreReport::new(method.clone(), resolution.clone()));
            }
            summary.push((row[0].to_string(), method, resolution, value));
        }
    }
    Ok(ParsedReport { reports, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{build_basis, FiberSpec};
    use std::io::Cursor;

    #[test]
    fn statistics() {
        let r = ScoreReport { gammas: vec![1.0, 0.5, 0.75], method: "m".into(), resolution: "64".into() };
        assert_eq!(r.mean(), 0.75);
        assert_eq!(r.min(), 0.5);
        assert!((r.std() - 0.25).abs() < 1e-15);
        assert_eq!(r.median(), 0.75);
        let e = ScoreReport::new("m", "64");
        assert!(e.mean().is_nan() && e.std().is_nan() && e.min().is_nan());
    }

    #[test]
    fn report_round_trip() {
        let a = ScoreReport { gammas: vec![0.9, 0.99, 0.123456789012345], method: "holographic".into(), resolution: "183".into() };
        let b = ScoreReport { gammas: vec![0.8, 0.7, 0.6], method: "holographic".into(), resolution: "64".into() };
        let mut buf = Vec::new();
        emit_report(&[a.clone(), b.clone()], Some((1, 0)), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 4));
        let parsed = parse_report(Cursor::new(buf)).unwrap();
        assert_eq!(parsed.reports, vec![a.clone(), b.clone()]);
        let mean_a = parsed.summary.iter().find(|s| s.0 == "mean" && s.2 == "183").unwrap().3;
        assert_eq!(mean_a, a.mean());
        let ratio = parsed.summary.iter().find(|s| s.0 == "ratio").unwrap();
        assert_eq!(ratio.3, b.mean() / a.mean());
        assert_eq!(ratio.2, "64/183");
    }

    #[test]
    fn empty_report_has_header_and_summary() {
        let mut buf = Vec::new();
        emit_report(&[ScoreReport::new("cnn", "64")], None, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        let parsed = parse_report(Cursor::new(buf)).unwrap();
        assert_eq!(parsed.reports, vec![ScoreReport::new("cnn", "64")]);
        assert_eq!(parsed.summary.iter().find(|s| s.0 == "count").unwrap().3, 0.0);
    }

    #[test]
    fn prediction_file_round_trip_and_errors() {
        let header = PredictionHeader { n_modes: 2, count: 2 };
        let mut w = PredictionWriter::new(Vec::new(), header).unwrap();
        w.write(&[0.1, 0.2, 0.3]).unwrap();
        assert!(w.write(&[0.1, 0.2]).is_err());
        assert!(w.write(&[0.1, 1.2, 0.3]).is_err());
        w.write(&[1.0, 0.0, 0.5]).unwrap();
        let bytes = w.finish().unwrap();
        assert_eq!(bytes.len(), 20 + 2 * 3 * 4);
        assert_eq!(&bytes[..4], b"MMFP");
        let values: Vec<Vec<f32>> = PredictionReader::new(Cursor::new(&bytes)).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(values, vec![vec![0.1, 0.2, 0.3], vec![1.0, 0.0, 0.5]]);

        let cut = &bytes[..bytes.len() - 1];
        let last = PredictionReader::new(Cursor::new(cut)).unwrap().last().unwrap();
        assert!(matches!(last, Err(Error::Truncated { index: 1 })));
        let mut v9 = bytes.clone();
        v9[4] = 9;
        assert!(matches!(PredictionReader::new(Cursor::new(&v9)), Err(Error::UnsupportedVersion(9))));
    }

    #[test]
    fn noise_free_resolution_comparison() {
        let full = build_basis::<f64>(&FiberSpec::mmf10(183).unwrap()).unwrap();
        let low = build_basis::<f64>(&FiberSpec::mmf10(64).unwrap()).unwrap();
        let cmp = compare_resolutions(4, &full, &low, &HoloSettings::default(), &RoiMask::full(183), &RoiMask::full(64), 1).unwrap();
        assert!(cmp.full.min() >= 0.999);
        assert!(cmp.downsampled.min() >= 0.999);
        assert!(cmp.downsampled_native.min() >= 0.999);
    }
}
