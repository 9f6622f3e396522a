//! Training ensembles and their binary container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MMFD" | u32 version=1 | u32 N | u32 H | u32 W | u64 count | u32 flags | u64 seed
//! count × ( H·W f32 intensity, row-major, peak 1.0 | 2N−1 f32 label )
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::ModeBasis;
use crate::field::{intensity, superpose};
use crate::labels::{canonicalize, encode, ModeWeights};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"MMFD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 40;

pub const FLAG_SMC: u32 = 1;
pub const FLAG_PRMC: u32 = 1 << 1;
/// Records hold raw (signed, unit-power) mode fields rather than intensities.
pub const FLAG_BASIS: u32 = 1 << 2;

/// Records generated per parallel batch; output order never depends on it.
const BATCH: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_modes: u32,
    pub height: u32,
    pub width: u32,
    pub count: u64,
    pub flags: u32,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn label_len(&self) -> usize {
        2 * self.n_modes as usize - 1
    }

    pub fn pixels(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn record_bytes(&self) -> u64 {
        4 * (self.pixels() + self.label_len()) as u64
    }

    /// Exact size of a well-formed file with this header.
    pub fn file_bytes(&self) -> u64 {
        HEADER_LEN + self.count * self.record_bytes()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&VERSION.to_le_bytes());
        out[8..12].copy_from_slice(&self.n_modes.to_le_bytes());
        out[12..16].copy_from_slice(&self.height.to_le_bytes());
        out[16..20].copy_from_slice(&self.width.to_le_bytes());
        out[20..28].copy_from_slice(&self.count.to_le_bytes());
        out[28..32].copy_from_slice(&self.flags.to_le_bytes());
        out[32..40].copy_from_slice(&self.seed.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic { expected: MAGIC, found: magic });
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let header = DatasetHeader {
            n_modes: u32_at(8),
            height: u32_at(12),
            width: u32_at(16),
            count: u64_at(20),
            flags: u32_at(28),
            seed: u64_at(32),
        };
        if header.n_modes == 0 || header.height == 0 || header.width == 0 {
            return Err(Error::InvalidArgument(format!("degenerate dataset header {header:?}")));
        }
        Ok(header)
    }
}

/// One (image, label) pair as stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub image: Vec<f32>,
    pub label: Vec<f32>,
}

impl Record {
    /// Intensity of `weights` on `basis`, peak-normalised, with its label.
    /// Weights are canonicalised first.
    pub fn from_weights<T: Real>(weights: &ModeWeights<T>, basis: &ModeBasis<T>) -> Result<Self> {
        let canonical = canonicalize(weights)?;
        let image = intensity(&superpose(&canonical, basis)?).peak_normalized()?;
        let label = encode(&canonical)?;
        Ok(Record {
            image: image.grid.iter().map(|v| v.to_f64_lossy() as f32).collect(),
            label: label.values().iter().map(|v| v.to_f64_lossy() as f32).collect(),
        })
    }
}

/// Appends records after a header; `finish` checks the declared count.
pub struct DatasetWriter<W: Write> {
    inner: W,
    header: DatasetHeader,
    written: u64,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut inner: W, header: DatasetHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(DatasetWriter { inner, header, written: 0 })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn write_record(&mut self, record: &Record) -> Result<()> {
        if record.image.len() != self.header.pixels() {
            return Err(Error::LengthMismatch { expected: self.header.pixels(), actual: record.image.len() });
        }
        if record.label.len() != self.header.label_len() {
            return Err(Error::LengthMismatch { expected: self.header.label_len(), actual: record.label.len() });
        }
        if let Some((position, &value)) = record.label.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::LabelOutOfRange { index: self.written, position, value });
        }
        if self.written >= self.header.count {
            return Err(Error::InvalidArgument(format!("more than the declared {} records", self.header.count)));
        }
        write_f32s(&mut self.inner, &record.image)?;
        write_f32s(&mut self.inner, &record.label)?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and returns the sink; fails if fewer records than declared
    /// were written.
    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.count {
            return Err(Error::InvalidArgument(format!(
                "declared {} records but wrote {}",
                self.header.count, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(4 * values.len());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Streaming reader. Records are validated as they are read; after the
/// last record any extra bytes are reported as `TrailingData`.
pub struct DatasetReader<R: Read> {
    inner: R,
    header: DatasetHeader,
    next: u64,
    done: bool,
}

impl DatasetReader<BufReader<File>> {
    /// Opens a file and checks its size against the header up front.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let reader = DatasetReader::new(BufReader::new(file))?;
        check_size(&reader.header, len)?;
        Ok(reader)
    }
}

fn check_size(header: &DatasetHeader, len: u64) -> Result<()> {
    let expected = header.file_bytes();
    if len < expected {
        let complete = len.saturating_sub(HEADER_LEN) / header.record_bytes();
        return Err(Error::Truncated { index: complete });
    }
    if len > expected {
        return Err(Error::TrailingData { extra: len - expected });
    }
    Ok(())
}

impl<R: Read> DatasetReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut bytes = [0u8; HEADER_LEN as usize];
        inner.read_exact(&mut bytes).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::InvalidArgument("file shorter than the dataset header".into()),
            _ => Error::Io(e),
        })?;
        let header = DatasetHeader::from_bytes(&bytes)?;
        Ok(DatasetReader { inner, header, next: 0, done: false })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn read_next(&mut self) -> Result<Option<Record>> {
        if self.next == self.header.count {
            let mut probe = [0u8; 1];
            return match self.inner.read(&mut probe)? {
                0 => Ok(None),
                n => {
                    let mut rest = Vec::new();
                    self.inner.read_to_end(&mut rest)?;
                    Err(Error::TrailingData { extra: (n + rest.len()) as u64 })
                }
            };
        }
        let index = self.next;
        let record = read_record(&mut self.inner, &self.header, index)?;
        self.next += 1;
        Ok(Some(record))
    }
}

fn read_record<R: Read>(r: &mut R, header: &DatasetHeader, index: u64) -> Result<Record> {
    let mut buf = vec![0u8; header.record_bytes() as usize];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Truncated { index },
        _ => Error::Io(e),
    })?;
    let floats: Vec<f32> = buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let (image, label) = floats.split_at(header.pixels());
    if let Some((position, &value)) = label.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::LabelOutOfRange { index, position, value });
    }
    Ok(Record { image: image.to_vec(), label: label.to_vec() })
}

impl<R: Read> Iterator for DatasetReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_next() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads a whole file into memory (tests and small tools only).
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<Record>)> {
    let reader = DatasetReader::open(path)?;
    let header = *reader.header();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, records))
}

/// Random access to the records of a file.
pub struct DatasetFile {
    file: BufReader<File>,
    header: DatasetHeader,
}

impl DatasetFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let reader = DatasetReader::open(path.as_ref())?;
        let header = *reader.header();
        Ok(DatasetFile { file: BufReader::new(File::open(path)?), header })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn record(&mut self, index: u64) -> Result<Record> {
        if index >= self.header.count {
            return Err(Error::InvalidArgument(format!("record {index} of {}", self.header.count)));
        }
        self.file.seek(SeekFrom::Start(HEADER_LEN + index * self.header.record_bytes()))?;
        read_record(&mut self.file, &self.header, index)
    }
}

/// Grid points per axis for a step `s`: `1/s + 1` when `s` divides 1
/// (within 1e-12), else `floor(1/s) + 1`.
pub fn grid_points(step: f64) -> Result<u64> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid step {step} outside (0, 1]")));
    }
    let inv = 1.0 / step;
    let rounded = inv.round();
    let whole = if (inv - rounded).abs() <= 1e-12 * rounded.max(1.0) { rounded } else { inv.floor() };
    if whole >= u64::MAX as f64 {
        return Err(Error::CountOverflow);
    }
    Ok(whole as u64 + 1)
}

fn checked_pow(base: u64, exp: usize) -> Result<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base as u128).ok_or(Error::CountOverflow)?;
    }
    Ok(acc)
}

/// `(1/s_amp + 1)^N · (1/s_phase + 1)^(N−1)` grid points.
pub fn smc_count(s_amp: f64, s_phase: f64, n: usize) -> Result<u128> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let amps = checked_pow(grid_points(s_amp)?, n)?;
    let phases = checked_pow(grid_points(s_phase)?, n - 1)?;
    amps.checked_mul(phases).ok_or(Error::CountOverflow)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmcMode {
    /// Every amplitude and phase grid combination.
    FullGrid,
    /// One-hot records plus every pair of modes with both amplitudes
    /// non-zero, scanning the second mode's phase.
    Extremes,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmcGridSpec {
    pub s_amp: f64,
    pub s_phase: f64,
    pub mode: SmcMode,
}

impl SmcGridSpec {
    /// Records the enumeration yields for `n` modes (all-zero amplitude
    /// points excluded).
    pub fn record_count(&self, n: usize) -> Result<u128> {
        let a = grid_points(self.s_amp)? as u128;
        let p = grid_points(self.s_phase)? as u128;
        match self.mode {
            SmcMode::FullGrid => {
                let all = smc_count(self.s_amp, self.s_phase, n)?;
                Ok(all - checked_pow(p as u64, n - 1)?)
            }
            SmcMode::Extremes => {
                let pairs = (n as u128 * (n as u128).saturating_sub(1)) / 2;
                let per_pair = (a - 1).checked_mul(a - 1).and_then(|v| v.checked_mul(p)).ok_or(Error::CountOverflow)?;
                pairs.checked_mul(per_pair).and_then(|v| v.checked_add(n as u128)).ok_or(Error::CountOverflow)
            }
        }
    }

    /// Deterministic enumeration of the (unnormalised) weights.
    pub fn weights(&self, n: usize) -> Result<Box<dyn Iterator<Item = ModeWeights<f64>> + Send>> {
        let a = grid_points(self.s_amp)? as usize;
        let p = grid_points(self.s_phase)? as usize;
        let amp_value = {
            let s = self.s_amp;
            move |k: usize| (k as f64 * s).min(1.0)
        };
        let phase_value = {
            let s = self.s_phase;
            move |k: usize| (k as f64 * s).min(1.0) * std::f64::consts::PI
        };
        match self.mode {
            SmcMode::FullGrid => {
                let mut radices = vec![a; n];
                radices.extend(std::iter::repeat_n(p, n - 1));
                let iter = Odometer::new(radices).filter_map(move |digits| {
                    let amplitudes: Vec<f64> = digits[..n].iter().map(|&k| amp_value(k)).collect();
                    if amplitudes.iter().all(|&v| v == 0.0) {
                        return None;
                    }
                    let mut phases = vec![0.0];
                    phases.extend(digits[n..].iter().map(|&k| phase_value(k)));
                    Some(ModeWeights { amplitudes, phases })
                });
                Ok(Box::new(iter))
            }
            SmcMode::Extremes => {
                let one_hots = (0..n).map(move |k| {
                    let mut amplitudes = vec![0.0; n];
                    amplitudes[k] = 1.0;
                    ModeWeights { amplitudes, phases: vec![0.0; n] }
                });
                let pairs = (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j))).flat_map(move |(i, j)| {
                    Odometer::new(vec![a - 1, a - 1, p]).map(move |d| {
                        let mut amplitudes = vec![0.0; n];
                        amplitudes[i] = amp_value(d[0] + 1);
                        amplitudes[j] = amp_value(d[1] + 1);
                        let mut phases = vec![0.0; n];
                        phases[j] = phase_value(d[2]);
                        ModeWeights { amplitudes, phases }
                    })
                });
                Ok(Box::new(one_hots.chain(pairs)))
            }
        }
    }
}

/// Mixed-radix counter, last digit fastest.
struct Odometer {
    radices: Vec<usize>,
    digits: Option<Vec<usize>>,
}

impl Odometer {
    fn new(radices: Vec<usize>) -> Self {
        let start = if radices.contains(&0) { None } else { Some(vec![0; radices.len()]) };
        Odometer { radices, digits: start }
    }
}

impl Iterator for Odometer {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.digits.clone()?;
        let digits = self.digits.as_mut().unwrap();
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                self.digits = None;
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < self.radices[pos] {
                break;
            }
            digits[pos] = 0;
        }
        Some(current)
    }
}

fn header_for<T: Real>(basis: &ModeBasis<T>, count: u64, flags: u32, seed: u64) -> DatasetHeader {
    let (h, w) = basis.shape();
    DatasetHeader { n_modes: basis.len() as u32, height: h as u32, width: w as u32, count, flags, seed }
}

/// Converts weights to records in parallel batches and writes them in order.
fn write_all<T: Real, W: Write>(
    writer: &mut DatasetWriter<W>,
    weights: impl Iterator<Item = Result<ModeWeights<T>>>,
    basis: &ModeBasis<T>,
) -> Result<()> {
    let mut batch = Vec::with_capacity(BATCH);
    let mut weights = weights.peekable();
    while weights.peek().is_some() {
        batch.clear();
        for w in weights.by_ref().take(BATCH) {
            batch.push(w?);
        }
        let records: Vec<Record> = batch.par_iter().map(|w| Record::from_weights(w, basis)).collect::<Result<_>>()?;
        for r in &records {
            writer.write_record(r)?;
        }
    }
    Ok(())
}

/// Writes the SMC ensemble of `spec` to `out`. Fails before writing
/// anything when the record count exceeds `cap`.
pub fn gen_smc<T: Real, W: Write>(spec: &SmcGridSpec, basis: &ModeBasis<T>, cap: u128, out: W) -> Result<DatasetHeader> {
    let n = basis.len();
    let count = spec.record_count(n)?;
    if count > cap {
        return Err(Error::CountCapExceeded { count, cap });
    }
    let header = header_for(basis, count as u64, FLAG_SMC, 0);
    let mut writer = DatasetWriter::new(out, header)?;
    let weights = spec.weights(n)?.map(|w| {
        let amplitudes = w.amplitudes.into_iter().map(T::lit).collect();
        let phases = w.phases.into_iter().map(T::lit).collect();
        ModeWeights::new(amplitudes, phases)
    });
    write_all(&mut writer, weights, basis)?;
    writer.finish()?;
    Ok(header)
}

/// Raw draw of PRMC record `index`: `ρ_i ~ U[0,1)` for every mode, then
/// `φ_i ~ U[0, 2π)` for `i ≥ 1`, `φ_0 = 0`. Not yet normalised.
pub fn prmc_raw_weights(seed: u64, index: u64, n: usize) -> ModeWeights<f64> {
    let mut rng = crate::rng::stream(seed, index);
    let amplitudes = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut phases = vec![0.0];
    phases.extend((1..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU));
    ModeWeights { amplitudes, phases }
}

/// Writes `count` pseudo-random records; record `k` depends only on
/// `(seed, k)`.
pub fn gen_prmc<T: Real, W: Write>(count: u64, basis: &ModeBasis<T>, seed: u64, out: W) -> Result<DatasetHeader> {
    if count == 0 {
        return Err(Error::InvalidArgument("PRMC count must be >= 1".into()));
    }
    let n = basis.len();
    let header = header_for(basis, count, FLAG_PRMC, seed);
    let mut writer = DatasetWriter::new(out, header)?;
    let weights = (0..count).map(|k| {
        let w = prmc_raw_weights(seed, k, n);
        ModeWeights::new(w.amplitudes.into_iter().map(T::lit).collect(), w.phases.into_iter().map(T::lit).collect())
    });
    write_all(&mut writer, weights, basis)?;
    writer.finish()?;
    Ok(header)
}

/// Writes the basis itself: record `k` is mode `k`'s raw field with the
/// one-hot label of that mode.
pub fn write_basis<T: Real, W: Write>(basis: &ModeBasis<T>, out: W) -> Result<DatasetHeader> {
    let n = basis.len();
    let header = header_for(basis, n as u64, FLAG_BASIS, 0);
    let mut writer = DatasetWriter::new(out, header)?;
    for (k, field) in basis.fields.iter().enumerate() {
        let mut label = vec![0.0f32; 2 * n - 1];
        label[k] = 1.0;
        label[n..].fill(1.0);
        let image = field.iter().map(|v| v.to_f64_lossy() as f32).collect();
        writer.write_record(&Record { image, label })?;
    }
    writer.finish()?;
    Ok(header)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitSpec {
    Fractions { train: f64, val: f64, test: f64 },
    /// Fixed validation and test sizes; the rest trains.
    Holdout { val: u64, test: u64 },
}

impl SplitSpec {
    /// `(train, val, test)` sizes for `count` records.
    pub fn sizes(&self, count: u64) -> Result<[u64; 3]> {
        let sizes = match *self {
            SplitSpec::Fractions { train, val, test } => {
                let fractions = [train, val, test];
                if fractions.iter().any(|f| !(*f >= 0.0)) || ((train + val + test) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("split fractions {fractions:?} must be >= 0 and sum to 1")));
                }
                largest_remainder(count, fractions)
            }
            SplitSpec::Holdout { val, test } => {
                let held = val.checked_add(test).ok_or(Error::CountOverflow)?;
                if held >= count {
                    return Err(Error::InvalidArgument(format!("holdouts {val} + {test} leave no training data of {count}")));
                }
                [count - held, val, test]
            }
        };
        for (size, name) in sizes.iter().zip(["train", "val", "test"]) {
            if *size == 0 {
                return Err(Error::EmptySplit(name));
            }
        }
        Ok(sizes)
    }
}

/// Apportions `count` by `fractions`, flooring each quota and handing the
/// leftover units to the largest fractional parts (ties to the earlier part).
fn largest_remainder(count: u64, fractions: [f64; 3]) -> [u64; 3] {
    let quotas = fractions.map(|f| f * count as f64);
    let mut sizes = quotas.map(|q| q.floor() as u64);
    let assigned: u64 = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(count.saturating_sub(assigned) as usize) {
        sizes[i] += 1;
    }
    sizes
}

/// Shuffles `input` with a permutation seeded by `seed` and writes the
/// contiguous train/val/test slices. Records are copied bit-exactly.
pub fn split(input: impl AsRef<Path>, spec: &SplitSpec, seed: u64, outputs: [&Path; 3]) -> Result<[DatasetHeader; 3]> {
    let mut source = DatasetFile::open(input)?;
    let header = *source.header();
    let sizes = spec.sizes(header.count)?;
    let mut order: Vec<u64> = (0..header.count).collect();
    order.shuffle(&mut crate::rng::stream(seed, 0));

    let mut start = 0usize;
    let mut headers = [header; 3];
    for (part, (&size, path)) in sizes.iter().zip(outputs).enumerate() {
        let part_header = DatasetHeader { count: size, ..header };
        let mut writer = DatasetWriter::new(BufWriter::new(File::create(path)?), part_header)?;
        for &index in &order[start..start + size as usize] {
            writer.write_record(&source.record(index)?)?;
        }
        writer.finish()?;
        headers[part] = part_header;
        start += size as usize;
    }
    Ok(headers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{build_basis, FiberSpec};
    use std::io::Cursor;
    use std::sync::OnceLock;

    fn basis3() -> &'static ModeBasis<f64> {
        static B: OnceLock<ModeBasis<f64>> = OnceLock::new();
        B.get_or_init(|| build_basis(&FiberSpec::mmf10(16).unwrap()).unwrap().truncated(3).unwrap())
    }

    fn generate_prmc(count: u64, seed: u64) -> Vec<u8> {
        let mut out = Vec::new();
        gen_prmc(count, basis3(), seed, &mut out).unwrap();
        out
    }

    #[test]
    fn counts() {
        assert_eq!(smc_count(0.5, 0.5, 3).unwrap(), 243);
        for n in 1..8 {
            assert_eq!(smc_count(1.0, 1.0, n).unwrap(), 1 << (2 * n - 1));
        }
        assert_eq!(smc_count(0.1, 0.1, 10).unwrap(), 11u128.pow(19));
        assert_eq!(grid_points(0.3).unwrap(), 4);
        assert_eq!(grid_points(1.0 / 3.0).unwrap(), 4);
        assert!(grid_points(0.0).is_err());
        assert!(matches!(smc_count(1e-9, 1e-9, 10), Err(Error::CountOverflow)));
    }

    #[test]
    fn full_grid_enumeration_matches_count() {
        let spec = SmcGridSpec { s_amp: 0.5, s_phase: 0.5, mode: SmcMode::FullGrid };
        let all: Vec<_> = spec.weights(3).unwrap().collect();
        assert_eq!(all.len() as u128, spec.record_count(3).unwrap());
        assert_eq!(all.len(), 243 - 9);
        // last index fastest: first two points differ in the last phase
        assert_eq!(all[0].amplitudes, vec![0.0, 0.0, 0.5]);
        assert_eq!(all[0].phases, vec![0.0, 0.0, 0.0]);
        assert_eq!(all[1].phases, vec![0.0, 0.0, 0.5 * std::f64::consts::PI]);
    }

    #[test]
    fn extremes_include_one_hots() {
        let spec = SmcGridSpec { s_amp: 0.5, s_phase: 0.5, mode: SmcMode::Extremes };
        let all: Vec<_> = spec.weights(10).unwrap().collect();
        assert_eq!(all.len() as u128, spec.record_count(10).unwrap());
        for k in 0..10 {
            assert!(all.iter().any(|w| w.amplitudes.iter().enumerate().all(|(i, &a)| a == if i == k { 1.0 } else { 0.0 })));
        }
    }

    #[test]
    fn smc_cap_is_enforced() {
        let spec = SmcGridSpec { s_amp: 0.5, s_phase: 0.5, mode: SmcMode::FullGrid };
        let err = gen_smc(&spec, basis3(), 100, Vec::new()).unwrap_err();
        assert!(matches!(err, Error::CountCapExceeded { count: 234, cap: 100 }));
    }

    #[test]
    fn header_round_trip_and_size() {
        let bytes = generate_prmc(5, 7);
        let reader = DatasetReader::new(Cursor::new(&bytes)).unwrap();
        let h = *reader.header();
        assert_eq!(h, DatasetHeader { n_modes: 3, height: 16, width: 16, count: 5, flags: FLAG_PRMC, seed: 7 });
        assert_eq!(bytes.len() as u64, 40 + 5 * (256 + 5) * 4);
        assert_eq!(&bytes[..4], b"MMFD");
        let records: Vec<Record> = reader.collect::<Result<_>>().unwrap();
        assert_eq!(records.len(), 5);
        for r in &records {
            assert_eq!(r.image.iter().copied().fold(f32::MIN, f32::max), 1.0);
        }
    }

    #[test]
    fn prmc_is_deterministic_and_schedule_free() {
        let a = generate_prmc(40, 9);
        let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
        let b = pool(1).install(|| generate_prmc(40, 9));
        let c = pool(3).install(|| generate_prmc(40, 9));
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, generate_prmc(40, 10));
    }

    #[test]
    fn prmc_amplitudes_average_one_half() {
        let draws = 100_000u64;
        let mut sums = [0.0; 10];
        for k in 0..draws {
            for (s, a) in sums.iter_mut().zip(prmc_raw_weights(1, k, 10).amplitudes) {
                *s += a;
            }
        }
        for s in sums {
            assert!((s / draws as f64 - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn reader_errors() {
        let bytes = generate_prmc(3, 1);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(DatasetReader::new(Cursor::new(&bad)), Err(Error::BadMagic { .. })));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(DatasetReader::new(Cursor::new(&v2)), Err(Error::UnsupportedVersion(2))));

        let cut = &bytes[..bytes.len() - 10];
        let results: Vec<_> = DatasetReader::new(Cursor::new(cut)).unwrap().collect();
        assert!(matches!(results.last().unwrap(), Err(Error::Truncated { index: 2 })));

        let mut long = bytes.clone();
        long.extend_from_slice(&[0; 3]);
        let results: Vec<_> = DatasetReader::new(Cursor::new(&long)).unwrap().collect();
        assert!(matches!(results.last().unwrap(), Err(Error::TrailingData { extra: 3 })));

        let mut out_of_range = bytes.clone();
        let label_start = 40 + 256 * 4;
        out_of_range[label_start..label_start + 4].copy_from_slice(&1.5f32.to_le_bytes());
        let first = DatasetReader::new(Cursor::new(&out_of_range)).unwrap().next().unwrap();
        assert!(matches!(first, Err(Error::LabelOutOfRange { index: 0, position: 0, .. })));
    }

    #[test]
    fn writer_checks_count_and_shapes() {
        let header = DatasetHeader { n_modes: 2, height: 2, width: 2, count: 1, flags: 0, seed: 0 };
        let mut w = DatasetWriter::new(Vec::new(), header).unwrap();
        assert!(w.write_record(&Record { image: vec![0.0; 3], label: vec![0.0; 3] }).is_err());
        assert!(w.write_record(&Record { image: vec![0.0; 4], label: vec![0.0, 2.0, 0.0] }).is_err());
        let w = DatasetWriter::new(Vec::new(), header).unwrap();
        assert!(w.finish().is_err());
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::Fractions { train: 0.8, val: 0.1, test: 0.1 };
        assert_eq!(spec.sizes(49_036).unwrap(), [39_229, 4_904, 4_903]);
        assert_eq!(SplitSpec::Holdout { val: 1000, test: 1000 }.sizes(160_000).unwrap(), [158_000, 1000, 1000]);
        assert!(matches!(spec.sizes(3), Err(Error::EmptySplit(_))));
        assert!(SplitSpec::Holdout { val: 5, test: 5 }.sizes(10).is_err());
        assert!(SplitSpec::Fractions { train: 0.5, val: 0.1, test: 0.1 }.sizes(100).is_err());
    }

    #[test]
    fn basis_dump_holds_fields() {
        let mut out = Vec::new();
        let h = write_basis(basis3(), &mut out).unwrap();
        assert_eq!(h.flags, FLAG_BASIS);
        let records: Vec<Record> = DatasetReader::new(Cursor::new(&out)).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[1].image[0], basis3().fields[1][[0, 0]] as f32);
    }
}
