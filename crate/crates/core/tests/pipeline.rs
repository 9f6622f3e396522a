//! File-level round trips through the dataset, prediction and scoring paths.

use std::fs::File;
use std::io::BufWriter;
use std::sync::OnceLock;

use mmf_core::dataset::{gen_prmc, gen_smc, read_dataset, split, DatasetFile, SmcGridSpec, SmcMode, SplitSpec};
use mmf_core::fiber::{build_basis, FiberSpec, ModeBasis};
use mmf_core::field::{cross_correlation, intensity, superpose, IntensityImage, RoiMask};
use mmf_core::harness::{
    emit_report_file, parse_report, score_predictions, write_constant_predictions, write_exact_predictions, PredictionReader,
};
use mmf_core::labels::{decode_with_sign_search, LabelVector};
use mmf_core::Error;

fn basis10() -> &'static ModeBasis<f64> {
    static B: OnceLock<ModeBasis<f64>> = OnceLock::new();
    B.get_or_init(|| build_basis(&FiberSpec::mmf10(64).unwrap()).unwrap())
}

fn prmc_file(dir: &std::path::Path, count: u64, seed: u64) -> std::path::PathBuf {
    let path = dir.join("prmc.bin");
    gen_prmc(count, basis10(), seed, BufWriter::new(File::create(&path).unwrap())).unwrap();
    path
}

#[test]
fn split_partitions_records_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let input = prmc_file(dir.path(), 57, 2);
    let outs = ["a", "b", "c"].map(|s| dir.path().join(s));
    let headers = split(&input, &SplitSpec::Fractions { train: 0.6, val: 0.3, test: 0.1 }, 9, [&outs[0], &outs[1], &outs[2]]).unwrap();
    assert_eq!(headers.iter().map(|h| h.count).sum::<u64>(), 57);

    let (_, all) = read_dataset(&input).unwrap();
    let mut seen: Vec<Vec<u32>> = Vec::new();
    for o in &outs {
        for r in read_dataset(o).unwrap().1 {
            seen.push(r.label.iter().map(|v| v.to_bits()).collect());
        }
    }
    let mut original: Vec<Vec<u32>> = all.iter().map(|r| r.label.iter().map(|v| v.to_bits()).collect()).collect();
    seen.sort();
    original.sort();
    assert_eq!(seen, original);
}

#[test]
fn random_access_matches_stream() {
    let dir = tempfile::tempdir().unwrap();
    let input = prmc_file(dir.path(), 5, 3);
    let (_, records) = read_dataset(&input).unwrap();
    let mut file = DatasetFile::open(&input).unwrap();
    assert_eq!(file.record(3).unwrap(), records[3]);
    assert_eq!(file.record(0).unwrap(), records[0]);
    assert!(file.record(5).is_err());
}

#[test]
fn smc_records_decode_to_their_intensity() {
    let b3 = basis10().truncated(3).unwrap();
    let mut bytes = Vec::new();
    let spec = SmcGridSpec { s_amp: 0.5, s_phase: 0.5, mode: SmcMode::FullGrid };
    let header = gen_smc(&spec, &b3, u128::MAX, &mut bytes).unwrap();
    assert_eq!(header.count, 234);
    let roi = RoiMask::full(64);
    let reader = mmf_core::dataset::DatasetReader::new(std::io::Cursor::new(bytes)).unwrap();
    for record in reader {
        let record = record.unwrap();
        let target = IntensityImage::new(
            ndarray::Array2::from_shape_vec((64, 64), record.image.iter().map(|&v| v as f64).collect()).unwrap(),
            b3.pixel_pitch(),
        )
        .unwrap();
        let label = LabelVector::new(record.label.iter().map(|&v| v as f64).collect()).unwrap();
        let d = decode_with_sign_search(&label, &target, &b3, &roi).unwrap();
        let gamma = cross_correlation(&target, &intensity(&superpose(&d.weights, &b3).unwrap()), &roi).unwrap();
        assert!(gamma >= 0.9999, "{gamma}");
    }
}

#[test]
fn exact_labels_score_near_one_and_constant_predictor_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let data = prmc_file(dir.path(), 40, 4);
    let exact = dir.path().join("exact.mmfp");
    let constant = dir.path().join("half.mmfp");
    write_exact_predictions(&data, &exact).unwrap();
    write_constant_predictions(&data, 0.5, &constant).unwrap();
    assert_eq!(PredictionReader::open(&exact).unwrap().count(), 40);

    let roi = RoiMask::full(64);
    let perfect = score_predictions(&data, &exact, basis10(), &roi, "labels").unwrap();
    assert_eq!(perfect.count(), 40);
    assert!(perfect.min() >= 0.9999, "{}", perfect.min());
    let flat = score_predictions(&data, &constant, basis10(), &roi, "constant").unwrap();
    assert!(flat.mean() < 0.9, "{}", flat.mean());

    let csv = dir.path().join("report.csv");
    emit_report_file(&[perfect.clone(), flat.clone()], Some((1, 0)), &csv).unwrap();
    let parsed = parse_report(File::open(&csv).unwrap()).unwrap();
    assert_eq!(parsed.reports, vec![perfect, flat]);
}

#[test]
fn scoring_rejects_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = prmc_file(dir.path(), 6, 5);
    let preds = dir.path().join("p.mmfp");
    write_exact_predictions(&data, &preds).unwrap();
    let roi = RoiMask::full(64);
    let b3 = basis10().truncated(3).unwrap();
    assert!(matches!(score_predictions(&data, &preds, &b3, &roi, "x"), Err(Error::LengthMismatch { .. })));

    let bytes = std::fs::read(&preds).unwrap();
    std::fs::write(&preds, &bytes[..bytes.len() - 2]).unwrap();
    assert!(matches!(score_predictions(&data, &preds, basis10(), &roi, "x"), Err(Error::Truncated { index: 5 })));
}

#[test]
fn prediction_file_matches_golden_bytes() {
    use mmf_core::harness::{PredictionHeader, PredictionWriter};
    let golden = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/predictions_n2.mmfp")).unwrap();
    let rows = [[0.25f32, 0.5, 1.0], [0.0, 0.75, 0.125]];
    let mut w = PredictionWriter::new(Vec::new(), PredictionHeader { n_modes: 2, count: 2 }).unwrap();
    for r in &rows {
        w.write(r).unwrap();
    }
    assert_eq!(w.finish().unwrap(), golden);
    let read: Vec<Vec<f32>> = PredictionReader::new(std::io::Cursor::new(golden)).unwrap().map(|r| r.unwrap()).collect();
    assert_eq!(read, rows.map(|r| r.to_vec()));
}
