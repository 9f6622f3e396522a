//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the test harness so every line is printed.

use std::time::{Duration, Instant};

use mmf_core::channel::{self, HolographicDecomposer};
use mmf_core::dataset::{gen_prmc, split, SplitSpec};
use mmf_core::fiber::{build_basis, solve_lp_modes, FiberSpec, ModeBasis};
use mmf_core::field::{cross_correlation, intensity, superpose, synthesize, RoiMask};
use mmf_core::harness::{compare_resolutions, holo_roundtrip, simulate_mdm, trial_weights, HoloSettings, NoiseSpec};
use mmf_core::holography::{holographic_decompose, DecompositionVector};
use mmf_core::intensity_md::{gs_decompose, GsConfig};
use mmf_core::labels::{decode_with_sign_search, encode, ModeWeights};
use mmf_core::Result;

type Outcome = Result<(bool, String)>;

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn basis(spec: Result<FiberSpec>) -> ModeBasis<f64> {
    build_basis(&spec.unwrap()).unwrap()
}

fn mode_counts() -> Outcome {
    let start = Instant::now();
    let n10 = solve_lp_modes(&FiberSpec::mmf10(64)?)?.len();
    let n55 = solve_lp_modes(&FiberSpec::mmf55(64)?)?.len();
    let elapsed = start.elapsed();
    let ok = n10 == 10 && n55 == 55 && elapsed < Duration::from_secs(1);
    Ok((ok, format!("10-mode fiber {n10}, 55-mode fiber {n55}, {elapsed:.2?}")))
}

fn orthonormality(b10: &ModeBasis<f64>, b55: &ModeBasis<f64>) -> Outcome {
    let dev = |b: &ModeBasis<f64>| {
        let g = b.gram();
        g.indexed_iter().map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
    };
    let (d10, d55) = (dev(b10), dev(b55));
    Ok((d10 <= 1e-6 && d55 <= 1e-6, format!("max |G − I| at 64²: {d10:.2e} (N=10), {d55:.2e} (N=55)")))
}

fn projection_round_trip(b10: &ModeBasis<f64>) -> Outcome {
    let roi = RoiMask::full(64);
    let mut worst_err = 0.0_f64;
    let mut worst_gamma = 1.0_f64;
    for k in 0..200 {
        let w = trial_weights::<f64>(3, k, 10)?;
        let field = superpose(&w, b10)?;
        let got = holographic_decompose(&field, b10)?;
        worst_err = worst_err.max(got.max_error(&DecompositionVector::new(w.to_complex())?));
        let back = intensity(&synthesize(&got.coeffs, b10)?);
        worst_gamma = worst_gamma.min(cross_correlation(&intensity(&field), &back, &roi)?);
    }
    Ok((worst_err <= 1e-6 && worst_gamma >= 0.999, format!("200 draws: max error {worst_err:.2e}, min Γ {worst_gamma:.8}")))
}

fn label_codec(b10: &ModeBasis<f64>) -> Outcome {
    let roi = RoiMask::full(64);
    let start = Instant::now();
    let rows: Vec<(f64, f64, u64)> = pool(1).install(|| {
        (0..1000)
            .map(|k| {
                let w = trial_weights::<f64>(4, k, 10)?;
                let target = intensity(&superpose(&w, b10)?);
                let d = decode_with_sign_search(&encode(&w)?, &target, b10, &roi)?;
                Ok((d.gamma, d.weights.distance_up_to_conjugation(&w), d.candidates))
            })
            .collect::<Result<_>>()
    })?;
    let elapsed = start.elapsed();
    let min_gamma = rows.iter().map(|r| r.0).fold(1.0, f64::min);
    let max_dist = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let all_512 = rows.iter().all(|r| r.2 == 512);
    let ok = min_gamma >= 0.999 && max_dist <= 1e-6 && all_512 && elapsed <= Duration::from_secs(300);
    Ok((
        ok,
        format!("1000 draws: min Γ {min_gamma:.8}, max distance {max_dist:.2e}, 512 candidates each: {all_512}, single thread {elapsed:.2?}"),
    ))
}

fn hologram_pipeline(b183: &ModeBasis<f64>) -> Outcome {
    let roi = RoiMask::core(b183, 1.0)?;
    let trials = holo_roundtrip(100, b183, &HoloSettings::default(), &roi, 5)?;
    let max_err = trials.iter().map(|t| t.max_error).fold(0.0, f64::max);
    let min_gamma = trials.iter().map(|t| t.gamma).fold(1.0, f64::min);
    Ok((
        max_err <= 0.02 && min_gamma >= 0.99,
        format!("100 fields at 183²: max coefficient error {max_err:.2e}, min core-ROI amplitude Γ {min_gamma:.6}"),
    ))
}

fn resolution_comparison(b183: &ModeBasis<f64>, b10: &ModeBasis<f64>) -> Outcome {
    let settings = HoloSettings { noise: NoiseSpec { sigma: 0.01, quantize: true }, ..HoloSettings::default() };
    let cmp = compare_resolutions(200, b183, b10, &settings, &RoiMask::full(183), &RoiMask::full(64), 6)?;
    let (hi, lo) = (cmp.full.mean(), cmp.downsampled.mean());
    Ok((
        lo <= hi,
        format!(
            "200 trials: mean Γ 183² {hi:.6}, 64² {lo:.6} (64² against its own measurement {:.6})",
            cmp.downsampled_native.mean()
        ),
    ))
}

fn precoding(b55: &ModeBasis<f64>) -> Outcome {
    let run = |sigma: f64, seed: u64| -> Result<f64> {
        let mut ch = channel::random_channel::<f64>(55, seed, b55.id())?.with_sigma(sigma)?;
        let dec = HolographicDecomposer { basis: b55 };
        let t = channel::measure_t(&mut ch, b55, &dec)?;
        let p = channel::inverse_precode(&t)?;
        let eff = channel::measure_with_inputs(&mut ch, &p, b55, &dec)?;
        channel::diag_fraction(&eff.entries)
    };
    let clean = run(0.0, 7)?;
    let noisy: Vec<f64> = (0..20).map(|s| run(0.01, 100 + s)).collect::<Result<_>>()?;
    let mean = noisy.iter().sum::<f64>() / noisy.len() as f64;
    Ok((
        clean >= 0.999 && mean >= 0.9,
        format!("N=55 diag fraction noise-free {clean:.8}, 1% noise mean over 20 seeds {mean:.6}"),
    ))
}

fn detection(b10: &ModeBasis<f64>, b55: &ModeBasis<f64>) -> Outcome {
    let mut hits = 0;
    let mut missed = Vec::new();
    for m in &b10.modes {
        let (d, expected) = channel::detect_known_modes(m.label(), b55, b10)?;
        if d.argmax == expected {
            hits += 1;
        } else {
            missed.push(m.label().to_string());
        }
    }
    Ok((hits == 10, format!("{hits}/10 detected{}", if missed.is_empty() { String::new() } else { format!(", missed {missed:?}") })))
}

fn gs_baseline(b10: &ModeBasis<f64>) -> Outcome {
    let b3 = b10.truncated(3)?;
    let cfg = GsConfig { max_iters: 500, restarts: 16, ..GsConfig::default() };
    let mut gammas: Vec<f64> = (0..100)
        .map(|k| {
            let w = trial_weights::<f64>(9, k, 3)?;
            let amp = superpose(&w, &b3)?.amplitude();
            Ok(gs_decompose(&amp, &b3, &GsConfig { seed: k, ..cfg })?.gamma)
        })
        .collect::<Result<_>>()?;
    gammas.sort_by(f64::total_cmp);
    let median = 0.5 * (gammas[49] + gammas[50]);
    let mut pure_min = 1.0_f64;
    for k in 0..3 {
        let mut amps = vec![0.0; 3];
        amps[k] = 1.0;
        let amp = superpose(&ModeWeights::new(amps, vec![0.0; 3])?, &b3)?.amplitude();
        pure_min = pure_min.min(gs_decompose(&amp, &b3, &cfg)?.gamma);
    }
    Ok((
        median >= 0.95 && pure_min >= 0.999,
        format!("N=3, 100 trials: median Γ {median:.8}, min Γ {:.8}; pure modes min Γ {pure_min:.8}", gammas[0]),
    ))
}

fn determinism(b10: &ModeBasis<f64>, b55: &ModeBasis<f64>, b183: &ModeBasis<f64>) -> Outcome {
    let dir = tempfile::tempdir()?;
    let run = |threads: usize, tag: &str| -> Result<Vec<String>> {
        pool(threads).install(|| {
            let mut prmc = Vec::new();
            gen_prmc(300, b10, 11, &mut prmc)?;
            let input = dir.path().join(format!("prmc-{tag}.bin"));
            std::fs::write(&input, &prmc)?;
            let outs = ["train", "val", "test"].map(|s| dir.path().join(format!("{s}-{tag}.bin")));
            split(&input, &SplitSpec::Fractions { train: 0.7, val: 0.2, test: 0.1 }, 12, [&outs[0], &outs[1], &outs[2]])?;
            let mut parts = vec![format!("{prmc:?}")];
            for o in &outs {
                parts.push(format!("{:?}", std::fs::read(o)?));
            }
            let noisy = HoloSettings { noise: NoiseSpec { sigma: 0.01, quantize: true }, ..HoloSettings::default() };
            let cmp = compare_resolutions(8, b183, b10, &noisy, &RoiMask::full(183), &RoiMask::full(64), 13)?;
            parts.push(format!("{cmp:?}"));
            parts.push(format!("{:?}", holo_roundtrip(8, b10, &noisy, &RoiMask::full(64), 14)?));
            let mdm = simulate_mdm(b55, b10, 0.01, 15)?;
            parts.push(format!("{:?} {:?} {:?}", mdm.measured, mdm.effective, mdm.detections));
            let b3 = b10.truncated(3)?;
            let amp = superpose(&trial_weights::<f64>(16, 0, 3)?, &b3)?.amplitude();
            parts.push(format!("{:?}", gs_decompose(&amp, &b3, &GsConfig { restarts: 8, max_iters: 100, seed: 16, ..GsConfig::default() })?));
            Ok(parts)
        })
    };
    let a = run(1, "a")?;
    let b = run(4, "b")?;
    let c = run(4, "c")?;
    let names = ["gen_prmc", "split train", "split val", "split test", "compare_resolutions", "holo_roundtrip", "simulate_mdm", "gs_decompose"];
    let differing: Vec<&str> = names.iter().zip(a.iter().zip(&b).zip(&c)).filter(|(_, ((x, y), z))| x != y || y != z).map(|(n, _)| *n).collect();
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} outputs identical across runs and 1 vs 4 threads", names.len())
        } else {
            format!("outputs differ: {differing:?}")
        },
    ))
}

fn main() {
    let b10 = basis(FiberSpec::mmf10(64));
    let b55 = basis(FiberSpec::mmf55(64));
    let b183 = basis(FiberSpec::mmf10(183));

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("mode counts", Box::new(mode_counts)),
        ("basis orthonormality", Box::new(|| orthonormality(&b10, &b55))),
        ("holographic round-trip", Box::new(|| projection_round_trip(&b10))),
        ("label codec", Box::new(|| label_codec(&b10))),
        ("hologram pipeline", Box::new(|| hologram_pipeline(&b183))),
        ("resolution comparison", Box::new(|| resolution_comparison(&b183, &b10))),
        ("inverse precoding", Box::new(|| precoding(&b55))),
        ("known-mode detection", Box::new(|| detection(&b10, &b55))),
        ("GS baseline", Box::new(|| gs_baseline(&b10))),
        ("determinism", Box::new(|| determinism(&b10, &b55, &b183))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name}: {detail} [{:.1?}]", if ok { "PASS" } else { "FAIL" }, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
