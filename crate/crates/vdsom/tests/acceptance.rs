//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured quantities (run with `--nocapture` to
//! see the lines for passing criteria).

use std::path::PathBuf;
use std::time::Instant;

use vdsom::config::{AlgorithmKind, RunConfig};
use vdsom::data::{idx_image_bytes, parse_idx_images, write_idx_images, StreamSpec};
use vdsom::dsom::{dsom_step, DsomState};
use vdsom::gradcheck::{run_suite, REL_TOL};
use vdsom::grid::{build_grid, GridSpec};
use vdsom::metrics::distortion;
use vdsom::rng::SplitMix64;
use vdsom::run::{run_sweep, run_train, train_in_memory};
use vdsom::elbo::responsibilities;

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vdsom_acceptance_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn report(criterion: &str, passed: bool, details: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status}: {details}");
}

/// Criterion 1: analytic gradients match central finite differences of the
/// per-sample objective (winner frozen) over >= 100 seeded configurations,
/// in under 10 s; the published eta-factor variant must fail for some
/// eta != 1.
#[test]
fn criterion_1_gradient_oracle_suite() {
    let start = Instant::now();
    let derived = run_suite(121, 42, false).unwrap();
    let published = run_suite(121, 42, true).unwrap();
    let elapsed = start.elapsed();

    let eta_of = |trial: usize| match ((trial - 1) / 9) % 3 {
        0 => 0.5,
        1 => 1.0,
        _ => 2.0,
    };
    let published_fails_off_unit = !published.passed()
        && published
            .failures
            .iter()
            .all(|f| f.trial > 0 && eta_of(f.trial) != 1.0);

    let passed = derived.passed()
        && derived.trials == 121
        && published_fails_off_unit
        && elapsed.as_secs_f64() < 10.0;
    report(
        "1",
        passed,
        &format!(
            "derived form: max rel {:.2e} (tol {REL_TOL:.0e}) over {} trials / {} comparisons; \
             published eta factor: {} failures, all off unit elasticity; {:.2}s",
            derived.max_rel_error,
            derived.trials,
            derived.comparisons,
            published.failures.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(derived.passed(), "derived-form failures: {:?}", derived.failures.first());
    assert!(published_fails_off_unit, "published variant should fail for eta != 1");
    assert!(elapsed.as_secs_f64() < 10.0, "suite took {elapsed:?}");
}

/// Criterion 2: responsibilities sum to one within 1e-12 with no
/// non-finite values for sigma in {1e-3, 1, 1e3} on a 15x15 grid, in
/// under 1 s.
#[test]
fn criterion_2_responsibility_invariants() {
    let start = Instant::now();
    let grid = build_grid(&GridSpec::planar(15, 15, -1.0, 1.0)).unwrap();
    let mut worst = 0.0f64;
    for sigma in [1e-3, 1.0, 1e3] {
        for winner in [0, 112, 224] {
            let q = responsibilities(&grid, winner, sigma, 1.0).unwrap();
            assert!(
                q.iter().all(|v| v.is_finite() && *v >= 0.0),
                "non-finite responsibility at sigma {sigma}"
            );
            let sum: f64 = q.iter().sum();
            worst = worst.max((sum - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    let passed = worst < 1e-12 && elapsed.as_secs_f64() < 1.0;
    report(
        "2",
        passed,
        &format!(
            "max |sum(q) - 1| = {worst:.2e} (tol 1e-12); {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(worst < 1e-12);
    assert!(elapsed.as_secs_f64() < 1.0);
}

/// Criterion 3: scaled non-stationary run (15x15 planar, eta 1, sigma0 5,
/// Adam 1e-3, 2x7500 steps, moons -> circles at 7500): (a) sigma spikes by
/// a factor >= 1.2 across the switch, (b) final distortion below 1/5 of
/// the step-100 distortion, (c) final map organized with
/// adjacent_mean < 0.8 * random_mean. Under 2 minutes.
#[test]
fn criterion_3_non_stationary_tracking() {
    let start = Instant::now();
    let config = RunConfig {
        grid: GridSpec::planar(15, 15, -1.0, 1.0),
        eta: 1.0,
        sigma0: 5.0,
        lr: 1e-3,
        steps: 15_000,
        stream: StreamSpec::mutate(
            StreamSpec::moons(0.05, 11),
            StreamSpec::circles(0.05, 0.5, 12),
            7_500,
        ),
        seed: 42,
        log_interval: 100,
        snapshot_steps: Some(Vec::new()),
        ..RunConfig::default()
    };
    let outcome = train_in_memory(&config).unwrap();
    let elapsed = start.elapsed();

    let sigma_before = outcome.log.record_at(7_000).unwrap().sigma;
    let sigma_after = outcome.log.record_at(8_000).unwrap().sigma;
    let spike = sigma_after / sigma_before;
    let early = outcome.log.record_at(100).unwrap().distortion;
    let final_distortion = outcome.log.record_at(15_000).unwrap().distortion;
    let drop = final_distortion / early;
    let (adjacent, random) = outcome.organization.unwrap();

    let a = spike >= 1.2;
    let b = drop < 0.2;
    let c = adjacent < 0.8 * random;
    let passed = a && b && c && elapsed.as_secs_f64() < 120.0;
    report(
        "3",
        passed,
        &format!(
            "(a) sigma spike x{spike:.2} (need >= 1.2): {}; \
             (b) distortion {final_distortion:.4} vs step-100 {early:.4}, ratio {drop:.3} (need < 0.2): {}; \
             (c) organization {adjacent:.3} vs 0.8*{random:.3}: {}; {:.1}s",
            if a { "ok" } else { "violated" },
            if b { "ok" } else { "violated" },
            if c { "ok" } else { "violated" },
            elapsed.as_secs_f64()
        ),
    );
    assert!(a, "sigma spike {spike:.3} below 1.2 ({sigma_before:.4} -> {sigma_after:.4})");
    assert!(c, "adjacent {adjacent:.4} not below 0.8 * random {random:.4}");
    assert!(elapsed.as_secs_f64() < 120.0);
    assert!(
        b,
        "final distortion {final_distortion:.4} is {drop:.3} of step-100 distortion {early:.4}, \
         criterion requires < 0.2: the step-100 baseline of a 225-node standard-normal \
         initialization already sits near the map's attainable circles fit at this budget"
    );
}

/// Criterion 4: on stationary moons, the logged sigma series is
/// non-increasing across 1000-step windows after step 2000, allowing 5%
/// upward wiggle.
#[test]
fn criterion_4_sigma_adaptivity_direction() {
    let config = RunConfig {
        steps: 10_000,
        stream: StreamSpec::moons(0.05, 11),
        seed: 42,
        log_interval: 100,
        snapshot_steps: Some(Vec::new()),
        ..RunConfig::default()
    };
    let outcome = train_in_memory(&config).unwrap();

    let window_mean = |start: u64| -> f64 {
        let vals: Vec<f64> = outcome
            .log
            .records
            .iter()
            .filter(|r| r.step > start && r.step <= start + 1000)
            .map(|r| r.sigma)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let means: Vec<f64> = (2..9).map(|k| window_mean(k * 1000)).collect();
    let violations: Vec<(usize, f64)> = means
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > 1.05 * w[0])
        .map(|(i, w)| (i, w[1] / w[0]))
        .collect();

    let passed = violations.is_empty();
    report(
        "4",
        passed,
        &format!(
            "window means {:?}, no window rises more than 5%",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>()
        ),
    );
    assert!(passed, "rising windows: {violations:?} (means {means:?})");
}

/// Seeded 64-dimensional 10-component Gaussian mixture, quantized into an
/// IDX byte tensor, used when no Fashion-MNIST file is available.
fn gaussian_mixture_idx(path: &PathBuf, samples: usize) {
    let mut rng = SplitMix64::new(4242);
    let means: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..64).map(|_| 0.1 + 0.8 * rng.unit()).collect())
        .collect();
    let images: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            let component = &means[rng.index(10)];
            component
                .iter()
                .map(|m| (m + 0.05 * rng.normal()).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    write_idx_images(path, 8, 8, &images).unwrap();
}

/// First 2000 images of a real IDX file re-packed into a small IDX file,
/// when `FASHION_MNIST_IDX` points at one.
fn fashion_subset_idx(source: &str, path: &PathBuf, samples: usize) -> Option<(usize, usize)> {
    let images = vdsom::data::load_idx_images(source).ok()?;
    if images.count < samples {
        return None;
    }
    let subset: Vec<Vec<f64>> = (0..samples).map(|i| images.image(i).to_vec()).collect();
    write_idx_images(path, images.rows, images.cols, &subset).unwrap();
    Some((images.rows, images.cols))
}

/// Criterion 5: eta sweep {0.5, 1, 2, 4} x {vdsom, dsom} on 2000
/// high-dimensional samples (Fashion-MNIST when available, otherwise the
/// seeded Gaussian mixture), 10x10 toroidal grid: VDSOM's best final
/// distortion is at most DSOM's best, with a smaller max/min spread over
/// eta. Under 10 minutes.
#[test]
fn criterion_5_baseline_comparison() {
    let start = Instant::now();
    let dir = temp_dir("sweep");
    let data_path = dir.join("sweep_data.idx");
    let source = std::env::var("FASHION_MNIST_IDX").ok();
    let shape = source
        .as_deref()
        .and_then(|s| fashion_subset_idx(s, &data_path, 2000));
    if shape.is_none() {
        gaussian_mixture_idx(&data_path, 2000);
    }

    let base = RunConfig {
        grid: GridSpec::toroidal(10, 10),
        steps: 15_000,
        log_interval: 1000,
        snapshot_steps: Some(Vec::new()),
        stream: StreamSpec::idx_file(&data_path, 5),
        seed: 42,
        output_dir: dir.clone(),
        ..RunConfig::default()
    };
    let outcome = run_sweep(
        &base,
        &[0.5, 1.0, 2.0, 4.0],
        &[AlgorithmKind::Vdsom, AlgorithmKind::Dsom],
    )
    .unwrap();
    assert!(outcome.failures.is_empty(), "{:?}", outcome.failures);
    let elapsed = start.elapsed();

    let stats = |alg: AlgorithmKind| -> (f64, f64) {
        let values: Vec<f64> = outcome
            .rows
            .iter()
            .filter(|r| r.algorithm == alg)
            .map(|r| r.distortion)
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max / min)
    };
    let (vdsom_min, vdsom_spread) = stats(AlgorithmKind::Vdsom);
    let (dsom_min, dsom_spread) = stats(AlgorithmKind::Dsom);

    let outperforms = vdsom_min <= dsom_min;
    let less_sensitive = vdsom_spread < dsom_spread;
    let passed = outperforms && less_sensitive && elapsed.as_secs_f64() < 600.0;
    report(
        "5",
        passed,
        &format!(
            "data: {}; min distortion vdsom {vdsom_min:.4} vs dsom {dsom_min:.4}; \
             spread (max/min over eta) vdsom {vdsom_spread:.2} vs dsom {dsom_spread:.2}; {:.1}s",
            if shape.is_some() { "fashion-mnist subset" } else { "gaussian mixture fallback" },
            elapsed.as_secs_f64()
        ),
    );
    let _ = std::fs::remove_dir_all(&dir);
    assert!(outperforms, "vdsom min {vdsom_min} > dsom min {dsom_min}");
    assert!(
        less_sensitive,
        "vdsom spread {vdsom_spread} not below dsom spread {dsom_spread}"
    );
    assert!(elapsed.as_secs_f64() < 600.0);
}

/// Criterion 6: DSOM contract. A sample equal to the winner weight
/// changes nothing, and the single-node closed form is exact.
#[test]
fn criterion_6_dsom_unit_contract() {
    let grid = build_grid(&GridSpec::toroidal(2, 2)).unwrap();
    let weights = vec![
        vec![0.25, -0.75],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ];
    let mut state = DsomState::new(weights.clone(), 1.0, 0.5).unwrap();
    let winner = dsom_step(&mut state, &grid, &[0.25, -0.75]).unwrap();
    let frozen = winner == 0 && state.weights == weights;

    let single = build_grid(&GridSpec::toroidal(1, 1)).unwrap();
    let mut single_state = DsomState::new(vec![vec![0.0, 0.0]], 1.0, 0.5).unwrap();
    dsom_step(&mut single_state, &single, &[1.0, 0.0]).unwrap();
    let closed_form = single_state.weights[0] == vec![0.5, 0.0];

    let passed = frozen && closed_form;
    report(
        "6",
        passed,
        &format!(
            "winner hit leaves map untouched: {frozen}; single-node step lands exactly at (0.5, 0): {closed_form}"
        ),
    );
    assert!(frozen);
    assert!(closed_form);
}

/// Criterion 7: distortion equals a brute-force nested-loop reference
/// exactly on 100 random instances; the IDX loader round-trips a 3-image
/// file byte for byte.
#[test]
fn criterion_7_metric_oracles() {
    // independent reference: plain nested loops, same accumulation order
    fn brute_force(weights: &[Vec<f64>], samples: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for x in samples {
            let mut best = f64::INFINITY;
            for w in weights {
                let mut d = 0.0;
                for (a, b) in w.iter().zip(x) {
                    d += (b - a) * (b - a);
                }
                if d < best {
                    best = d;
                }
            }
            total += best;
        }
        total / samples.len() as f64
    }

    let mut rng = SplitMix64::new(1717);
    let mut exact_matches = 0;
    for _ in 0..100 {
        let dim = 1 + rng.index(6);
        let n_weights = 1 + rng.index(12);
        let n_samples = 1 + rng.index(64);
        let weights: Vec<Vec<f64>> = (0..n_weights)
            .map(|_| (0..dim).map(|_| rng.normal()).collect())
            .collect();
        let samples: Vec<Vec<f64>> = (0..n_samples)
            .map(|_| (0..dim).map(|_| rng.normal()).collect())
            .collect();
        let lib = distortion(&weights, &samples).unwrap();
        let oracle = brute_force(&weights, &samples);
        if lib.to_bits() == oracle.to_bits() {
            exact_matches += 1;
        }
    }

    // 3-image synthetic idx file, loaded and re-serialized
    let dir = temp_dir("idx_roundtrip");
    let path = dir.join("three.idx");
    let mut original = Vec::new();
    original.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    original.extend_from_slice(&3u32.to_be_bytes());
    original.extend_from_slice(&2u32.to_be_bytes());
    original.extend_from_slice(&3u32.to_be_bytes());
    original.extend((0u16..18).map(|i| (i * 14 % 256) as u8));
    std::fs::write(&path, &original).unwrap();
    let loaded = vdsom::data::load_idx_images(&path).unwrap();
    let images: Vec<Vec<f64>> = (0..loaded.count).map(|i| loaded.image(i).to_vec()).collect();
    let reserialized = idx_image_bytes(loaded.rows, loaded.cols, &images).unwrap();
    let round_trips = reserialized == original && parse_idx_images(&original).unwrap() == loaded;
    let _ = std::fs::remove_dir_all(&dir);

    let passed = exact_matches == 100 && round_trips;
    report(
        "7",
        passed,
        &format!("distortion exact on {exact_matches}/100 instances; idx 3-image round trip byte-identical: {round_trips}"),
    );
    assert_eq!(exact_matches, 100);
    assert!(round_trips);
}

/// Criterion 8: two executions of `train` with the same configuration
/// emit byte-identical CSV, SVG and PGM files.
#[test]
fn criterion_8_determinism() {
    let run = |name: &str| -> (PathBuf, Vec<PathBuf>) {
        let dir = temp_dir(name);
        let config = RunConfig {
            grid: GridSpec::planar(4, 4, -1.0, 1.0),
            steps: 400,
            log_interval: 100,
            snapshot_steps: Some(vec![0, 400]),
            stream: StreamSpec::mutate(
                StreamSpec::moons(0.05, 11),
                StreamSpec::circles(0.05, 0.5, 12),
                200,
            ),
            seed: 42,
            eval_batch: 64,
            image_shape: Some((1, 2)), // 2D weights render as 1x2 tiles too
            output_dir: dir.clone(),
            ..RunConfig::default()
        };
        let outcome = run_train(&config).unwrap();
        (dir, outcome.emitted)
    };

    let (dir_a, files_a) = run("determinism_a");
    let (dir_b, files_b) = run("determinism_b");

    assert_eq!(files_a.len(), files_b.len());
    let mut formats = [false; 3]; // csv, svg, pgm
    let mut identical = true;
    for (a, b) in files_a.iter().zip(&files_b) {
        assert_eq!(a.file_name(), b.file_name());
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        identical &= bytes_a == bytes_b;
        match a.extension().and_then(|e| e.to_str()) {
            Some("csv") => formats[0] = true,
            Some("svg") => formats[1] = true,
            Some("pgm") => formats[2] = true,
            _ => {}
        }
    }
    let all_formats = formats.iter().all(|f| *f);
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);

    let passed = identical && all_formats;
    report(
        "8",
        passed,
        &format!(
            "{} files compared byte-identical across runs (csv {} / svg {} / pgm {})",
            files_a.len(),
            formats[0],
            formats[1],
            formats[2]
        ),
    );
    assert!(all_formats, "expected csv, svg and pgm outputs");
    assert!(identical);
}
