//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hbt::config::RunConfig;
use hbt::detector::{effective_contrast, DetectorModel};
use hbt::estimators::{counting_statistics, CorrelationCurve, Subvolume};
use hbt::field::{draw_ensemble, synthesize_field};
use hbt::physics::{Geometry, Grid};
use hbt::pipeline::{analyze, predict, simulate, Analysis};
use hbt::sampling::{sample_fermion_cells, ThermalKernel};
use hbt::seed::rng;
use hbt::stats::ks_exponential;

const H: f64 = 6.62607e-34;
const G: f64 = 9.81;
const HE4: f64 = 6.646477e-27;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_pipeline(text: &str) -> Result<Analysis, String> {
    let config = RunConfig::parse(text).map_err(|e| e.to_string())?;
    let events = simulate(&config).map_err(|e| e.to_string())?;
    analyze(&events, &config).map_err(|e| e.to_string())
}

/// One-dimensional optical run spanning `span` correlation lengths at about
/// seven grid cells per length.
fn optical(statistics: &str, size: f64, shots: u64, seed: u64, extra: &str) -> (String, f64) {
    let (wavelength, distance) = (5e-7, 1.0);
    let l = wavelength * distance / (2.0 * PI * size);
    let span = 60.0;
    let text = format!(
        "source.statistics = {statistics}\nsource.size = {size:e}\nsource.wavelength = {wavelength:e}\n\
         source.mean_count = 20\nsource.emitters = 256\ngeometry.mode = optical\ngeometry.distance = {distance}\n\
         geometry.extent = {:e}\ngeometry.points = {}\nrun.shots = {shots}\nrun.seed = {seed}\n{extra}",
        span * l,
        (span * 7.0) as usize
    );
    (text, l)
}

fn matter(size: f64, shots: u64, seed: u64, extra: &str) -> (String, f64) {
    let t = 0.3;
    let l = H * t / (2.0 * PI * HE4 * size);
    let span = 60.0;
    let text = format!(
        "source.size = {size:e}\nsource.mass = {HE4:e}\nsource.mean_count = 20\nsource.emitters = 256\n\
         geometry.mode = time_of_flight\ngeometry.fall_time = {t}\ngeometry.extent = {:e}\ngeometry.points = {}\n\
         run.shots = {shots}\nrun.seed = {seed}\n{extra}",
        span * l,
        (span * 7.0) as usize
    );
    (text, l)
}

/// Valid `(center, g2, sigma)` with `lo <= center <= hi`.
fn window(curve: &CorrelationCurve, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    curve.points().into_iter().filter(|p| p.0 >= lo && p.0 <= hi).collect()
}

fn mean_g2(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let w: f64 = points.iter().map(|p| 1.0 / (p.2 * p.2)).sum();
    let m = points.iter().map(|p| p.1 / (p.2 * p.2)).sum::<f64>() / w;
    (m, 1.0 / w.sqrt())
}

fn bunching() -> Outcome {
    let (text, l) = optical("chaotic_boson", 1e-3, 10_000, 1, "");
    let a = run_pipeline(&text)?;
    let (g0, s0) = a.g2_at_zero().ok_or("zero bin invalid")?;
    let (tail, st) = mean_g2(&window(&a.correlation.curve, 5.0 * l, 20.0 * l));
    check(
        (g0 - 2.0).abs() <= 0.1 && (tail - 1.0).abs() <= 0.05,
        format!("g2(0) = {g0:.4} +- {s0:.4}, g2(5l..20l) = {tail:.4} +- {st:.4}"),
    )
}

fn antibunching() -> Outcome {
    let (text, l) = optical("fermion", 1e-3, 10_000, 2, "");
    let a = run_pipeline(&text)?;
    let curve = &a.correlation.curve;
    let width = curve.axes[0].width;
    let (g0, s0) = a.g2_at_zero().ok_or("zero bin invalid")?;
    let rise = window(curve, 0.0, 3.0 * l);
    let monotone = rise
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let (tail, st) = mean_g2(&window(curve, 5.0 * l, 20.0 * l));
    check(
        g0 <= 0.1 && width <= l / 5.0 * (1.0 + 1e-12) && monotone && (tail - 1.0).abs() <= 0.05,
        format!(
            "g2(0) = {g0:.4} +- {s0:.4} in bins of l/{:.1}, monotone to 3l: {monotone}, g2(5l..20l) = {tail:.4} +- {st:.4}",
            l / width
        ),
    )
}

fn coherent_flatness() -> Outcome {
    let l = 5e-7 / (2.0 * PI * 1e-3);
    let (text, _) = optical(
        "coherent",
        1e-3,
        40_000,
        3,
        &format!("estimator.max_separation = {:e}\n", 5.0 * l),
    );
    let a = run_pipeline(&text)?;
    let points = a.correlation.curve.points();
    let worst = points.iter().map(|p| (p.1 - 1.0).abs()).fold(0.0, f64::max);
    let sigma = points.iter().map(|p| p.2).fold(0.0, f64::max);
    check(
        points.len() >= 20 && worst <= 0.02,
        format!(
            "{} bins out to 5l = {:.3e} m, max |g2 - 1| = {worst:.4}, largest sigma {sigma:.4}",
            points.len(),
            5.0 * l
        ),
    )
}

fn length_law() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for size in [0.5e-3, 1e-3, 2e-3] {
        let (text, l) = optical("chaotic_boson", size, 3000, 40, "");
        let fit = run_pipeline(&text)?.correlation.fit.ok_or("fit failed")?;
        let rel = fit.length / l - 1.0;
        ok &= rel.abs() <= 0.1;
        lines.push(format!("optical s={size:.1e}: {rel:+.3}"));
    }
    for size in [40e-6, 80e-6, 160e-6] {
        let (text, l) = matter(size, 3000, 41, "");
        let fit = run_pipeline(&text)?.correlation.fit.ok_or("fit failed")?;
        let rel = fit.length / l - 1.0;
        ok &= rel.abs() <= 0.1;
        lines.push(format!("matter s={size:.1e}: {rel:+.3}"));
    }
    check(ok, format!("fitted l / predicted - 1: {}", lines.join(", ")))
}

fn einstein() -> Outcome {
    // bosons: ten correlation lengths on 80 cells, about one count in a
    // window of l/5
    let (wavelength, size) = (5e-7, 1e-3);
    let l = wavelength / (2.0 * PI * size);
    let text = format!(
        "source.size = {size:e}\nsource.wavelength = {wavelength:e}\nsource.mean_count = 50\nsource.emitters = 256\n\
         geometry.mode = optical\ngeometry.distance = 1\ngeometry.extent = {:e}\ngeometry.points = 80\n\
         estimator.subvolume = {:e}:{:e}\nrun.shots = 40000\nrun.seed = 5",
        10.0 * l,
        -0.1 * l,
        0.1 * l
    );
    let config = RunConfig::parse(&text).map_err(|e| e.to_string())?;
    let events = simulate(&config).map_err(|e| e.to_string())?;
    let sub = config.estimator.subvolume.clone().unwrap();
    let b = counting_statistics(&events, &sub).map_err(|e| e.to_string())?;
    let expected = b.mean + b.mean * b.mean;
    let boson_rel = b.variance / expected - 1.0;

    // fermions: 24-cell kernel, g_cells from the kernel restricted to the
    // counting window
    let grid = Grid::uniform(1, 24.0, 24).map_err(|e| e.to_string())?;
    let kernel = ThermalKernel::gaussian(grid.clone(), &[1.0 / 24.0; 24], 2.5, 3.0).map_err(|e| e.to_string())?;
    let cells: Vec<usize> = (9..15).collect();
    let n_expected: f64 = cells.iter().map(|&i| kernel.matrix[(i, i)]).sum();
    let tr_sq: f64 = cells
        .iter()
        .flat_map(|&i| cells.iter().map(move |&j| (i, j)))
        .map(|(i, j)| kernel.matrix[(i, j)] * kernel.matrix[(j, i)])
        .sum();
    let g_cells = n_expected * n_expected / tr_sq;
    let mut list = hbt::sampling::EventList::new(1, 100_000);
    let mut r = rng(6);
    for shot in 0..list.shots {
        for c in sample_fermion_cells(&kernel, &mut r) {
            list.events
                .push(hbt::sampling::EventRecord::new(shot, 0.0, grid.center(c), 1));
        }
    }
    let window =
        Subvolume::new(vec![grid.center(9)[0] - 0.5], vec![grid.center(14)[0] + 0.5]).map_err(|e| e.to_string())?;
    let f = counting_statistics(&list, &window).map_err(|e| e.to_string())?;
    let fermion_expected = f.mean - f.mean * f.mean / g_cells;
    let z = (f.variance - fermion_expected) / f.variance_sigma;
    check(
        boson_rel.abs() <= 0.1 && z.abs() <= 3.0,
        format!(
            "bosons <N> = {:.3}, var = {:.3} vs <N>+<N>^2 = {expected:.3} ({boson_rel:+.3}); \
             fermions <N> = {:.3}, g_cells = {g_cells:.3}, var = {:.4} vs {fermion_expected:.4} ({z:+.2} sigma)",
            b.mean, b.variance, f.mean, f.variance
        ),
    )
}

fn dpp_exactness() -> Outcome {
    let grid = Grid::uniform(1, 6.0, 6).map_err(|e| e.to_string())?;
    let kernel = ThermalKernel::gaussian(grid, &[1.0 / 6.0; 6], 2.5, 1.0).map_err(|e| e.to_string())?;
    let k = &kernel.matrix;
    let samples = 100_000;
    let mut single = [0u64; 6];
    let mut pair = [[0u64; 6]; 6];
    let mut r = rng(10);
    for _ in 0..samples {
        let cells = sample_fermion_cells(&kernel, &mut r);
        for &i in &cells {
            single[i] += 1;
            for &j in &cells {
                if i < j {
                    pair[i][j] += 1;
                }
            }
        }
    }
    let n = samples as f64;
    let z = |count: u64, p: f64| (count as f64 / n - p) / (p * (1.0 - p) / n).sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..6 {
        worst = worst.max(z(single[i], k[(i, i)]).abs());
        for j in i + 1..6 {
            let minor = k[(i, i)] * k[(j, j)] - k[(i, j)] * k[(j, i)];
            worst = worst.max(z(pair[i][j], minor).abs());
        }
    }
    check(
        worst <= 3.0,
        format!("6 singletons and 15 pairs over {samples} samples, worst deviation {worst:.2} sigma"),
    )
}

fn chaotic_field() -> Outcome {
    let size = 1e-3;
    let grid = Grid::uniform(1, 2e-3, 64).map_err(|e| e.to_string())?;
    let geometry = Geometry::optical(1.0, grid).map_err(|e| e.to_string())?;
    let mut r = rng(8);
    let mut samples = Vec::new();
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
    let shots = 2000;
    for shot in 0..shots {
        let ensemble = draw_ensemble(size, 1, 1024, &mut r).map_err(|e| e.to_string())?;
        let field = synthesize_field(&ensemble, &geometry, 5e-7, shot).map_err(|e| e.to_string())?;
        let intensity = field.intensity();
        samples.push(intensity[intensity.len() / 2]);
        for i in intensity {
            s1 += i;
            s2 += i * i;
            n += 1.0;
        }
    }
    let (d, p) = ks_exponential(&samples, 1.0);
    let ratio = (s2 / n) / (s1 / n).powi(2);
    check(
        p > 0.01 && (ratio - 2.0).abs() <= 0.05,
        format!("KS D = {d:.4}, p = {p:.3} over {shots} shots; <I^2>/<I>^2 = {ratio:.4}"),
    )
}

fn detector_consistency() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for pixel in [1e-4, 2.5e-4, 5e-4] {
        let extra = format!("detector.ideal = false\ndetector.spatial_resolution = {pixel:e}\n");
        let (text, l) = matter(65e-6, 5000, 9, &extra);
        let a = run_pipeline(&text)?;
        let (g0, s0) = a.g2_at_zero().ok_or("zero bin invalid")?;
        let model = DetectorModel {
            spatial_resolution: pixel,
            ..DetectorModel::default()
        };
        let factor = effective_contrast(&[l], &model, G * 0.3).map_err(|e| e.to_string())?;
        let product = (g0 - 1.0) * factor;
        ok &= (product - 1.0).abs() <= 0.1;
        lines.push(format!(
            "{:.0} um: ({:.4} +- {s0:.4}) x {factor:.3} = {product:.3}",
            pixel * 1e6,
            g0 - 1.0
        ));
    }
    let config = RunConfig::load(&repo_root().join("configs/he4_mcp.conf")).map_err(|e| e.to_string())?;
    let row = predict(&config).map_err(|e| e.to_string())?;
    let preset: f64 = row
        .iter()
        .find(|(k, _)| k == "effective_contrast_factor_all_axes")
        .and_then(|(_, v)| v.parse().ok())
        .ok_or("no all-axes factor")?;
    ok &= (10.0..=25.0).contains(&preset);
    check(ok, format!("{}; He-4 preset factor {preset:.2}", lines.join(", ")))
}

fn magnitude() -> Outcome {
    let config = RunConfig::load(&repo_root().join("configs/air.conf")).map_err(|e| e.to_string())?;
    let rows = predict(&config).map_err(|e| e.to_string())?;
    let noise: f64 = rows
        .iter()
        .find(|(k, _)| k == "relative_shot_noise")
        .and_then(|(_, v)| v.parse().ok())
        .ok_or("no shot noise row")?;
    check(
        (5e-9..=5e-8).contains(&noise),
        format!("relative shot noise {noise:.3e}"),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = repo_root().join("configs/figure2.conf");
    let mut dirs = Vec::new();
    for threads in ["1", "2", "1"] {
        let dir = tmp.path().join(format!("run{}", dirs.len()));
        let status = Command::new(env!("CARGO_BIN_EXE_hbt"))
            .args(["figure2", "--shots", "300", "--threads", threads, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        dirs.push(dir);
    }
    let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut same = names.len() >= 4;
    for name in &names {
        let a = std::fs::read(dirs[0].join(name)).map_err(|e| e.to_string())?;
        for dir in &dirs[1..] {
            same &= std::fs::read(dir.join(name)).map_err(|e| e.to_string())? == a;
        }
    }
    check(
        same,
        format!("{} files identical across 3 runs with 1, 2 and 1 threads", names.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("bunching", bunching),
        ("antibunching", antibunching),
        ("coherent flatness", coherent_flatness),
        ("correlation-length law", length_law),
        ("Einstein variance", einstein),
        ("DPP exactness", dpp_exactness),
        ("chaotic-field statistics", chaotic_field),
        ("detector contrast", detector_consistency),
        ("magnitude sanity", magnitude),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {:>2} {name}: {detail} [{:.1} s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
