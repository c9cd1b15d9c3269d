use std::f64::consts::PI;

use hbt::config::RunConfig;
use hbt::detector::{effective_contrast, DetectorModel};
use hbt::field::{draw_ensemble, intensity_autocorrelation, resample_phases, synthesize_field};
use hbt::physics::Statistics;
use hbt::physics::{Geometry, Grid};
use hbt::pipeline::{figure2, simulate};
use hbt::sampling::{sample_fermion_cells, ThermalKernel};
use hbt::seed::rng;

#[test]
fn ensemble_rms_matches_source_size() {
    let mut r = rng(1);
    let e = draw_ensemble(2e-3, 3, 20_000, &mut r).unwrap();
    for axis in 0..3 {
        assert!((e.rms(axis) / 2e-3 - 1.0).abs() < 0.02, "axis {axis}: {}", e.rms(axis));
    }
}

#[test]
fn speckle_length_follows_lambda_l_over_two_pi_s() {
    // three (wavelength, distance, size) triples spanning a factor 4 in l
    for (wavelength, distance, size) in [(5e-7, 1.0, 1e-3), (1e-6, 1.0, 1e-3), (5e-7, 2.0, 5e-4)] {
        let l = wavelength * distance / (2.0 * PI * size);
        let grid = Grid::uniform(1, 40.0 * l, 320).unwrap();
        let geometry = Geometry::optical(distance, grid).unwrap();
        let mut r = rng(2);
        let fields: Vec<_> = (0..400)
            .map(|shot| {
                let e = draw_ensemble(size, 1, 512, &mut r).unwrap();
                synthesize_field(&e, &geometry, wavelength, shot).unwrap()
            })
            .collect();
        let measured = intensity_autocorrelation(&fields).unwrap().e_folding_length().unwrap();
        assert!((measured / l - 1.0).abs() < 0.1, "l = {l:e}, measured {measured:e}");
    }
}

#[test]
fn resampled_phases_decorrelate_intensity() {
    let grid = Grid::uniform(1, 1e-3, 64).unwrap();
    let geometry = Geometry::optical(1.0, grid).unwrap();
    let mut r = rng(3);
    let (mut sxy, mut sx, mut sy, mut sxx, mut syy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for shot in 0..500 {
        let e = draw_ensemble(1e-3, 1, 256, &mut r).unwrap();
        let a = synthesize_field(&e, &geometry, 5e-7, shot).unwrap().intensity();
        let b = synthesize_field(&resample_phases(&e, &mut r), &geometry, 5e-7, shot)
            .unwrap()
            .intensity();
        let (x, y) = (a[32], b[32]);
        sxy += x * y;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        n += 1.0;
    }
    let cov = sxy / n - sx * sy / (n * n);
    let rho = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
    // 500 pairs: one standard error is about 0.045
    assert!(rho.abs() < 0.15, "correlation {rho}");
}

fn optical_config(stats: &str, shots: u64) -> RunConfig {
    RunConfig::parse(&format!(
        "source.statistics = {stats}\nsource.size = 1e-3\nsource.wavelength = 5e-7\nsource.mean_count = 8\n\
         source.emitters = 256\ngeometry.mode = optical\ngeometry.distance = 1\ngeometry.extent = 2.4e-3\n\
         geometry.points = 180\nrun.shots = {shots}\nrun.seed = 4"
    ))
    .unwrap()
}

fn moments(counts: &[u64]) -> (f64, f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var, n)
}

#[test]
fn coherent_counts_are_poisson() {
    let events = simulate(&optical_config("coherent", 4000)).unwrap();
    let (mean, var, n) = moments(&events.counts_per_shot());
    assert!((mean - 8.0).abs() < 4.0 * (8.0 / n).sqrt(), "mean {mean}");
    // variance of the sample variance of Poisson(8) is about (8 + 2 * 64) / n
    assert!((var - 8.0).abs() < 4.0 * ((8.0 + 128.0) / n).sqrt(), "variance {var}");
}

#[test]
fn boson_total_counts_exceed_poisson() {
    // the window holds 30 correlation lengths: total-count excess close to
    // <N>^2 / (W / (sqrt(pi) l))
    let events = simulate(&optical_config("chaotic_boson", 4000)).unwrap();
    let (mean, var, _) = moments(&events.counts_per_shot());
    let l = 5e-7 / (2.0 * PI * 1e-3);
    let cells = 2.4e-3 / (PI.sqrt() * l);
    let expected = mean + mean * mean / cells;
    assert!(
        (var / expected - 1.0).abs() < 0.1,
        "variance {var}, expected {expected}"
    );
}

#[test]
fn fermion_mean_count_matches_kernel_trace() {
    let grid = Grid::uniform(1, 40.0, 120).unwrap();
    let kernel = ThermalKernel::gaussian(grid, &[1.0 / 120.0; 120], 2.0, 6.0).unwrap();
    let mut r = rng(5);
    let samples = 20_000;
    let counts: Vec<u64> = (0..samples)
        .map(|_| sample_fermion_cells(&kernel, &mut r).len() as u64)
        .collect();
    let (mean, var, n) = moments(&counts);
    let exact_var: f64 = kernel.eigenvalues().iter().map(|l| l * (1.0 - l)).sum();
    assert!((mean - 6.0).abs() < 4.0 * (exact_var / n).sqrt(), "mean {mean}");
    assert!(var < 6.0, "total count must be sub-Poissonian, variance {var}");
}

fn det(m: &[Vec<f64>]) -> f64 {
    // Laplace expansion along the first row
    if m.is_empty() {
        return 1.0;
    }
    (0..m.len())
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * det(&minor)
        })
        .sum()
}

#[test]
fn six_cell_inclusion_probabilities_match_principal_minors() {
    let grid = Grid::uniform(1, 6.0, 6).unwrap();
    let kernel = ThermalKernel::gaussian(grid, &[1.0 / 6.0; 6], 2.5, 1.2).unwrap();
    let k: Vec<Vec<f64>> = (0..6)
        .map(|i| (0..6).map(|j| kernel.matrix[(i, j)]).collect())
        .collect();
    let mut r = rng(6);
    let samples = 100_000;
    let mut hits = std::collections::HashMap::<Vec<usize>, u64>::new();
    for _ in 0..samples {
        let mut cells = sample_fermion_cells(&kernel, &mut r);
        cells.sort_unstable();
        // every subset of up to three cells contained in the sample
        for mask in 1u32..64 {
            let subset: Vec<usize> = (0..6).filter(|i| mask & (1 << i) != 0).collect();
            if subset.len() <= 3 && subset.iter().all(|c| cells.contains(c)) {
                *hits.entry(subset).or_default() += 1;
            }
        }
    }
    for mask in 1u32..64 {
        let subset: Vec<usize> = (0..6).filter(|i| mask & (1 << i) != 0).collect();
        if subset.len() > 3 {
            continue;
        }
        let sub: Vec<Vec<f64>> = subset
            .iter()
            .map(|&i| subset.iter().map(|&j| k[i][j]).collect())
            .collect();
        let p = det(&sub);
        let f = *hits.get(&subset).unwrap_or(&0) as f64 / samples as f64;
        let sigma = (p * (1.0 - p) / samples as f64).sqrt().max(1.0 / samples as f64);
        assert!((f - p).abs() < 4.0 * sigma, "{subset:?}: frequency {f}, minor {p}");
    }
}

/// `1 / <exp(-(u - v)^2 / l^2)>` for `u`, `v` uniform in one pixel, by a
/// midpoint double sum.
fn brute_force_factor(l: f64, pitch: f64) -> f64 {
    let n = 1500;
    let h = pitch / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * h;
        for j in 0..n {
            let v = (j as f64 + 0.5) * h;
            sum += (-(u - v).powi(2) / (l * l)).exp();
        }
    }
    1.0 / (sum / (n * n) as f64)
}

#[test]
fn contrast_factor_matches_direct_convolution() {
    let l = 1e-4;
    for pitch in [1e-4, 3e-4, 5e-4] {
        let model = DetectorModel {
            spatial_resolution: pitch,
            ..DetectorModel::default()
        };
        let factor = effective_contrast(&[l], &model, 0.0).unwrap();
        let oracle = brute_force_factor(l, pitch);
        assert!(
            (factor / oracle - 1.0).abs() < 0.01,
            "pitch {pitch}: {factor} vs {oracle}"
        );
    }
    // resolution far below l on every axis
    let fine = DetectorModel {
        spatial_resolution: 1e-9,
        time_resolution: 1e-15,
        ..DetectorModel::default()
    };
    assert!((effective_contrast(&[l; 3], &fine, 3.0).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn three_traces_mirror_and_scale_with_mass() {
    let config = RunConfig::parse(
        "source.size = 6.5e-5\nsource.mean_count = 20\nsource.emitters = 256\ngeometry.mode = time_of_flight\n\
         geometry.fall_time = 0.3\ngeometry.extent = 5e-3\ngeometry.points = 400\nrun.shots = 2000\nrun.seed = 12",
    )
    .unwrap();
    let traces = figure2(&config).unwrap();
    let get = |s: Statistics| traces.iter().find(|t| t.statistics == s).unwrap();
    let boson = get(Statistics::ChaoticBoson).analysis.correlation.fit.unwrap();
    let fermion = get(Statistics::Fermion).analysis.correlation.fit.unwrap();
    let coherent = &get(Statistics::Coherent).analysis.correlation.curve;
    assert_eq!(
        coherent.axes,
        get(Statistics::ChaoticBoson).analysis.correlation.curve.axes
    );
    assert!(boson.contrast > 0.0 && fermion.contrast < 0.0);
    assert!(
        (boson.contrast.abs() / fermion.contrast.abs() - 1.0).abs() < 0.15,
        "{boson:?} {fermion:?}"
    );
    // l scales as 1/m: rescale the fermion length to the boson mass
    let ratio = config.fermion_mass / config.boson_mass;
    assert!(
        (fermion.length * ratio / boson.length - 1.0).abs() < 0.1,
        "{boson:?} {fermion:?}"
    );
}

#[test]
fn wide_window_counts_the_cells_it_spans() {
    // window of width W holds W / (sqrt(pi) l) cells of a 1-D Gaussian speckle
    let config = optical_config("chaotic_boson", 4000);
    let events = simulate(&config).unwrap();
    let l = 5e-7 / (2.0 * PI * 1e-3);
    let width = 20.0 * l;
    let sub = hbt::estimators::Subvolume::centered(1, width).unwrap();
    let stats = hbt::estimators::counting_statistics(&events, &sub).unwrap();
    let k = width / (PI.sqrt() * l);
    let g = stats.g_inferred.unwrap();
    assert!((g / k - 1.0).abs() < 0.2, "inferred {g}, expected {k}");
}

#[test]
fn fermion_dip_deepens_with_finer_bins() {
    let base = optical_config("fermion", 3000);
    let l = 5e-7 / (2.0 * PI * 1e-3);
    let events = simulate(&base).unwrap();
    let zero = |fraction: f64| {
        let c = base.with("estimator.bin_width", format!("{:e}", l * fraction)).unwrap();
        hbt::pipeline::analyze(&events, &c).unwrap().g2_at_zero().unwrap().0
    };
    let (coarse, medium, fine) = (zero(0.5), zero(0.2), zero(0.1));
    assert!(fine < medium && medium < coarse, "{coarse} {medium} {fine}");
    assert!(medium <= 0.1);
}

#[test]
fn time_of_flight_in_three_dimensions() {
    // 3-D grid, quantizing detector, horizontal averaging
    let config = RunConfig::parse(
        "source.size = 2e-5\nsource.mean_count = 25\nsource.emitters = 128\ngeometry.mode = time_of_flight\n\
         geometry.fall_time = 0.3\ngeometry.dims = 3\ngeometry.extent = 2.4e-3\ngeometry.points = 24\n\
         detector.ideal = false\ndetector.spatial_resolution = 5e-5\ndetector.time_resolution = 1e-6\n\
         run.shots = 1500\nrun.seed = 13",
    )
    .unwrap();
    let events = simulate(&config).unwrap();
    assert_eq!(events.dims, 3);
    assert!(events.events.iter().all(|e| e.z.is_some()));
    let a = hbt::pipeline::analyze(&events, &config).unwrap();
    assert_eq!(a.correlation.curve.axes.len(), 1);
    let (g0, sigma) = a.g2_at_zero().unwrap();
    assert!(g0 - 1.0 > 5.0 * sigma, "no bunching: {g0} +- {sigma}");
}
