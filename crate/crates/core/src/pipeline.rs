//! End-to-end runs: closed-form predictions, event simulation, analysis and
//! the three-trace bunching / flat / antibunching comparison.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::detector::{axis_pitches, detect, effective_contrast};
use crate::error::{Error, Result};
use crate::estimators::{
    average_transverse, counting_statistics, fit_correlation, normalization_histogram, normalize_g2, pair_histogram,
    BinSpec, CorrelationResult, CountingStats, PairHistogram, Subvolume,
};
use crate::field::{draw_ensemble, synthesize_field};
use crate::physics::{
    correlation_length_optical, de_broglie_wavelength, einstein_variance, phase_space_cells, Species, Statistics,
};
use crate::sampling::{
    build_thermal_kernel, sample_boson_events, sample_coherent_events, sample_fermion_events, time_of_flight_positions,
    to_arrival_times, EventList, EventRecord,
};
use crate::seed::{self, shot_rng, Stream};

const MIN_MIXING_PAIRS: u64 = 100_000;
const MAX_MIXING_PAIRS: u64 = 50_000_000;

/// Runs `f` on a pool of `threads` workers, or the global pool. Results never
/// depend on the worker count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Predicted correlation length for the configured statistics; fermions use
/// the kernel width including the temperature scale.
pub fn predicted_length(config: &RunConfig) -> Result<f64> {
    let source = config.source_model()?;
    let l = config.geometry()?.correlation_length(&source, &config.constants)?;
    Ok(match source.statistics {
        Statistics::Fermion => l * source.temperature_scale.unwrap_or(1.0),
        _ => l,
    })
}

/// Simulates `run.shots` shots: source events, arrival-time stamping, the
/// detector stage (unless ideal) and, for three-dimensional time-of-flight
/// data, conversion of arrival times back to vertical positions.
pub fn simulate(config: &RunConfig) -> Result<EventList> {
    let source = config.source_model()?;
    let geometry = config.geometry()?;
    let constants = config.constants;
    let grid = &geometry.grid;
    let dims = geometry.dims();
    let master = config.run.seed;
    let density = config.source.profile.density(grid)?;
    let kernel = match source.statistics {
        Statistics::Fermion => Some(build_thermal_kernel(
            &source,
            &geometry,
            &constants,
            config.source.profile,
        )?),
        _ => None,
    };
    let wavelength = geometry.wavelength(&source, &constants)?;

    let shot = |shot_id: u64| -> Result<Vec<EventRecord>> {
        let mut rng = shot_rng(master, Stream::Events, shot_id);
        let mut events = match source.statistics {
            Statistics::ChaoticBoson => {
                let mut emitter_rng = shot_rng(master, Stream::Emitters, shot_id);
                let ensemble = draw_ensemble(source.size, dims, config.source.emitters, &mut emitter_rng)?;
                let field = synthesize_field(&ensemble, &geometry, wavelength, shot_id)?;
                sample_boson_events(&field, &density, source.mean_count, 0.0, &mut rng)?
            }
            Statistics::Coherent => sample_coherent_events(grid, &density, source.mean_count, shot_id, 0.0, &mut rng)?,
            Statistics::Fermion => {
                sample_fermion_events(kernel.as_ref().expect("fermion kernel"), shot_id, 0.0, &mut rng)
            }
        };
        to_arrival_times(&mut events, &geometry);
        if let Some(model) = &config.detector {
            events = detect(&events, model, &mut shot_rng(master, Stream::Detector, shot_id));
        }
        if dims == 3 && geometry.fall_time().is_some() {
            events = time_of_flight_positions(&events, &geometry)?;
        }
        Ok(events)
    };

    let per_shot = with_threads(config.run.threads, || {
        (0..config.run.shots)
            .into_par_iter()
            .map(shot)
            .collect::<Result<Vec<_>>>()
    })??;
    let mut list = EventList::new(dims, config.run.shots);
    list.quantized = config.detector.is_some();
    list.events = per_shot.into_iter().flatten().collect();
    Ok(list)
}

/// Binning and reference choices for one analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisPlan {
    pub axes: Vec<BinSpec>,
    pub radius_cap: f64,
    pub mixing_pairs: Option<u64>,
    pub subvolume: Subvolume,
    pub predicted_length: f64,
}

/// Default plan: bins of a fifth of the predicted length (rounded to whole
/// pixels and centered on pixel multiples for quantized data), spanning the
/// grid on the analysis axis and one radius cap on the others; a centered
/// counting cell of the same width, or a single pixel.
pub fn plan_analysis(config: &RunConfig, quantized: bool) -> Result<AnalysisPlan> {
    let geometry = config.geometry()?;
    let dims = geometry.dims();
    let l = predicted_length(config)?;
    let width = config.estimator.bin_width.unwrap_or(l / 5.0);
    let radius_cap = config.estimator.radius_cap.unwrap_or(l);
    let pitches = config
        .detector
        .as_ref()
        .filter(|_| quantized)
        .map(|d| axis_pitches(d, dims, geometry.speed));
    let mut axes = Vec::with_capacity(dims);
    for axis in 0..dims {
        let last = axis + 1 == dims;
        let max = if last {
            config.estimator.max_separation.unwrap_or(geometry.grid.extent[axis])
        } else {
            radius_cap + width
        };
        let spec = match &pitches {
            Some(p) => {
                let pitch = p[axis];
                let w = pitch * (width / pitch).round().max(1.0);
                BinSpec::new(-0.5 * pitch, w, ((max + 0.5 * pitch) / w).ceil().max(1.0) as usize)?
            }
            None => BinSpec::covering(width, max)?,
        };
        axes.push(spec);
    }
    let radius_cap = radius_cap.max(axes[..dims - 1].iter().map(|a| a.width).fold(0.0, f64::max));
    let subvolume = match (&config.estimator.subvolume, &pitches) {
        (Some(s), _) => s.clone(),
        // any half-open interval one pitch long holds exactly one pixel
        (None, Some(p)) => Subvolume::new(vec![0.0; dims], p.clone())?,
        (None, None) => Subvolume::centered(dims, width)?,
    };
    Ok(AnalysisPlan {
        axes,
        radius_cap,
        mixing_pairs: config.estimator.mixing_pairs,
        subvolume,
        predicted_length: l,
    })
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub numerator: PairHistogram,
    pub reference: PairHistogram,
    pub correlation: CorrelationResult,
    pub fit_error: Option<String>,
    pub counting: Option<CountingStats>,
    pub predicted_length: f64,
}

impl Analysis {
    /// `g2` in the bin containing zero separation.
    pub fn g2_at_zero(&self) -> Option<(f64, f64)> {
        let c = &self.correlation.curve;
        c.valid.first().filter(|v| **v).map(|_| (c.g2[0], c.sigma[0]))
    }
}

/// Same-shot and mixed-shot pair histograms, the normalized curve, its fit
/// and the counting statistics in the plan's subvolume.
pub fn analyze_with_plan(events: &EventList, plan: &AnalysisPlan, seed: u64) -> Result<Analysis> {
    let mut numerator = pair_histogram(events, &plan.axes)?;
    let target = plan
        .mixing_pairs
        .unwrap_or_else(|| (10 * numerator.offered_pairs).clamp(MIN_MIXING_PAIRS, MAX_MIXING_PAIRS));
    let mut reference = if events.shots >= 2 {
        normalization_histogram(events, &plan.axes, target, seed::derive(seed, Stream::Mixing, u64::MAX))?
    } else {
        numerator.clone()
    };
    if events.dims > 1 {
        numerator = average_transverse(&numerator, plan.radius_cap)?;
        reference = average_transverse(&reference, plan.radius_cap)?;
    }
    let curve = normalize_g2(&numerator, &reference)?;
    let (fit, fit_error) = match fit_correlation(&curve) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let counting = if events.shots >= 2 {
        Some(counting_statistics(events, &plan.subvolume)?)
    } else {
        None
    };
    Ok(Analysis {
        numerator,
        reference,
        correlation: CorrelationResult { curve, fit },
        fit_error,
        counting,
        predicted_length: plan.predicted_length,
    })
}

pub fn analyze(events: &EventList, config: &RunConfig) -> Result<Analysis> {
    events.check_dims(config.dims())?;
    let plan = plan_analysis(config, events.quantized)?;
    with_threads(config.run.threads, || analyze_with_plan(events, &plan, config.run.seed))?
}

/// Closed-form numbers for a configuration, as ordered `key = value` pairs.
/// Consumes no randomness.
pub fn predict(config: &RunConfig) -> Result<Vec<(String, String)>> {
    let source = config.source_model()?;
    let geometry = config.geometry()?;
    let h = config.constants.h;
    let mut out: Vec<(String, String)> = Vec::new();
    out.push(num("h", h));
    out.push(num("source_size", source.size));
    out.push(num("distance", geometry.distance()));
    let wavelength = geometry.wavelength(&source, &config.constants)?;
    match source.species {
        Species::Mass(m) => {
            out.push(num("mass", m));
            out.push(num("fall_time", geometry.fall_time().unwrap_or(0.0)));
            out.push(num("speed", geometry.speed));
            out.push(num(
                "de_broglie_wavelength",
                de_broglie_wavelength(m, geometry.speed, h)?,
            ));
            out.push(num(
                "correlation_length_matter",
                geometry.correlation_length(&source, &config.constants)?,
            ));
            out.push(num(
                "correlation_length_optical_equivalent",
                correlation_length_optical(wavelength, geometry.distance(), source.size)?,
            ));
        }
        Species::Wavelength(l) => {
            out.push(num("wavelength", l));
            out.push(num(
                "correlation_length_optical",
                geometry.correlation_length(&source, &config.constants)?,
            ));
        }
    }
    let length = geometry.correlation_length(&source, &config.constants)?;

    let mean_n = config.cells.mean_n.unwrap_or(source.mean_count);
    let cells = match (&config.cells.dx, &config.cells.dp, config.cells.g) {
        (Some(dx), Some(dp), None) => {
            // a single width stands for all three axes of phase space
            let dims = if dx.len() == 1 && dp.len() == 1 {
                3
            } else {
                dx.len().max(dp.len())
            };
            let dx = if dx.len() == 1 { vec![dx[0]; dims] } else { dx.clone() };
            let dp = if dp.len() == 1 { vec![dp[0]; dims] } else { dp.clone() };
            Some(phase_space_cells(&dx, &dp, h)?.value())
        }
        (None, None, Some(g)) => Some(g),
        (None, None, None) => None,
        _ => return Err(Error::Config("give either cells.dx and cells.dp, or cells.g".into())),
    };
    out.push(num("mean_n", mean_n));
    if let Some(g) = cells {
        out.push(num("phase_space_cells", g));
        if g < 1.0 {
            out.push(("phase_space_cells_flag".into(), "below_one_cell".into()));
        }
    }
    let g = cells.unwrap_or(f64::INFINITY);
    for stats in Statistics::ALL {
        let key = format!("variance_{}", stats.name());
        match einstein_variance(mean_n, g, stats) {
            Ok(v) => out.push(num(&key, v)),
            // only fatal for the configured statistics
            Err(Error::Occupancy { .. }) if stats != source.statistics => out.push((key, "exceeds_pauli_bound".into())),
            Err(e) => return Err(e),
        }
    }
    if mean_n > 0.0 {
        out.push(num("relative_shot_noise", mean_n.sqrt() / mean_n));
        out.push(num("relative_interference_term", mean_n / g));
    }
    if let Some(det) = &config.detector {
        out.push(num(
            "effective_contrast_factor",
            effective_contrast(&vec![length; geometry.dims()], det, geometry.speed)?,
        ));
        // every axis the detector records: x, y and, after a fall, arrival time
        let axes = if geometry.fall_time().is_some() { 3 } else { 2 };
        out.push(num(
            "effective_contrast_factor_all_axes",
            effective_contrast(&vec![length; axes], det, geometry.speed)?,
        ));
    }
    Ok(out)
}

fn num(key: &str, value: f64) -> (String, String) {
    (key.to_string(), format!("{value:e}"))
}

pub fn format_predictions(rows: &[(String, String)]) -> String {
    rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// One trace of the three-source comparison.
#[derive(Debug, Clone)]
pub struct Trace {
    pub statistics: Statistics,
    pub config: RunConfig,
    pub events: EventList,
    pub analysis: Analysis,
}

/// Chaotic bosons, a coherent source and fermions under one geometry and
/// detector, analyzed with identical bins. Massive species take the boson
/// and fermion masses of the configuration (the coherent source shares the
/// boson mass).
pub fn figure2(config: &RunConfig) -> Result<Vec<Trace>> {
    let variant = |stats: Statistics| -> Result<RunConfig> {
        let mut c = config.with("source.statistics", stats.name())?;
        if let Species::Mass(_) = config.source.species {
            let mass = match stats {
                Statistics::Fermion => config.fermion_mass,
                _ => config.boson_mass,
            };
            c = c.with("source.mass", format!("{mass:e}"))?;
        }
        let tag = match stats {
            Statistics::ChaoticBoson => 1,
            Statistics::Coherent => 2,
            Statistics::Fermion => 3,
        };
        c.with("run.seed", seed::splitmix64(config.run.seed ^ seed::splitmix64(tag)))
    };
    let boson = variant(Statistics::ChaoticBoson)?;
    let plan = plan_analysis(&boson, boson.detector.is_some())?;
    let mut traces = Vec::with_capacity(3);
    for stats in Statistics::ALL {
        let c = variant(stats)?;
        let events = simulate(&c)?;
        let mut trace_plan = plan.clone();
        trace_plan.predicted_length = predicted_length(&c)?;
        let analysis = with_threads(c.run.threads, || analyze_with_plan(&events, &trace_plan, c.run.seed))??;
        traces.push(Trace {
            statistics: stats,
            config: c,
            events,
            analysis,
        });
    }
    Ok(traces)
}
