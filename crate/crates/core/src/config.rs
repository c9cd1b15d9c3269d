//! Flat, line-oriented run configuration: `section.key = value` per line,
//! `#` starts a comment. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::estimators::Subvolume;
use crate::physics::{Geometry, Grid, PhysicalConstants, SourceModel, Species, Statistics};
use crate::sampling::DensityProfile;

pub const HELIUM4_MASS: f64 = 6.646_477e-27;
pub const HELIUM3_MASS: f64 = 5.008_234e-27;

const KEYS: &[&str] = &[
    "constants.h",
    "constants.g",
    "source.statistics",
    "source.size",
    "source.mass",
    "source.wavelength",
    "source.mean_count",
    "source.temperature_scale",
    "source.emitters",
    "source.profile_rms",
    "geometry.mode",
    "geometry.distance",
    "geometry.fall_time",
    "geometry.fall_height",
    "geometry.dims",
    "geometry.extent",
    "geometry.points",
    "detector.ideal",
    "detector.diameter",
    "detector.spatial_resolution",
    "detector.time_resolution",
    "detector.efficiency",
    "estimator.bin_width",
    "estimator.max_separation",
    "estimator.mixing_pairs",
    "estimator.radius_cap",
    "estimator.subvolume",
    "cells.dx",
    "cells.dp",
    "cells.g",
    "cells.mean_n",
    "figure2.boson_mass",
    "figure2.fermion_mass",
    "run.seed",
    "run.shots",
    "run.output",
    "run.threads",
];

const EXECUTION_KEYS: &[&str] = &["run.output", "run.threads"];

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSection {
    pub statistics: Statistics,
    pub size: f64,
    pub species: Species,
    pub mean_count: f64,
    pub temperature_scale: Option<f64>,
    pub emitters: usize,
    pub profile: DensityProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeSpec {
    Optical { distance: f64 },
    TimeOfFlight { fall_time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySection {
    pub mode: ModeSpec,
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorSection {
    pub bin_width: Option<f64>,
    pub max_separation: Option<f64>,
    pub mixing_pairs: Option<u64>,
    pub radius_cap: Option<f64>,
    pub subvolume: Option<Subvolume>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellsSection {
    pub dx: Option<Vec<f64>>,
    pub dp: Option<Vec<f64>>,
    pub g: Option<f64>,
    pub mean_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub shots: u64,
    pub output: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub constants: PhysicalConstants,
    pub source: SourceSection,
    pub geometry: GeometrySection,
    /// `None` for an ideal detector
    pub detector: Option<DetectorModel>,
    pub estimator: EstimatorSection,
    pub cells: CellsSection,
    pub boson_mass: f64,
    pub fermion_mass: f64,
    pub run: RunSection,
    entries: BTreeMap<String, String>,
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{raw}'"))),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key {key}")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: cannot parse '{raw}'")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

/// Broadcasts a one-element list to `dims` axes.
fn per_axis<T: Clone>(key: &str, values: Vec<T>, dims: usize) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); dims]),
        n if n == dims => Ok(values),
        n => Err(Error::Config(format!("{key}: expected 1 or {dims} values, got {n}"))),
    }
}

fn parse_subvolume(raw: &str, dims: usize) -> Result<Subvolume> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in raw.split(',') {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("estimator.subvolume: '{part}' is not lo:hi")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("estimator.subvolume: cannot parse '{s}'")))
        };
        lo.push(parse(a)?);
        hi.push(parse(b)?);
    }
    let lo = per_axis("estimator.subvolume", lo, dims)?;
    let hi = per_axis("estimator.subvolume", hi, dims)?;
    Subvolume::new(lo, hi).map_err(|e| Error::Config(e.to_string()))
}

pub fn format_subvolume(sub: &Subvolume) -> String {
    sub.lo
        .iter()
        .zip(&sub.hi)
        .map(|(a, b)| format!("{a:e}:{b:e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Splits config text into key/value pairs, rejecting malformed lines,
/// unknown keys and duplicates.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'section.key = value'", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key '{key}'", n + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(map)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(parse_entries(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_entries(map: BTreeMap<String, String>) -> Result<Self> {
        let e = Entries { map };
        let defaults = PhysicalConstants::default();
        let constants = PhysicalConstants::new(
            e.get("constants.h")?.unwrap_or(defaults.h),
            e.get("constants.g")?.unwrap_or(defaults.g_grav),
        )
        .map_err(|err| Error::Config(err.to_string()))?;

        let statistics: Statistics = e
            .get::<String>("source.statistics")?
            .as_deref()
            .unwrap_or("chaotic_boson")
            .parse()?;
        let species = match (e.get::<f64>("source.mass")?, e.get::<f64>("source.wavelength")?) {
            (Some(m), None) => Species::Mass(m),
            (None, Some(l)) => Species::Wavelength(l),
            (None, None) => Species::Mass(HELIUM4_MASS),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set exactly one of source.mass and source.wavelength".into(),
                ))
            }
        };
        let profile = match e.get::<f64>("source.profile_rms")? {
            Some(rms) => DensityProfile::Gaussian { rms },
            None => DensityProfile::Uniform,
        };
        let source = SourceSection {
            statistics,
            size: e.require("source.size")?,
            species,
            mean_count: e.get("source.mean_count")?.unwrap_or(20.0),
            temperature_scale: e.get("source.temperature_scale")?,
            emitters: e.get("source.emitters")?.unwrap_or(crate::field::DEFAULT_EMITTERS),
            profile,
        };

        let mode_name: String = e.get("geometry.mode")?.unwrap_or_else(|| "time_of_flight".to_string());
        let mode = match mode_name.as_str() {
            "optical" => ModeSpec::Optical {
                distance: e.require("geometry.distance")?,
            },
            "time_of_flight" => {
                let fall_time = match (
                    e.get::<f64>("geometry.fall_time")?,
                    e.get::<f64>("geometry.fall_height")?,
                ) {
                    (Some(t), None) => t,
                    (None, Some(h)) if h > 0.0 => (2.0 * h / constants.g_grav).sqrt(),
                    (None, Some(h)) => return Err(Error::Config(format!("geometry.fall_height must be > 0, got {h}"))),
                    _ => {
                        return Err(Error::Config(
                            "time_of_flight needs exactly one of geometry.fall_time and geometry.fall_height".into(),
                        ))
                    }
                };
                ModeSpec::TimeOfFlight { fall_time }
            }
            other => return Err(Error::Config(format!("geometry.mode: unknown mode '{other}'"))),
        };
        let dims: usize = e.get("geometry.dims")?.unwrap_or(1);
        if !(1..=3).contains(&dims) {
            return Err(Error::Config(format!("geometry.dims must be 1, 2 or 3, got {dims}")));
        }
        let geometry = GeometrySection {
            mode,
            extent: per_axis(
                "geometry.extent",
                e.list("geometry.extent")?
                    .ok_or_else(|| Error::Config("missing required key geometry.extent".into()))?,
                dims,
            )?,
            points: per_axis(
                "geometry.points",
                e.list("geometry.points")?
                    .ok_or_else(|| Error::Config("missing required key geometry.points".into()))?,
                dims,
            )?,
        };

        let detector = if e.get::<bool>("detector.ideal")?.unwrap_or(true) {
            None
        } else {
            let d = DetectorModel::default();
            Some(DetectorModel {
                diameter: e.get("detector.diameter")?.unwrap_or(d.diameter),
                spatial_resolution: e.get("detector.spatial_resolution")?.unwrap_or(d.spatial_resolution),
                time_resolution: e.get("detector.time_resolution")?.unwrap_or(d.time_resolution),
                efficiency: e.get("detector.efficiency")?.unwrap_or(d.efficiency),
            })
        };

        let estimator = EstimatorSection {
            bin_width: e.get("estimator.bin_width")?,
            max_separation: e.get("estimator.max_separation")?,
            mixing_pairs: e.get("estimator.mixing_pairs")?,
            radius_cap: e.get("estimator.radius_cap")?,
            subvolume: e
                .map
                .get("estimator.subvolume")
                .map(|raw| parse_subvolume(raw, dims))
                .transpose()?,
        };
        let cells = CellsSection {
            dx: e.list("cells.dx")?,
            dp: e.list("cells.dp")?,
            g: e.get("cells.g")?,
            mean_n: e.get("cells.mean_n")?,
        };
        let run = RunSection {
            seed: e.get("run.seed")?.unwrap_or(0),
            shots: e.get("run.shots")?.unwrap_or(1000),
            output: e
                .get::<String>("run.output")?
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            threads: e.get("run.threads")?,
        };
        let config = Self {
            constants,
            source,
            geometry,
            detector,
            estimator,
            cells,
            boson_mass: e.get("figure2.boson_mass")?.unwrap_or(HELIUM4_MASS),
            fermion_mass: e.get("figure2.fermion_mass")?.unwrap_or(HELIUM3_MASS),
            run,
            entries: e.map,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks every module-level invariant the run will rely on.
    pub fn validate(&self) -> Result<()> {
        let source = self.source_model()?;
        let geometry = self.geometry()?;
        geometry.wavelength(&source, &self.constants)?;
        if let Some(d) = &self.detector {
            d.validate()?;
        }
        if self.source.emitters == 0 {
            return Err(Error::Config("source.emitters must be at least 1".into()));
        }
        if !(self.boson_mass > 0.0 && self.fermion_mass > 0.0) {
            return Err(Error::Config("figure2 masses must be > 0".into()));
        }
        if let Some(w) = self.estimator.bin_width {
            if !(w > 0.0) {
                return Err(Error::Config(format!("estimator.bin_width must be > 0, got {w}")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.geometry.extent.len()
    }

    pub fn source_model(&self) -> Result<SourceModel> {
        let mut s = SourceModel::new(
            self.source.statistics,
            self.source.size,
            self.source.species,
            self.source.mean_count,
        )?;
        s.temperature_scale = self.source.temperature_scale;
        s.validate()?;
        Ok(s)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let grid = Grid::new(self.geometry.extent.clone(), self.geometry.points.clone())?;
        match self.geometry.mode {
            ModeSpec::Optical { distance } => Geometry::optical(distance, grid),
            ModeSpec::TimeOfFlight { fall_time } => Geometry::time_of_flight(fall_time, &self.constants, grid),
        }
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Replaces one entry and re-validates.
    pub fn with(&self, key: &str, value: impl ToString) -> Result<Self> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        let mut map = self.entries.clone();
        map.insert(key.to_string(), value.to_string());
        Self::from_entries(map)
    }

    pub fn without(&self, key: &str) -> Result<Self> {
        let mut map = self.entries.clone();
        map.remove(key);
        Self::from_entries(map)
    }

    /// Canonical text form, one sorted `key = value` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Entries that can change results, each line prefixed for embedding in
    /// an output header. The output path and thread count are left out so
    /// that headers match across runs.
    pub fn header_lines(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !EXECUTION_KEYS.contains(&k.as_str()))
            .map(|(k, v)| format!("# config {k} = {v}\n"))
            .collect()
    }
}
