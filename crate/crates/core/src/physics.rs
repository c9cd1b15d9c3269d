//! Physical constants, source and geometry descriptions, and the closed-form
//! predictions every simulation is checked against.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const PLANCK: f64 = 6.62607e-34;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Planck's constant and gravitational acceleration. Both may be replaced
/// (for instance `h = 1` for reduced units); all formulas are unit-agnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub h: f64,
    pub g_grav: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            h: PLANCK,
            g_grav: STANDARD_GRAVITY,
        }
    }
}

impl PhysicalConstants {
    pub fn new(h: f64, g_grav: f64) -> Result<Self> {
        positive("h", h)?;
        positive("g_grav", g_grav)?;
        Ok(Self { h, g_grav })
    }

    pub fn reduced() -> Self {
        Self { h: 1.0, g_grav: 1.0 }
    }
}

/// Quantum statistics of the detected particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistics {
    ChaoticBoson,
    Coherent,
    Fermion,
}

impl Statistics {
    pub const ALL: [Statistics; 3] = [Statistics::ChaoticBoson, Statistics::Coherent, Statistics::Fermion];

    pub fn name(self) -> &'static str {
        match self {
            Statistics::ChaoticBoson => "chaotic_boson",
            Statistics::Coherent => "coherent",
            Statistics::Fermion => "fermion",
        }
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chaotic_boson" | "boson" => Ok(Statistics::ChaoticBoson),
            "coherent" => Ok(Statistics::Coherent),
            "fermion" => Ok(Statistics::Fermion),
            other => Err(Error::Config(format!("unknown statistics '{other}'"))),
        }
    }
}

/// Optical sources are described by their wavelength, matter-wave sources
/// by the particle mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Species {
    Mass(f64),
    Wavelength(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub statistics: Statistics,
    /// rms size of the emitting region (m)
    pub size: f64,
    pub species: Species,
    /// expected detections per shot
    pub mean_count: f64,
    /// multiplies the thermal kernel width; 1 reproduces the speckle law
    pub temperature_scale: Option<f64>,
}

impl SourceModel {
    pub fn new(statistics: Statistics, size: f64, species: Species, mean_count: f64) -> Result<Self> {
        let source = Self {
            statistics,
            size,
            species,
            mean_count,
            temperature_scale: None,
        };
        source.validate()?;
        Ok(source)
    }

    pub fn validate(&self) -> Result<()> {
        positive("source size", self.size)?;
        match self.species {
            Species::Mass(m) => positive("mass", m)?,
            Species::Wavelength(l) => positive("wavelength", l)?,
        }
        if !(self.mean_count >= 0.0) || !self.mean_count.is_finite() {
            return Err(Error::domain(format!(
                "mean count must be finite and >= 0, got {}",
                self.mean_count
            )));
        }
        if let Some(scale) = self.temperature_scale {
            positive("temperature scale", scale)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropagationMode {
    /// free propagation over a distance L (m)
    Optical { distance: f64 },
    /// free fall for a time t (s) from a height H (m)
    TimeOfFlight { fall_time: f64, height: f64 },
}

/// Regular grid of cell centers over the detector plane (or volume),
/// centered on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
}

impl Grid {
    pub fn new(extent: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        if extent.is_empty() || extent.len() > 3 || extent.len() != points.len() {
            return Err(Error::domain(format!(
                "grid needs 1 to 3 axes with one extent and one point count each, got {} and {}",
                extent.len(),
                points.len()
            )));
        }
        for &e in &extent {
            positive("grid extent", e)?;
        }
        if points.contains(&0) {
            return Err(Error::domain("grid point counts must be positive"));
        }
        Ok(Self { extent, points })
    }

    pub fn uniform(dims: usize, extent: f64, points: usize) -> Result<Self> {
        Self::new(vec![extent; dims], vec![points; dims])
    }

    pub fn dims(&self) -> usize {
        self.extent.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        self.extent[axis] / self.points[axis] as f64
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.dims()).map(|a| self.cell_size(a)).product()
    }

    /// Coordinate of the center of cell `index` along `axis`.
    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        -0.5 * self.extent[axis] + (index as f64 + 0.5) * self.cell_size(axis)
    }

    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.coordinate(axis, i)).collect()
    }

    /// Splits a flat (row-major, last axis fastest) index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for axis in (0..self.dims()).rev() {
            idx[axis] = flat % self.points[axis];
            flat /= self.points[axis];
        }
        idx
    }

    pub fn center(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut r = [0.0; 3];
        for axis in 0..self.dims() {
            r[axis] = self.coordinate(axis, idx[axis]);
        }
        r
    }

    pub fn max_extent(&self) -> f64 {
        self.extent.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub mode: PropagationMode,
    /// mean arrival speed (m/s); g_grav * t in time-of-flight mode
    pub speed: f64,
    pub grid: Grid,
}

impl Geometry {
    pub fn optical(distance: f64, grid: Grid) -> Result<Self> {
        positive("propagation distance", distance)?;
        Ok(Self {
            mode: PropagationMode::Optical { distance },
            speed: 0.0,
            grid,
        })
    }

    /// Free fall from rest for `fall_time`; the height and the arrival speed
    /// follow from the gravitational acceleration.
    pub fn time_of_flight(fall_time: f64, constants: &PhysicalConstants, grid: Grid) -> Result<Self> {
        positive("fall time", fall_time)?;
        Ok(Self {
            mode: PropagationMode::TimeOfFlight {
                fall_time,
                height: 0.5 * constants.g_grav * fall_time * fall_time,
            },
            speed: constants.g_grav * fall_time,
            grid,
        })
    }

    pub fn time_of_flight_from_height(height: f64, constants: &PhysicalConstants, grid: Grid) -> Result<Self> {
        positive("fall height", height)?;
        Self::time_of_flight((2.0 * height / constants.g_grav).sqrt(), constants, grid)
    }

    pub fn dims(&self) -> usize {
        self.grid.dims()
    }

    /// Effective propagation distance: L, or v t after a fall.
    pub fn distance(&self) -> f64 {
        match self.mode {
            PropagationMode::Optical { distance } => distance,
            PropagationMode::TimeOfFlight { fall_time, .. } => self.speed * fall_time,
        }
    }

    pub fn fall_time(&self) -> Option<f64> {
        match self.mode {
            PropagationMode::TimeOfFlight { fall_time, .. } => Some(fall_time),
            PropagationMode::Optical { .. } => None,
        }
    }

    /// Wavelength relevant to propagation: the optical wavelength, or the
    /// de Broglie wavelength at the arrival speed.
    pub fn wavelength(&self, source: &SourceModel, constants: &PhysicalConstants) -> Result<f64> {
        match (source.species, self.mode) {
            (Species::Wavelength(l), _) => Ok(l),
            (Species::Mass(m), PropagationMode::TimeOfFlight { .. }) => {
                de_broglie_wavelength(m, self.speed, constants.h)
            }
            (Species::Mass(_), PropagationMode::Optical { .. }) => Err(Error::Unsupported(
                "a massive source needs a time-of-flight geometry".into(),
            )),
        }
    }

    /// Predicted correlation length of the source seen through this geometry.
    pub fn correlation_length(&self, source: &SourceModel, constants: &PhysicalConstants) -> Result<f64> {
        match (source.species, self.mode) {
            (Species::Mass(m), PropagationMode::TimeOfFlight { fall_time, .. }) => {
                correlation_length_matter(fall_time, m, source.size, constants.h)
            }
            _ => correlation_length_optical(self.wavelength(source, constants)?, self.distance(), source.size),
        }
    }
}

/// Number of phase-space cells, `g` in Einstein's fluctuation formula.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PhaseSpaceCellCount(pub f64);

impl PhaseSpaceCellCount {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Fewer than one cell is allowed but is not a physical gas.
    pub fn is_physical(self) -> bool {
        self.0 >= 1.0
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

/// Variance of the particle number in a subvolume holding `mean_n` particles
/// spread over `g_cells` phase-space cells. The interference term enters with
/// a plus sign for chaotic bosons, a minus sign for fermions, and vanishes for
/// a coherent source.
pub fn einstein_variance(mean_n: f64, g_cells: f64, statistics: Statistics) -> Result<f64> {
    if !(mean_n >= 0.0) || !mean_n.is_finite() {
        return Err(Error::domain(format!(
            "mean count must be finite and >= 0, got {mean_n}"
        )));
    }
    if !(g_cells > 0.0) {
        return Err(Error::domain(format!("cell count must be > 0, got {g_cells}")));
    }
    let interference = mean_n * mean_n / g_cells;
    Ok(match statistics {
        Statistics::ChaoticBoson => mean_n + interference,
        Statistics::Coherent => mean_n,
        Statistics::Fermion => {
            if mean_n > g_cells {
                return Err(Error::Occupancy {
                    mean: mean_n,
                    capacity: g_cells,
                });
            }
            (mean_n - interference).max(0.0)
        }
    })
}

/// Phase-space volume in units of `h` per degree of freedom:
/// the product over axes of `dx * dp / h`.
pub fn phase_space_cells(dx: &[f64], dp: &[f64], h: f64) -> Result<PhaseSpaceCellCount> {
    if dx.is_empty() || dx.len() != dp.len() {
        return Err(Error::domain(
            "phase_space_cells needs matching non-empty per-axis spreads",
        ));
    }
    positive("h", h)?;
    let mut cells = 1.0;
    for (&x, &p) in dx.iter().zip(dp) {
        positive("position spread", x)?;
        positive("momentum spread", p)?;
        cells *= x * p / h;
    }
    Ok(PhaseSpaceCellCount(cells))
}

/// Isotropic shorthand: the same spreads on each of `dims` axes.
pub fn phase_space_cells_isotropic(dx: f64, dp: f64, h: f64, dims: usize) -> Result<PhaseSpaceCellCount> {
    phase_space_cells(&vec![dx; dims], &vec![dp; dims], h)
}

/// Speckle grain size `lambda L / (2 pi s)`.
pub fn correlation_length_optical(wavelength: f64, distance: f64, size: f64) -> Result<f64> {
    positive("wavelength", wavelength)?;
    positive("distance", distance)?;
    positive("source size", size)?;
    Ok(wavelength * distance / (2.0 * PI * size))
}

/// Correlation length `h t / (2 pi m s)` of a freely expanded cloud.
pub fn correlation_length_matter(fall_time: f64, mass: f64, size: f64, h: f64) -> Result<f64> {
    if !(fall_time >= 0.0) {
        return Err(Error::domain(format!("fall time must be >= 0, got {fall_time}")));
    }
    positive("mass", mass)?;
    positive("source size", size)?;
    positive("h", h)?;
    Ok(h * fall_time / (2.0 * PI * mass * size))
}

pub fn de_broglie_wavelength(mass: f64, speed: f64, h: f64) -> Result<f64> {
    positive("mass", mass)?;
    positive("speed", speed)?;
    positive("h", h)?;
    Ok(h / (mass * speed))
}
