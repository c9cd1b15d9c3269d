//! Detection events drawn from the three source statistics.
//!
//! * chaotic bosons: a Cox process, Poisson events whose rate follows the
//!   speckle intensity of the shot
//! * coherent sources: Poisson events on a fixed density profile
//! * fermions: a determinantal point process with a Gaussian thermal kernel

mod dpp;
mod poisson;
mod tof;

pub use dpp::{build_thermal_kernel, sample_fermion_cells, sample_fermion_events, ThermalKernel};
pub use poisson::{sample_boson_events, sample_coherent_events};
pub use tof::{time_of_flight_positions, to_arrival_times};

use rand::Rng;

use crate::error::{Error, Result};
use crate::physics::Grid;

/// One detected (or, before the detector stage, emitted) particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub shot_id: u64,
    /// arrival time (s)
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// vertical position, present for three-dimensional data
    pub z: Option<f64>,
}

impl EventRecord {
    pub fn new(shot_id: u64, t: f64, position: [f64; 3], dims: usize) -> Self {
        Self {
            shot_id,
            t,
            x: position[0],
            y: if dims > 1 { position[1] } else { 0.0 },
            z: if dims > 2 { Some(position[2]) } else { None },
        }
    }

    /// Coordinate along analysis axis `axis` (0 = x, 1 = y, 2 = z).
    pub fn coordinate(&self, axis: usize) -> Option<f64> {
        match axis {
            0 => Some(self.x),
            1 => Some(self.y),
            2 => self.z,
            _ => None,
        }
    }

    pub fn transverse_radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Events of a whole run together with the bookkeeping the estimators need:
/// the number of shots (including those without any event) and the spatial
/// dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    pub dims: usize,
    pub shots: u64,
    pub quantized: bool,
    pub events: Vec<EventRecord>,
}

impl EventList {
    pub fn new(dims: usize, shots: u64) -> Self {
        Self {
            dims,
            shots,
            quantized: false,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Per-shot event counts, zero for shots without events.
    pub fn counts_per_shot(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.shots as usize];
        for e in &self.events {
            if let Some(c) = counts.get_mut(e.shot_id as usize) {
                *c += 1;
            }
        }
        counts
    }

    /// Events grouped by shot, in shot order. Assumes events are sorted by
    /// shot, as every producer in this crate emits them.
    pub fn by_shot(&self) -> impl Iterator<Item = &[EventRecord]> {
        self.events.chunk_by(|a, b| a.shot_id == b.shot_id)
    }

    pub fn check_dims(&self, expected: usize) -> Result<()> {
        if self.dims != expected {
            return Err(Error::Dimension {
                expected,
                found: self.dims,
            });
        }
        Ok(())
    }
}

/// Relative density of the source envelope over the detector grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DensityProfile {
    #[default]
    Uniform,
    /// isotropic Gaussian envelope of the given rms width (m), centered on the grid
    Gaussian { rms: f64 },
}

impl DensityProfile {
    /// Density per unit volume at each grid cell center, normalized so that
    /// the cell-weighted sum is one.
    pub fn density(&self, grid: &Grid) -> Result<Vec<f64>> {
        let raw: Vec<f64> = match *self {
            DensityProfile::Uniform => vec![1.0; grid.len()],
            DensityProfile::Gaussian { rms } => {
                if !(rms > 0.0) {
                    return Err(Error::domain(format!("profile rms must be > 0, got {rms}")));
                }
                (0..grid.len())
                    .map(|i| {
                        let r = grid.center(i);
                        let r2: f64 = r.iter().map(|x| x * x).sum();
                        (-r2 / (2.0 * rms * rms)).exp()
                    })
                    .collect()
            }
        };
        let norm = raw.iter().sum::<f64>() * grid.cell_measure();
        Ok(raw.into_iter().map(|d| d / norm).collect())
    }
}

/// Uniform position inside grid cell `cell`.
pub(crate) fn jitter_in_cell<R: Rng + ?Sized>(grid: &Grid, cell: usize, rng: &mut R) -> [f64; 3] {
    let center = grid.center(cell);
    let mut p = [0.0; 3];
    for axis in 0..grid.dims() {
        let w = grid.cell_size(axis);
        p[axis] = center[axis] + w * (rng.random::<f64>() - 0.5);
    }
    p
}
