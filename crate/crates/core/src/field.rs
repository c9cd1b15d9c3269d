//! Speckle fields from an extended source of independently phased point
//! emitters, propagated to the detector in the paraxial (quadratic phase)
//! approximation.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::physics::{Geometry, Grid};

pub const DEFAULT_EMITTERS: usize = 4096;

/// Point emitters drawn from a Gaussian source profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterEnsemble {
    pub dims: usize,
    pub positions: Vec<[f64; 3]>,
    pub phases: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl EmitterEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Builds an ensemble from explicit positions and phases with equal
    /// amplitudes normalized so that the mean intensity is one.
    pub fn from_parts(dims: usize, positions: Vec<[f64; 3]>, phases: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != phases.len() {
            return Err(Error::domain(
                "ensemble needs at least one emitter and one phase per emitter",
            ));
        }
        if !(1..=3).contains(&dims) {
            return Err(Error::domain(format!("ensemble dims must be 1..=3, got {dims}")));
        }
        let a = 1.0 / (positions.len() as f64).sqrt();
        let amplitudes = vec![a; positions.len()];
        Ok(Self {
            dims,
            positions,
            phases,
            amplitudes,
        })
    }

    /// rms spread of the positions along `axis` about the origin.
    pub fn rms(&self, axis: usize) -> f64 {
        let n = self.len() as f64;
        (self.positions.iter().map(|p| p[axis] * p[axis]).sum::<f64>() / n).sqrt()
    }

    /// Moves every emitter to the nearest site of a lattice of the given pitch.
    pub fn snapped_to_lattice(&self, pitch: &[f64]) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            for axis in 0..self.dims {
                p[axis] = (p[axis] / pitch[axis]).round() * pitch[axis];
            }
        }
        out
    }
}

/// Complex amplitude over the detector grid for one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub shot_id: u64,
}

impl FieldRealization {
    pub fn constant(grid: Grid, value: Complex64, shot_id: u64) -> Self {
        let values = vec![value; grid.len()];
        Self { grid, values, shot_id }
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn mean_intensity(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64
    }
}

/// Draws `count` emitters with Gaussian positions of rms `size` on each of
/// `dims` axes and uniform phases in [0, 2 pi).
pub fn draw_ensemble<R: Rng + ?Sized>(size: f64, dims: usize, count: usize, rng: &mut R) -> Result<EmitterEnsemble> {
    if count < 1 {
        return Err(Error::domain("emitter count must be at least 1"));
    }
    if !(size > 0.0) {
        return Err(Error::domain(format!("source size must be > 0, got {size}")));
    }
    let profile = Normal::new(0.0, size).map_err(|e| Error::domain(e.to_string()))?;
    let mut positions = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = [0.0; 3];
        for x in p.iter_mut().take(dims) {
            *x = profile.sample(rng);
        }
        positions.push(p);
    }
    let phases = (0..count).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    EmitterEnsemble::from_parts(dims, positions, phases)
}

/// Same emitters with fresh phases: the next coherence time of the source.
pub fn resample_phases<R: Rng + ?Sized>(ensemble: &EmitterEnsemble, rng: &mut R) -> EmitterEnsemble {
    let mut out = ensemble.clone();
    for phase in &mut out.phases {
        *phase = rng.random_range(0.0..2.0 * PI);
    }
    out
}

fn check_paraxial(geometry: &Geometry, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::domain(format!("wavelength must be > 0, got {wavelength}")));
    }
    let distance = geometry.distance();
    let extent = geometry.grid.max_extent();
    if extent >= 0.5 * distance {
        return Err(Error::Paraxial { extent, distance });
    }
    Ok(distance)
}

fn check_dims(ensemble: &EmitterEnsemble, geometry: &Geometry) -> Result<()> {
    if ensemble.dims != geometry.dims() {
        return Err(Error::Dimension {
            expected: geometry.dims(),
            found: ensemble.dims,
        });
    }
    Ok(())
}

/// Direct summation of every emitter's paraxial wave at every grid point:
/// `E(r) = sum_j a_j exp(i [phi_j + pi |r - r_j|^2 / (lambda L)])`.
///
/// The quadratic phase separates over axes, so each emitter costs one
/// complex exponential per axis coordinate plus one product per grid point.
pub fn synthesize_field(
    ensemble: &EmitterEnsemble,
    geometry: &Geometry,
    wavelength: f64,
    shot_id: u64,
) -> Result<FieldRealization> {
    let distance = check_paraxial(geometry, wavelength)?;
    check_dims(ensemble, geometry)?;
    let grid = &geometry.grid;
    let dims = grid.dims();
    let scale = PI / (wavelength * distance);
    let coords: Vec<Vec<f64>> = (0..dims).map(|a| grid.axis_coordinates(a)).collect();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut factors: Vec<Vec<Complex64>> = coords.iter().map(|c| vec![Complex64::default(); c.len()]).collect();

    for j in 0..ensemble.len() {
        let pos = ensemble.positions[j];
        let weight = Complex64::from_polar(ensemble.amplitudes[j], ensemble.phases[j]);
        for axis in 0..dims {
            for (f, &x) in factors[axis].iter_mut().zip(&coords[axis]) {
                let d = x - pos[axis];
                *f = Complex64::cis(scale * d * d);
            }
        }
        match dims {
            1 => {
                for (v, f) in values.iter_mut().zip(&factors[0]) {
                    *v += weight * f;
                }
            }
            2 => {
                let ny = factors[1].len();
                for (ix, fx) in factors[0].iter().enumerate() {
                    let wx = weight * fx;
                    let row = &mut values[ix * ny..(ix + 1) * ny];
                    for (v, fy) in row.iter_mut().zip(&factors[1]) {
                        *v += wx * fy;
                    }
                }
            }
            _ => {
                let (ny, nz) = (factors[1].len(), factors[2].len());
                for (ix, fx) in factors[0].iter().enumerate() {
                    let wx = weight * fx;
                    for (iy, fy) in factors[1].iter().enumerate() {
                        let wxy = wx * fy;
                        let base = (ix * ny + iy) * nz;
                        for (v, fz) in values[base..base + nz].iter_mut().zip(&factors[2]) {
                            *v += wxy * fz;
                        }
                    }
                }
            }
        }
    }
    Ok(FieldRealization {
        grid: grid.clone(),
        values,
        shot_id,
    })
}

/// Source-plane lattice pitch conjugate to the detector grid,
/// `lambda L / (N dx)` per axis. Emitters on this lattice make the far-field
/// sum an exact discrete Fourier transform.
pub fn conjugate_lattice_pitch(geometry: &Geometry, wavelength: f64) -> Vec<f64> {
    let grid = &geometry.grid;
    (0..grid.dims())
        .map(|a| wavelength * geometry.distance() / grid.extent[a])
        .collect()
}

/// Fast path: expands the quadratic phase into a chirp times a discrete
/// Fourier transform. Requires every emitter to sit on the conjugate lattice
/// (see [`conjugate_lattice_pitch`]); agrees with [`synthesize_field`] to
/// rounding for such ensembles.
pub fn synthesize_field_fft(
    ensemble: &EmitterEnsemble,
    geometry: &Geometry,
    wavelength: f64,
    shot_id: u64,
) -> Result<FieldRealization> {
    let distance = check_paraxial(geometry, wavelength)?;
    check_dims(ensemble, geometry)?;
    let grid = &geometry.grid;
    let dims = grid.dims();
    let pitch = conjugate_lattice_pitch(geometry, wavelength);
    let scale = PI / (wavelength * distance);
    let n = &grid.points;
    let origin: Vec<f64> = (0..dims).map(|a| grid.coordinate(a, 0)).collect();

    // bin every emitter's source-side factor onto the periodic lattice
    let mut spectrum = vec![Complex64::new(0.0, 0.0); grid.len()];
    for j in 0..ensemble.len() {
        let pos = ensemble.positions[j];
        let mut phase = ensemble.phases[j];
        let mut flat = 0usize;
        for axis in 0..dims {
            let site = pos[axis] / pitch[axis];
            let m = site.round();
            if (site - m).abs() > 1e-6 {
                return Err(Error::domain(format!(
                    "emitter {j} is off the conjugate lattice on axis {axis}"
                )));
            }
            let idx = (m as i64).rem_euclid(n[axis] as i64) as usize;
            flat = flat * n[axis] + idx;
            let x = pos[axis];
            phase += scale * x * x - 2.0 * scale * origin[axis] * x;
        }
        spectrum[flat] += Complex64::from_polar(ensemble.amplitudes[j], phase);
    }

    let mut planner = FftPlanner::new();
    for axis in 0..dims {
        let fft = planner.plan_fft_forward(n[axis]);
        transform_axis(&mut spectrum, n, axis, &fft);
    }

    // detector-side chirp
    let mut values = spectrum;
    for (flat, v) in values.iter_mut().enumerate() {
        let r = grid.center(flat);
        let chirp: f64 = (0..dims).map(|a| scale * r[a] * r[a]).sum();
        *v *= Complex64::cis(chirp);
    }
    Ok(FieldRealization {
        grid: grid.clone(),
        values,
        shot_id,
    })
}

fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, fft: &Arc<dyn rustfft::Fft<f64>>) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::default(); len];
    for o in 0..outer {
        for s in 0..stride {
            let base = o * len * stride + s;
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[base + k * stride];
            }
            fft.process(&mut line);
            for (k, v) in line.iter().enumerate() {
                data[base + k * stride] = *v;
            }
        }
    }
}

/// Normalized intensity autocorrelation `C(d) = <I(r) I(r+d)> / <I>^2`
/// along the first grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityAutocorrelation {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

impl IntensityAutocorrelation {
    /// Lag at which `C - 1` first falls to `1/e` of its zero-lag value,
    /// interpolated linearly. For `C = 1 + exp(-d^2/l^2)` this is `l`.
    pub fn e_folding_length(&self) -> Option<f64> {
        let peak = self.values.first()? - 1.0;
        if !(peak > 0.0) {
            return None;
        }
        let target = peak / std::f64::consts::E;
        for k in 1..self.values.len() {
            let (a, b) = (self.values[k - 1] - 1.0, self.values[k] - 1.0);
            if b <= target {
                let frac = (a - target) / (a - b);
                return Some(self.lags[k - 1] + frac * (self.lags[k] - self.lags[k - 1]));
            }
        }
        None
    }
}

/// Averages `I(r) I(r + d)` over positions and fields for lags up to half the
/// first axis, normalized by the squared global mean intensity.
pub fn intensity_autocorrelation(fields: &[FieldRealization]) -> Result<IntensityAutocorrelation> {
    let first = fields
        .first()
        .ok_or_else(|| Error::domain("autocorrelation needs at least one field"))?;
    let grid = &first.grid;
    if fields.iter().any(|f| f.grid != *grid) {
        return Err(Error::domain("all fields must share one grid"));
    }
    let n0 = grid.points[0];
    let stride = grid.len() / n0;
    let max_lag = (n0 / 2).max(1);
    let mut sums = vec![0.0; max_lag];
    let mut counts = vec![0usize; max_lag];
    let mut total = 0.0;
    for field in fields {
        let intensity = field.intensity();
        total += intensity.iter().sum::<f64>();
        for lag in 0..max_lag {
            for i in 0..n0 - lag {
                let a = &intensity[i * stride..(i + 1) * stride];
                let b = &intensity[(i + lag) * stride..(i + lag + 1) * stride];
                sums[lag] += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
            counts[lag] += (n0 - lag) * stride;
        }
    }
    let mean = total / (fields.len() * grid.len()) as f64;
    if !(mean > 0.0) {
        return Err(Error::domain("fields carry no intensity"));
    }
    let dx = grid.cell_size(0);
    Ok(IntensityAutocorrelation {
        lags: (0..max_lag).map(|k| k as f64 * dx).collect(),
        values: sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64 / (mean * mean))
            .collect(),
    })
}
