//! Microchannel-plate detector: circular aperture, detection efficiency and
//! box quantization of position and arrival time.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::EventRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// plate diameter (m)
    pub diameter: f64,
    /// transverse pixel pitch (m)
    pub spatial_resolution: f64,
    /// timing bin (s)
    pub time_resolution: f64,
    pub efficiency: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            diameter: 0.085,
            spatial_resolution: 5e-4,
            time_resolution: 1e-9,
            efficiency: 1.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("diameter", self.diameter),
            ("spatial resolution", self.spatial_resolution),
            ("time resolution", self.time_resolution),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("detector {name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::domain(format!(
                "detector efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        Ok(())
    }
}

/// Center of the box of width `pitch` containing `value`.
pub fn quantize(value: f64, pitch: f64) -> f64 {
    ((value / pitch).floor() + 0.5) * pitch
}

/// Aperture clipping, then efficiency thinning, then quantization of x, y,
/// t (and z when present) to bin centers.
pub fn detect<R: Rng + ?Sized>(events: &[EventRecord], model: &DetectorModel, rng: &mut R) -> Vec<EventRecord> {
    let radius = 0.5 * model.diameter;
    let p = model.spatial_resolution;
    events
        .iter()
        .filter(|e| e.transverse_radius() <= radius)
        .filter(|_| model.efficiency >= 1.0 || rng.random::<f64>() < model.efficiency)
        .map(|e| EventRecord {
            shot_id: e.shot_id,
            t: quantize(e.t, model.time_resolution),
            x: quantize(e.x, p),
            y: quantize(e.y, p),
            z: e.z.map(|z| quantize(z, p)),
        })
        .collect()
}

/// Pixel pitch along each analysis axis: the spatial resolution for the
/// transverse axes 0 and 1, and for the vertical axis 2 the time resolution
/// converted to length at `speed`. A zero speed means the vertical axis is
/// imaged directly with the spatial pitch (optical geometries).
pub fn axis_pitches(model: &DetectorModel, dims: usize, speed: f64) -> Vec<f64> {
    (0..dims)
        .map(|axis| {
            if axis < 2 || speed == 0.0 {
                model.spatial_resolution
            } else {
                model.time_resolution * speed
            }
        })
        .collect()
}

/// Peak of a unit-contrast Gaussian correlation `exp(-d^2/l^2)` after
/// convolution with the separation kernel of two box-quantized detections
/// (a triangle of half-width `pitch`), evaluated by composite Simpson
/// quadrature.
pub fn smeared_peak(length: f64, pitch: f64) -> f64 {
    const INTERVALS: usize = 4000;
    let h = pitch / INTERVALS as f64;
    let f = |u: f64| (1.0 - u / pitch) * (-(u * u) / (length * length)).exp();
    let mut sum = f(0.0) + f(pitch);
    for i in 1..INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    // symmetric triangle of unit area: 2 * int_0^p (1 - u/p) g(u) du / p
    2.0 * sum * h / 3.0 / pitch
}

/// Factor by which finite resolution reduces the contrast `g2(0) - 1`:
/// the inverse of the product of per-axis smeared peaks. Axes follow
/// [`axis_pitches`]: `lengths[0..2]` transverse, `lengths[2]` vertical with
/// timing converted at `speed`.
pub fn effective_contrast(lengths: &[f64], model: &DetectorModel, speed: f64) -> Result<f64> {
    if lengths.is_empty() || lengths.len() > 3 {
        return Err(Error::domain(
            "effective contrast needs one to three correlation lengths",
        ));
    }
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::domain(format!("correlation lengths must be > 0, got {l}")));
    }
    model.validate()?;
    if !(speed >= 0.0) {
        return Err(Error::domain(format!("arrival speed must be >= 0, got {speed}")));
    }
    let pitches = axis_pitches(model, lengths.len(), speed);
    let peak: f64 = lengths
        .iter()
        .zip(&pitches)
        .map(|(&l, &p)| smeared_peak(l, p))
        .product();
    Ok(1.0 / peak)
}
