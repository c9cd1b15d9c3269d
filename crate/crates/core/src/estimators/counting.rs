use crate::error::{Error, Result};
use crate::sampling::EventList;

/// Axis-aligned box `[lo, hi)` on each data axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subvolume {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Subvolume {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::domain("subvolume needs lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    /// Centered cube of side `width` in `dims` dimensions.
    pub fn centered(dims: usize, width: f64) -> Result<Self> {
        Self::new(vec![-0.5 * width; dims], vec![0.5 * width; dims])
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Sign of the measured excess `variance - mean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcessSign {
    /// super-Poissonian, bosonic sign
    Bunched,
    /// sub-Poissonian, fermionic sign
    Antibunched,
    /// excess within its own standard error
    Undefined,
}

impl ExcessSign {
    pub fn name(self) -> &'static str {
        match self {
            ExcessSign::Bunched => "bunched",
            ExcessSign::Antibunched => "antibunched",
            ExcessSign::Undefined => "undefined",
        }
    }
}

/// Per-shot counts in a subvolume and the number of phase-space cells
/// implied by inverting the fluctuation formula `var = n +/- n^2 / g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingStats {
    pub subvolume: Subvolume,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// unbiased sample variance
    pub variance: f64,
    pub mean_sigma: f64,
    pub variance_sigma: f64,
    /// standard error of `variance - mean`
    pub excess_sigma: f64,
    pub sign: ExcessSign,
    /// `mean^2 / |variance - mean|`, absent when the sign is undefined
    pub g_inferred: Option<f64>,
}

impl CountingStats {
    pub fn excess(&self) -> f64 {
        self.variance - self.mean
    }
}

/// Moments of per-shot counts; shots without events count as zero.
pub fn counting_statistics(events: &EventList, subvolume: &Subvolume) -> Result<CountingStats> {
    if events.shots < 2 {
        return Err(Error::domain("counting statistics need at least two shots"));
    }
    if subvolume.dims() != events.dims {
        return Err(Error::Dimension {
            expected: events.dims,
            found: subvolume.dims(),
        });
    }
    let mut counts = vec![0u64; events.shots as usize];
    for e in &events.events {
        let inside = (0..events.dims).all(|axis| {
            e.coordinate(axis)
                .is_some_and(|x| x >= subvolume.lo[axis] && x < subvolume.hi[axis])
        });
        if inside {
            if let Some(c) = counts.get_mut(e.shot_id as usize) {
                *c += 1;
            }
        }
    }
    Ok(statistics_of_counts(subvolume.clone(), counts))
}

pub(crate) fn statistics_of_counts(subvolume: Subvolume, counts: Vec<u64>) -> CountingStats {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let dev2: Vec<f64> = counts.iter().map(|&c| (c as f64 - mean).powi(2)).collect();
    let variance = dev2.iter().sum::<f64>() / (n - 1.0);
    let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / n;
    let variance_sigma = ((m4 - variance * variance).max(0.0) / n).sqrt();
    // per-shot contributions to variance - mean
    let u: Vec<f64> = counts.iter().zip(&dev2).map(|(&c, d)| d - c as f64).collect();
    let u_mean = u.iter().sum::<f64>() / n;
    let excess_sigma = (u.iter().map(|x| (x - u_mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let excess = variance - mean;
    let sign = if excess.abs() <= excess_sigma || excess == 0.0 {
        ExcessSign::Undefined
    } else if excess > 0.0 {
        ExcessSign::Bunched
    } else {
        ExcessSign::Antibunched
    };
    let g_inferred = match sign {
        ExcessSign::Undefined => None,
        _ => Some(mean * mean / excess.abs()),
    };
    CountingStats {
        subvolume,
        counts,
        mean,
        variance,
        mean_sigma: (variance / n).sqrt(),
        variance_sigma,
        excess_sigma,
        sign,
        g_inferred,
    }
}
