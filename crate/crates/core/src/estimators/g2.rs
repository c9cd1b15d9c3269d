use super::fit::FitResult;
use super::histogram::{BinSpec, PairHistogram};
use crate::error::{Error, Result};

/// Binned normalized pair correlation with Poisson uncertainties. Bins whose
/// reference count is zero are marked invalid and carry `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub axes: Vec<BinSpec>,
    pub g2: Vec<f64>,
    pub sigma: Vec<f64>,
    pub valid: Vec<bool>,
}

impl CorrelationCurve {
    /// Bin centers along the first axis.
    pub fn bin_centers(&self) -> Vec<f64> {
        self.axes[0].centers()
    }

    pub fn valid_bins(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid `(center, g2, sigma)` triples of a one-axis curve.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        self.bin_centers()
            .into_iter()
            .zip(&self.g2)
            .zip(&self.sigma)
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(((c, g), s), _)| (c, *g, *s))
            .collect()
    }
}

/// A normalized curve and, once fitted, its Gaussian parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub curve: CorrelationCurve,
    pub fit: Option<FitResult>,
}

/// `g2[b] = (num[b] / N_num) / (den[b] / N_den)`, with `N` each histogram's
/// pair normalization, and relative error `sqrt(1/num + 1/den)`.
pub fn normalize_g2(num: &PairHistogram, den: &PairHistogram) -> Result<CorrelationCurve> {
    if !num.same_bins(den) {
        return Err(Error::BinMismatch);
    }
    let (nn, nd) = (num.pair_norm(), den.pair_norm());
    let len = num.counts.len();
    let mut g2 = vec![f64::NAN; len];
    let mut sigma = vec![f64::NAN; len];
    let mut valid = vec![false; len];
    if nn > 0.0 && nd > 0.0 {
        for b in 0..len {
            let (n, d) = (num.counts[b] as f64, den.counts[b] as f64);
            if d == 0.0 {
                continue;
            }
            let scale = nd / (nn * d);
            g2[b] = n * scale;
            // an empty numerator bin still carries one count's worth of uncertainty
            sigma[b] = if n > 0.0 {
                g2[b] * (1.0 / n + 1.0 / d).sqrt()
            } else {
                scale
            };
            valid[b] = true;
        }
    }
    Ok(CorrelationCurve {
        axes: num.axes.clone(),
        g2,
        sigma,
        valid,
    })
}
