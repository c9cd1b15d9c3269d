use super::g2::CorrelationCurve;
use crate::error::{Error, Result};

pub const MAX_FIT_ITERATIONS: usize = 500;
const MIN_VALID_BINS: usize = 5;

/// Weighted least-squares fit of `g2(d) = 1 + c exp(-d^2 / l^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// `g2(0) - 1` of the fitted curve, negative for antibunching
    pub contrast: f64,
    pub contrast_sigma: f64,
    pub length: f64,
    pub length_sigma: f64,
    /// chi-square per degree of freedom
    pub reduced_chi2: f64,
    pub iterations: usize,
}

fn model(d: f64, c: f64, l: f64) -> (f64, f64, f64) {
    let e = (-(d * d) / (l * l)).exp();
    // value, d/dc, d/dl
    (1.0 + c * e, e, c * e * 2.0 * d * d / (l * l * l))
}

fn chi2(points: &[(f64, f64, f64)], c: f64, l: f64) -> f64 {
    points
        .iter()
        .map(|&(d, g, s)| {
            let r = (g - model(d, c, l).0) / s;
            r * r
        })
        .sum()
}

fn initial_guess(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let (d0, g0, _) = points[0];
    let c = g0 - 1.0;
    let span = points.last().map_or(1.0, |p| p.0) - d0;
    let target = c.abs() / std::f64::consts::E;
    let l = points
        .iter()
        .find(|p| (p.1 - 1.0).abs() <= target)
        .map(|p| p.0)
        .filter(|&d| d > 0.0)
        .unwrap_or(0.25 * span.max(d0.abs()).max(f64::MIN_POSITIVE));
    (c, l)
}

/// Levenberg-Marquardt on `(c, l)` over the valid bins of a one-axis curve.
pub fn fit_correlation(curve: &CorrelationCurve) -> Result<FitResult> {
    if curve.axes.len() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: curve.axes.len(),
        });
    }
    let points: Vec<(f64, f64, f64)> = curve
        .points()
        .into_iter()
        .filter(|p| p.2 > 0.0 && p.1.is_finite())
        .collect();
    if points.len() < MIN_VALID_BINS {
        return Err(Error::Fit {
            iterations: 0,
            reason: format!("{} valid bins, need at least {MIN_VALID_BINS}", points.len()),
        });
    }
    // lengths below half a bin spacing are not resolved by the data and
    // leave a flat valley in (c, l)
    let l_min = 0.5 * points.windows(2).map(|w| w[1].0 - w[0].0).fold(f64::INFINITY, f64::min);
    let (mut c, mut l) = initial_guess(&points);
    l = l.max(l_min);
    let mut cost = chi2(&points, c, l);
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        // normal equations J^T W J and J^T W r
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(d, g, s) in &points {
            let (f, jc, jl) = model(d, c, l);
            let w = 1.0 / (s * s);
            let r = g - f;
            a11 += w * jc * jc;
            a12 += w * jc * jl;
            a22 += w * jl * jl;
            b1 += w * jc * r;
            b2 += w * jl * r;
        }
        let mut improved = false;
        while damping < 1e16 {
            let m11 = a11 * (1.0 + damping);
            let m22 = a22 * (1.0 + damping) + f64::MIN_POSITIVE;
            let det = m11 * m22 - a12 * a12;
            if det.abs() < f64::MIN_POSITIVE {
                damping *= 10.0;
                continue;
            }
            let dc = (m22 * b1 - a12 * b2) / det;
            let dl = (m11 * b2 - a12 * b1) / det;
            let (nc, nl) = (c + dc, (l + dl).max(l_min));
            if !(nl > 0.0) || !nc.is_finite() {
                damping *= 10.0;
                continue;
            }
            let new_cost = chi2(&points, nc, nl);
            if new_cost <= cost {
                let small_step = (nc - c).abs() <= 1e-12 * (c.abs() + 1e-12) && (nl - l).abs() <= 1e-12 * l;
                let flat = cost - new_cost <= 1e-13 * cost.max(f64::MIN_POSITIVE);
                c = nc;
                l = nl;
                cost = new_cost;
                damping = (damping * 0.1).max(1e-12);
                improved = true;
                converged = small_step || flat;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::Fit {
            iterations,
            reason: format!("no convergence; last c = {c}, l = {l}, chi2 = {cost}"),
        });
    }

    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for &(d, _, s) in &points {
        let (_, jc, jl) = model(d, c, l);
        let w = 1.0 / (s * s);
        a11 += w * jc * jc;
        a12 += w * jc * jl;
        a22 += w * jl * jl;
    }
    let det = a11 * a22 - a12 * a12;
    let (contrast_sigma, length_sigma) = if det > 1e-12 * a11 * a22 {
        ((a22 / det).sqrt(), (a11 / det).sqrt())
    } else {
        // length is unconstrained when the curve is flat
        ((1.0 / a11).sqrt(), f64::INFINITY)
    };
    Ok(FitResult {
        contrast: c,
        contrast_sigma,
        length: l,
        length_sigma,
        reduced_chi2: cost / (points.len() - 2) as f64,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::BinSpec;
    use crate::seed::rng;
    use rand_distr::{Distribution, Normal};

    fn curve(values: impl FnMut(f64) -> f64, width: f64, n: usize, sigma: f64) -> CorrelationCurve {
        let axis = BinSpec::new(0.0, width, n).unwrap();
        CorrelationCurve {
            g2: axis.centers().into_iter().map(values).collect(),
            sigma: vec![sigma; n],
            valid: vec![true; n],
            axes: vec![axis],
        }
    }

    #[test]
    fn exact_curve_is_recovered() {
        let l = 2e-4;
        let c = curve(|d| 1.0 + (-(d * d) / (l * l)).exp(), l / 5.0, 40, 0.01);
        let fit = fit_correlation(&c).unwrap();
        assert!((fit.contrast - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.length - l).abs() < 1e-6 * l, "{fit:?}");
        assert!(fit.reduced_chi2 < 1e-12);
    }

    #[test]
    fn negative_contrast() {
        let l = 3.0;
        let c = curve(|d| 1.0 - 0.8 * (-(d * d) / (l * l)).exp(), 0.5, 30, 0.02);
        let fit = fit_correlation(&c).unwrap();
        assert!((fit.contrast + 0.8).abs() < 1e-8 && (fit.length - 3.0).abs() < 1e-8);
    }

    #[test]
    fn noisy_curve_within_five_percent() {
        let l = 2e-4;
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut r = rng(17);
        for _ in 0..20 {
            let c = curve(
                |d| 1.0 + (-(d * d) / (l * l)).exp() + noise.sample(&mut r),
                l / 5.0,
                40,
                0.01,
            );
            let fit = fit_correlation(&c).unwrap();
            assert!((fit.contrast - 1.0).abs() < 0.05, "{fit:?}");
            assert!((fit.length - l).abs() < 0.05 * l, "{fit:?}");
        }
    }

    #[test]
    fn flat_curve_has_null_contrast() {
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut r = rng(5);
        let c = curve(|_| 1.0 + noise.sample(&mut r), 1.0, 40, 0.01);
        let fit = fit_correlation(&c).unwrap();
        assert!(fit.contrast.abs() <= 3.0 * fit.contrast_sigma, "{fit:?}");
    }

    #[test]
    fn too_few_bins() {
        let c = curve(|_| 1.0, 1.0, 4, 0.1);
        assert!(matches!(fit_correlation(&c), Err(Error::Fit { .. })));
    }
}
