use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{jitter_in_cell, EventRecord};
use crate::error::{Error, Result};
use crate::field::FieldRealization;
use crate::physics::Grid;

/// Independent Poisson draws per cell with the given expected counts,
/// jittered uniformly inside each cell.
fn cellwise_poisson<R: Rng + ?Sized>(
    grid: &Grid,
    expected: impl Iterator<Item = f64>,
    shot_id: u64,
    t: f64,
    rng: &mut R,
) -> Result<Vec<EventRecord>> {
    let dims = grid.dims();
    let mut events = Vec::new();
    for (cell, mean) in expected.enumerate() {
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean)
            .map_err(|e| Error::domain(format!("cell {cell}: {e}")))?
            .sample(rng) as u64;
        for _ in 0..n {
            events.push(EventRecord::new(shot_id, t, jitter_in_cell(grid, cell, rng), dims));
        }
    }
    Ok(events)
}

/// Cox-process events: conditioned on the speckle field, a Poisson process
/// with rate proportional to `density * I(r)`. With the field normalized to
/// unit mean intensity the expected count over shots is `mean_count`.
///
/// `density` is the per-cell envelope (uniform for a far-field speckle);
/// `t` stamps every event with the shot's arrival time.
pub fn sample_boson_events<R: Rng + ?Sized>(
    field: &FieldRealization,
    density: &[f64],
    mean_count: f64,
    t: f64,
    rng: &mut R,
) -> Result<Vec<EventRecord>> {
    if !(mean_count >= 0.0) {
        return Err(Error::domain(format!("mean count must be >= 0, got {mean_count}")));
    }
    let grid = &field.grid;
    let weights = cell_weights(grid, density)?;
    if mean_count == 0.0 {
        return Ok(Vec::new());
    }
    let expected = field
        .values
        .iter()
        .zip(weights)
        .map(|(v, w)| mean_count * w * v.norm_sqr());
    cellwise_poisson(grid, expected, field.shot_id, t, rng)
}

/// Poisson events on a fixed, non-fluctuating density profile.
pub fn sample_coherent_events<R: Rng + ?Sized>(
    grid: &Grid,
    density: &[f64],
    mean_count: f64,
    shot_id: u64,
    t: f64,
    rng: &mut R,
) -> Result<Vec<EventRecord>> {
    if !(mean_count >= 0.0) {
        return Err(Error::domain(format!("mean count must be >= 0, got {mean_count}")));
    }
    let weights = cell_weights(grid, density)?;
    if mean_count == 0.0 {
        return Ok(Vec::new());
    }
    cellwise_poisson(grid, weights.into_iter().map(|w| mean_count * w), shot_id, t, rng)
}

/// Probability of each cell: density times cell measure, normalized to one.
fn cell_weights(grid: &Grid, density: &[f64]) -> Result<Vec<f64>> {
    if density.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            found: density.len(),
        });
    }
    if let Some((i, d)) = density
        .iter()
        .enumerate()
        .find(|(_, d)| !(**d >= 0.0) || !d.is_finite())
    {
        return Err(Error::domain(format!(
            "density at cell {i} is {d}; must be finite and >= 0"
        )));
    }
    let total: f64 = density.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("density profile integrates to zero"));
    }
    Ok(density.iter().map(|d| d / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use rustfft::num_complex::Complex64;

    fn line(n: usize) -> Grid {
        Grid::uniform(1, 1.0, n).unwrap()
    }

    #[test]
    fn zero_mean_gives_no_events() {
        let g = line(8);
        let field = FieldRealization::constant(g.clone(), Complex64::new(1.0, 0.0), 3);
        let d = vec![1.0; 8];
        assert!(sample_boson_events(&field, &d, 0.0, 0.0, &mut rng(1))
            .unwrap()
            .is_empty());
        assert!(sample_coherent_events(&g, &d, 0.0, 0, 0.0, &mut rng(1))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_inputs() {
        let g = line(4);
        let field = FieldRealization::constant(g.clone(), Complex64::new(1.0, 0.0), 0);
        assert!(sample_boson_events(&field, &[1.0; 4], -1.0, 0.0, &mut rng(1)).is_err());
        assert!(sample_coherent_events(&g, &[1.0, -0.5, 1.0, 1.0], 3.0, 0, 0.0, &mut rng(1)).is_err());
        assert!(sample_coherent_events(&g, &[1.0; 3], 3.0, 0, 0.0, &mut rng(1)).is_err());
        assert!(sample_coherent_events(&g, &[0.0; 4], 3.0, 0, 0.0, &mut rng(1)).is_err());
    }

    #[test]
    fn events_stay_inside_their_grid() {
        let g = Grid::new(vec![2.0, 1.0], vec![5, 3]).unwrap();
        let ev = sample_coherent_events(&g, &[1.0; 15], 200.0, 7, 0.5, &mut rng(2)).unwrap();
        assert!(!ev.is_empty());
        for e in ev {
            assert_eq!(e.shot_id, 7);
            assert_eq!(e.t, 0.5);
            assert!(e.x.abs() <= 1.0 && e.y.abs() <= 0.5);
        }
    }

    #[test]
    fn determinism() {
        let g = line(16);
        let a = sample_coherent_events(&g, &[1.0; 16], 10.0, 0, 0.0, &mut rng(5)).unwrap();
        let b = sample_coherent_events(&g, &[1.0; 16], 10.0, 0, 0.0, &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }
}
