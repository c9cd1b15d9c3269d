use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::{jitter_in_cell, DensityProfile, EventRecord};
use crate::error::{Error, Result};
use crate::physics::{Geometry, Grid, PhysicalConstants, SourceModel};

/// Largest eigenvalue a kernel may carry after rescaling.
pub const EIGENVALUE_CAP: f64 = 1.0 - 1e-9;
const VALIDATION_TOLERANCE: f64 = 1e-8;

/// Discretized marginal kernel of a determinantal point process over grid
/// cells, together with its eigendecomposition (computed once, shared by all
/// samples).
#[derive(Debug, Clone)]
pub struct ThermalKernel {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub density: Vec<f64>,
    /// Gaussian correlation length of `|K|^2`, when the kernel was built from one
    pub length: Option<f64>,
    /// factor applied to the unscaled Gaussian kernel to reach the target trace
    pub rescale: f64,
    /// number of eigenvalues lowered to [`EIGENVALUE_CAP`]
    pub capped: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl ThermalKernel {
    /// Validates and decomposes an explicit kernel matrix.
    pub fn from_matrix(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        let n = grid.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Kernel(format!(
                "kernel is {}x{} but the grid has {n} cells",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > VALIDATION_TOLERANCE * scale {
                    return Err(Error::Kernel(format!("kernel is not symmetric at ({i}, {j})")));
                }
            }
        }
        let eigen = SymmetricEigen::new(matrix.clone());
        Self::from_decomposition(grid, matrix, eigen)
    }

    fn from_decomposition(grid: Grid, matrix: DMatrix<f64>, eigen: SymmetricEigen<f64, nalgebra::Dyn>) -> Result<Self> {
        let mut capped = 0;
        let mut eigenvalues = Vec::with_capacity(eigen.eigenvalues.len());
        for &lambda in eigen.eigenvalues.iter() {
            if !(-VALIDATION_TOLERANCE..=1.0 + VALIDATION_TOLERANCE).contains(&lambda) {
                return Err(Error::Kernel(format!("eigenvalue {lambda} outside [0, 1]")));
            }
            if lambda > EIGENVALUE_CAP {
                capped += 1;
            }
            eigenvalues.push(lambda.clamp(0.0, EIGENVALUE_CAP));
        }
        let density = (0..matrix.nrows())
            .map(|i| matrix[(i, i)] / grid.cell_measure())
            .collect();
        Ok(Self {
            grid,
            matrix,
            density,
            length: None,
            rescale: 1.0,
            capped,
            eigenvalues,
            eigenvectors: eigen.eigenvectors,
        })
    }

    /// `K(r, r') = sqrt(rho(r) rho(r')) exp(-|r - r'|^2 / (2 l^2))` times the
    /// cell measure, rescaled so that its trace equals `mean_count`.
    pub fn gaussian(grid: Grid, density: &[f64], length: f64, mean_count: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::domain(format!("kernel length must be > 0, got {length}")));
        }
        if !(mean_count >= 0.0) {
            return Err(Error::domain(format!("mean count must be >= 0, got {mean_count}")));
        }
        for axis in 0..grid.dims() {
            let cell = grid.cell_size(axis);
            if cell >= 0.5 * length {
                return Err(Error::domain(format!(
                    "grid cell {cell} m on axis {axis} does not resolve correlation length {length} m"
                )));
            }
        }
        let n = grid.len();
        if density.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: density.len(),
            });
        }
        let centers: Vec<[f64; 3]> = (0..n).map(|i| grid.center(i)).collect();
        let measure = grid.cell_measure();
        let root: Vec<f64> = density.iter().map(|d| d.max(0.0).sqrt()).collect();
        let inv = 1.0 / (2.0 * length * length);
        let mut matrix = DMatrix::from_fn(n, n, |i, j| {
            let d2: f64 = (0..3).map(|a| (centers[i][a] - centers[j][a]).powi(2)).sum();
            root[i] * root[j] * measure * (-d2 * inv).exp()
        });
        let trace = matrix.trace();
        if !(trace > 0.0) {
            return Err(Error::domain("kernel density integrates to zero"));
        }
        let rescale = mean_count / trace;
        matrix *= rescale;

        let eigen = SymmetricEigen::new(matrix.clone());
        let largest = eigen.eigenvalues.max();
        if largest > 1.0 + VALIDATION_TOLERANCE {
            // the largest possible trace keeps the top mode at unit occupancy
            return Err(Error::Occupancy {
                mean: mean_count,
                capacity: mean_count / largest,
            });
        }
        let mut kernel = Self::from_decomposition(grid, matrix, eigen)?;
        kernel.length = Some(length);
        kernel.rescale = rescale;
        Ok(kernel)
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expected number of points, the sum of the (capped) eigenvalues.
    pub fn mean_count(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Thermal kernel for a fermionic source: a Gaussian of the predicted
/// correlation length (times the optional temperature scale) over the
/// geometry's grid.
pub fn build_thermal_kernel(
    source: &SourceModel,
    geometry: &Geometry,
    constants: &PhysicalConstants,
    profile: DensityProfile,
) -> Result<ThermalKernel> {
    source.validate()?;
    let length = geometry.correlation_length(source, constants)? * source.temperature_scale.unwrap_or(1.0);
    let density = profile.density(&geometry.grid)?;
    ThermalKernel::gaussian(geometry.grid.clone(), &density, length, source.mean_count)
}

/// Exact sample of occupied cells by the spectral method: keep each
/// eigenvector with probability equal to its eigenvalue, then draw points one
/// at a time from the projection kernel of the kept vectors, removing the
/// chosen direction after each draw.
pub fn sample_fermion_cells<R: Rng + ?Sized>(kernel: &ThermalKernel, rng: &mut R) -> Vec<usize> {
    let n = kernel.len();
    let selected: Vec<usize> = kernel
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lambda)| rng.random::<f64>() < lambda)
        .map(|(i, _)| i)
        .collect();
    let k = selected.len();
    if k == 0 {
        return Vec::new();
    }

    // rows of the kept eigenvectors: one feature vector per cell
    let mut features = vec![0.0; n * k];
    for (c, &col) in selected.iter().enumerate() {
        let v = kernel.eigenvectors.column(col);
        for row in 0..n {
            features[row * k + c] = v[row];
        }
    }
    let mut residual: Vec<f64> = features
        .chunks_exact(k)
        .map(|f| f.iter().map(|x| x * x).sum())
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut cells = Vec::with_capacity(k);

    for _ in 0..k {
        let total: f64 = residual.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in residual.iter().enumerate() {
            if u < w {
                chosen = i;
                break;
            }
            u -= w;
        }
        while residual[chosen] <= 0.0 && chosen > 0 {
            chosen -= 1;
        }
        cells.push(chosen);

        // Gram-Schmidt: new orthonormal direction from the chosen feature
        let mut e = features[chosen * k..(chosen + 1) * k].to_vec();
        for b in &basis {
            let dot: f64 = b.iter().zip(&e).map(|(x, y)| x * y).sum();
            for (ei, bi) in e.iter_mut().zip(b) {
                *ei -= dot * bi;
            }
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        for x in &mut e {
            *x /= norm;
        }
        for (row, r) in residual.iter_mut().enumerate() {
            let f = &features[row * k..(row + 1) * k];
            let dot: f64 = f.iter().zip(&e).map(|(x, y)| x * y).sum();
            *r = (*r - dot * dot).max(0.0);
        }
        residual[chosen] = 0.0;
        basis.push(e);
    }
    cells
}

/// Fermion events for one shot: a determinantal sample of cells, each
/// point placed uniformly inside its cell.
pub fn sample_fermion_events<R: Rng + ?Sized>(
    kernel: &ThermalKernel,
    shot_id: u64,
    t: f64,
    rng: &mut R,
) -> Vec<EventRecord> {
    let mut cells = sample_fermion_cells(kernel, rng);
    cells.sort_unstable();
    let dims = kernel.grid.dims();
    cells
        .into_iter()
        .map(|cell| EventRecord::new(shot_id, t, jitter_in_cell(&kernel.grid, cell, rng), dims))
        .collect()
}
