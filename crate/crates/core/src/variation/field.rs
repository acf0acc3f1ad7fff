use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{spherical, Floorplan, VariationMap, VariationParams};
use crate::{Error, Result};

/// Largest grid (in cells) the exact Cholesky sampler accepts: 96 x 96.
pub const MAX_FIELD_CELLS: usize = 96 * 96;

/// Relative diagonal jitter keeping nearly singular covariances factorable.
const JITTER: f64 = 1e-9;

/// Euclidean distance between the centers of cells `a` and `b` of a
/// `rows x cols` grid, with the longer chip edge normalized to 1.0.
pub fn cell_distance(rows: usize, cols: usize, a: usize, b: usize) -> f64 {
    let edge = rows.max(cols) as f64;
    let (ar, ac) = ((a / cols) as f64, (a % cols) as f64);
    let (br, bc) = ((b / cols) as f64, (b % cols) as f64);
    ((ar - br).powi(2) + (ac - bc).powi(2)).sqrt() / edge
}

/// Exact sampler for one grid: factors the systematic covariance once and
/// draws any number of seeded fields from it.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    rows: usize,
    cols: usize,
    /// Lower Cholesky factor of the systematic covariance, absent when the
    /// systematic variance is zero.
    factor: Option<DMatrix<f64>>,
    random_sigma: f64,
}

impl FieldSampler {
    pub fn new(params: &VariationParams, rows: usize, cols: usize) -> Result<Self> {
        params.validate()?;
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        let n = rows * cols;
        if n > MAX_FIELD_CELLS {
            return Err(Error::GridTooLarge {
                rows,
                cols,
                max_cells: MAX_FIELD_CELLS,
            });
        }
        let sys_var = params.systematic_sigma().powi(2);
        let factor = if sys_var > 0.0 {
            let mut cov = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let rho = spherical(cell_distance(rows, cols, i, j), params.phi);
                    cov[(i, j)] = sys_var * rho;
                    cov[(j, i)] = sys_var * rho;
                }
                cov[(i, i)] += sys_var * JITTER;
            }
            let chol = cov.cholesky().ok_or_else(|| {
                Error::NotPositiveDefinite(format!(
                    "phi = {} on a {rows}x{cols} grid",
                    params.phi
                ))
            })?;
            Some(chol.unpack())
        } else {
            None
        };
        Ok(Self {
            rows,
            cols,
            factor,
            random_sigma: params.random_sigma(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Draws one field (row-major) for `seed`. Systematic normals are drawn
    /// first, then the per-cell random normals, from one ChaCha8 stream.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let n = self.rows * self.cols;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut grid = match &self.factor {
            Some(l) => {
                let z = DVector::from_fn(n, |_, _| normal());
                (l * z).as_slice().to_vec()
            }
            None => vec![0.0; n],
        };
        if self.random_sigma > 0.0 {
            for v in &mut grid {
                *v += self.random_sigma * normal();
            }
        }
        grid
    }
}

/// Samples a variation map: correlated systematic part plus independent
/// per-cell noise, deterministic for `params.seed`.
pub fn generate_variation_map(
    params: &VariationParams,
    rows: usize,
    cols: usize,
    floorplan: Floorplan,
) -> Result<VariationMap> {
    floorplan.validate(rows, cols)?;
    let sampler = FieldSampler::new(params, rows, cols)?;
    VariationMap::new(rows, cols, sampler.sample(params.seed), floorplan)
}
