//! Deterministic point samplers for Monte-Carlo checks. A sampler maps
//! `(streams, index)` to a draw, so trials parallelize without shared state
//! and replays are exact. Three families: exact diagonal Gaussians,
//! resampling from a reference particle pool (the long-run stationary
//! proxy), and exact rejection sampling from a low-dimensional Gibbs
//! density under a piecewise-constant grid envelope.

use crate::diagnostics::gauss::AnalyticGaussian;
use crate::diagnostics::gibbs::ProximalGibbs;
use crate::model::{Ensemble, Neuron};
use crate::rng::{tag, Streams};
use crate::{Error, Result};

const MAX_REJECTION_ATTEMPTS: u64 = 100_000;

pub trait PointSampler: Sync {
    fn dim(&self) -> usize;
    /// Deterministic draw for the given index.
    fn draw(&self, streams: &Streams, index: u64) -> Vec<f64>;
}

/// Exact sampler for a diagonal Gaussian.
pub struct GaussianSampler(pub AnalyticGaussian);

impl PointSampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, streams: &Streams, index: u64) -> Vec<f64> {
        self.0.draw(streams, index)
    }
}

/// Uniform resampling (with replacement) from a fixed particle pool; draws
/// are i.i.d. from the pool's empirical law.
pub struct PoolSampler {
    pool: Ensemble,
}

impl PoolSampler {
    pub fn new(pool: Ensemble) -> Self {
        PoolSampler { pool }
    }

    pub fn pool(&self) -> &Ensemble {
        &self.pool
    }
}

impl PointSampler for PoolSampler {
    fn dim(&self) -> usize {
        self.pool.dim()
    }

    fn draw(&self, streams: &Streams, index: u64) -> Vec<f64> {
        let i = streams.index(tag::SAMPLER, index, 0x504f4f4c, self.pool.len());
        self.pool.particle(i).to_vec()
    }
}

/// Exact rejection sampler for a normalized 1-d or 2-d Gibbs density. Each
/// grid cell carries an upper envelope `max(corner log-densities) +
/// Lipschitz * cell diameter`, so acceptance against the envelope is exact;
/// with the default mesh the acceptance rate stays near one.
pub struct GridRejectionSampler {
    gibbs: ProximalGibbs,
    dim: usize,
    cells_per_axis: usize,
    halfwidth: f64,
    /// Cumulative envelope masses for cell selection.
    cum: Vec<f64>,
    /// Per-cell envelope log-density.
    env: Vec<f64>,
}

impl GridRejectionSampler {
    pub fn new(gibbs: ProximalGibbs) -> Result<Self> {
        let dim = gibbs.dim();
        if dim > 2 {
            return Err(Error::DimensionTooHigh(dim));
        }
        let cells_per_axis: usize = if dim == 1 { 8192 } else { 384 };
        let t = gibbs.box_halfwidth();
        let h = 2.0 * t / cells_per_axis as f64;
        // Lipschitz bound of the log-density over the box.
        let spec = gibbs.spec();
        let radius = t * (dim as f64).sqrt();
        let lip = match spec.neuron {
            Neuron::Quadratic { .. } => 2.0 * gibbs.quad_coeff() * radius / spec.lambda,
            _ => {
                let wsum: f64 = gibbs.weights().w.iter().map(|w| w.abs()).sum();
                (wsum * spec.neuron.grad_norm_bound(radius, &spec.data)
                    + 2.0 * spec.lambda_prime * radius)
                    / spec.lambda
            }
        };
        let diam = h * (dim as f64).sqrt();
        let n_cells = cells_per_axis.pow(dim as u32);
        // Corner log-densities on the (cells+1)^dim grid.
        let corners_per_axis: usize = cells_per_axis + 1;
        let corner = |idx: usize| -> f64 { -t + idx as f64 * h };
        let mut corner_ld = vec![0.0f64; corners_per_axis.pow(dim as u32)];
        match dim {
            1 => {
                for (i, v) in corner_ld.iter_mut().enumerate() {
                    *v = gibbs.log_density_unnorm(&[corner(i)]);
                }
            }
            _ => {
                for i in 0..corners_per_axis {
                    for j in 0..corners_per_axis {
                        corner_ld[i * corners_per_axis + j] =
                            gibbs.log_density_unnorm(&[corner(i), corner(j)]);
                    }
                }
            }
        }
        let mut env = vec![0.0f64; n_cells];
        match dim {
            1 => {
                for i in 0..n_cells {
                    env[i] = corner_ld[i].max(corner_ld[i + 1]) + lip * diam;
                }
            }
            _ => {
                for i in 0..cells_per_axis {
                    for j in 0..cells_per_axis {
                        let c = corners_per_axis;
                        let m = corner_ld[i * c + j]
                            .max(corner_ld[i * c + j + 1])
                            .max(corner_ld[(i + 1) * c + j])
                            .max(corner_ld[(i + 1) * c + j + 1]);
                        env[i * cells_per_axis + j] = m + lip * diam;
                    }
                }
            }
        }
        let env_max = env.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        let mut cum = Vec::with_capacity(n_cells);
        let mut acc = 0.0;
        for e in &env {
            acc += (e - env_max).exp();
            cum.push(acc);
        }
        if acc.is_nan() || acc <= 0.0 || !acc.is_finite() {
            return Err(Error::Quadrature("degenerate rejection envelope".into()));
        }
        Ok(GridRejectionSampler { gibbs, dim, cells_per_axis, halfwidth: t, cum, env })
    }

    fn cell_origin(&self, cell: usize) -> Vec<f64> {
        let h = 2.0 * self.halfwidth / self.cells_per_axis as f64;
        match self.dim {
            1 => vec![-self.halfwidth + cell as f64 * h],
            _ => {
                let i = cell / self.cells_per_axis;
                let j = cell % self.cells_per_axis;
                vec![-self.halfwidth + i as f64 * h, -self.halfwidth + j as f64 * h]
            }
        }
    }
}

impl PointSampler for GridRejectionSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, streams: &Streams, index: u64) -> Vec<f64> {
        let h = 2.0 * self.halfwidth / self.cells_per_axis as f64;
        let total = *self.cum.last().expect("nonempty grid");
        for attempt in 0..MAX_REJECTION_ATTEMPTS {
            let u = streams.uniform(tag::SAMPLER, index, attempt, 0) * total;
            let cell = self.cum.partition_point(|c| *c < u).min(self.cum.len() - 1);
            let origin = self.cell_origin(cell);
            let x: Vec<f64> = origin
                .iter()
                .enumerate()
                .map(|(c, o)| o + h * streams.uniform(tag::SAMPLER, index, attempt, 1 + c as u64))
                .collect();
            let ld = self.gibbs.log_density_unnorm(&x);
            let u_acc = streams.uniform(tag::SAMPLER, index, attempt, 9);
            if u_acc.ln() <= ld - self.env[cell] {
                return x;
            }
        }
        // The envelope majorizes the density by construction, so exhausting
        // the attempt budget indicates a broken envelope.
        panic!("rejection sampler exhausted {MAX_REJECTION_ATTEMPTS} attempts");
    }
}
