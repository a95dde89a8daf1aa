//! Diagonal Gaussian measures with closed-form entropy, KL, and W2. These
//! are the oracles against which the sampled estimators and identity
//! checks are verified.

use serde::{Deserialize, Serialize};

use crate::rng::{tag, Streams};
use crate::{Error, Result};

/// Mean/variance pair with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl AnalyticGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: var.len() });
        }
        if mean.is_empty() {
            return Err(Error::InvalidParam("gaussian needs dimension >= 1".into()));
        }
        if !var.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParam("gaussian variances must be positive".into()));
        }
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(Error::InvalidParam("gaussian mean must be finite".into()));
        }
        Ok(AnalyticGaussian { mean, var })
    }

    pub fn standard(dim: usize) -> Self {
        AnalyticGaussian { mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    /// Isotropic `N(0, sigma^2 I_d)`.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![sigma * sigma; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Negative entropy `Ent = E[ln density]`, the sign convention of the
    /// objective's entropy term. Additive over coordinates.
    pub fn neg_entropy(&self) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        -0.5 * self.var.iter().map(|v| 1.0 + ln_2pi + v.ln()).sum::<f64>()
    }

    /// `KL(self || other)` in nats.
    pub fn kl(&self, other: &AnalyticGaussian) -> Result<f64> {
        self.check_dim(other)?;
        let mut s = 0.0;
        for i in 0..self.dim() {
            let (m1, v1) = (self.mean[i], self.var[i]);
            let (m2, v2) = (other.mean[i], other.var[i]);
            s += 0.5 * ((v2 / v1).ln() + v1 / v2 + (m1 - m2) * (m1 - m2) / v2 - 1.0);
        }
        Ok(s)
    }

    /// Squared 2-Wasserstein distance (diagonal closed form).
    pub fn w2_sq(&self, other: &AnalyticGaussian) -> Result<f64> {
        self.check_dim(other)?;
        let mut s = 0.0;
        for i in 0..self.dim() {
            let dm = self.mean[i] - other.mean[i];
            let ds = self.var[i].sqrt() - other.var[i].sqrt();
            s += dm * dm + ds * ds;
        }
        Ok(s)
    }

    pub fn w2(&self, other: &AnalyticGaussian) -> Result<f64> {
        Ok(self.w2_sq(other)?.sqrt())
    }

    /// Second moment `E ||X||^2`.
    pub fn mean_sq_norm(&self) -> f64 {
        self.mean.iter().zip(&self.var).map(|(m, v)| m * m + v).sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut s = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.mean).zip(&self.var) {
            let d = xi - m;
            s += -0.5 * (ln_2pi + v.ln()) - 0.5 * d * d / v;
        }
        s
    }

    /// Deterministic draw keyed by `(streams, index)`.
    pub fn draw(&self, streams: &Streams, index: u64) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .enumerate()
            .map(|(c, (m, v))| m + v.sqrt() * streams.normal(tag::SAMPLER, index, c as u64, 0))
            .collect()
    }

    fn check_dim(&self, other: &AnalyticGaussian) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_divergences_vanish() {
        let g = AnalyticGaussian::new(vec![0.3, -1.0], vec![0.5, 2.0]).unwrap();
        assert_eq!(g.kl(&g).unwrap(), 0.0);
        assert_eq!(g.w2(&g).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_kl_closed_form() {
        // KL(N(0,1) || N(0,2)) = (1/2)(1/2 + ln 2 - 1)
        let p = AnalyticGaussian::standard(1);
        let q = AnalyticGaussian::new(vec![0.0], vec![2.0]).unwrap();
        let expect = 0.5 * (0.5 + 2.0f64.ln() - 1.0);
        assert!((p.kl(&q).unwrap() - expect).abs() < 1e-15);
        // Unit-variance mean shift of 1: KL = 1/2.
        let r = AnalyticGaussian::new(vec![1.0], vec![1.0]).unwrap();
        assert!((p.kl(&r).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_adds_over_coordinates() {
        let g = AnalyticGaussian::new(vec![0.1, -0.7, 2.0], vec![0.4, 1.3, 3.1]).unwrap();
        let per_coord: f64 = (0..3)
            .map(|i| {
                AnalyticGaussian::new(vec![g.mean[i]], vec![g.var[i]]).unwrap().neg_entropy()
            })
            .sum();
        assert!((g.neg_entropy() - per_coord).abs() < 1e-14);
    }

    #[test]
    fn w2_between_point_masses_limit() {
        // Shrinking variances: W2 tends to the mean distance.
        let p = AnalyticGaussian::new(vec![1.0, 2.0], vec![1e-18, 1e-18]).unwrap();
        let q = AnalyticGaussian::new(vec![4.0, 6.0], vec![1e-18, 1e-18]).unwrap();
        assert!((p.w2(&q).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(AnalyticGaussian::new(vec![0.0], vec![0.0]).is_err());
        assert!(AnalyticGaussian::new(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn draws_match_moments() {
        let g = AnalyticGaussian::new(vec![2.0, -1.0], vec![0.25, 4.0]).unwrap();
        let s = Streams::new(77);
        let n = 100_000;
        let mut mean = [0.0; 2];
        let mut m2 = [0.0; 2];
        for i in 0..n {
            let x = g.draw(&s, i);
            for c in 0..2 {
                mean[c] += x[c];
                m2[c] += x[c] * x[c];
            }
        }
        for c in 0..2 {
            mean[c] /= n as f64;
            m2[c] = m2[c] / n as f64 - mean[c] * mean[c];
            let se_mean = 3.0 * (g.var[c] / n as f64).sqrt();
            let se_var = 3.0 * g.var[c] * (2.0 / n as f64).sqrt();
            assert!((mean[c] - g.mean[c]).abs() < se_mean);
            assert!((m2[c] - g.var[c]).abs() < se_var);
        }
    }

    #[test]
    fn log_density_integrates_to_one_on_grid() {
        let g = AnalyticGaussian::new(vec![0.5], vec![0.8]).unwrap();
        let n = 20_000;
        let (lo, hi) = (0.5 - 9.0 * 0.8f64.sqrt(), 0.5 + 9.0 * 0.8f64.sqrt());
        let h = (hi - lo) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            sum += w * g.log_density(&[x]).exp();
        }
        assert!((sum * h - 1.0).abs() < 1e-10);
    }
}
