//! Finite summaries of a base measure sufficient for every divergence
//! computed here: the prediction vector `h_mu(z_j)` over the dataset and the
//! second moment `E_mu ||X||^2`. Both the empirical measure of an ensemble
//! and a diagonal Gaussian (via quadrature in d <= 2) reduce to the same
//! summary, and the Bregman divergence, proximal Gibbs potential, and
//! bridge identity are exact functions of it.

use crate::diagnostics::gauss::AnalyticGaussian;
use crate::diagnostics::quad;
use crate::model::{Ensemble, Neuron, ProblemSpec, VariationWeights};
use crate::{Error, Result};

/// Predictions and second moment of a probability measure on parameter
/// space, relative to a fixed `ProblemSpec`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureStats {
    pub predictions: Vec<f64>,
    pub mean_sq_norm: f64,
}

impl MeasureStats {
    pub fn from_ensemble(spec: &ProblemSpec, e: &Ensemble) -> Result<Self> {
        let pred = spec.predictions(e)?;
        Ok(MeasureStats { predictions: pred.values, mean_sq_norm: e.mean_sq_norm() })
    }

    /// Gaussian base measure; neuron expectations by quadrature (closed form
    /// for the quadratic feature), so d <= 2 for the tanh families.
    pub fn from_gaussian(spec: &ProblemSpec, g: &AnalyticGaussian) -> Result<Self> {
        let d = spec.param_dim();
        if g.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
        }
        let msn = g.mean_sq_norm();
        let predictions = match spec.neuron {
            Neuron::Quadratic { c, .. } => vec![c * msn; spec.data.len()],
            _ => {
                let mut preds = Vec::with_capacity(spec.data.len());
                for p in spec.data.iter() {
                    preds.push(quad::gaussian_expect(g, |x| spec.neuron.eval(x, &p.z))?);
                }
                preds
            }
        };
        Ok(MeasureStats { predictions, mean_sq_norm: msn })
    }

    /// Empirical risk `F0(mu)` of the summarized measure.
    pub fn risk(&self, spec: &ProblemSpec) -> f64 {
        let n = spec.data.len() as f64;
        self.predictions
            .iter()
            .zip(spec.data.iter())
            .map(|(a, p)| spec.loss.value(*a, p.y))
            .sum::<f64>()
            / n
    }

    /// Full energy `F(mu) = F0(mu) + lambda' E||X||^2`.
    pub fn energy(&self, spec: &ProblemSpec) -> f64 {
        self.risk(spec) + spec.lambda_prime * self.mean_sq_norm
    }

    /// Loss-derivative weights of the first variation taken at this measure.
    pub fn weights(&self, spec: &ProblemSpec) -> VariationWeights {
        let n = spec.data.len() as f64;
        VariationWeights {
            w: self
                .predictions
                .iter()
                .zip(spec.data.iter())
                .map(|(a, p)| spec.loss.deriv(*a, p.y) / n)
                .collect(),
        }
    }

}

/// Bregman divergence `B_F(mu, mu_ref) = F(mu) - F(mu_ref) -
/// <dF(mu_ref)/dmu, mu - mu_ref>` on finite summaries. The parts of `F`
/// that are linear in the measure (the quadratic regularizer and, per data
/// point, the prediction itself) cancel exactly between the three terms, so
/// the sum reduces to the scalar loss Bregman at each data point:
///
/// `(1/n) sum_j [ loss(a_j) - loss(b_j) - loss'(b_j) (a_j - b_j) ]`
///
/// with `a = h_mu`, `b = h_ref`. Each addend is nonnegative by convexity;
/// the whole is identically zero for the linear loss.
pub fn bregman(spec: &ProblemSpec, mu: &MeasureStats, mu_ref: &MeasureStats) -> Result<f64> {
    if mu.predictions.len() != mu_ref.predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: mu_ref.predictions.len(),
            got: mu.predictions.len(),
        });
    }
    let mut total = 0.0;
    for ((a, b), p) in mu.predictions.iter().zip(&mu_ref.predictions).zip(spec.data.iter()) {
        total += spec.loss.value(*a, p.y)
            - spec.loss.value(*b, p.y)
            - spec.loss.deriv(*b, p.y) * (a - b);
    }
    Ok(total / spec.data.len() as f64)
}

/// Convenience form on ensembles.
pub fn bregman_ensembles(spec: &ProblemSpec, mu: &Ensemble, mu_ref: &Ensemble) -> Result<f64> {
    bregman(
        spec,
        &MeasureStats::from_ensemble(spec, mu)?,
        &MeasureStats::from_ensemble(spec, mu_ref)?,
    )
}
