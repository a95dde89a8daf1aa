//! Built-in desk-scale problems. Toy `a` is the closed-form oracle regime
//! (linear loss + quadratic feature: the optimum is an explicit Gaussian);
//! toy `b` is a small 1-d tanh regression with squared loss; toy `c` a 2-d
//! tanh classification with logistic loss. Together they cover smoothness
//! constants 0, 1, and 1/4 and both dimensions the quadrature supports.

use serde::Serialize;

use mfld_core::model::{Dataset, Loss, Neuron, ProblemSpec};
use mfld_core::Result;

/// Coefficient of the quadratic feature in toy `a`.
pub const TOY_A_QUAD_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyId {
    A,
    B,
    C,
}

impl ToyId {
    pub fn parse(s: &str) -> Option<ToyId> {
        match s {
            "a" => Some(ToyId::A),
            "b" => Some(ToyId::B),
            "c" => Some(ToyId::C),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ToyId::A => "a",
            ToyId::B => "b",
            ToyId::C => "c",
        }
    }
}

pub fn toy_problem(id: ToyId, lambda: f64, lambda_prime: f64) -> Result<ProblemSpec> {
    match id {
        // F0(mu) = E_mu[c ||X||^2]: a linear functional of mu, so the
        // optimum is the Gaussian with per-coordinate variance
        // lambda / (2 (c + lambda')).
        ToyId::A => {
            let data = Dataset::from_pairs(&[(&[0.0], 1.0)])?;
            ProblemSpec::new(
                Neuron::Quadratic { c: TOY_A_QUAD_C, dim: 1 },
                Loss::Linear,
                data,
                lambda,
                lambda_prime,
            )
        }
        // 1-d regression with deliberately small labels: the stationary
        // tilt then shifts the parameter law's mean only slightly, so the
        // prediction variance (hence the rescaled particle gap) stays
        // nearly independent of the regularization scale while the tanh
        // nonlinearity and particle interaction remain active.
        ToyId::B => {
            let data = Dataset::from_pairs(&[
                (&[0.6], 0.09),
                (&[1.0], 0.15),
                (&[-0.6], -0.09),
                (&[-1.0], -0.15),
            ])?;
            ProblemSpec::new(Neuron::TanhLinear, Loss::Squared, data, lambda, lambda_prime)
        }
        // Eight points around a circle, labels by sign of the first
        // coordinate.
        ToyId::C => {
            let r = 1.2f64;
            let mut pairs = Vec::new();
            for i in 0..8 {
                let th = std::f64::consts::PI * (2.0 * i as f64 + 1.0) / 8.0;
                let z = [r * th.cos(), r * th.sin()];
                pairs.push((z, if z[0] >= 0.0 { 1.0 } else { -1.0 }));
            }
            let borrowed: Vec<(&[f64], f64)> =
                pairs.iter().map(|(z, y)| (&z[..], *y)).collect();
            let data = Dataset::from_pairs(&borrowed)?;
            ProblemSpec::new(Neuron::TanhLinear, Loss::Logistic, data, lambda, lambda_prime)
        }
    }
}

/// Exact stationary marginal of toy `a`: `N(0, lambda / (2 (c + lambda')))`.
pub fn toy_a_target_variance(lambda: f64, lambda_prime: f64) -> f64 {
    lambda / (2.0 * (TOY_A_QUAD_C + lambda_prime))
}
