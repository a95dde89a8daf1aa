//! Mean-field model: neurons, losses, datasets, and the regularized risk
//! functional `F(mu) = F0(mu) + lambda' * E_mu ||X||^2` together with its
//! first variation and Wasserstein gradient, all evaluable on finite
//! ensembles.
//!
//! The prediction of an ensemble `mu_x = (1/N) sum delta_{x^i}` at a data
//! point `z` is the average neuron output `(1/N) sum h(x^i, z)`, and the
//! empirical risk averages a convex loss over the dataset. All functions
//! here are pure; per-particle and per-datapoint work can run concurrently.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A single parameter point `x` in `R^d`.
pub type ParamPoint = [f64];

/// `N` parameter points sharing a dimension; represents the empirical
/// measure `(1/N) sum delta_{x^i}`. Stored row-major for cache-friendly
/// per-particle sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    dim: usize,
    coords: Vec<f64>,
}

impl Ensemble {
    /// Build from flat row-major coordinates. Requires at least one particle
    /// and all-finite coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("ensemble dimension must be >= 1".into()));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParam(format!(
                "coordinate buffer of length {} does not hold whole {}-dim particles",
                coords.len(),
                dim
            )));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParam("non-finite coordinate".into()));
        }
        Ok(Ensemble { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().ok_or(Error::EmptyEnsemble)?.len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            coords.extend_from_slice(r);
        }
        Self::from_flat(dim, coords)
    }

    /// Internal constructor for integrator output; skips the finiteness scan
    /// (the step driver applies its own divergence guard).
    pub(crate) fn from_flat_unchecked(dim: usize, coords: Vec<f64>) -> Self {
        Ensemble { dim, coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &ParamPoint {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamPoint> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Average squared Euclidean norm per particle, `(1/N) sum ||x^i||^2`.
    pub fn mean_sq_norm(&self) -> f64 {
        let n = self.len();
        self.coords.iter().map(|c| c * c).sum::<f64>() / n as f64
    }

    pub fn max_abs_coord(&self) -> f64 {
        self.coords.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// One labeled example: feature vector and scalar label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub z: Vec<f64>,
    pub y: f64,
}

/// Training examples `{(z_j, y_j)}`. Feature dimensions must agree and
/// labels must be finite; logistic labels are restricted to +-1 so the
/// smoothness constant 1/4 is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyDataset)?;
        let fd = first.z.len();
        for p in &points {
            if p.z.len() != fd {
                return Err(Error::DimensionMismatch { expected: fd, got: p.z.len() });
            }
            if !p.y.is_finite() || !p.z.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParam("non-finite dataset entry".into()));
            }
        }
        Ok(Dataset { points })
    }

    pub fn from_pairs(pairs: &[(&[f64], f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|(z, y)| DataPoint { z: z.to_vec(), y: *y }).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.points[0].z.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataPoint> {
        self.points.iter()
    }

    pub fn point(&self, j: usize) -> &DataPoint {
        &self.points[j]
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.z.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max)
    }

    pub fn max_abs_label(&self) -> f64 {
        self.points.iter().map(|p| p.y.abs()).fold(0.0f64, f64::max)
    }
}

/// Neuron family. Bounded activations keep `|h| <= 1` by construction for
/// the tanh kinds; the quadratic feature realizes the linear-functional
/// special case `F0(mu) = E_mu[f]` (pair it with the linear loss) where the
/// optimum is a closed-form Gibbs measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Neuron {
    /// `h(x, z) = tanh(<x, z>)`; parameter dimension equals the feature dim.
    TanhLinear,
    /// `h((v, w), z) = tanh(v * tanh(<w, z>))`; parameter is `(v, w)` with
    /// the gate scalar first, so the dimension is `1 + feature dim`.
    TanhGated,
    /// `h(x, z) = c * ||x||^2`, ignoring `z`. The parameter dimension is
    /// free and must be supplied.
    Quadratic { c: f64, dim: usize },
}

impl Neuron {
    pub fn param_dim(&self, feature_dim: usize) -> usize {
        match self {
            Neuron::TanhLinear => feature_dim,
            Neuron::TanhGated => 1 + feature_dim,
            Neuron::Quadratic { dim, .. } => *dim,
        }
    }

    /// Absolute output bound `B_h`, when one exists.
    pub fn output_bound(&self) -> Option<f64> {
        match self {
            Neuron::TanhLinear | Neuron::TanhGated => Some(1.0),
            Neuron::Quadratic { .. } => None,
        }
    }

    pub fn eval(&self, x: &ParamPoint, z: &[f64]) -> f64 {
        match self {
            Neuron::TanhLinear => dot(x, z).tanh(),
            Neuron::TanhGated => {
                let (v, w) = (x[0], &x[1..]);
                (v * dot(w, z).tanh()).tanh()
            }
            Neuron::Quadratic { c, .. } => c * x.iter().map(|a| a * a).sum::<f64>(),
        }
    }

    /// Accumulate `scale * grad_x h(x, z)` into `out`.
    pub fn add_grad(&self, x: &ParamPoint, z: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Neuron::TanhLinear => {
                let t = dot(x, z).tanh();
                let s = scale * (1.0 - t * t);
                for (o, zi) in out.iter_mut().zip(z) {
                    *o += s * zi;
                }
            }
            Neuron::TanhGated => {
                let (v, w) = (x[0], &x[1..]);
                let tw = dot(w, z).tanh();
                let t = (v * tw).tanh();
                let outer = scale * (1.0 - t * t);
                out[0] += outer * tw;
                let s = outer * v * (1.0 - tw * tw);
                for (o, zi) in out[1..].iter_mut().zip(z) {
                    *o += s * zi;
                }
            }
            Neuron::Quadratic { c, .. } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += scale * 2.0 * c * xi;
                }
            }
        }
    }

    /// Upper bound on `||grad_x h(x, z)||` over `||x|| <= radius` and the
    /// dataset's feature vectors. Global (radius-free) for `TanhLinear`.
    pub fn grad_norm_bound(&self, radius: f64, data: &Dataset) -> f64 {
        let zmax = data.max_feature_norm();
        match self {
            Neuron::TanhLinear => zmax,
            // |dh/dv| <= |tanh(w.z)| <= 1 and ||dh/dw|| <= |v| * ||z||.
            Neuron::TanhGated => (1.0 + radius * radius * zmax * zmax).sqrt(),
            Neuron::Quadratic { c, .. } => 2.0 * c.abs() * radius,
        }
    }

    /// Upper bound on the spectral norm of `hess_x h(x, z)` over
    /// `||x|| <= radius`.
    pub fn hess_norm_bound(&self, radius: f64, data: &Dataset) -> f64 {
        let zmax = data.max_feature_norm();
        // max |tanh''| = 4 / (3 sqrt(3)).
        let t2 = 4.0 / (3.0 * 3.0f64.sqrt());
        match self {
            Neuron::TanhLinear => t2 * zmax * zmax,
            // Crude but valid: every second partial of tanh(v tanh(w.z)) is a
            // product of factors bounded by 1, |v|, ||z||, tanh'' extrema.
            Neuron::TanhGated => {
                let r = radius.max(1.0);
                t2 * (1.0 + r * zmax) * (1.0 + r * zmax)
            }
            Neuron::Quadratic { c, .. } => 2.0 * c.abs(),
        }
    }
}

/// Convex losses with their smoothness constants: squared (L = 1), logistic
/// (L = 1/4), and linear (L = 0, the no-approximation-error regime).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Squared,
    Logistic,
    Linear,
}

impl Loss {
    pub fn value(&self, a: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (a - y) * (a - y),
            // softplus(-ya) computed stably
            Loss::Logistic => {
                let t = -y * a;
                t.max(0.0) + (-t.abs()).exp().ln_1p()
            }
            Loss::Linear => a * y,
        }
    }

    /// Derivative in the prediction argument.
    pub fn deriv(&self, a: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => a - y,
            Loss::Logistic => -y / (1.0 + (y * a).exp()),
            Loss::Linear => y,
        }
    }

    /// Smoothness constant L of Assumption "convex and L-smooth".
    pub fn smoothness(&self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
            Loss::Linear => 0.0,
        }
    }

    /// Bound on |d loss / d a| over predictions |a| <= b_h and dataset labels.
    pub fn deriv_bound(&self, b_h: f64, max_abs_label: f64) -> f64 {
        match self {
            Loss::Squared => b_h + max_abs_label,
            Loss::Logistic => 1.0,
            Loss::Linear => max_abs_label,
        }
    }

    /// Bound on |loss| over the same box; used by the Holley-Stroock LSI
    /// lower bound.
    pub fn sup_bound(&self, b_h: f64, max_abs_label: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (b_h + max_abs_label) * (b_h + max_abs_label),
            Loss::Logistic => (b_h.exp() + 1.0).ln(),
            Loss::Linear => b_h * max_abs_label,
        }
    }
}

/// Selects the bare risk term or the full regularized functional when
/// evaluating first variations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    RiskOnly,
    Full,
}

/// The problem instance: neuron family, loss, data, and the entropy and
/// quadratic regularization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub neuron: Neuron,
    pub loss: Loss,
    pub data: Dataset,
    pub lambda: f64,
    pub lambda_prime: f64,
}

impl ProblemSpec {
    pub fn new(
        neuron: Neuron,
        loss: Loss,
        data: Dataset,
        lambda: f64,
        lambda_prime: f64,
    ) -> Result<Self> {
        if lambda.is_nan() || lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParam(format!("lambda must be > 0, got {lambda}")));
        }
        if lambda_prime.is_nan() || lambda_prime <= 0.0 || !lambda_prime.is_finite() {
            return Err(Error::InvalidParam(format!(
                "lambda_prime must be > 0, got {lambda_prime}"
            )));
        }
        if loss == Loss::Logistic {
            for p in data.iter() {
                if p.y != 1.0 && p.y != -1.0 {
                    return Err(Error::InvalidParam(format!(
                        "logistic labels must be +-1, got {}",
                        p.y
                    )));
                }
            }
        }
        if let Neuron::Quadratic { c, dim } = neuron {
            if !c.is_finite() || dim == 0 {
                return Err(Error::InvalidParam("quadratic feature needs finite c, dim >= 1".into()));
            }
        }
        Ok(ProblemSpec { neuron, loss, data, lambda, lambda_prime })
    }

    /// Parameter-space dimension d.
    pub fn param_dim(&self) -> usize {
        self.neuron.param_dim(self.data.feature_dim())
    }

    /// `R` of the second-moment assumption, fixed to the neuron output bound
    /// (infinite when the neuron is unbounded; irrelevant there because those
    /// kinds pair with the linear loss, L = 0).
    pub fn r_bound(&self) -> f64 {
        self.neuron.output_bound().unwrap_or(f64::INFINITY)
    }

    pub fn smoothness(&self) -> f64 {
        self.loss.smoothness()
    }

    fn check_param(&self, x: &ParamPoint) -> Result<()> {
        let d = self.param_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        Ok(())
    }

    fn check_features(&self, z: &[f64]) -> Result<()> {
        let fd = self.data.feature_dim();
        if z.len() != fd {
            return Err(Error::DimensionMismatch { expected: fd, got: z.len() });
        }
        Ok(())
    }

    fn check_ensemble(&self, e: &Ensemble) -> Result<()> {
        if e.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let d = self.param_dim();
        if e.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: e.dim() });
        }
        Ok(())
    }

    /// Single neuron output `h(x, z)`.
    pub fn neuron_eval(&self, x: &ParamPoint, z: &[f64]) -> Result<f64> {
        self.check_param(x)?;
        if !matches!(self.neuron, Neuron::Quadratic { .. }) {
            self.check_features(z)?;
        }
        Ok(self.neuron.eval(x, z))
    }

    /// Mean-field prediction `h_mu(z) = (1/N) sum h(x^i, z)`.
    pub fn predict(&self, e: &Ensemble, z: &[f64]) -> Result<f64> {
        self.check_ensemble(e)?;
        if !matches!(self.neuron, Neuron::Quadratic { .. }) {
            self.check_features(z)?;
        }
        let sum: f64 = e.iter().map(|x| self.neuron.eval(x, z)).sum();
        Ok(sum / e.len() as f64)
    }

    /// Predictions on every data point, the shared per-step vector.
    pub fn predictions(&self, e: &Ensemble) -> Result<Predictions> {
        self.check_ensemble(e)?;
        let inv_n = 1.0 / e.len() as f64;
        let values = self
            .data
            .iter()
            .map(|p| e.iter().map(|x| self.neuron.eval(x, &p.z)).sum::<f64>() * inv_n)
            .collect();
        Ok(Predictions { values })
    }

    /// Empirical risk `F0` from cached predictions.
    pub fn risk_from(&self, pred: &Predictions) -> f64 {
        let n = self.data.len() as f64;
        pred.values
            .iter()
            .zip(self.data.iter())
            .map(|(a, p)| self.loss.value(*a, p.y))
            .sum::<f64>()
            / n
    }

    /// Empirical risk `F0(mu_e) = (1/n) sum loss(h_mu(z_j), y_j)`.
    pub fn risk(&self, e: &Ensemble) -> Result<f64> {
        Ok(self.risk_from(&self.predictions(e)?))
    }

    /// Full energy `F(mu_e) = F0(mu_e) + lambda' * (1/N) sum ||x^i||^2`.
    pub fn energy(&self, e: &Ensemble) -> Result<f64> {
        Ok(self.risk(e)? + self.lambda_prime * e.mean_sq_norm())
    }

    /// Loss-derivative weights `w_j = loss'(h_mu(z_j), y_j) / n`. The first
    /// variation of `F0` at `mu` is then `x -> sum_j w_j h(x, z_j)`.
    pub fn variation_weights(&self, pred: &Predictions) -> VariationWeights {
        let n = self.data.len() as f64;
        VariationWeights {
            w: pred
                .values
                .iter()
                .zip(self.data.iter())
                .map(|(a, p)| self.loss.deriv(*a, p.y) / n)
                .collect(),
        }
    }

    /// First variation `delta F(mu_e)/delta mu (x)`; `Functional::RiskOnly`
    /// drops the `lambda' ||x||^2` term.
    pub fn first_variation(&self, e: &Ensemble, x: &ParamPoint, part: Functional) -> Result<f64> {
        self.check_param(x)?;
        let weights = self.variation_weights(&self.predictions(e)?);
        Ok(self.first_variation_at(&weights, x, part))
    }

    /// Same, with precomputed weights (the hot path in the integrator).
    pub fn first_variation_at(
        &self,
        weights: &VariationWeights,
        x: &ParamPoint,
        part: Functional,
    ) -> f64 {
        let mut v: f64 = weights
            .w
            .iter()
            .zip(self.data.iter())
            .map(|(w, p)| w * self.neuron.eval(x, &p.z))
            .sum();
        if part == Functional::Full {
            v += self.lambda_prime * x.iter().map(|a| a * a).sum::<f64>();
        }
        v
    }

    /// Wasserstein gradient `grad_x delta F(mu_e)/delta mu (x)`, i.e. the
    /// drift of the dynamics: `sum_j w_j grad_x h(x, z_j) + 2 lambda' x`.
    pub fn wasserstein_gradient(&self, e: &Ensemble, x: &ParamPoint) -> Result<Vec<f64>> {
        self.check_param(x)?;
        let weights = self.variation_weights(&self.predictions(e)?);
        let mut g = vec![0.0; x.len()];
        self.gradient_at(&weights, x, &mut g);
        Ok(g)
    }

    /// Gradient with precomputed weights, written into `out`.
    pub fn gradient_at(&self, weights: &VariationWeights, x: &ParamPoint, out: &mut [f64]) {
        out.fill(0.0);
        for (w, p) in weights.w.iter().zip(self.data.iter()) {
            self.neuron.add_grad(x, &p.z, *w, out);
        }
        let two_lp = 2.0 * self.lambda_prime;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += two_lp * xi;
        }
    }

    /// Surrogate for the drift bound `M1`: valid for `||x|| <= radius`
    /// (radius-free for tanh-linear). Conservative by construction.
    pub fn m1_surrogate(&self, radius: f64) -> f64 {
        let b_h = self.neuron.output_bound().unwrap_or(f64::INFINITY);
        let g = self.loss.deriv_bound(b_h.min(1.0), self.data.max_abs_label());
        g * self.neuron.grad_norm_bound(radius, &self.data)
    }

    /// Global `M1` when the neuron family admits one.
    pub fn m1_global(&self) -> Option<f64> {
        match self.neuron {
            Neuron::TanhLinear => Some(self.m1_surrogate(0.0)),
            _ => None,
        }
    }

    /// Surrogate for the joint Lipschitz constant `M2` of the drift in
    /// `(W2(mu, mu'), ||x - x'||)`, valid on `||x|| <= radius`.
    pub fn m2_surrogate(&self, radius: f64) -> f64 {
        let b_h = self.neuron.output_bound().unwrap_or(f64::INFINITY);
        let g = self.loss.deriv_bound(b_h.min(1.0), self.data.max_abs_label());
        let lip = self.neuron.grad_norm_bound(radius, &self.data);
        let hess = self.neuron.hess_norm_bound(radius, &self.data);
        (g * hess).max(self.loss.smoothness() * lip * lip)
    }

    /// Sup-norm bound `B` on `|F0|` over all ensembles; finite for bounded
    /// neurons, used by the Holley-Stroock LSI lower bound.
    pub fn f0_sup_bound(&self) -> f64 {
        match self.neuron.output_bound() {
            Some(b_h) => self.loss.sup_bound(b_h, self.data.max_abs_label()),
            None => f64::INFINITY,
        }
    }
}

/// Cached mean-field predictions `h_mu(z_j)` over the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub values: Vec<f64>,
}

/// Per-datapoint loss-derivative weights defining a first variation.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationWeights {
    pub w: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{tag, Streams};

    fn tanh_spec_1d(loss: Loss, pairs: &[(f64, f64)], lambda: f64, lp: f64) -> ProblemSpec {
        let data = Dataset::new(
            pairs.iter().map(|(z, y)| DataPoint { z: vec![*z], y: *y }).collect(),
        )
        .unwrap();
        ProblemSpec::new(Neuron::TanhLinear, loss, data, lambda, lp).unwrap()
    }

    fn random_ensemble(s: &Streams, run: u64, n: usize, d: usize, scale: f64) -> Ensemble {
        let coords = (0..n * d)
            .map(|i| scale * s.normal(tag::ORACLE, run, i as u64, 0))
            .collect();
        Ensemble::from_flat(d, coords).unwrap()
    }

    #[test]
    fn neuron_eval_zero_weight_is_zero() {
        let spec = tanh_spec_1d(Loss::Squared, &[(1.0, 0.0)], 1.0, 1.0);
        assert_eq!(spec.neuron_eval(&[0.0], &[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn neuron_eval_saturates_within_bound() {
        let data = Dataset::from_pairs(&[(&[1.0, 0.0], 0.0)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhLinear, Loss::Squared, data, 1.0, 1.0).unwrap();
        let v = spec.neuron_eval(&[1e6, 0.0], &[1.0, 0.0]).unwrap();
        assert!(v > 0.999 && v <= 1.0);
    }

    #[test]
    fn gated_neuron_with_zero_inner_weights_is_zero() {
        let data = Dataset::from_pairs(&[(&[2.0], 0.0)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhGated, Loss::Squared, data, 1.0, 1.0).unwrap();
        assert_eq!(spec.neuron_eval(&[1.0, 0.0], &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn neuron_eval_rejects_dimension_mismatch() {
        let spec = tanh_spec_1d(Loss::Squared, &[(1.0, 0.0)], 1.0, 1.0);
        assert!(matches!(
            spec.neuron_eval(&[0.0, 1.0], &[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predict_degenerate_ensemble_equals_single_neuron() {
        let spec = tanh_spec_1d(Loss::Squared, &[(0.8, 0.0)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![0.3], vec![0.3], vec![0.3]]).unwrap();
        let h = spec.neuron.eval(&[0.3], &[0.8]);
        assert_eq!(spec.predict(&e, &[0.8]).unwrap(), h);
    }

    #[test]
    fn predict_odd_symmetry_cancels() {
        let spec = tanh_spec_1d(Loss::Squared, &[(0.8, 0.0)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![0.4], vec![-0.4]]).unwrap();
        assert!(spec.predict(&e, &[0.8]).unwrap().abs() < 1e-16);
    }

    #[test]
    fn predict_matches_compensated_summation_oracle() {
        // Independent oracle: Kahan-compensated summation of neuron outputs.
        let spec = tanh_spec_1d(Loss::Squared, &[(0.8, 0.0)], 1.0, 1.0);
        let s = Streams::new(11);
        for run in 0..5 {
            let e = random_ensemble(&s, run, 977, 1, 2.0);
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for x in e.iter() {
                let term = spec.neuron.eval(x, &[0.8]);
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            let oracle = sum / e.len() as f64;
            let got = spec.predict(&e, &[0.8]).unwrap();
            assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-3));
        }
    }

    #[test]
    fn predict_stays_within_output_bound() {
        let spec = tanh_spec_1d(Loss::Squared, &[(1.3, 0.0)], 1.0, 1.0);
        let s = Streams::new(5);
        for run in 0..20 {
            let e = random_ensemble(&s, run, 64, 1, 5.0);
            assert!(spec.predict(&e, &[1.3]).unwrap().abs() <= 1.0);
        }
    }

    #[test]
    fn risk_zero_residual_is_zero() {
        // Both particles at the exact label preimage: predictions == labels.
        let z = 1.0;
        let y = 0.5f64;
        let x = y.atanh() / z;
        let spec = tanh_spec_1d(Loss::Squared, &[(z, y)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![x], vec![x]]).unwrap();
        assert!(spec.risk(&e).unwrap() < 1e-28);
    }

    #[test]
    fn risk_single_point_half() {
        let spec = tanh_spec_1d(Loss::Squared, &[(1.0, 1.0)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(spec.risk(&e).unwrap(), 0.5);
    }

    #[test]
    fn logistic_risk_at_zero_prediction_is_ln2() {
        let spec = tanh_spec_1d(Loss::Logistic, &[(1.0, 1.0), (0.5, -1.0)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![0.0]]).unwrap();
        assert!((spec.risk(&e).unwrap() - 2.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn energy_reduces_to_risk_and_norm_terms() {
        // lambda' = 1, linear loss with y = 0 gives F0 == 0, so the energy is
        // the mean squared norm: a single particle at (3, 4) scores 25.
        let data = Dataset::from_pairs(&[(&[1.0, 0.0], 0.0)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhLinear, Loss::Linear, data, 1.0, 1.0).unwrap();
        let e = Ensemble::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(spec.energy(&e).unwrap(), 25.0);
        let origin = Ensemble::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(spec.energy(&origin).unwrap(), spec.risk(&origin).unwrap());
    }

    #[test]
    fn linear_loss_variation_is_ensemble_free() {
        let spec = tanh_spec_1d(Loss::Linear, &[(0.7, 1.0), (-0.3, -1.0)], 1.0, 1.0);
        let s = Streams::new(3);
        let x = [0.9];
        let v0 = spec
            .first_variation(&random_ensemble(&s, 0, 8, 1, 1.0), &x, Functional::RiskOnly)
            .unwrap();
        for run in 1..10 {
            let e = random_ensemble(&s, run, 5 + run as usize, 1, 1.5);
            let v = spec.first_variation(&e, &x, Functional::RiskOnly).unwrap();
            assert_eq!(v, v0);
        }
        // And it equals (1/n) sum y_j h(x, z_j) directly.
        let expect = 0.5 * (1.0 * (0.7f64 * 0.9).tanh() + -(-0.3f64 * 0.9).tanh());
        assert!((v0 - expect).abs() < 1e-15);
    }

    /// Mixture finite-difference oracle: (F0((1-eps) mu + eps delta_x) -
    /// F0(mu)) / eps approximates <dF0/dmu, delta_x - mu> to O(eps).
    #[test]
    fn first_variation_matches_mixture_finite_difference() {
        let spec = tanh_spec_1d(Loss::Squared, &[(0.9, 0.4), (-0.5, -0.2)], 1.0, 1.0);
        let s = Streams::new(17);
        let eps = 1e-4;
        for run in 0..10 {
            let e = random_ensemble(&s, run, 6, 1, 1.0);
            let x = [s.normal(tag::ORACLE, 100 + run, 0, 0)];
            // Mixture risk via mixed predictions.
            let pred = spec.predictions(&e).unwrap();
            let mixed: Vec<f64> = pred
                .values
                .iter()
                .zip(spec.data.iter())
                .map(|(a, p)| (1.0 - eps) * a + eps * spec.neuron.eval(&x, &p.z))
                .collect();
            let f_mix = mixed
                .iter()
                .zip(spec.data.iter())
                .map(|(a, p)| spec.loss.value(*a, p.y))
                .sum::<f64>()
                / spec.data.len() as f64;
            let fd = (f_mix - spec.risk_from(&pred)) / eps;

            let dv_x = spec.first_variation(&e, &x, Functional::RiskOnly).unwrap();
            let dv_mean: f64 = e
                .iter()
                .map(|p| spec.first_variation(&e, p, Functional::RiskOnly).unwrap())
                .sum::<f64>()
                / e.len() as f64;
            assert!(
                (fd - (dv_x - dv_mean)).abs() < 20.0 * eps,
                "run {run}: fd {fd} vs variation {}",
                dv_x - dv_mean
            );
        }
    }

    #[test]
    fn perfect_fit_has_zero_variation() {
        let z = 1.0;
        let y = 0.5f64;
        let x = y.atanh() / z;
        let spec = tanh_spec_1d(Loss::Squared, &[(z, y)], 1.0, 1.0);
        let e = Ensemble::from_rows(&[vec![x]]).unwrap();
        for probe in [-1.0, 0.0, 2.0] {
            assert!(spec.first_variation(&e, &[probe], Functional::RiskOnly).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_linearizes_at_origin() {
        // tanh-linear at x = 0 with a single residual r: gradient = r * z.
        let spec = tanh_spec_1d(Loss::Squared, &[(0.8, 0.4)], 1.0, 0.25);
        let e = Ensemble::from_rows(&[vec![0.0]]).unwrap();
        let g = spec.wasserstein_gradient(&e, &[0.0]).unwrap();
        let r = 0.0 - 0.4; // prediction minus label
        assert!((g[0] - r * 0.8).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_pure_quadratic_is_contraction_drift() {
        let data = Dataset::from_pairs(&[(&[1.0], 0.0)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhLinear, Loss::Linear, data, 1.0, 0.7).unwrap();
        let e = Ensemble::from_rows(&[vec![0.5]]).unwrap();
        let g = spec.wasserstein_gradient(&e, &[1.3]).unwrap();
        assert!((g[0] - 2.0 * 0.7 * 1.3).abs() < 1e-15);
    }

    /// Central finite differences of the first variation against the
    /// analytic Wasserstein gradient, 100 probes, tolerance 1e-6.
    #[test]
    fn gradient_matches_finite_differences() {
        let specs = [
            tanh_spec_1d(Loss::Squared, &[(0.9, 0.4), (-0.5, -0.2), (0.3, 0.1)], 0.5, 0.25),
            tanh_spec_1d(Loss::Logistic, &[(0.9, 1.0), (-0.5, -1.0)], 0.5, 0.25),
        ];
        let s = Streams::new(23);
        let h = 1e-5;
        for (si, spec) in specs.iter().enumerate() {
            for probe in 0..50u64 {
                let e = random_ensemble(&s, 1000 + probe, 7, 1, 1.2);
                let x = [1.5 * s.normal(tag::ORACLE, si as u64, probe, 1)];
                let g = spec.wasserstein_gradient(&e, &x).unwrap();
                let fp = spec.first_variation(&e, &[x[0] + h], Functional::Full).unwrap();
                let fm = spec.first_variation(&e, &[x[0] - h], Functional::Full).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!((g[0] - fd).abs() < 1e-6, "spec {si} probe {probe}: {} vs {}", g[0], fd);
            }
        }
    }

    #[test]
    fn gated_gradient_matches_finite_differences() {
        let data = Dataset::from_pairs(&[(&[0.8], 0.3), (&[-0.4], -0.1)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhGated, Loss::Squared, data, 0.5, 0.25).unwrap();
        let s = Streams::new(29);
        let h = 1e-5;
        for probe in 0..40u64 {
            let e = random_ensemble(&s, probe, 5, 2, 1.0);
            let x = [s.normal(tag::ORACLE, probe, 0, 2), s.normal(tag::ORACLE, probe, 1, 2)];
            let g = spec.wasserstein_gradient(&e, &x).unwrap();
            for c in 0..2 {
                let mut xp = x;
                xp[c] += h;
                let mut xm = x;
                xm[c] -= h;
                let fd = (spec.first_variation(&e, &xp, Functional::Full).unwrap()
                    - spec.first_variation(&e, &xm, Functional::Full).unwrap())
                    / (2.0 * h);
                assert!((g[c] - fd).abs() < 1e-6);
            }
        }
    }

    /// Assumption witness: loss(b) - loss(a) - loss'(a)(b-a) <= L/2 (b-a)^2.
    #[test]
    fn smoothness_witness_holds_on_probe_grid() {
        let s = Streams::new(31);
        for (loss, labels) in
            [(Loss::Squared, [0.7, -1.3]), (Loss::Logistic, [1.0, -1.0]), (Loss::Linear, [0.4, 2.0])]
        {
            let l = loss.smoothness();
            for i in 0..2000u64 {
                let a = 3.0 * s.normal(tag::ORACLE, i, 0, 10);
                let b = 3.0 * s.normal(tag::ORACLE, i, 1, 10);
                for y in labels {
                    let lhs = loss.value(b, y) - loss.value(a, y) - loss.deriv(a, y) * (b - a);
                    assert!(lhs <= 0.5 * l * (b - a) * (b - a) + 1e-12);
                    // convexity: lower linearization
                    assert!(lhs >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn m1_surrogate_dominates_observed_gradients() {
        let spec = tanh_spec_1d(Loss::Squared, &[(0.9, 0.4), (-0.5, -0.2)], 0.5, 0.25);
        let s = Streams::new(37);
        let m1 = spec.m1_global().unwrap();
        for run in 0..30 {
            let e = random_ensemble(&s, run, 8, 1, 2.0);
            let x = [3.0 * s.normal(tag::ORACLE, run, 7, 7)];
            let weights = spec.variation_weights(&spec.predictions(&e).unwrap());
            let mut g = vec![0.0; 1];
            // Risk part only: gradient minus the quadratic drift.
            spec.gradient_at(&weights, &x, &mut g);
            let risk_part = g[0] - 2.0 * spec.lambda_prime * x[0];
            assert!(risk_part.abs() <= m1 + 1e-12);
        }
    }

    #[test]
    fn dataset_validation_and_logistic_labels() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
        let data = Dataset::from_pairs(&[(&[1.0], 0.3)]).unwrap();
        assert!(ProblemSpec::new(Neuron::TanhLinear, Loss::Logistic, data, 1.0, 1.0).is_err());
    }

    #[test]
    fn ensemble_rejects_nonfinite_and_empty() {
        assert!(Ensemble::from_flat(1, vec![f64::NAN]).is_err());
        assert!(Ensemble::from_flat(2, vec![1.0]).is_err());
        assert!(Ensemble::from_rows(&[]).is_err());
    }
}
