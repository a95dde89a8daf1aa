//! Gibbs log-densities and the bridge identity.
//!
//! The proximal Gibbs distribution of a base measure `mu` has unnormalized
//! log-density `-(1/lambda) dF(mu)/dmu (x)`; the stationary law of the
//! N-particle system has log-density `-(N/lambda) F(x)` on the product
//! space. Expanding `F` around `mu` ties the two together through the
//! Bregman divergence: for any probe ensemble `x`,
//!
//! `-(N/lambda) F(x) + (N/lambda) B_F(mu_x, mu) - sum_i log-density_hat(x^i)`
//!
//! is a constant independent of the probe. `bridge_residual` measures the
//! spread of that expression over probes; it vanishes to rounding for every
//! spec, base measure, and probe set.

use crate::diagnostics::gauss::AnalyticGaussian;
use crate::diagnostics::measure::{bregman, MeasureStats};
use crate::diagnostics::quad;
use crate::model::{Ensemble, Neuron, ProblemSpec, VariationWeights};
use crate::{Error, Result};

/// Truncation exponent: the quadratic tail at the box edge is below
/// `exp(-45)` of the bounded part's peak, far under the 1e-10 target.
const TAIL_EXPONENT: f64 = 45.0;

/// Proximal Gibbs distribution of a base measure, represented by the base's
/// loss-derivative weights. Normalizable by quadrature in d <= 2.
#[derive(Debug, Clone)]
pub struct ProximalGibbs {
    spec: ProblemSpec,
    weights: VariationWeights,
    /// Effective coefficient of `||x||^2` in the potential; `lambda'` plus
    /// the folded quadratic-feature term when the neuron is quadratic.
    quad_coeff: f64,
    /// Sup-norm of the bounded (tanh) part of the potential; zero for the
    /// quadratic feature.
    bounded_sup: f64,
    log_partition: Option<f64>,
}

impl ProximalGibbs {
    pub fn new(spec: &ProblemSpec, base: &MeasureStats) -> Result<Self> {
        let weights = base.weights(spec);
        let (quad_coeff, bounded_sup) = match spec.neuron {
            Neuron::Quadratic { c, .. } => {
                let q = spec.lambda_prime + c * weights.w.iter().sum::<f64>();
                if q.is_nan() || q <= 0.0 {
                    return Err(Error::InvalidParam(format!(
                        "proximal Gibbs potential is not confining: quadratic coefficient {q}"
                    )));
                }
                (q, 0.0)
            }
            _ => {
                let b_h = spec.neuron.output_bound().unwrap_or(f64::INFINITY);
                (spec.lambda_prime, weights.w.iter().map(|w| w.abs() * b_h).sum())
            }
        };
        Ok(ProximalGibbs {
            spec: spec.clone(),
            weights,
            quad_coeff,
            bounded_sup,
            log_partition: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.param_dim()
    }

    pub fn log_partition(&self) -> Option<f64> {
        self.log_partition
    }

    /// The potential `dF(mu)/dmu (x) = sum_j w_j h(x, z_j) + lambda' ||x||^2`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        self.spec.first_variation_at(&self.weights, x, crate::model::Functional::Full)
    }

    /// Unnormalized log-density `-(1/lambda) dF(mu)/dmu (x)`.
    pub fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        -self.potential(x) / self.spec.lambda
    }

    /// Normalized log-density; requires `normalize` to have run.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let z = self.log_partition.ok_or(Error::Quadrature("density not normalized".into()))?;
        Ok(self.log_density_unnorm(x) - z)
    }

    /// When the potential is purely quadratic (quadratic feature, or a tanh
    /// family whose weights all vanish), the density is the centered
    /// Gaussian with per-coordinate variance `lambda / (2 q)`.
    pub fn as_gaussian(&self) -> Option<AnalyticGaussian> {
        let quadratic_only = matches!(self.spec.neuron, Neuron::Quadratic { .. })
            || self.weights.w.iter().all(|w| *w == 0.0);
        if quadratic_only {
            let v = self.spec.lambda / (2.0 * self.quad_coeff);
            Some(AnalyticGaussian::isotropic(self.dim(), v.sqrt()).expect("v > 0"))
        } else {
            None
        }
    }

    /// Half-width of the truncation box per coordinate.
    pub fn box_halfwidth(&self) -> f64 {
        ((TAIL_EXPONENT * self.spec.lambda + 2.0 * self.bounded_sup) / self.quad_coeff).sqrt()
    }

    /// Attach the quadrature log-partition `log Z`. Closed form in the pure
    /// Gaussian case; adaptive trapezoid otherwise, with an independent
    /// residual check `|int exp(logdens - log Z) - 1| < 1e-6`.
    pub fn normalize(&mut self) -> Result<f64> {
        if let Some(g) = self.as_gaussian() {
            // int exp(-q ||x||^2 / lambda) dx = (pi lambda / q)^{d/2}
            let d = self.dim() as f64;
            let z = 0.5 * d * (std::f64::consts::PI * self.spec.lambda / self.quad_coeff).ln();
            let _ = g;
            self.log_partition = Some(z);
            return Ok(z);
        }
        let d = self.dim();
        if d > 2 {
            return Err(Error::DimensionTooHigh(d));
        }
        let t = self.box_halfwidth();
        // Shift by the peak of the bounded part so exp stays in range.
        let shift = self.bounded_sup / self.spec.lambda;
        let mass = match d {
            1 => quad::integrate_1d(
                |x| (self.log_density_unnorm(&[x]) - shift).exp(),
                -t,
                t,
                quad::DEFAULT_REL_TOL,
                0.0,
            )?,
            _ => quad::integrate_2d(
                |x, y| (self.log_density_unnorm(&[x, y]) - shift).exp(),
                (-t, -t),
                (t, t),
                1e-9,
                0.0,
            )?,
        };
        if mass.is_nan() || mass <= 0.0 || !mass.is_finite() {
            return Err(Error::Quadrature(format!("partition mass {mass}")));
        }
        let z = mass.ln() + shift;
        // Independent residual check on a fixed fine grid.
        let residual = (self.mass_on_grid(z, 4096)? - 1.0).abs();
        if residual >= 1e-6 {
            return Err(Error::Quadrature(format!("normalization residual {residual}")));
        }
        self.log_partition = Some(z);
        Ok(z)
    }

    fn mass_on_grid(&self, log_z: f64, cells: usize) -> Result<f64> {
        let t = self.box_halfwidth();
        let d = self.dim();
        match d {
            1 => {
                let h = 2.0 * t / cells as f64;
                let mut s = 0.0;
                for i in 0..=cells {
                    let w = if i == 0 || i == cells { 0.5 } else { 1.0 };
                    s += w * (self.log_density_unnorm(&[-t + i as f64 * h]) - log_z).exp();
                }
                Ok(s * h)
            }
            2 => {
                let n = 512;
                let h = 2.0 * t / n as f64;
                let mut s = 0.0;
                for i in 0..=n {
                    let wx = if i == 0 || i == n { 0.5 } else { 1.0 };
                    let x = -t + i as f64 * h;
                    for j in 0..=n {
                        let wy = if j == 0 || j == n { 0.5 } else { 1.0 };
                        s += wx * wy * (self.log_density_unnorm(&[x, -t + j as f64 * h]) - log_z).exp();
                    }
                }
                Ok(s * h * h)
            }
            d => Err(Error::DimensionTooHigh(d)),
        }
    }

    /// `E_hat[f]` by quadrature against the normalized density.
    pub fn expectation<F: Fn(&[f64]) -> f64 + Copy>(&self, f: F) -> Result<f64> {
        let z = self.log_partition.ok_or(Error::Quadrature("density not normalized".into()))?;
        let t = self.box_halfwidth();
        match self.dim() {
            1 => quad::integrate_1d(
                |x| f(&[x]) * (self.log_density_unnorm(&[x]) - z).exp(),
                -t,
                t,
                1e-9,
                1.0,
            ),
            2 => quad::integrate_2d(
                |x, y| f(&[x, y]) * (self.log_density_unnorm(&[x, y]) - z).exp(),
                (-t, -t),
                (t, t),
                1e-9,
                1.0,
            ),
            d => Err(Error::DimensionTooHigh(d)),
        }
    }

    /// Negative entropy `Ent(hat mu) = E_hat[ln density]`.
    pub fn neg_entropy(&self) -> Result<f64> {
        if let (Some(g), Some(_)) = (self.as_gaussian(), self.log_partition) {
            return Ok(g.neg_entropy());
        }
        let z = self.log_partition.ok_or(Error::Quadrature("density not normalized".into()))?;
        self.expectation(|x| self.log_density_unnorm(x) - z)
    }

    /// `KL(rho || hat mu)` for a diagonal Gaussian `rho`:
    /// `Ent(rho) + (1/lambda) E_rho[potential] + log Z`.
    pub fn kl_from_gaussian(&self, rho: &AnalyticGaussian) -> Result<f64> {
        let z = self.log_partition.ok_or(Error::Quadrature("density not normalized".into()))?;
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        let cross = match self.spec.neuron {
            Neuron::Quadratic { .. } => self.quad_coeff * rho.mean_sq_norm(),
            _ => {
                let mut lin = 0.0;
                for (w, p) in self.weights.w.iter().zip(self.spec.data.iter()) {
                    if *w != 0.0 {
                        lin += w
                            * quad::gaussian_expect(rho, |x| self.spec.neuron.eval(x, &p.z))?;
                    }
                }
                lin + self.spec.lambda_prime * rho.mean_sq_norm()
            }
        };
        Ok(rho.neg_entropy() + cross / self.spec.lambda + z)
    }

    pub(crate) fn weights(&self) -> &VariationWeights {
        &self.weights
    }

    pub(crate) fn quad_coeff(&self) -> f64 {
        self.quad_coeff
    }

    pub(crate) fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
}

/// Convenience op: unnormalized proximal Gibbs log-density of an ensemble
/// base at a point.
pub fn proximal_gibbs_logdensity(
    spec: &ProblemSpec,
    base: &MeasureStats,
    x: &[f64],
) -> Result<f64> {
    if x.len() != spec.param_dim() {
        return Err(Error::DimensionMismatch { expected: spec.param_dim(), got: x.len() });
    }
    Ok(ProximalGibbs::new(spec, base)?.log_density_unnorm(x))
}

/// Unnormalized log-density of the N-particle stationary Gibbs measure at
/// the point `x = ens`: `-(N/lambda) F(ens)`.
pub fn n_particle_gibbs_logdensity(spec: &ProblemSpec, ens: &Ensemble) -> Result<f64> {
    let n = ens.len() as f64;
    Ok(-(n / spec.lambda) * spec.energy(ens)?)
}

/// Spread (max - min) over probes of the bridge expression; zero up to
/// rounding because the unnormalized constants cancel probe-independently.
pub fn bridge_residual(
    spec: &ProblemSpec,
    base: &MeasureStats,
    probes: &[Ensemble],
) -> Result<f64> {
    if probes.len() < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: probes.len() });
    }
    let gibbs = ProximalGibbs::new(spec, base)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for probe in probes {
        let n = probe.len() as f64;
        let stats = MeasureStats::from_ensemble(spec, probe)?;
        let b = bregman(spec, &stats, base)?;
        let prox_sum: f64 = probe.iter().map(|x| gibbs.log_density_unnorm(x)).sum();
        let r = n_particle_gibbs_logdensity(spec, probe)? + (n / spec.lambda) * b - prox_sum;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, Loss};
    use crate::rng::{tag, Streams};

    fn squared_spec() -> ProblemSpec {
        let data = Dataset::from_pairs(&[(&[0.9], 0.4), (&[-0.6], -0.1)]).unwrap();
        ProblemSpec::new(Neuron::TanhLinear, Loss::Squared, data, 0.5, 0.25).unwrap()
    }

    fn quadratic_spec(c: f64, lambda: f64, lp: f64) -> ProblemSpec {
        let data = Dataset::from_pairs(&[(&[0.0], 1.0)]).unwrap();
        ProblemSpec::new(Neuron::Quadratic { c, dim: 1 }, Loss::Linear, data, lambda, lp).unwrap()
    }

    fn random_ensemble(s: &Streams, run: u64, n: usize, d: usize) -> Ensemble {
        Ensemble::from_flat(
            d,
            (0..n * d).map(|i| 1.2 * s.normal(tag::ORACLE, run, i as u64, 3)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_feature_density_is_the_advertised_gaussian() {
        // f = c ||x||^2 with linear loss: variance lambda / (2 (c + lambda')).
        let (c, lambda, lp) = (1.0, 0.5, 0.5);
        let spec = quadratic_spec(c, lambda, lp);
        let base = MeasureStats { predictions: vec![0.0], mean_sq_norm: 0.0 };
        let mut g = ProximalGibbs::new(&spec, &base).unwrap();
        g.normalize().unwrap();
        let gauss = g.as_gaussian().unwrap();
        let expect = lambda / (2.0 * (c + lp));
        assert!((gauss.var[0] - expect).abs() < 1e-15);
        // log-density matches the Gaussian closed form pointwise.
        for x in [-1.0, -0.3, 0.0, 0.7, 2.1] {
            let ld = g.log_density(&[x]).unwrap();
            assert!((ld - gauss.log_density(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_risk_part_leaves_pure_quadratic_shape() {
        // Linear loss with zero labels: density proportional to
        // exp(-lambda' ||x||^2 / lambda).
        let data = Dataset::from_pairs(&[(&[0.9], 0.0)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhLinear, Loss::Linear, data, 0.5, 0.25).unwrap();
        let base = MeasureStats { predictions: vec![0.0], mean_sq_norm: 1.0 };
        let g = ProximalGibbs::new(&spec, &base).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.0, 3.0] {
            let expect = -0.25 * x * x / 0.5;
            assert!((g.log_density_unnorm(&[x]) - expect).abs() < 1e-15);
        }
    }

    /// Self-consistency at the linear-case optimum: the proximal Gibbs of
    /// the analytic solution reproduces that solution's log-density up to a
    /// constant over a probe grid.
    #[test]
    fn linear_case_fixed_point_is_pointwise_consistent() {
        let (c, lambda, lp) = (1.0, 0.5, 0.5);
        let spec = quadratic_spec(c, lambda, lp);
        let var = lambda / (2.0 * (c + lp));
        let star = AnalyticGaussian::isotropic(1, var.sqrt()).unwrap();
        let stats = MeasureStats::from_gaussian(&spec, &star).unwrap();
        let mut g = ProximalGibbs::new(&spec, &stats).unwrap();
        g.normalize().unwrap();
        let mut deviations = Vec::new();
        for i in 0..101 {
            let x = -3.0 + 0.06 * i as f64;
            deviations.push(g.log_density(&[x]).unwrap() - star.log_density(&[x]));
        }
        let (lo, hi) = deviations
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(*d), h.max(*d)));
        assert!(hi - lo < 1e-9, "spread {}", hi - lo);
    }

    #[test]
    fn tanh_density_normalizes_with_small_residual() {
        let spec = squared_spec();
        let s = Streams::new(8);
        let base =
            MeasureStats::from_ensemble(&spec, &random_ensemble(&s, 0, 8, 1)).unwrap();
        let mut g = ProximalGibbs::new(&spec, &base).unwrap();
        let z = g.normalize().unwrap();
        assert!(z.is_finite());
        // expectation of 1 under the normalized density
        let one = g.expectation(|_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-7, "{one}");
    }

    #[test]
    fn normalization_rejects_high_dimension() {
        let data = Dataset::from_pairs(&[(&[0.3, 0.1, -0.2], 0.4)]).unwrap();
        let spec = ProblemSpec::new(Neuron::TanhLinear, Loss::Squared, data, 0.5, 0.25).unwrap();
        let base = MeasureStats { predictions: vec![0.1], mean_sq_norm: 1.0 };
        let mut g = ProximalGibbs::new(&spec, &base).unwrap();
        assert!(matches!(g.normalize(), Err(Error::DimensionTooHigh(3))));
    }

    #[test]
    fn n_particle_logdensity_spot_values() {
        let spec = squared_spec();
        // All particles at the origin: F = F0(origin) and the value is
        // -N F0(0) / lambda.
        let e = Ensemble::from_rows(&[vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let f0 = spec.risk(&e).unwrap();
        let v = n_particle_gibbs_logdensity(&spec, &e).unwrap();
        assert!((v - (-3.0 * f0 / spec.lambda)).abs() < 1e-15);
        // Doubling lambda halves the magnitude.
        let mut spec2 = spec.clone();
        spec2.lambda *= 2.0;
        let v2 = n_particle_gibbs_logdensity(&spec2, &e).unwrap();
        assert!((v2 - v / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_particle_linear_case_coincides_with_proximal() {
        // N = 1 and linear loss: -(1/lambda) F(x) equals the proximal Gibbs
        // log-density of any base measure (the variation is base-free).
        let spec = quadratic_spec(0.8, 0.5, 0.25);
        let base = MeasureStats { predictions: vec![0.3], mean_sq_norm: 0.7 };
        for x in [-1.5, 0.0, 0.4, 2.2] {
            let e = Ensemble::from_rows(&[vec![x]]).unwrap();
            let npg = n_particle_gibbs_logdensity(&spec, &e).unwrap();
            let prox = proximal_gibbs_logdensity(&spec, &base, &[x]).unwrap();
            assert!((npg - prox).abs() < 1e-14);
        }
    }

    #[test]
    fn bridge_residual_vanishes_for_random_draws() {
        let specs = [squared_spec(), {
            let data = Dataset::from_pairs(&[(&[0.9], 1.0), (&[-0.6], -1.0)]).unwrap();
            ProblemSpec::new(Neuron::TanhLinear, Loss::Logistic, data, 0.3, 0.2).unwrap()
        }];
        let s = Streams::new(9);
        for (si, spec) in specs.iter().enumerate() {
            for run in 0..10 {
                let base = MeasureStats::from_ensemble(
                    spec,
                    &random_ensemble(&s, 50 + run, 6, 1),
                )
                .unwrap();
                let probes: Vec<Ensemble> =
                    (0..5).map(|p| random_ensemble(&s, 1000 + 10 * run + p, 8, 1)).collect();
                let r = bridge_residual(spec, &base, &probes).unwrap();
                assert!(r < 1e-9, "spec {si} run {run}: residual {r}");
            }
        }
    }

    #[test]
    fn bridge_residual_linear_case_is_tight() {
        let spec = quadratic_spec(1.0, 0.5, 0.5);
        let s = Streams::new(10);
        let base = MeasureStats { predictions: vec![0.4], mean_sq_norm: 0.4 };
        let probes: Vec<Ensemble> = (0..6).map(|p| random_ensemble(&s, p, 4, 1)).collect();
        let r = bridge_residual(&spec, &base, &probes).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn bridge_requires_two_probes() {
        let spec = squared_spec();
        let s = Streams::new(11);
        let base = MeasureStats::from_ensemble(&spec, &random_ensemble(&s, 0, 4, 1)).unwrap();
        let one = vec![random_ensemble(&s, 1, 4, 1)];
        assert!(matches!(
            bridge_residual(&spec, &base, &one),
            Err(Error::InsufficientSamples { need: 2, got: 1 })
        ));
    }

    #[test]
    fn gaussian_base_bridge_is_exact_too() {
        let spec = squared_spec();
        let g = AnalyticGaussian::new(vec![0.2], vec![0.6]).unwrap();
        let base = MeasureStats::from_gaussian(&spec, &g).unwrap();
        let s = Streams::new(12);
        let probes: Vec<Ensemble> = (0..4).map(|p| random_ensemble(&s, 30 + p, 5, 1)).collect();
        let r = bridge_residual(&spec, &base, &probes).unwrap();
        assert!(r < 1e-9, "residual {r}");
    }

    #[test]
    fn kl_from_gaussian_agrees_with_closed_form_in_gaussian_case() {
        // Pure quadratic potential: hat mu is Gaussian, so the quadrature KL
        // must match the two-Gaussian closed form.
        let spec = quadratic_spec(1.0, 0.5, 0.5);
        let base = MeasureStats { predictions: vec![0.0], mean_sq_norm: 0.0 };
        let mut g = ProximalGibbs::new(&spec, &base).unwrap();
        g.normalize().unwrap();
        let hat = g.as_gaussian().unwrap();
        let rho = AnalyticGaussian::new(vec![0.3], vec![0.2]).unwrap();
        let kl_quad = g.kl_from_gaussian(&rho).unwrap();
        let kl_closed = rho.kl(&hat).unwrap();
        assert!((kl_quad - kl_closed).abs() < 1e-10, "{kl_quad} vs {kl_closed}");
    }

    #[test]
    fn entropy_of_normalized_tanh_density_matches_direct_grid() {
        let spec = squared_spec();
        let base = MeasureStats { predictions: vec![0.3, -0.2], mean_sq_norm: 0.8 };
        let mut g = ProximalGibbs::new(&spec, &base).unwrap();
        g.normalize().unwrap();
        let ent = g.neg_entropy().unwrap();
        // Direct fixed-grid evaluation as an independent check.
        let t = g.box_halfwidth();
        let n = 60_000;
        let h = 2.0 * t / n as f64;
        let z = g.log_partition().unwrap();
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let x = -t + i as f64 * h;
            let ld = g.log_density_unnorm(&[x]) - z;
            s += w * ld.exp() * ld;
        }
        let direct = s * h;
        assert!((ent - direct).abs() < 1e-7, "{ent} vs {direct}");
    }
}
