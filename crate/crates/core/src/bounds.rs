//! Pure calculators for the explicit constants and rate formulas: the
//! LSI-constant-free particle approximation error `L R^2 / (2N)`, the prior
//! `lambda C / (alpha N)` rates it improves on, the time-discretization
//! penalties `delta_eta^N` and `delta_eta`, the Holley-Stroock LSI lower
//! bound, and the convergence/propagation-of-chaos envelope curves used as
//! overlays against measurements.
//!
//! Prior-work constants `C`, `C1`, `C2` are never synthesized here: the
//! source material leaves them abstract, so they are explicit inputs
//! (defaulting to 1) and every emitted table carries them verbatim.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Every scalar needed by some bound formula. Optional fields are only
/// required by the envelope kinds that reference them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub lambda: f64,
    pub lambda_prime: f64,
    pub eta: f64,
    pub n: usize,
    pub dim: usize,
    /// Loss smoothness constant L.
    pub smoothness: f64,
    /// Second-moment bound R on the neuron output under the optimum.
    pub r_bound: f64,
    pub m1: f64,
    pub m2: f64,
    /// Uniform (proximal-Gibbs) LSI constant; user-supplied, exact in the
    /// strongly log-concave linear case.
    pub alpha: Option<f64>,
    /// N-particle stationary LSI constant, or its Holley-Stroock lower bound.
    pub alpha_bar: Option<f64>,
    /// Sup-norm bound B on |F0| over ensembles.
    pub f0_sup: Option<f64>,
    /// Initial objective gaps.
    pub delta0_n: Option<f64>,
    pub delta0: Option<f64>,
    /// Per-particle initial second moment E||X_0^i||^2. (The N-particle and
    /// mean-field formulas consume E||X_0||^2/N and E||X_0||^2 respectively;
    /// under i.i.d. initialization both equal this value.)
    pub init_second_moment: f64,
    /// Prior-work constants, user-supplied, default 1.
    pub c_prior: f64,
    pub c1_prior: f64,
    pub c2_prior: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_prime", self.lambda_prime),
            ("smoothness", self.smoothness),
            ("m1", self.m1),
            ("m2", self.m2),
            ("eta", self.eta),
            ("init_second_moment", self.init_second_moment),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::InvalidParam(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.lambda == 0.0 || self.lambda_prime == 0.0 {
            return Err(Error::InvalidParam("lambda and lambda_prime must be positive".into()));
        }
        if self.eta * self.lambda_prime >= 0.5 {
            return Err(Error::StepSizeTooLarge(self.eta * self.lambda_prime));
        }
        if self.n == 0 {
            return Err(Error::InvalidParam("particle count must be >= 1".into()));
        }
        Ok(())
    }
}

/// The headline particle approximation error `L R^2 / (2N)`. Free of every
/// LSI constant and of lambda; exactly zero for the linear loss.
pub fn new_poc_bound(smoothness: f64, r_bound: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    if smoothness == 0.0 {
        return Ok(0.0);
    }
    Ok(smoothness * r_bound * r_bound / (2.0 * n as f64))
}

/// Prior stationary particle error `lambda C / (alpha N)`.
pub fn prior_poc_bound(lambda: f64, alpha: f64, n: usize, c: f64) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidParam(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(lambda * c / (alpha * n as f64))
}

/// Prior discrete-time rate:
/// `exp(-lambda alpha eta k / 2) Delta0^N + (lambda eta + eta^2) C1 / (lambda alpha)
///  + lambda C2 / (alpha N)`.
#[allow(clippy::too_many_arguments)]
pub fn prior_discrete_bound(
    lambda: f64,
    alpha: f64,
    eta: f64,
    k: f64,
    n: usize,
    c1: f64,
    c2: f64,
    delta0_n: f64,
) -> Result<f64> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidParam(format!("alpha must be > 0, got {alpha}")));
    }
    Ok((-lambda * alpha * eta * k / 2.0).exp() * delta0_n
        + (lambda * eta + eta * eta) * c1 / (lambda * alpha)
        + lambda * c2 / (alpha * n as f64))
}

/// Time-discretization penalty of the N-particle system:
/// `16 eta (M2^2 + lambda'^2)(eta M1^2 + lambda d)
///  + 64 eta^2 lambda'^2 (M2^2 + lambda'^2) (E||X_0||^2/N + (M1^2/(4 lambda') + lambda d)/lambda')`.
///
/// `init_msq_per_particle` is `E||X_0||^2 / N`, the per-particle initial
/// second moment.
pub fn delta_eta_n(
    eta: f64,
    lambda: f64,
    lambda_prime: f64,
    dim: usize,
    m1: f64,
    m2: f64,
    init_msq_per_particle: f64,
) -> f64 {
    let d = dim as f64;
    let coupling = m2 * m2 + lambda_prime * lambda_prime;
    16.0 * eta * coupling * (eta * m1 * m1 + lambda * d)
        + 64.0 * eta * eta * lambda_prime * lambda_prime * coupling
            * (init_msq_per_particle
                + (m1 * m1 / (4.0 * lambda_prime) + lambda * d) / lambda_prime)
}

/// Mean-field (infinite-particle) discretization penalty:
/// `8 eta (M2^2 + lambda'^2)(2 eta M1^2 + 2 lambda d)
///  + 32 eta^2 lambda'^2 (M2^2 + lambda'^2) (E||X_0||^2 + (M1^2/(4 lambda') + lambda d)/lambda')`.
pub fn delta_eta(
    eta: f64,
    lambda: f64,
    lambda_prime: f64,
    dim: usize,
    m1: f64,
    m2: f64,
    init_msq: f64,
) -> f64 {
    let d = dim as f64;
    let coupling = m2 * m2 + lambda_prime * lambda_prime;
    8.0 * eta * coupling * (2.0 * eta * m1 * m1 + 2.0 * lambda * d)
        + 32.0 * eta * eta * lambda_prime * lambda_prime * coupling
            * (init_msq + (m1 * m1 / (4.0 * lambda_prime) + lambda * d) / lambda_prime)
}

/// Holley-Stroock lower bound on the N-particle LSI constant:
/// `(2 lambda' / lambda) exp(-4 N B / lambda)`, where B bounds |F0|. The
/// B = 0 case is the Bakry-Emery constant of the strongly log-concave part.
pub fn lsi_holley_stroock(lambda: f64, lambda_prime: f64, n: usize, f0_sup: f64) -> Result<f64> {
    if f0_sup.is_nan() || f0_sup < 0.0 {
        return Err(Error::InvalidParam(format!("|F0| bound must be >= 0, got {f0_sup}")));
    }
    Ok((2.0 * lambda_prime / lambda) * (-4.0 * n as f64 * f0_sup / lambda).exp())
}

/// Which displayed right-hand side a curve evaluates. Continuous kinds are
/// parameterized by time `t` with rate `exp(-2 alpha_bar lambda t)`; the
/// discrete kinds use iteration count `k` with rate `exp(-alpha_bar lambda
/// eta k)` (and `exp(-2 alpha lambda eta k)` for the mean-field leg). Grids
/// are labeled with the exact exponent convention in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    /// Objective gap per particle, continuous time:
    /// `LR^2/(2N) + exp(-2 alpha_bar lambda t) Delta0^N`.
    ContinuousN,
    /// Objective gap per particle, discrete time:
    /// `LR^2/(2N) + delta_eta^N/(2 alpha_bar lambda) + exp(-alpha_bar lambda eta k) Delta0^N`.
    DiscreteN,
    /// Per-marginal sampling guarantee, in KL units (the displayed bound on
    /// `lambda KL(mu_{k,1}^N || mu_*)`, divided by lambda).
    SamplingKl,
    /// Wasserstein propagation of chaos, discrete time:
    /// `(4/(alpha lambda)) (LR^2/(2N) + delta_eta^N/(2 alpha_bar lambda)
    ///  + delta_eta/(2 alpha lambda) + exp(-alpha_bar lambda eta k) Delta0^N
    ///  + exp(-2 alpha lambda eta k) Delta0)`, bounding `W_2^2 / N`.
    W2Poc,
    /// Total-variation propagation of chaos, continuous time:
    /// `(1/lambda) (LR^2/(2N) + exp(-2 alpha_bar lambda t) Delta0^N
    ///  + exp(-2 alpha lambda t) Delta0)`, bounding `TV^2 / N`.
    TvPoc,
}

impl EnvelopeKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeKind::ContinuousN => "continuous-n",
            EnvelopeKind::DiscreteN => "discrete-n",
            EnvelopeKind::SamplingKl => "sampling-kl",
            EnvelopeKind::W2Poc => "w2-poc",
            EnvelopeKind::TvPoc => "tv-poc",
        }
    }
}

/// A bound curve over a time or iteration grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub kind: EnvelopeKind,
    /// `(t_or_k, bound value)` pairs.
    pub points: Vec<(f64, f64)>,
}

fn require(v: Option<f64>, name: &'static str) -> Result<f64> {
    v.ok_or(Error::MissingConstant(name))
}

/// Evaluate the selected displayed right-hand side on a grid of `t` (for
/// continuous kinds) or `k` (for discrete kinds).
pub fn convergence_envelope(
    kind: EnvelopeKind,
    inputs: &BoundInputs,
    grid: &[f64],
) -> Result<BoundCurve> {
    inputs.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidParam("envelope grid must be nonempty".into()));
    }
    let poc = new_poc_bound(inputs.smoothness, inputs.r_bound, inputs.n)?;
    let lambda = inputs.lambda;
    let points: Result<Vec<(f64, f64)>> = grid
        .iter()
        .map(|&g| {
            let v = match kind {
                EnvelopeKind::ContinuousN => {
                    let ab = require(inputs.alpha_bar, "alpha_bar")?;
                    let d0n = require(inputs.delta0_n, "delta0_n")?;
                    poc + (-2.0 * ab * lambda * g).exp() * d0n
                }
                EnvelopeKind::DiscreteN | EnvelopeKind::SamplingKl => {
                    let ab = require(inputs.alpha_bar, "alpha_bar")?;
                    let d0n = require(inputs.delta0_n, "delta0_n")?;
                    let den = delta_eta_n(
                        inputs.eta,
                        lambda,
                        inputs.lambda_prime,
                        inputs.dim,
                        inputs.m1,
                        inputs.m2,
                        inputs.init_second_moment,
                    );
                    let gap = poc
                        + den / (2.0 * ab * lambda)
                        + (-ab * lambda * inputs.eta * g).exp() * d0n;
                    if kind == EnvelopeKind::SamplingKl {
                        gap / lambda
                    } else {
                        gap
                    }
                }
                EnvelopeKind::W2Poc => {
                    let a = require(inputs.alpha, "alpha")?;
                    let ab = require(inputs.alpha_bar, "alpha_bar")?;
                    let d0n = require(inputs.delta0_n, "delta0_n")?;
                    let d0 = require(inputs.delta0, "delta0")?;
                    let den = delta_eta_n(
                        inputs.eta,
                        lambda,
                        inputs.lambda_prime,
                        inputs.dim,
                        inputs.m1,
                        inputs.m2,
                        inputs.init_second_moment,
                    );
                    let de = delta_eta(
                        inputs.eta,
                        lambda,
                        inputs.lambda_prime,
                        inputs.dim,
                        inputs.m1,
                        inputs.m2,
                        inputs.init_second_moment,
                    );
                    (4.0 / (a * lambda))
                        * (poc
                            + den / (2.0 * ab * lambda)
                            + de / (2.0 * a * lambda)
                            + (-ab * lambda * inputs.eta * g).exp() * d0n
                            + (-2.0 * a * lambda * inputs.eta * g).exp() * d0)
                }
                EnvelopeKind::TvPoc => {
                    let a = require(inputs.alpha, "alpha")?;
                    let ab = require(inputs.alpha_bar, "alpha_bar")?;
                    let d0n = require(inputs.delta0_n, "delta0_n")?;
                    let d0 = require(inputs.delta0, "delta0")?;
                    (1.0 / lambda)
                        * (poc
                            + (-2.0 * ab * lambda * g).exp() * d0n
                            + (-2.0 * a * lambda * g).exp() * d0)
                }
            };
            Ok((g, v))
        })
        .collect();
    Ok(BoundCurve { kind, points: points? })
}
