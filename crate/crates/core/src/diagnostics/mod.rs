//! Divergences, densities, and identity checks: Bregman divergence,
//! proximal and N-particle Gibbs log-densities, the bridge identity between
//! them, Gaussian closed-form oracles, k-NN KL and exact-assignment W2
//! estimators, and Monte-Carlo verification of the objective-gap
//! identities, the KL upper bound, and the variance argument.

pub mod gauss;
pub mod gibbs;
pub mod knn;
pub mod mc;
pub mod measure;
pub mod quad;
pub mod sampler;
pub mod transport;

pub use gauss::AnalyticGaussian;
pub use gibbs::{
    bridge_residual, n_particle_gibbs_logdensity, proximal_gibbs_logdensity, ProximalGibbs,
};
pub use knn::{kl_knn, KnnKl, DEFAULT_K};
pub use mc::{
    bregman_mc_bound, prop1_gap_check, prop1_gap_check_closed, prop2_inequality_check,
    variance_bound_mc, BregmanMcReport, GapReport, Prop1Report, Prop2Report, VarianceBoundReport,
};
pub use measure::{bregman, bregman_ensembles, MeasureStats};
pub use sampler::{GaussianSampler, GridRejectionSampler, PointSampler, PoolSampler};
pub use transport::{w2_empirical, w2_empirical_sq, SIZE_CAP};
