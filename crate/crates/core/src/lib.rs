//! Exact and sampled machinery for the Ising model over ±1 variables in its
//! network, latent-variable and collider representations.
//!
//! Every representation yields a [`Pmf`] over all `2^n` configurations, so the
//! representations can be compared entry by entry. Configuration index `k`
//! encodes `x_i = +1` in bit `i`.

pub mod collider;
pub mod equivalence;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod io;
pub mod latent;
pub mod model;
pub mod pmf;
pub mod quadrature;
pub mod sampling;
pub mod spectral;

pub use collider::{
    cause_marginal_pmf, collider_joint, conditioned_pmf, effect_acceptance, spectral_to_collider,
    ColliderForm, Effect, EffectPattern,
};
pub use equivalence::{
    verify_representations, EquivalenceReport, FaultInjection, PairResult, Tolerances,
    VerifyOptions,
};
pub use error::{Branch, Error, Result};
pub use estimation::{
    fit_pseudo_likelihood, full_log_likelihood, pseudo_loglik, pseudo_loglik_grad, FitOptions,
    FitResult, WeightedTable,
};
pub use latent::{
    latent_density_cw, mirt_conditional, mirt_marginal_pmf, rasch_conditional,
    rasch_marginal_pmf, CwLatentDensity, LatentForm,
};
pub use model::{curie_weiss_pmf, ising_log_weight, ising_pmf, BinaryConfig, ModelSpec};
pub use pmf::{pmf_distance, Pmf, PmfDistance, MAX_ENUMERATION_N};
pub use quadrature::{kac_identity_check, QuadratureRule};
pub use sampling::{
    sample_collider_rejection, sample_exact, sample_gibbs, sample_latent_first, SampleMeta,
    SampleSet, SamplingMethod,
};
pub use spectral::{spectral_log_weight, spectral_pmf, to_spectral, SpectralForm};
