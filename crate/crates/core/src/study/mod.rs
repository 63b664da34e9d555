//! Sampling, error metrics, ensemble statistics, the built-in case studies
//! and the convergence and validation studies built on them.

mod cases;
mod metrics;
mod runs;
mod sampling;
mod system;
pub mod output;

pub use cases::{
    six_dof, six_dof_with_step, two_dof, CaseStudy, SIX_DOF_LINKS, SIX_DOF_MASSES, SIX_DOF_STEP,
    SIX_DOF_STIFFNESSES,
};
pub use metrics::{
    ensemble_moments, frf_errors, moment_errors, rms_error, rms_error_channels, rms_error_real,
    EnsembleMoments, MomentAccumulator,
};
pub use runs::{
    convergence_study, reference_moments, validate, ConvergenceRow, PointRecord, ReferenceSet,
    ValidationReport,
};
pub use sampling::{lhs_sample, mc_sample, Family, RandomInputSpec, RandomParameter};
pub use system::{link_pattern, point_pattern, Contribution, MatrixKind, ParametricSystem, SystemModel};

/// Deterministic per-purpose seed: FNV-1a of the purpose string mixed into
/// the master seed, finished with the SplitMix64 avalanche.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
