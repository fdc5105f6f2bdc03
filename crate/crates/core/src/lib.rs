//! Numerical toolkit for fermionic and bosonic zero modes around self-dual
//! abelian Higgs vortices and the one-dimensional supersymmetric quantum
//! mechanics they carry.

pub mod boson;
pub mod error;
pub mod operator;
pub mod spectral;
pub mod susy;
pub mod vortex;

pub use error::{Error, Result};
pub use vortex::{
    energy, flux, sample_background, solve_profile, Background2D, Grid, ProfileMethod, RadialProfile,
    VortexParams,
};
pub use operator::{
    assemble_d, assemble_d_adjoint, assemble_d_boson, Layout, OperatorTag, Scheme, Sector, SparseOperator, StateVector,
};
pub use spectral::{
    compute_index, radial_channel_oracle, smallest_singulars, ChannelCount, IndexReport, SpectralReport,
};
pub use susy::{build_susy, grade_state, verify_unbroken, AlgebraReport, GradedState, Parity, SusyBlocks, VerificationReport, Verdict};
pub use boson::{
    analytic_translation_modes, boson_to_fermion, bosonic_residual, fermion_to_boson, subspace_overlap, translation_mode_overlap,
    translation_modes, FluctuationPair,
};
