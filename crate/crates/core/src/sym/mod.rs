//! Few-reflector approximations of symmetric matrices.

mod baseline;
mod shf;
mod subproblems;

pub use baseline::partial_eig_baseline;
pub use shf::{
    build_ab, diagonal_rule_literal, shf, shf_state, sign_objective, update_diagonal, update_spectrum, InitMode,
    ShfConfig, ShfState,
};
pub use subproblems::{combine_init, cost_c, grad_c, rayleigh_init, refine_reflector, u_dagger, u_ddagger, RefineConfig};
