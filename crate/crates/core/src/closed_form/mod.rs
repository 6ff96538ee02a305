//! Analytic oracles: the exponential-utility quadrature surface, the affine
//! case, the put-block hedges and the call saturation limits.

mod exp_utility;
mod normal;
mod put_block;
mod quadrature;

pub use exp_utility::{
    exp_utility_point, exp_utility_surface, exp_utility_z, ExpUtilityPoint, ExpUtilitySpec,
    QuadratureOptions,
};
pub use normal::{cdf_over_pdf, norm_cdf, norm_pdf};
pub use put_block::{
    affine_case, burgers_tanh, call_z_limits, put_hedges, replication_cost, scaling_transform,
    AffineCase, CallZLimits, PutBlockSpec, PutHedges, ReplicationCost,
};
pub use quadrature::HermiteRule;
