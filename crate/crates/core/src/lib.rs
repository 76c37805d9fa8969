//! Geometric (spatial) quantiles and halfspace depth for empirical point
//! clouds, with tools to check the extremal upper, lower and inclusion
//! bounds and the high-order asymptotic expansions of extreme quantiles.

pub mod asymptotics;
pub mod bounds;
pub mod contour;
pub mod depth;
pub mod directional;
pub mod error;
pub mod io;
mod par;
pub mod quantile;
pub mod samplers;
pub mod special;
pub mod sphere;
pub mod types;

pub use asymptotics::{
    expansion_sweep, first_order_limit, rate_fit, third_order_rhs, ExpansionReport, RateFit,
    ThirdOrderRhs,
};
pub use bounds::{
    auto_k_alpha, check_inclusion, lower_bound_check, upper_bound_ub1, upper_bound_ub2,
    InclusionReport, LowerBoundReport, UpperBoundReport,
};
pub use contour::{contour_experiment, ContourBundle, ContourConfig};
pub use depth::{
    depth_approx, depth_exact_2d, depth_region_boundary, tukey_median, DepthConfig, DepthEvaluator,
    DepthRegion, DepthValue,
};
pub use directional::{
    m_gamma_estimate, m_gamma_rotinv, min_projected_quantile, projected_quantile, DirectionSearch,
    ProjectedQuantile,
};
pub use error::{Error, Result};
pub use quantile::{
    objective, quantile_norm_curve, sign_expectation, solve_quantile, solve_quantile_from,
    SignVectorStats, SolveReport, SolveStatus, SolverConfig, SolverMethod,
};
pub use samplers::{sample, DistributionSpec, Family};
pub use types::{GammaConstant, GammaMethod, IndexVector, Point, PointCloud, Tolerances, UnitVector};
