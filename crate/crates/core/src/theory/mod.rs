//! Analytic machinery for the NPT width: the quartic small-λ condition, the
//! `X` statistic, the ladder construction for large λ, and curve fitting.

mod distribution;
mod fit;
mod ladder;
mod quartic;
mod special;

pub use distribution::{
    fit_px, histogram, px_ks_distance, sample_x, DistributionEstimate, EmpiricalCdf, HistBin, PX_MIN_SAMPLES,
};
pub use fit::{fit_curve, small_lambda_law, FitResult, Model};
pub use ladder::{
    block_estimate, default_block_size, fit_h_tail, fit_tail_integral, mean_np_large, mean_np_ladder, p_n,
    standard_matrix, standard_matrix_h, standard_matrix_samples, tail_integral, BlockEstimate, LadderEstimate,
    TailIntegral, LADDER_CUTOFF, LN_H_FLOOR,
};
pub use quartic::{
    assemble_u_up, quartic_coeffs, quartic_s, x_max, x_statistic, QuarticCoeffs,
};
pub use special::{erf, erfc};

/// `1 + C √(π/β) erfc(√β / λ)`; the small-λ mean NPT width.
pub fn mean_np_small(lambda: f64, c: f64, beta: f64) -> f64 {
    small_lambda_law(lambda, c, beta)
}
