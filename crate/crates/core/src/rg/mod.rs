//! Rate/first-passage measures and UL-type factorizations of block-tridiagonal matrices.

mod bidirectional;
mod factor;
mod measures;

pub use bidirectional::{bidirectional_inverse_apply, SplitInverse};
pub use factor::{apply_unilateral_inverse, ul_factorize, UlFactorization};
pub use measures::{compute_rg_negative, compute_rg_positive, Axis, RgMeasures, RgOptions};
