//! Exact computation engine for the topological recursion of matrix-model
//! loop equations and its blobbed, colored extension for the quartic melonic
//! tensor model.
//!
//! Everything is exact: scalars are multivariate rational functions over
//! arbitrary-precision rationals ([`algebra`]), correlators are rational
//! differential forms ([`forms`]) on genus-zero spectral curves ([`curve`]),
//! and every computed object is checkable against brute-force Wick-pairing
//! oracles ([`models`], [`qmtm`]).

pub mod algebra;
pub mod forms;

pub use algebra::{AlgebraError, Context, ParamMode, ScalarExpr, TruncatedSeries};
