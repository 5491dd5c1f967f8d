// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod dd;
pub mod coefficients;
pub mod integrand;
pub mod quadrature;
pub mod green;
pub mod oracles;
pub mod cli;
