//! Gaussian pair-copula h-function (the conditional distribution of one
//! copula argument given the other) and its inverse. These are the
//! building blocks of vine fitting and inverse-Rosenblatt sampling.

use crate::stats::{norm_cdf, norm_inv_cdf};

// Keep arguments and results inside the open unit interval. The lower
// tail keeps full relative precision down to the smallest normal double;
// the upper tail saturates one ulp below 1, which is all f64 can carry.
const OPEN_LO: f64 = f64::MIN_POSITIVE;
const OPEN_HI: f64 = 1.0 - f64::EPSILON / 2.0;

fn clamp_open(u: f64) -> f64 {
    u.clamp(OPEN_LO, OPEN_HI)
}

/// `h(u | v; rho) = Phi((Phi^{-1}(u) - rho Phi^{-1}(v)) / sqrt(1 - rho^2))`.
///
/// At `rho == 0` this is the identity in `u` exactly, which is what lets
/// truncated vine levels pass values through unchanged.
pub fn h(u: f64, v: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return u;
    }
    let u = clamp_open(u);
    let v = clamp_open(v);
    let zu = norm_inv_cdf(u);
    let zv = norm_inv_cdf(v);
    clamp_open(norm_cdf((zu - rho * zv) / (1.0 - rho * rho).sqrt()))
}

/// Inverse of [`h`] in its first argument:
/// `h_inv(w | v; rho) = Phi(sqrt(1 - rho^2) Phi^{-1}(w) + rho Phi^{-1}(v))`.
pub fn h_inv(w: f64, v: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return w;
    }
    let w = clamp_open(w);
    let v = clamp_open(v);
    let zw = norm_inv_cdf(w);
    let zv = norm_inv_cdf(v);
    clamp_open(norm_cdf((1.0 - rho * rho).sqrt() * zw + rho * zv))
}
