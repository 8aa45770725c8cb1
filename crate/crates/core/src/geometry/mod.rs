//! Spherical-cap probabilities, the antipodal pseudo metric, and samplers on
//! spheres, balls and caps.
//!
//! Points live on `S^{n-2}`, the unit sphere in `R^{n-1}`, where `n` is the
//! sample size of the data matrix the U-scores came from.

pub mod rng;
pub mod sampling;
pub mod special;

pub use rng::{derive_seed, SimRng};
pub use sampling::{sample_ball, sample_cap, sample_sphere, CapSampler};
pub use special::reg_inc_beta;

use serde::Serialize;

use crate::error::{Error, Result};
use special::{integrate, ln_gamma};

/// Normalising constants of the cap-area integral for sample size `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CapConstants {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
}

pub fn cap_constants(n: usize) -> Result<CapConstants> {
    check_n(n)?;
    let nf = n as f64;
    let ratio = (ln_gamma((nf - 1.0) / 2.0) - ln_gamma((nf - 2.0) / 2.0)).exp();
    let b_n = 2.0 * ratio / std::f64::consts::PI.sqrt();
    let a_n = b_n / (2.0 * (nf - 2.0));
    Ok(CapConstants { n, a_n, b_n })
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::param("n", n, "cap geometry needs n >= 4"));
    }
    Ok(())
}

/// Cap radius on the sphere equivalent to the correlation threshold `rho`.
pub fn cap_radius(rho: f64) -> f64 {
    (2.0 * (1.0 - rho)).max(0.0).sqrt()
}

/// Normalised area `P_n(r)` of a spherical cap of chordal radius `r` on
/// `S^{n-2}`.
pub fn pn(r: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    if !(r >= 0.0) {
        return Err(Error::param("r", r, "cap radius must be nonnegative"));
    }
    if r >= 2.0 {
        return Ok(1.0);
    }
    if r > std::f64::consts::SQRT_2 {
        return Ok(1.0 - pn_small(4.0 - r * r, n)?);
    }
    pn_small(r * r, n)
}

// r in [0, sqrt 2], given as r^2.
fn pn_small(r2: f64, n: usize) -> Result<f64> {
    if r2 == 0.0 {
        return Ok(0.0);
    }
    if n == 4 {
        return Ok(r2 / 4.0);
    }
    let c = cap_constants(n)?;
    // Substituting u = 1 - w^2 in (b_n/2) int_{1-r^2/2}^1 (1-u^2)^{(n-4)/2} du
    // removes the endpoint singularity for odd n.
    let pw = (n - 3) as i32;
    let q = (n as f64 - 4.0) / 2.0;
    let upper = (r2 / 2.0).sqrt();
    let integral = integrate(
        |w| 2.0 * w.powi(pw) * (2.0 - w * w).powf(q),
        0.0,
        upper,
        1e-300,
        1e-15,
    );
    Ok((0.5 * c.b_n * integral).clamp(0.0, 1.0))
}

/// Lower and upper envelopes `a_n r^{n-2} (1 - min(r^2,4)/4)^{(n-4)/2}` and
/// `a_n r^{n-2}` that sandwich `P_n(r)`.
pub fn pn_bounds(r: f64, n: usize) -> Result<(f64, f64)> {
    check_n(n)?;
    if !(r >= 0.0) {
        return Err(Error::param("r", r, "cap radius must be nonnegative"));
    }
    let c = cap_constants(n)?;
    let upper = c.a_n * r.powi(n as i32 - 2);
    let shrink = (1.0 - (r * r).min(4.0) / 4.0).powf((n as f64 - 4.0) / 2.0);
    Ok((upper * shrink, upper))
}

/// `min(|v - w|, |v + w|)`: Euclidean distance with antipodes identified.
pub fn pseudo_dist(v: &[f64], w: &[f64]) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::Dimension(format!(
            "pseudo_dist of vectors with lengths {} and {}",
            v.len(),
            w.len()
        )));
    }
    Ok(pseudo_dist_unchecked(v, w))
}

pub(crate) fn pseudo_dist_unchecked(v: &[f64], w: &[f64]) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in v.iter().zip(w) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    minus.min(plus).sqrt()
}

pub(crate) fn euclid_unchecked(v: &[f64], w: &[f64]) -> f64 {
    v.iter()
        .zip(w)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
