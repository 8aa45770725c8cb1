//! Uniform samplers on `S^{d-1}`, `B^d`, and spherical caps.

use rand::Rng;
use rand_distr::StandardNormal;

use super::special::reg_inc_beta;
use super::{cap_constants, check_n, pn};
use crate::error::{Error, Result};

/// Below this expected acceptance rate the cap sampler switches to exact
/// inversion of the radial CDF.
const MIN_ACCEPTANCE: f64 = 0.01;

/// Uniform point on the unit sphere in `R^dim`.
pub fn sample_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    assert!(dim >= 1, "sample_sphere needs dim >= 1");
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Uniform point in the closed unit ball of `R^dim`.
pub fn sample_ball<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut v = sample_sphere(dim, rng);
    let u: f64 = rng.random();
    let radius = u.powf(1.0 / dim as f64);
    v.iter_mut().for_each(|x| *x *= radius);
    v
}

#[derive(Clone, Copy, Debug)]
enum RadialMethod {
    Rejection,
    // total = I_{r^2/4}(a, a)
    Inversion { a: f64, total: f64 },
}

/// Uniform sampler on the cap `{x in S^{n-2} : |x - e_1| <= r}`.
///
/// The chordal distance `s = |x - e_1|` has density proportional to
/// `s^{n-3} (1 - s^2/4)^{(n-4)/2}` on `[0, r]`; it is drawn by rejection from
/// the `s^{n-3}` power law, or by inverting its incomplete-beta CDF when the
/// rejection rate would be poor. The remaining coordinates are uniform on the
/// sphere of radius `sqrt(1 - t^2)` where `t = 1 - s^2/2`.
#[derive(Clone, Debug)]
pub struct CapSampler {
    n: usize,
    r: f64,
    exponent: f64,
    method: RadialMethod,
}

impl CapSampler {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        check_n(n)?;
        if !(r > 0.0 && r <= 2.0) {
            return Err(Error::param("r", r, "cap radius must lie in (0, 2]"));
        }
        let c = cap_constants(n)?;
        let acceptance = pn(r, n)? / (c.a_n * r.powi(n as i32 - 2));
        let method = if acceptance >= MIN_ACCEPTANCE {
            RadialMethod::Rejection
        } else {
            let a = (n as f64 - 2.0) / 2.0;
            RadialMethod::Inversion {
                a,
                total: reg_inc_beta(r * r / 4.0, a, a)?,
            }
        };
        Ok(Self {
            n,
            r,
            exponent: (n as f64 - 4.0) / 2.0,
            method,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Whether the radial draw uses CDF inversion instead of rejection.
    pub fn uses_inversion(&self) -> bool {
        matches!(self.method, RadialMethod::Inversion { .. })
    }

    /// Draw a point of `R^{n-1}` on the cap around `e_1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let s = self.chord(rng);
        let t = 1.0 - 0.5 * s * s;
        let side = (1.0 - t * t).max(0.0).sqrt();
        let mut x = Vec::with_capacity(self.n - 1);
        x.push(t);
        x.extend(sample_sphere(self.n - 2, rng).into_iter().map(|w| side * w));
        x
    }

    fn chord<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.method {
            RadialMethod::Rejection => {
                let inv = 1.0 / (self.n as f64 - 2.0);
                loop {
                    let u: f64 = rng.random();
                    let s = self.r * u.powf(inv);
                    if self.exponent == 0.0 {
                        return s;
                    }
                    let accept = (1.0 - 0.25 * s * s).max(0.0).powf(self.exponent);
                    if rng.random::<f64>() < accept {
                        return s;
                    }
                }
            }
            RadialMethod::Inversion { a, total } => {
                let target = rng.random::<f64>() * total;
                let (mut lo, mut hi) = (0.0_f64, self.r * self.r / 4.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    // the domain is valid by construction
                    let v = reg_inc_beta(mid, a, a).unwrap_or(0.0);
                    if v < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                2.0 * (0.5 * (lo + hi)).sqrt()
            }
        }
    }
}

/// One draw from the cap of chordal radius `r` around `e_1` on `S^{n-2}`.
pub fn sample_cap<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Result<Vec<f64>> {
    Ok(CapSampler::new(n, r)?.sample(rng))
}
