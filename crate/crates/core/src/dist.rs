//! The fixed-distribution families: CDF, quantile, PDF, moments, and the
//! isoprobabilistic transform to and from standard normal space.
//!
//! Location/scale families compose with the normal CDF in closed form, which
//! keeps the transform pair exactly inverse; only the beta family needs a
//! numeric quantile, done by bisection to the last representable bit.

use statrs::distribution::Continuous;

use crate::error::{Error, Result};
use crate::model::{DistributionSpec, Param};

pub const EULER_GAMMA: f64 = 0.5772156649015329;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.9189385332046727;

/// Standard normal CDF, accurate in both tails (erfc carries the tail at
/// full relative precision).
pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// Standard normal survival function 1 - Phi(u).
pub fn std_normal_sf(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

pub fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() * 0.3989422804014327
}

/// ln Phi(u) without underflow: survival form on the right, direct log in
/// the middle, asymptotic expansion past the point where erfc underflows.
pub fn std_normal_log_cdf(u: f64) -> f64 {
    if u >= 0.0 {
        (-std_normal_sf(u)).ln_1p()
    } else if u > -35.0 {
        std_normal_cdf(u).ln()
    } else {
        let inv2 = 1.0 / (u * u);
        let series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2));
        -0.5 * u * u - (-u).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Standard normal quantile, consistent with `std_normal_cdf` at machine
/// precision. Central probabilities seed from the library inverse and take
/// two Newton steps; tiny probabilities (where 1 - p or the seed degrade)
/// run Newton on ln Phi instead, which stays conditioned arbitrarily deep.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p > 0.5 {
        return Ok(-std_normal_quantile(1.0 - p)?);
    }
    if p < 1e-10 {
        return Ok(tail_quantile(p.ln()));
    }
    let mut u = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let err = std_normal_cdf(u) - p;
        u -= err / std_normal_pdf(u);
    }
    Ok(u)
}

/// Solve ln Phi(u) = lp for lp well below ln(1e-10). Newton in log space:
/// d/du ln Phi = pdf/cdf, so each step multiplies the residual error by the
/// local curvature only; converges from the crude asymptotic seed in a
/// handful of steps.
fn tail_quantile(lp: f64) -> f64 {
    let t = -2.0 * lp;
    let mut u = -(t - t.ln() - (2.0 * std::f64::consts::PI).ln()).max(1.0).sqrt();
    for _ in 0..40 {
        let resid = std_normal_log_cdf(u) - lp;
        // cdf/pdf via the log form to avoid underflow of both factors
        let ratio = (std_normal_log_cdf(u) + 0.5 * u * u + LN_SQRT_2PI).exp();
        let step = -resid * ratio;
        u += step;
        if step.abs() < 1e-14 * u.abs().max(1.0) {
            break;
        }
    }
    u
}

/// One univariate distribution with all parameters resolved to numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Normal { mean: f64, sd: f64 },
    /// Stored as the log-space parameters; `mean`/`sd` are the moments of
    /// the variable itself, which is how the family is specified.
    LogNormal { mu: f64, sigma: f64, mean: f64, sd: f64 },
    Gumbel { location: f64, scale: f64 },
    Beta { shape1: f64, shape2: f64, lower: f64, upper: f64 },
    Uniform { lower: f64, upper: f64 },
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

impl Marginal {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        require(mean.is_finite() && sd.is_finite() && sd > 0.0, || {
            format!("normal requires finite mean and sd > 0, got mean {mean}, sd {sd}")
        })?;
        Ok(Self { kind: Kind::Normal { mean, sd } })
    }

    /// Lognormal given the mean and standard deviation of the variable
    /// (not of its logarithm).
    pub fn lognormal(mean: f64, sd: f64) -> Result<Self> {
        require(
            mean.is_finite() && sd.is_finite() && mean > 0.0 && sd > 0.0,
            || format!("lognormal requires mean > 0 and sd > 0, got mean {mean}, sd {sd}"),
        )?;
        let cv2 = (sd / mean).powi(2);
        let sigma2 = cv2.ln_1p();
        let sigma = sigma2.sqrt();
        let mu = mean.ln() - 0.5 * sigma2;
        Ok(Self { kind: Kind::LogNormal { mu, sigma, mean, sd } })
    }

    pub fn gumbel(location: f64, scale: f64) -> Result<Self> {
        require(location.is_finite() && scale.is_finite() && scale > 0.0, || {
            format!("gumbel requires finite location and scale > 0, got location {location}, scale {scale}")
        })?;
        Ok(Self { kind: Kind::Gumbel { location, scale } })
    }

    pub fn beta(shape1: f64, shape2: f64, lower: f64, upper: f64) -> Result<Self> {
        require(
            shape1.is_finite() && shape2.is_finite() && shape1 > 0.0 && shape2 > 0.0,
            || format!("beta requires positive shapes, got {shape1}, {shape2}"),
        )?;
        require(lower.is_finite() && upper.is_finite() && lower < upper, || {
            format!("beta requires lower < upper, got [{lower}, {upper}]")
        })?;
        Ok(Self { kind: Kind::Beta { shape1, shape2, lower, upper } })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        require(lower.is_finite() && upper.is_finite() && lower < upper, || {
            format!("uniform requires lower < upper, got [{lower}, {upper}]")
        })?;
        Ok(Self { kind: Kind::Uniform { lower, upper } })
    }

    /// Resolve a declarative spec into a concrete marginal. References are
    /// looked up through `resolve`, which returns the current value of the
    /// named epistemic quantity.
    pub fn from_spec(
        spec: &DistributionSpec,
        resolve: &dyn Fn(&str) -> Option<f64>,
    ) -> Result<Self> {
        let value = |p: &Param| -> Result<f64> {
            match p {
                Param::Fixed(v) => Ok(*v),
                Param::Ref { name } => {
                    resolve(name).ok_or_else(|| Error::UnknownQuantity { name: name.clone() })
                }
            }
        };
        match spec {
            DistributionSpec::Normal { mean, sd } => Self::normal(value(mean)?, value(sd)?),
            DistributionSpec::Lognormal { mean, sd } => Self::lognormal(value(mean)?, value(sd)?),
            DistributionSpec::Gumbel { location, scale } => {
                Self::gumbel(value(location)?, value(scale)?)
            }
            DistributionSpec::Beta { shape1, shape2, lower, upper } => {
                Self::beta(value(shape1)?, value(shape2)?, value(lower)?, value(upper)?)
            }
            DistributionSpec::Uniform { lower, upper } => {
                Self::uniform(value(lower)?, value(upper)?)
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match &self.kind {
            Kind::Normal { .. } => "normal",
            Kind::LogNormal { .. } => "lognormal",
            Kind::Gumbel { .. } => "gumbel",
            Kind::Beta { .. } => "beta",
            Kind::Uniform { .. } => "uniform",
        }
    }

    /// Open support; values must lie strictly inside for transforms that
    /// divide by the density, and within the closure for the CDF.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Normal { .. } | Kind::Gumbel { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::LogNormal { .. } => (0.0, f64::INFINITY),
            Kind::Beta { lower, upper, .. } | Kind::Uniform { lower, upper } => (*lower, *upper),
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Normal { mean, .. } => *mean,
            Kind::LogNormal { mean, .. } => *mean,
            Kind::Gumbel { location, scale } => location + EULER_GAMMA * scale,
            Kind::Beta { shape1, shape2, lower, upper } => {
                lower + (upper - lower) * shape1 / (shape1 + shape2)
            }
            Kind::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    fn check_support(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if x.is_nan() || x < lo || x > hi {
            return Err(Error::OutsideSupport { family: self.family_name(), value: x });
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match &self.kind {
            Kind::Normal { mean, sd } => std_normal_cdf((x - mean) / sd),
            Kind::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Kind::Gumbel { location, scale } => (-(-(x - location) / scale).exp()).exp(),
            Kind::Beta { shape1, shape2, lower, upper } => {
                let t = (x - lower) / (upper - lower);
                statrs::function::beta::beta_reg(*shape1, *shape2, t)
            }
            Kind::Uniform { lower, upper } => (x - lower) / (upper - lower),
        })
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match &self.kind {
            Kind::Normal { mean, sd } => std_normal_pdf((x - mean) / sd) / sd,
            Kind::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - mu) / sigma) / (sigma * x)
                }
            }
            Kind::Gumbel { location, scale } => {
                let t = (x - location) / scale;
                ((-t) - (-t).exp()).exp() / scale
            }
            Kind::Beta { shape1, shape2, lower, upper } => {
                let w = upper - lower;
                let t = ((x - lower) / w).clamp(0.0, 1.0);
                let inner = statrs::distribution::Beta::new(*shape1, *shape2)
                    .expect("shapes validated at construction");
                inner.pdf(t) / w
            }
            Kind::Uniform { lower, upper } => 1.0 / (upper - lower),
        })
    }

    /// Inverse CDF. Exact endpoints are mapped to the support boundary
    /// (infinite for unbounded families).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(match &self.kind {
            Kind::Normal { mean, sd } => mean + sd * std_normal_quantile(p)?,
            Kind::LogNormal { mu, sigma, .. } => (mu + sigma * std_normal_quantile(p)?).exp(),
            Kind::Gumbel { location, scale } => {
                if p == 0.0 {
                    f64::NEG_INFINITY
                } else if p == 1.0 {
                    f64::INFINITY
                } else if p <= 0.5 {
                    location - scale * (-p.ln()).ln()
                } else {
                    // -ln p = -ln(1-q) with q = 1-p computed via ln_1p to
                    // keep precision when p is close to 1
                    let q = 1.0 - p;
                    location - scale * (-(-q).ln_1p()).ln()
                }
            }
            Kind::Beta { shape1, shape2, lower, upper } => {
                // upper half runs through the reflected variable so the
                // resolved tail is the small number
                let t = if p <= 0.5 {
                    beta_quantile_unit(*shape1, *shape2, p)
                } else {
                    1.0 - beta_quantile_unit(*shape2, *shape1, 1.0 - p)
                };
                lower + (upper - lower) * t
            }
            Kind::Uniform { lower, upper } => lower + (upper - lower) * p,
        })
    }

    /// Value with the same CDF as Phi(u), composed in closed form per
    /// family so extreme u stay finite and the round trip is tight.
    pub fn from_standard_normal(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Normal { mean, sd } => mean + sd * u,
            Kind::LogNormal { mu, sigma, .. } => (mu + sigma * u).exp(),
            Kind::Gumbel { location, scale } => {
                // F(x) = Phi(u) solved for x: x = loc - scale*ln(-ln Phi(u))
                location - scale * (-std_normal_log_cdf(u)).ln()
            }
            Kind::Beta { shape1, shape2, lower, upper } => {
                // route through whichever normal tail is small; Phi(u) near
                // 1 would round away the survival information
                let t = if u <= 0.0 {
                    beta_quantile_unit(*shape1, *shape2, std_normal_cdf(u))
                } else {
                    1.0 - beta_quantile_unit(*shape2, *shape1, std_normal_sf(u))
                };
                lower + (upper - lower) * t
            }
            Kind::Uniform { lower, upper } => lower + (upper - lower) * std_normal_cdf(u),
        }
    }

    /// Standard normal value with the same CDF as x.
    pub fn to_standard_normal(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match &self.kind {
            Kind::Normal { mean, sd } => (x - mean) / sd,
            Kind::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (x.ln() - mu) / sigma
                }
            }
            Kind::Gumbel { location, scale } => {
                let t = (x - location) / scale;
                if t <= 0.6 {
                    // left half: CDF = exp(-exp(-t)) still far from 1
                    std_normal_quantile((-(-t).exp()).exp())?
                } else {
                    // right tail: survival 1 - exp(-e^-t) via expm1
                    let s = -(-(-t).exp()).exp_m1();
                    -std_normal_quantile(s)?
                }
            }
            Kind::Beta { shape1, shape2, lower, upper } => {
                let w = upper - lower;
                let p = statrs::function::beta::beta_reg(*shape1, *shape2, (x - lower) / w);
                if p <= 0.5 {
                    std_normal_quantile(p)?
                } else {
                    // recompute the survival side at full relative precision
                    let q = statrs::function::beta::beta_reg(*shape2, *shape1, (upper - x) / w);
                    -std_normal_quantile(q)?
                }
            }
            Kind::Uniform { lower, upper } => {
                std_normal_quantile((x - lower) / (upper - lower))?
            }
        })
    }
}

/// Quantile of Beta(a, b) on [0, 1]: bisection on the regularized
/// incomplete beta function down to the last distinguishable midpoint.
/// ~55 iterations; used only where closed forms do not exist.
fn beta_quantile_unit(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if statrs::function::beta::beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
