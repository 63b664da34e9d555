//! Isoprobabilistic maps between physical inputs and standard variables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::basis::PolyFamily;
use crate::error::{Error, Result};

/// One independent marginal. A zero spread makes the input deterministic; its
/// standard coordinate is pinned at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    /// Parameters of the underlying normal: `ln X ~ N(mu, sigma²)`.
    Lognormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl Marginal {
    /// Lognormal with the given physical mean and coefficient of variation.
    pub fn lognormal_from_moments(mean: f64, cov: f64) -> Result<Self> {
        if !(mean > 0.0) || !(cov >= 0.0) {
            return Err(Error::Config(format!(
                "lognormal needs a positive mean and non-negative cov (got {mean}, {cov})"
            )));
        }
        let s2 = (1.0 + cov * cov).ln();
        Ok(Marginal::Lognormal {
            mu: mean.ln() - 0.5 * s2,
            sigma: s2.sqrt(),
        })
    }

    pub fn gaussian_from_moments(mean: f64, cov: f64) -> Result<Self> {
        if !(cov >= 0.0) || !mean.is_finite() {
            return Err(Error::Config(format!("invalid gaussian moments ({mean}, {cov})")));
        }
        Ok(Marginal::Gaussian {
            mean,
            std: cov * mean.abs(),
        })
    }

    /// Uniform with the given mean and coefficient of variation.
    pub fn uniform_from_moments(mean: f64, cov: f64) -> Result<Self> {
        if !(cov >= 0.0) || !mean.is_finite() {
            return Err(Error::Config(format!("invalid uniform moments ({mean}, {cov})")));
        }
        let half = 3f64.sqrt() * cov * mean.abs();
        Ok(Marginal::Uniform {
            lo: mean - half,
            hi: mean + half,
        })
    }

    pub fn family(&self) -> PolyFamily {
        match self {
            Marginal::Gaussian { .. } | Marginal::Lognormal { .. } => PolyFamily::Hermite,
            Marginal::Uniform { .. } => PolyFamily::Legendre,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match *self {
            Marginal::Gaussian { std, .. } => std == 0.0,
            Marginal::Lognormal { sigma, .. } => sigma == 0.0,
            Marginal::Uniform { lo, hi } => lo == hi,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::Gaussian { std, .. } => std,
            Marginal::Lognormal { mu, sigma } => {
                ((sigma * sigma).exp_m1() * (2.0 * mu + sigma * sigma).exp()).sqrt()
            }
            Marginal::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            Marginal::Lognormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi >= lo,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid marginal parameters {self:?}")))
        }
    }

    pub fn to_standard(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite input {x}")));
        }
        match *self {
            Marginal::Gaussian { mean, std } => Ok(if std == 0.0 { 0.0 } else { (x - mean) / std }),
            Marginal::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return Err(Error::Domain(format!("lognormal input must be positive, got {x}")));
                }
                Ok(if sigma == 0.0 { 0.0 } else { (x.ln() - mu) / sigma })
            }
            Marginal::Uniform { lo, hi } => {
                if lo == hi {
                    return Ok(0.0);
                }
                let tol = 1e-12 * (hi - lo);
                if x < lo - tol || x > hi + tol {
                    return Err(Error::Domain(format!("{x} outside uniform support [{lo}, {hi}]")));
                }
                Ok(((2.0 * x - lo - hi) / (hi - lo)).clamp(-1.0, 1.0))
            }
        }
    }

    pub fn from_standard(&self, z: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, std } => mean + std * z,
            Marginal::Lognormal { mu, sigma } => (mu + sigma * z).exp(),
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi) + 0.5 * (hi - lo) * z,
        }
    }

    /// Quantile function, used for Latin hypercube and Monte Carlo sampling.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            _ => {
                if self.is_deterministic() {
                    return self.from_standard(0.0);
                }
                self.from_standard(std_normal().inverse_cdf(u))
            }
        }
    }
}

/// Product of independent marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTransform {
    marginals: Vec<Marginal>,
}

impl InputTransform {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::Config("input transform needs at least one marginal".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { marginals })
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn families(&self) -> Vec<PolyFamily> {
        self.marginals.iter().map(Marginal::family).collect()
    }

    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "input dimension",
                expected: self.dim(),
                found: x.len(),
            });
        }
        self.marginals.iter().zip(x).map(|(m, &v)| m.to_standard(v)).collect()
    }

    pub fn from_standard(&self, z: &[f64]) -> Vec<f64> {
        self.marginals.iter().zip(z).map(|(m, &v)| m.from_standard(v)).collect()
    }
}
