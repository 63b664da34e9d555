use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chaos::{InputTransform, Marginal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Lognormal,
    Uniform,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "lognormal" => Ok(Family::Lognormal),
            "uniform" => Ok(Family::Uniform),
            other => Err(Error::Config(format!("unknown distribution family `{other}`"))),
        }
    }
}

/// One uncertain parameter, described by its physical mean and coefficient
/// of variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParameter {
    pub name: String,
    pub family: Family,
    pub mean: f64,
    pub cov: f64,
}

/// Independent random inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInputSpec {
    pub parameters: Vec<RandomParameter>,
}

impl RandomInputSpec {
    pub fn new(parameters: Vec<RandomParameter>) -> Result<Self> {
        let spec = Self { parameters };
        spec.transform()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn nominal(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.mean).collect()
    }

    pub fn transform(&self) -> Result<InputTransform> {
        let marginals = self
            .parameters
            .iter()
            .map(|p| {
                if !(p.cov >= 0.0) || !p.cov.is_finite() {
                    return Err(Error::Config(format!("parameter `{}`: cov must be non-negative", p.name)));
                }
                match p.family {
                    Family::Gaussian => Marginal::gaussian_from_moments(p.mean, p.cov),
                    Family::Lognormal => Marginal::lognormal_from_moments(p.mean, p.cov),
                    Family::Uniform => Marginal::uniform_from_moments(p.mean, p.cov),
                }
                .map_err(|e| Error::Config(format!("parameter `{}`: {e}", p.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        InputTransform::new(marginals)
    }
}

/// Latin hypercube sample: one point per equal-probability stratum in every
/// dimension, strata independently permuted, mapped through the quantiles.
pub fn lhs_sample(transform: &InputTransform, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = transform.dim();
    let mut columns = Vec::with_capacity(dim);
    for m in transform.marginals() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let col: Vec<f64> = strata
            .iter()
            .map(|&s| {
                let v: f64 = rng.sample(Open01);
                m.inverse_cdf((s as f64 + v) / n as f64)
            })
            .collect();
        columns.push(col);
    }
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

/// Plain Monte Carlo sample.
pub fn mc_sample(transform: &InputTransform, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            transform
                .marginals()
                .iter()
                .map(|m| m.inverse_cdf(rng.sample(Open01)))
                .collect()
        })
        .collect()
}
