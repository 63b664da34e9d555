//! Sparse polynomial chaos expansions: bases, truncation, regression and
//! adaptive-degree model selection.

mod basis;
mod regression;
mod transform;

pub use basis::{design_matrix, evaluate_basis, generate_indices, MultiIndexSet, PolyFamily};
pub use regression::{
    fit_lars, fit_ols, loo_error, LarsDesign, LarsFit, LarsOptions, LooDiagnostics, Selection,
};
pub use transform::{InputTransform, Marginal};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PceDiagnostics {
    pub loo: f64,
    pub corrected_loo: f64,
    /// Truncation degree picked by the adaptive search.
    pub degree: u32,
    pub n_ed: usize,
}

/// Polynomial chaos expansion `Σ c_α ψ_α(T(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    families: Vec<PolyFamily>,
    indices: Vec<Vec<u32>>,
    coefficients: Vec<f64>,
    transform: InputTransform,
    diagnostics: PceDiagnostics,
}

impl PceModel {
    pub fn new(
        transform: InputTransform,
        indices: Vec<Vec<u32>>,
        coefficients: Vec<f64>,
        diagnostics: PceDiagnostics,
    ) -> Result<Self> {
        if indices.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                what: "coefficient count",
                expected: indices.len(),
                found: coefficients.len(),
            });
        }
        if let Some(a) = indices.iter().find(|a| a.len() != transform.dim()) {
            return Err(Error::DimensionMismatch {
                what: "multi-index dimension",
                expected: transform.dim(),
                found: a.len(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite PCE coefficient".into()));
        }
        Ok(Self {
            families: transform.families(),
            indices,
            coefficients,
            transform,
            diagnostics,
        })
    }

    /// Model with only the constant term.
    pub fn constant(transform: InputTransform, value: f64, n_ed: usize) -> Self {
        let dim = transform.dim();
        Self {
            families: transform.families(),
            indices: vec![vec![0; dim]],
            coefficients: vec![value],
            transform,
            diagnostics: PceDiagnostics {
                loo: 0.0,
                corrected_loo: 0.0,
                degree: 0,
                n_ed,
            },
        }
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coefficients
    }

    pub fn transform(&self) -> &InputTransform {
        &self.transform
    }

    pub fn diagnostics(&self) -> &PceDiagnostics {
        &self.diagnostics
    }

    pub fn n_terms(&self) -> usize {
        self.coefficients.len()
    }

    /// Highest total degree among the retained terms.
    pub fn max_term_degree(&self) -> u32 {
        self.indices.iter().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let z = self.transform.to_standard(x)?;
        self.predict_standard(&z)
    }

    pub fn predict_standard(&self, z: &[f64]) -> Result<f64> {
        let row = evaluate_basis(&self.indices, &self.families, z)?;
        Ok(row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    /// Exact mean, by orthonormality.
    pub fn mean(&self) -> f64 {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(a, _)| a.iter().all(|&v| v == 0))
            .map(|(_, &c)| c)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(a, _)| a.iter().any(|&v| v > 0))
            .map(|(_, &c)| c * c)
            .sum()
    }
}

/// Search range and truncation for [`fit_adaptive`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSettings {
    pub min_degree: u32,
    pub max_degree: u32,
    pub q_norm: f64,
    pub max_rank: usize,
    /// Degrees tried without improvement before the search stops.
    pub degree_patience: u32,
    pub lars: LarsOptions,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            min_degree: 1,
            max_degree: 10,
            q_norm: 1.0,
            max_rank: usize::MAX,
            degree_patience: 2,
            lars: LarsOptions::default(),
        }
    }
}

impl AdaptiveSettings {
    pub fn validate(&self) -> Result<()> {
        if self.min_degree < 1 || self.min_degree > self.max_degree {
            return Err(Error::Config(format!(
                "degree range {}..={} is empty or starts below 1",
                self.min_degree, self.max_degree
            )));
        }
        if !(self.q_norm > 0.0 && self.q_norm <= 1.0) {
            return Err(Error::Config(format!("q_norm {} outside (0, 1]", self.q_norm)));
        }
        if self.max_rank < 1 {
            return Err(Error::Config("max_rank must be at least 1".into()));
        }
        if self.degree_patience < 1 {
            return Err(Error::Config("degree_patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Adaptive-degree sparse PCE for a single response.
pub fn fit_adaptive(
    transform: &InputTransform,
    points: &[Vec<f64>],
    y: &[f64],
    settings: &AdaptiveSettings,
) -> Result<PceModel> {
    let mut models = fit_adaptive_named(transform, points, &[y.to_vec()], &["response".to_string()], settings)?;
    Ok(models.remove(0))
}

struct Candidate {
    degree: u32,
    indices: Vec<Vec<u32>>,
    fit: LarsFit,
}

/// Adaptive-degree sparse PCEs for many responses sharing one design.
/// Each design matrix is built once per degree; responses fit in parallel.
/// Among degrees, the smallest corrected LOO error wins and ties go to the
/// lower degree.
pub fn fit_adaptive_many(
    transform: &InputTransform,
    points: &[Vec<f64>],
    responses: &[Vec<f64>],
    settings: &AdaptiveSettings,
) -> Result<Vec<PceModel>> {
    let names: Vec<String> = (0..responses.len()).map(|t| format!("response {t}")).collect();
    fit_adaptive_named(transform, points, responses, &names, settings)
}

/// [`fit_adaptive_many`] with caller-chosen target names for error reports.
pub fn fit_adaptive_named(
    transform: &InputTransform,
    points: &[Vec<f64>],
    responses: &[Vec<f64>],
    names: &[String],
    settings: &AdaptiveSettings,
) -> Result<Vec<PceModel>> {
    settings.validate()?;
    if names.len() != responses.len() {
        return Err(Error::DimensionMismatch {
            what: "target names",
            expected: responses.len(),
            found: names.len(),
        });
    }
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientDesign { found: n, required: 3 });
    }
    if let Some(r) = responses.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: n,
            found: r.len(),
        });
    }
    let z: Vec<Vec<f64>> = points
        .iter()
        .map(|x| transform.to_standard(x))
        .collect::<Result<_>>()?;
    let families = transform.families();
    let dim = transform.dim();
    let rank = settings.max_rank.min(dim);

    let mut best: Vec<Option<Candidate>> = responses.iter().map(|_| None).collect();
    let mut stale = vec![0u32; responses.len()];
    let mut done: Vec<bool> = responses.iter().map(|r| is_constant(r)).collect();

    for degree in settings.min_degree..=settings.max_degree {
        let pending: Vec<usize> = (0..responses.len()).filter(|&t| !done[t]).collect();
        if pending.is_empty() {
            break;
        }
        let set = generate_indices(dim, degree, settings.q_norm, rank);
        let design = match LarsDesign::new(design_matrix(set.indices(), &families, &z)?) {
            Ok(d) => d,
            Err(Error::DegenerateCandidates) if degree > settings.min_degree => break,
            Err(e) => return Err(e),
        };
        let fits: Vec<(usize, Result<LarsFit>)> = pending
            .par_iter()
            .map(|&t| (t, design.fit(&responses[t], &settings.lars)))
            .collect();
        for (t, fit) in fits {
            let fit = fit.map_err(|e| Error::FitFailed {
                target: names[t].clone(),
                source: Box::new(e),
            })?;
            let improved = match &best[t] {
                None => true,
                Some(b) => fit.loo.corrected + 1e-16 < b.fit.loo.corrected,
            };
            if improved {
                stale[t] = 0;
                let indices = fit.columns.iter().map(|&c| set.indices()[c].clone()).collect();
                best[t] = Some(Candidate { degree, indices, fit });
            } else {
                stale[t] += 1;
                if stale[t] >= settings.degree_patience {
                    done[t] = true;
                }
            }
        }
    }

    responses
        .iter()
        .zip(best)
        .map(|(y, cand)| match cand {
            None => Ok(PceModel::constant(transform.clone(), y[0], n)),
            Some(c) => PceModel::new(
                transform.clone(),
                c.indices,
                c.fit.coefficients,
                PceDiagnostics {
                    loo: c.fit.loo.relative,
                    corrected_loo: c.fit.loo.corrected,
                    degree: c.degree,
                    n_ed: n,
                },
            ),
        })
        .collect()
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}
