//! Orthonormal univariate families and their tensor products over truncated
//! multi-index sets.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Univariate orthonormal polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyFamily {
    /// Probabilists' Hermite, orthonormal under the standard normal density.
    Hermite,
    /// Legendre, orthonormal under the uniform density on [-1, 1].
    Legendre,
}

impl FromStr for PolyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hermite" => Ok(PolyFamily::Hermite),
            "legendre" => Ok(PolyFamily::Legendre),
            other => Err(Error::Config(format!("unknown polynomial family `{other}`"))),
        }
    }
}

impl PolyFamily {
    /// Values `ψ_0(z), ..., ψ_degree(z)` by the normalized three-term recurrence.
    pub fn values(self, degree: usize, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; degree + 1];
        self.fill(z, &mut out);
        out
    }

    pub fn fill(self, z: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        match self {
            PolyFamily::Hermite => {
                out[1] = z;
                for k in 1..out.len() - 1 {
                    let kf = k as f64;
                    out[k + 1] = (z * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
                }
            }
            PolyFamily::Legendre => {
                // raw Legendre first, then scale by sqrt(2k + 1)
                let mut p_prev = 1.0;
                let mut p = z;
                out[1] = 3f64.sqrt() * z;
                for k in 1..out.len() - 1 {
                    let kf = k as f64;
                    let next = ((2.0 * kf + 1.0) * z * p - kf * p_prev) / (kf + 1.0);
                    p_prev = p;
                    p = next;
                    out[k + 1] = (2.0 * kf + 3.0).sqrt() * next;
                }
            }
        }
    }
}

/// Truncated set of multi-indices, ordered by total degree and then
/// reverse-lexicographically. The zero index is always first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    indices: Vec<Vec<u32>>,
    dim: usize,
    max_degree: u32,
    q_norm: f64,
    max_rank: usize,
}

fn q_norm_value(alpha: &[u32], q: f64) -> f64 {
    alpha
        .iter()
        .filter(|&&a| a > 0)
        .map(|&a| (a as f64).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// All `α ∈ ℕ^dim` with `‖α‖_q ≤ degree` and at most `rank` nonzero entries.
pub fn generate_indices(dim: usize, degree: u32, q_norm: f64, rank: usize) -> MultiIndexSet {
    assert!(dim >= 1, "dimension must be positive");
    assert!(q_norm > 0.0 && q_norm <= 1.0, "q-norm must lie in (0, 1]");
    assert!(rank >= 1, "rank must be positive");
    let budget = (degree as f64).powf(q_norm) * (1.0 + 1e-12) + 1e-12;
    let mut indices = Vec::new();
    let mut current = vec![0u32; dim];
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        pos: usize,
        partial: f64,
        nonzero: usize,
        degree: u32,
        q: f64,
        budget: f64,
        rank: usize,
        current: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        recurse(pos + 1, partial, nonzero, degree, q, budget, rank, current, out);
        if nonzero == rank {
            return;
        }
        for a in 1..=degree {
            let next = partial + (a as f64).powf(q);
            if next > budget {
                break;
            }
            current[pos] = a;
            recurse(pos + 1, next, nonzero + 1, degree, q, budget, rank, current, out);
        }
        current[pos] = 0;
    }
    recurse(0, 0.0, 0, degree, q_norm, budget, rank, &mut current, &mut indices);
    indices.sort_by(|a, b| {
        let da: u32 = a.iter().sum();
        let db: u32 = b.iter().sum();
        da.cmp(&db).then_with(|| b.cmp(a))
    });
    MultiIndexSet {
        indices,
        dim,
        max_degree: degree,
        q_norm,
        max_rank: rank,
    }
}

impl MultiIndexSet {
    pub fn from_indices(indices: Vec<Vec<u32>>) -> Result<Self> {
        let dim = indices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("empty multi-index set".into()))?;
        if indices.iter().any(|a| a.len() != dim) {
            return Err(Error::Config("multi-indices of different lengths".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if !indices.iter().all(|a| seen.insert(a.clone())) {
            return Err(Error::Config("duplicate multi-index".into()));
        }
        if !indices.iter().any(|a| a.iter().all(|&v| v == 0)) {
            return Err(Error::Config("multi-index set lacks the constant term".into()));
        }
        let max_degree = indices.iter().map(|a| a.iter().sum()).max().unwrap_or(0);
        let max_rank = indices
            .iter()
            .map(|a| a.iter().filter(|&&v| v > 0).count())
            .max()
            .unwrap_or(0)
            .max(1);
        Ok(Self {
            indices,
            dim,
            max_degree,
            q_norm: 1.0,
            max_rank,
        })
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn q_norm(&self) -> f64 {
        self.q_norm
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    /// Whether every index honours the set's own truncation parameters.
    pub fn is_admissible(&self) -> bool {
        self.indices.iter().all(|a| {
            q_norm_value(a, self.q_norm) <= self.max_degree as f64 + 1e-9
                && a.iter().filter(|&&v| v > 0).count() <= self.max_rank
        })
    }
}

/// Tabulated univariate values for one point, reused across all indices.
pub(crate) struct UnivariateTable {
    values: Vec<Vec<f64>>,
}

impl UnivariateTable {
    pub(crate) fn new(families: &[PolyFamily], z: &[f64], degree: usize) -> Self {
        Self {
            values: families
                .iter()
                .zip(z)
                .map(|(f, &zi)| f.values(degree, zi))
                .collect(),
        }
    }

    pub(crate) fn product(&self, alpha: &[u32]) -> f64 {
        alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| self.values[i][a as usize])
            .product()
    }
}

fn max_component(indices: &[Vec<u32>]) -> usize {
    indices
        .iter()
        .flat_map(|a| a.iter().copied())
        .max()
        .unwrap_or(0) as usize
}

/// Basis row `[ψ_α(z)]_{α ∈ indices}` for one standard-space point.
pub fn evaluate_basis(indices: &[Vec<u32>], families: &[PolyFamily], z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != families.len() {
        return Err(Error::DimensionMismatch {
            what: "point dimension",
            expected: families.len(),
            found: z.len(),
        });
    }
    if let Some(a) = indices.iter().find(|a| a.len() != z.len()) {
        return Err(Error::DimensionMismatch {
            what: "multi-index dimension",
            expected: z.len(),
            found: a.len(),
        });
    }
    let table = UnivariateTable::new(families, z, max_component(indices));
    Ok(indices.iter().map(|a| table.product(a)).collect())
}

/// Design matrix rows for a batch of standard-space points.
pub fn design_matrix(
    indices: &[Vec<u32>],
    families: &[PolyFamily],
    points: &[Vec<f64>],
) -> Result<nalgebra::DMatrix<f64>> {
    let mut psi = nalgebra::DMatrix::zeros(points.len(), indices.len());
    let degree = max_component(indices);
    for (i, z) in points.iter().enumerate() {
        if z.len() != families.len() {
            return Err(Error::DimensionMismatch {
                what: "point dimension",
                expected: families.len(),
                found: z.len(),
            });
        }
        let table = UnivariateTable::new(families, z, degree);
        for (j, a) in indices.iter().enumerate() {
            psi[(i, j)] = table.product(a);
        }
    }
    Ok(psi)
}
