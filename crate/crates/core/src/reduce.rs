//! Principal component compression of wide sample matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest count as zero.
const EIGEN_FLOOR: f64 = 1e-12;

/// Truncated PCA of an `N_ED × N` sample matrix. Eigenvalues are those of the
/// unnormalized scatter matrix `(Y − Ȳ)ᵀ(Y − Ȳ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReduction {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    total_energy: f64,
    energy_fraction: f64,
}

impl PcaReduction {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Retained eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn energy_fraction(&self) -> f64 {
        self.energy_fraction
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// Share of the total energy kept by the retained components.
    pub fn retained_energy(&self) -> f64 {
        if self.total_energy > 0.0 {
            self.eigenvalues.iter().sum::<f64>() / self.total_energy
        } else {
            1.0
        }
    }

    pub fn project_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row.len())?;
        Ok(self
            .components
            .iter()
            .map(|v| v.iter().zip(row).zip(&self.mean).map(|((a, y), m)| a * (y - m)).sum())
            .collect())
    }

    pub fn reconstruct_row(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.n_components() {
            return Err(Error::DimensionMismatch {
                what: "score count",
                expected: self.n_components(),
                found: scores.len(),
            });
        }
        let mut out = self.mean.clone();
        for (s, v) in scores.iter().zip(&self.components) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += s * vi;
            }
        }
        Ok(out)
    }

    /// Scores of each row, `N_ED × N̂`.
    pub fn project(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(rows.ncols())?;
        let mut out = DMatrix::zeros(rows.nrows(), self.n_components());
        for i in 0..rows.nrows() {
            let row: Vec<f64> = rows.row(i).iter().copied().collect();
            for (j, s) in self.project_row(&row)?.into_iter().enumerate() {
                out[(i, j)] = s;
            }
        }
        Ok(out)
    }

    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(scores.nrows(), self.width());
        for i in 0..scores.nrows() {
            let s: Vec<f64> = scores.row(i).iter().copied().collect();
            let row = self.reconstruct_row(&s)?;
            out.row_mut(i).copy_from_slice(&row);
        }
        Ok(out)
    }

    fn check_width(&self, found: usize) -> Result<()> {
        if found != self.width() {
            return Err(Error::DimensionMismatch {
                what: "row width",
                expected: self.width(),
                found,
            });
        }
        Ok(())
    }
}

/// Descending eigenpairs of a symmetric matrix.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    (values, eig.eigenvectors.select_columns(&order))
}

/// Fits a PCA keeping the fewest components whose eigenvalues reach
/// `energy_fraction` of the total. Wide data goes through the small
/// `N_ED × N_ED` Gram matrix.
pub fn fit_pca(data: &DMatrix<f64>, energy_fraction: f64) -> Result<PcaReduction> {
    let (n, width) = data.shape();
    if n < 2 {
        return Err(Error::InsufficientDesign { found: n, required: 2 });
    }
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::Config(format!("energy fraction {energy_fraction} outside (0, 1]")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite PCA input".into()));
    }
    let mean: DVector<f64> = DVector::from_iterator(width, data.column_iter().map(|c| c.mean()));
    let mut a = data.clone();
    for mut row in a.row_iter_mut() {
        row -= mean.transpose();
    }
    let trace = a.norm_squared();
    // spread at rounding level of the data itself counts as no variance
    if trace <= 1e-26 * data.norm_squared() {
        return Ok(PcaReduction {
            mean: mean.iter().copied().collect(),
            components: Vec::new(),
            eigenvalues: Vec::new(),
            total_energy: 0.0,
            energy_fraction,
        });
    }

    let use_gram = width > n;
    let (values, vectors) = if use_gram {
        sorted_eigen(&a * a.transpose())
    } else {
        sorted_eigen(a.transpose() * &a)
    };
    if values.iter().any(|&l| l < -1e-10 * trace.max(f64::MIN_POSITIVE)) {
        return Err(Error::Numeric("significantly negative covariance eigenvalue".into()));
    }
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    let positive: Vec<f64> = values
        .iter()
        .copied()
        .take_while(|&l| lmax > 0.0 && l > EIGEN_FLOOR * lmax)
        .collect();
    let total: f64 = values.iter().map(|l| l.max(0.0)).sum();

    let mut keep = 0;
    let mut acc = 0.0;
    for &l in &positive {
        if acc >= energy_fraction * total * (1.0 - 1e-12) {
            break;
        }
        acc += l;
        keep += 1;
    }

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(keep);
    for (i, &l) in positive.iter().enumerate().take(keep) {
        let mut v: DVector<f64> = if use_gram {
            a.tr_mul(&vectors.column(i)) / l.sqrt()
        } else {
            vectors.column(i).clone_owned()
        };
        // re-orthogonalize against earlier lifts and normalize
        for prev in &components {
            let p = DVector::from_column_slice(prev.as_slice());
            let d = p.dot(&v);
            v.axpy(-d, &p, 1.0);
        }
        v /= v.norm();
        // sign convention: largest-magnitude entry positive
        if v[v.iamax()] < 0.0 {
            v.neg_mut();
        }
        components.push(v.iter().copied().collect());
    }

    Ok(PcaReduction {
        mean: mean.iter().copied().collect(),
        components,
        eigenvalues: positive[..keep].to_vec(),
        total_energy: total,
        energy_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Eigenvalues of the direct covariance for comparison with the Gram path.
    fn direct_eigenvalues(data: &DMatrix<f64>) -> Vec<f64> {
        let n = data.nrows() as f64;
        let mean = data.row_sum() / n;
        let mut a = data.clone();
        for mut r in a.row_iter_mut() {
            r -= &mean;
        }
        let mut v: Vec<f64> = SymmetricEigen::new(a.transpose() * a).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn gram_path_matches_direct_covariance() {
        for (r, c, seed) in [(5, 8, 1), (10, 50, 2), (7, 30, 3)] {
            let data = random(r, c, seed);
            let pca = fit_pca(&data, 1.0).unwrap();
            let direct = direct_eigenvalues(&data);
            assert_eq!(pca.n_components(), r - 1);
            for (a, b) in pca.eigenvalues().iter().zip(&direct) {
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
            let scores = pca.project(&data).unwrap();
            for j in 0..pca.n_components() {
                let col = scores.column(j);
                assert!(col.mean().abs() < 1e-10);
                assert_relative_eq!(col.norm_squared(), pca.eigenvalues()[j], max_relative = 1e-8);
            }
            for (i, u) in pca.components().iter().enumerate() {
                for (j, v) in pca.components().iter().enumerate() {
                    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn full_retention_reconstructs() {
        for (r, c) in [(6, 20), (12, 5)] {
            let data = random(r, c, 4);
            let pca = fit_pca(&data, 1.0).unwrap();
            let back = pca.reconstruct(&pca.project(&data).unwrap()).unwrap();
            assert!((back - &data).amax() < 1e-8);
            let zero = pca.reconstruct(&DMatrix::zeros(1, pca.n_components())).unwrap();
            assert_eq!(zero.row(0).iter().copied().collect::<Vec<_>>(), pca.mean());
            let mean_scores = pca.project_row(pca.mean()).unwrap();
            assert!(mean_scores.iter().all(|s| s.abs() < 1e-12));
        }
    }

    #[test]
    fn rank_one_and_zero_variance() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = DVector::from_vec((0..30).map(|i| (i as f64 * 0.3).sin()).collect::<Vec<_>>());
        let data = &u * v.transpose();
        for frac in [0.5, 0.99, 1.0] {
            assert_eq!(fit_pca(&data, frac).unwrap().n_components(), 1);
        }
        let flat = DMatrix::from_element(5, 10, 2.0);
        let pca = fit_pca(&flat, 0.99).unwrap();
        assert_eq!(pca.n_components(), 0);
        assert_eq!(pca.reconstruct_row(&[]).unwrap(), vec![2.0; 10]);
    }

    #[test]
    fn truncation_error_bound_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // decaying spectrum
        let data = DMatrix::from_fn(40, 120, |_, j| {
            (1..=15i32).map(|k| (0.6f64).powi(k) * ((k as usize * j) as f64 * 0.05).cos() * rng.random_range(-1.0..1.0)).sum::<f64>()
        });
        let centered = {
            let mean = data.row_sum() / 40.0;
            let mut a = data.clone();
            for mut r in a.row_iter_mut() {
                r -= &mean;
            }
            a
        };
        let pca = fit_pca(&data, 0.99).unwrap();
        let back = pca.reconstruct(&pca.project(&data).unwrap()).unwrap();
        let rel = (back - &data).norm() / centered.norm();
        assert!(rel <= 2.0 * 0.01f64.sqrt(), "{rel}");
        assert!(pca.retained_energy() >= 0.99);

        let mut last = f64::INFINITY;
        for frac in [0.5, 0.8, 0.9, 0.99, 0.999, 1.0] {
            let p = fit_pca(&data, frac).unwrap();
            let e = (p.reconstruct(&p.project(&data).unwrap()).unwrap() - &data).norm();
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn input_checks() {
        assert!(matches!(fit_pca(&random(1, 5, 6), 0.9), Err(Error::InsufficientDesign { .. })));
        assert!(matches!(fit_pca(&random(4, 5, 6), 0.0), Err(Error::Config(_))));
        let pca = fit_pca(&random(4, 5, 6), 0.9).unwrap();
        assert!(pca.project_row(&[1.0; 4]).is_err());
    }
}
