//! Least squares, hybrid least angle regression and leave-one-out errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative leave-one-out error and its small-sample corrected version.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooDiagnostics {
    pub relative: f64,
    pub corrected: f64,
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// `N / (N - P) · (1 + tr((ΨᵀΨ)⁻¹))`, infinite once `P ≥ N`.
fn correction_factor(n: usize, p: usize, trace_inv: f64) -> f64 {
    if p >= n {
        f64::INFINITY
    } else {
        n as f64 / (n - p) as f64 * (1.0 + trace_inv)
    }
}

fn relative_loo(residual: &[f64], hat: &[f64], variance: f64) -> f64 {
    let n = residual.len() as f64;
    let mut acc = 0.0;
    for (r, h) in residual.iter().zip(hat) {
        let denom = 1.0 - h;
        if denom <= 1e-12 {
            return f64::INFINITY;
        }
        acc += (r / denom).powi(2);
    }
    let mse = acc / n;
    if variance > 0.0 {
        mse / variance
    } else if mse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

struct ThinQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn thin_qr(psi: &DMatrix<f64>) -> Result<ThinQr> {
    let (n, p) = psi.shape();
    if n < p {
        return Err(Error::InsufficientDesign { found: n, required: p });
    }
    let qr = psi.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if p == 0 || scale == 0.0 || (0..p).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::RegressionRank);
    }
    Ok(ThinQr { q: qr.q(), r })
}

/// Ordinary least squares `min ‖Ψβ − y‖` through a QR factorization.
pub fn fit_ols(psi: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != psi.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response length",
            expected: psi.nrows(),
            found: y.len(),
        });
    }
    let ThinQr { q, r } = thin_qr(psi)?;
    let qty = q.tr_mul(&DVector::from_column_slice(y));
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RegressionRank)?;
    Ok(beta.iter().copied().collect())
}

/// Leave-one-out error of the OLS fit, from the hat-matrix diagonal.
pub fn loo_error(psi: &DMatrix<f64>, y: &[f64]) -> Result<LooDiagnostics> {
    let ThinQr { q, r } = thin_qr(psi)?;
    let (n, p) = psi.shape();
    let yv = DVector::from_column_slice(y);
    let fitted = &q * q.tr_mul(&yv);
    let residual: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let hat: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RegressionRank)?;
    let relative = relative_loo(&residual, &hat, sample_variance(y));
    Ok(LooDiagnostics {
        relative,
        corrected: relative * correction_factor(n, p, rinv.norm_squared()),
    })
}

/// How the returned model is chosen along the LAR path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Step with the smallest corrected LOO error (strict improvement wins).
    #[default]
    MinCorrectedLoo,
    /// Last step of the path.
    FullPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LarsOptions {
    pub selection: Selection,
    /// Stop once the corrected LOO error has not improved for
    /// `max(10, 10% of the path)` steps. Ignored with [`Selection::FullPath`].
    pub early_stop: bool,
}

impl Default for LarsOptions {
    fn default() -> Self {
        Self {
            selection: Selection::MinCorrectedLoo,
            early_stop: true,
        }
    }
}

/// Result of a hybrid LARS fit. `columns` indexes the design matrix and always
/// starts with the constant column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LarsFit {
    pub columns: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub loo: LooDiagnostics,
    /// Corrected LOO error after each path step; entry 0 is the intercept-only model.
    pub path: Vec<f64>,
}

/// Design matrix prepared once for LAR and shared by many responses.
#[derive(Debug, Clone)]
pub struct LarsDesign {
    psi: DMatrix<f64>,
    /// Centered, unit-norm candidate columns.
    x: DMatrix<f64>,
    /// Design column of each candidate in `x`.
    usable: Vec<usize>,
}

const LOO_FLOOR: f64 = 1e-16;

impl LarsDesign {
    /// Column 0 of `psi` must be the constant term.
    pub fn new(psi: DMatrix<f64>) -> Result<Self> {
        let (n, p) = psi.shape();
        if n < 3 {
            return Err(Error::InsufficientDesign { found: n, required: 3 });
        }
        if p == 0 {
            return Err(Error::DegenerateCandidates);
        }
        let c0 = psi[(0, 0)];
        if c0 == 0.0 || psi.column(0).iter().any(|&v| (v - c0).abs() > 1e-12 * c0.abs()) {
            return Err(Error::Config("first design column must be the constant term".into()));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite design matrix entry".into()));
        }
        let mut usable = Vec::new();
        let mut cols = Vec::new();
        for j in 1..p {
            let col = psi.column(j);
            let mean = col.mean();
            let centered = col.map(|v| v - mean);
            let norm = centered.norm();
            if norm > 1e-8 * col.norm() && norm > 0.0 {
                usable.push(j);
                cols.push(centered / norm);
            }
        }
        if usable.is_empty() {
            return Err(Error::DegenerateCandidates);
        }
        let x = DMatrix::from_columns(&cols);
        Ok(Self { psi, x, usable })
    }

    pub fn n_points(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.psi.ncols()
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn fit(&self, y: &[f64], options: &LarsOptions) -> Result<LarsFit> {
        let n = self.n_points();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: n,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite response".into()));
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let sd = sample_variance(y).sqrt();
        if sd <= 1e-14 * mean.abs().max(f64::MIN_POSITIVE) {
            let c0 = self.psi[(0, 0)];
            return Ok(LarsFit {
                columns: vec![0],
                coefficients: vec![mean / c0],
                loo: LooDiagnostics { relative: 0.0, corrected: 0.0 },
                path: vec![0.0],
            });
        }
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / sd));
        let p_cand = self.usable.len();
        let max_steps = p_cand.min(n - 2);

        let mut path = LarPath::new(self, &ys, max_steps);
        let patience = 10usize.max((0.1 * max_steps as f64).ceil() as usize);
        let early = options.early_stop && options.selection == Selection::MinCorrectedLoo;
        let mut best = 0usize;
        while path.active.len() < max_steps {
            if !path.advance() {
                break;
            }
            let step = path.active.len();
            if path.corrected[step] + LOO_FLOOR < path.corrected[best] {
                best = step;
            }
            if early && step - best >= patience {
                break;
            }
        }
        let chosen = match options.selection {
            Selection::MinCorrectedLoo => best,
            Selection::FullPath => path.active.len(),
        };
        let mut columns = vec![0];
        columns.extend(path.active[..chosen].iter().map(|&a| self.usable[a]));
        let sub = self.psi.select_columns(&columns);
        let coefficients = fit_ols(&sub, y)?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite regression coefficient".into()));
        }
        Ok(LarsFit {
            columns,
            coefficients,
            loo: LooDiagnostics {
                relative: path.relative[chosen],
                corrected: path.corrected[chosen],
            },
            path: path.corrected,
        })
    }
}

/// Incremental LAR state: Cholesky of the active Gram of centered candidates
/// for the equiangular direction, and a Gram-Schmidt QR of the raw design
/// columns (with intercept) for the hybrid OLS hat diagonal.
struct LarPath<'a> {
    design: &'a LarsDesign,
    ys: &'a DVector<f64>,
    active: Vec<usize>,
    in_active: Vec<bool>,
    chol: Vec<Vec<f64>>,
    corr: DVector<f64>,
    c_max: f64,
    next: Option<usize>,
    q: Vec<DVector<f64>>,
    rinv: Vec<Vec<f64>>,
    trace_inv: f64,
    fitted: DVector<f64>,
    hat: Vec<f64>,
    relative: Vec<f64>,
    corrected: Vec<f64>,
}

impl<'a> LarPath<'a> {
    fn new(design: &'a LarsDesign, ys: &'a DVector<f64>, max_steps: usize) -> Self {
        let n = ys.len();
        let corr = design.x.tr_mul(ys);
        let (j0, c0) = corr
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
        let c = design.psi[(0, 0)].abs();
        let q0 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let r00 = c * (n as f64).sqrt();
        let mut s = Self {
            design,
            ys,
            active: Vec::with_capacity(max_steps),
            in_active: vec![false; design.usable.len()],
            chol: Vec::with_capacity(max_steps),
            corr,
            c_max: c0,
            next: Some(j0),
            q: vec![q0],
            rinv: vec![vec![1.0 / r00]],
            trace_inv: 1.0 / (r00 * r00),
            fitted: DVector::zeros(n),
            hat: vec![1.0 / n as f64; n],
            relative: Vec::with_capacity(max_steps + 1),
            corrected: Vec::with_capacity(max_steps + 1),
        };
        s.record();
        s
    }

    fn record(&mut self) {
        let residual: Vec<f64> = self.ys.iter().zip(self.fitted.iter()).map(|(a, b)| a - b).collect();
        let rel = relative_loo(&residual, &self.hat, 1.0);
        let k = self.active.len() + 1;
        self.relative.push(rel);
        self.corrected
            .push(rel * correction_factor(self.ys.len(), k, self.trace_inv));
    }

    /// Adds the next variable, records its LOO error and moves along the
    /// equiangular direction. Returns false when the path cannot continue.
    fn advance(&mut self) -> bool {
        let Some(j) = self.next else { return false };
        if !self.extend_cholesky(j) || !self.extend_qr(j) {
            return false;
        }
        self.active.push(j);
        self.in_active[j] = true;
        self.record();
        self.step_direction();
        true
    }

    fn extend_cholesky(&mut self, j: usize) -> bool {
        let x = &self.design.x;
        let xj = x.column(j);
        let k = self.active.len();
        let mut w = vec![0.0; k];
        for i in 0..k {
            let g = x.column(self.active[i]).dot(&xj);
            let s: f64 = (0..i).map(|l| self.chol[i][l] * w[l]).sum();
            w[i] = (g - s) / self.chol[i][i];
        }
        let d2 = 1.0 - w.iter().map(|v| v * v).sum::<f64>();
        if d2 <= 1e-10 {
            return false;
        }
        w.push(d2.sqrt());
        self.chol.push(w);
        true
    }

    fn extend_qr(&mut self, j: usize) -> bool {
        let col = self.design.psi.column(self.design.usable[j]);
        let mut v = col.clone_owned();
        let k = self.q.len();
        let mut r = vec![0.0; k];
        for _ in 0..2 {
            for (l, ql) in self.q.iter().enumerate() {
                let d = ql.dot(&v);
                r[l] += d;
                v.axpy(-d, ql, 1.0);
            }
        }
        let rho = v.norm();
        if rho <= 1e-10 * col.norm() {
            return false;
        }
        v /= rho;
        // new column of R⁻¹ is [-R⁻¹ r / ρ; 1/ρ]
        let mut new_col = vec![0.0; k + 1];
        for (l, rl) in r.iter().enumerate() {
            for (i, nc) in new_col.iter_mut().enumerate().take(l + 1) {
                *nc -= self.rinv[l][i] * rl / rho;
            }
        }
        new_col[k] = 1.0 / rho;
        self.trace_inv += new_col.iter().map(|v| v * v).sum::<f64>();
        self.rinv.push(new_col);
        let proj = v.dot(self.ys);
        self.fitted.axpy(proj, &v, 1.0);
        for (h, vi) in self.hat.iter_mut().zip(v.iter()) {
            *h += vi * vi;
        }
        self.q.push(v);
        true
    }

    fn step_direction(&mut self) {
        let k = self.active.len();
        let signs: Vec<f64> = self.active.iter().map(|&a| self.corr[a].signum()).collect();
        // solve L Lᵀ z = s
        let mut y = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|l| self.chol[i][l] * y[l]).sum();
            y[i] = (signs[i] - s) / self.chol[i][i];
        }
        let mut z = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| self.chol[l][i] * z[l]).sum();
            z[i] = (y[i] - s) / self.chol[i][i];
        }
        let ss: f64 = signs.iter().zip(&z).map(|(a, b)| a * b).sum();
        if !(ss > 0.0) {
            self.next = None;
            return;
        }
        let big_a = 1.0 / ss.sqrt();
        let x = &self.design.x;
        let mut u = DVector::zeros(x.nrows());
        for (i, &a) in self.active.iter().enumerate() {
            u.axpy(big_a * z[i], &x.column(a), 1.0);
        }
        let a = x.tr_mul(&u);
        let mut gamma = self.c_max / big_a;
        let mut next = None;
        for jj in 0..a.len() {
            if self.in_active[jj] {
                continue;
            }
            for cand in [
                (self.c_max - self.corr[jj]) / (big_a - a[jj]),
                (self.c_max + self.corr[jj]) / (big_a + a[jj]),
            ] {
                if cand > 1e-14 * gamma.abs().max(1e-300) && cand < gamma {
                    gamma = cand;
                    next = Some(jj);
                }
            }
        }
        self.corr.axpy(-gamma, &a, 1.0);
        self.c_max -= gamma * big_a;
        self.next = next;
    }
}

/// One-shot hybrid LARS on a design whose column 0 is the constant term.
pub fn fit_lars(psi: &DMatrix<f64>, y: &[f64], options: &LarsOptions) -> Result<LarsFit> {
    LarsDesign::new(psi.clone())?.fit(y, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Box-Muller draw.
    fn normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { normal(rng) })
    }

    /// Leave-one-out by brute-force refitting.
    fn explicit_loo(psi: &DMatrix<f64>, y: &[f64]) -> f64 {
        let n = psi.nrows();
        let mut acc = 0.0;
        for i in 0..n {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let sub = psi.select_rows(&rows);
            let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            let beta = fit_ols(&sub, &ys).unwrap();
            let pred: f64 = (0..psi.ncols()).map(|j| psi[(i, j)] * beta[j]).sum();
            acc += (y[i] - pred).powi(2);
        }
        acc / n as f64 / sample_variance(y)
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_design(&mut rng, 20, 5);
        let y: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
        let beta = fit_ols(&psi, &y).unwrap();
        let gram = psi.transpose() * &psi;
        let oracle = gram.try_inverse().unwrap() * psi.transpose() * DVector::from_vec(y.clone());
        for (a, b) in beta.iter().zip(oracle.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
        let resid = DVector::from_vec(y) - &psi * DVector::from_vec(beta);
        assert!((psi.transpose() * resid).amax() < 1e-10);
    }

    #[test]
    fn ols_constant_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_design(&mut rng, 10, 3);
        let beta = fit_ols(&psi, &[4.0; 10]).unwrap();
        assert_relative_eq!(beta[0], 4.0, epsilon = 1e-12);
        assert!(beta[1].abs() < 1e-12 && beta[2].abs() < 1e-12);
        let mut dup = psi.clone();
        dup.set_column(2, &psi.column(1).clone_owned());
        assert!(matches!(fit_ols(&dup, &[1.0; 10]), Err(Error::RegressionRank)));
        assert!(matches!(
            fit_ols(&random_design(&mut rng, 3, 5), &[1.0; 3]),
            Err(Error::InsufficientDesign { .. })
        ));
    }

    #[test]
    fn loo_shortcut_equals_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, p) in &[(12, 3), (20, 6), (30, 10)] {
            let psi = random_design(&mut rng, n, p);
            let y: Vec<f64> = (0..n).map(|i| psi[(i, 1)] * 2.0 + 0.3 * normal(&mut rng)).collect();
            let fast = loo_error(&psi, &y).unwrap().relative;
            let slow = explicit_loo(&psi, &y);
            assert_relative_eq!(fast, slow, max_relative = 1e-8);
        }
    }

    #[test]
    fn lars_path_loo_matches_explicit_refit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_design(&mut rng, 25, 8);
        let y: Vec<f64> = (0..25)
            .map(|i| 1.0 + psi[(i, 2)] - 0.5 * psi[(i, 5)] + 0.2 * normal(&mut rng))
            .collect();
        let opts = LarsOptions { selection: Selection::FullPath, early_stop: false };
        let fit = fit_lars(&psi, &y, &opts).unwrap();
        let sub = psi.select_columns(&fit.columns);
        assert_relative_eq!(fit.loo.relative, explicit_loo(&sub, &y), max_relative = 1e-8);
        let diag = loo_error(&sub, &y).unwrap();
        assert_relative_eq!(fit.loo.corrected, diag.corrected, max_relative = 1e-8);
    }

    #[test]
    fn sparse_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = random_design(&mut rng, 60, 51);
        let truth = [(7usize, 2.0), (19, -1.5), (42, 0.8)];
        let y: Vec<f64> = (0..60)
            .map(|i| 0.5 + truth.iter().map(|&(j, c)| c * psi[(i, j)]).sum::<f64>())
            .collect();
        let fit = fit_lars(&psi, &y, &LarsOptions::default()).unwrap();
        for (j, c) in truth {
            let pos = fit.columns.iter().position(|&k| k == j).expect("true term selected");
            assert_relative_eq!(fit.coefficients[pos], c, epsilon = 1e-8);
        }
        assert!(fit.loo.relative < 1e-8, "loo {}", fit.loo.relative);
    }

    #[test]
    fn pure_noise_selects_near_constant() {
        let mut sizes = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let psi = random_design(&mut rng, 50, 30);
            let y: Vec<f64> = (0..50).map(|_| normal(&mut rng)).collect();
            let fit = fit_lars(&psi, &y, &LarsOptions::default()).unwrap();
            sizes.push(fit.columns.len() - 1);
        }
        sizes.sort();
        assert!(sizes[sizes.len() / 2] <= 2, "median active size {sizes:?}");
    }

    #[test]
    fn full_path_equals_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi = random_design(&mut rng, 200, 8);
        let y: Vec<f64> = (0..200).map(|_| normal(&mut rng) + rng.random::<f64>()).collect();
        let opts = LarsOptions { selection: Selection::FullPath, early_stop: false };
        let fit = fit_lars(&psi, &y, &opts).unwrap();
        assert_eq!(fit.columns.len(), 8);
        let ols = fit_ols(&psi, &y).unwrap();
        for (pos, &j) in fit.columns.iter().enumerate() {
            assert_relative_eq!(fit.coefficients[pos], ols[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn degenerate_and_constant_cases() {
        let psi = DMatrix::from_element(10, 3, 1.0);
        assert!(matches!(LarsDesign::new(psi), Err(Error::DegenerateCandidates)));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = random_design(&mut rng, 10, 4);
        let fit = fit_lars(&psi, &[3.0; 10], &LarsOptions::default()).unwrap();
        assert_eq!(fit.columns, vec![0]);
        assert_relative_eq!(fit.coefficients[0], 3.0);
        let mut bad = psi.clone();
        bad[(0, 0)] = 2.0;
        assert!(LarsDesign::new(bad).is_err());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random_design(&mut rng, 40, 20);
        let y: Vec<f64> = (0..40).map(|i| psi[(i, 3)].powi(2) + normal(&mut rng) * 0.1).collect();
        let a = fit_lars(&psi, &y, &LarsOptions::default()).unwrap();
        let b = fit_lars(&psi, &y, &LarsOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
