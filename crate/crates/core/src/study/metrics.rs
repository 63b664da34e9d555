use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynsys::{FrequencyGrid, FrfSet};
use crate::error::{Error, Result};

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what: "compared vector length",
            expected: a,
            found: b,
        });
    }
    Ok(())
}

fn ratio(diff_sq: f64, ref_sq: f64) -> Result<f64> {
    if ref_sq == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok(100.0 * (diff_sq / ref_sq).sqrt())
}

/// `100 · rms(exact − approx) / rms(exact)`, complex differences by modulus.
pub fn rms_error(exact: &[Complex64], approx: &[Complex64]) -> Result<f64> {
    check_len(exact.len(), approx.len())?;
    let d: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b).norm_sqr()).sum();
    ratio(d, exact.iter().map(|a| a.norm_sqr()).sum())
}

pub fn rms_error_real(exact: &[f64], approx: &[f64]) -> Result<f64> {
    check_len(exact.len(), approx.len())?;
    let d: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b).powi(2)).sum();
    ratio(d, exact.iter().map(|a| a * a).sum())
}

/// Error over all channels stacked end to end.
pub fn rms_error_channels(exact: &[Vec<Complex64>], approx: &[Vec<Complex64>]) -> Result<f64> {
    check_len(exact.len(), approx.len())?;
    let mut d = 0.0;
    let mut r = 0.0;
    for (e, a) in exact.iter().zip(approx) {
        check_len(e.len(), a.len())?;
        d += e.iter().zip(a).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
        r += e.iter().map(|x| x.norm_sqr()).sum::<f64>();
    }
    ratio(d, r)
}

/// Per-channel errors between two FRF sets on the same grid.
pub fn frf_errors(exact: &FrfSet, approx: &FrfSet) -> Result<Vec<f64>> {
    check_len(exact.n_channels(), approx.n_channels())?;
    exact
        .channels()
        .iter()
        .zip(approx.channels())
        .map(|(e, a)| rms_error(e, a))
        .collect()
}

/// Per-frequency ensemble statistics. The standard deviation is reported as
/// `std(Re) + j·std(Im)` with the unbiased denominator (zero for one member).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    pub grid: FrequencyGrid,
    pub count: usize,
    pub mean: Vec<Vec<Complex64>>,
    pub std: Vec<Vec<Complex64>>,
    pub min_abs: Vec<Vec<f64>>,
    pub max_abs: Vec<Vec<f64>>,
}

/// Streaming accumulator (Welford) for [`EnsembleMoments`].
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    grid: Option<FrequencyGrid>,
    count: usize,
    mean_re: Vec<Vec<f64>>,
    mean_im: Vec<Vec<f64>>,
    m2_re: Vec<Vec<f64>>,
    m2_im: Vec<Vec<f64>>,
    min_abs: Vec<Vec<f64>>,
    max_abs: Vec<Vec<f64>>,
}

impl Default for MomentAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self {
            grid: None,
            count: 0,
            mean_re: Vec::new(),
            mean_im: Vec::new(),
            m2_re: Vec::new(),
            m2_im: Vec::new(),
            min_abs: Vec::new(),
            max_abs: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, frf: &FrfSet) -> Result<()> {
        match &self.grid {
            None => {
                let shape: Vec<Vec<f64>> = frf.channels().iter().map(|c| vec![0.0; c.len()]).collect();
                self.grid = Some(frf.grid().clone());
                self.mean_re = shape.clone();
                self.mean_im = shape.clone();
                self.m2_re = shape.clone();
                self.m2_im = shape.clone();
                self.min_abs = shape.iter().map(|c| vec![f64::INFINITY; c.len()]).collect();
                self.max_abs = shape;
            }
            Some(g) => {
                if g != frf.grid() {
                    return Err(Error::InvalidGrid("ensemble members use different grids".into()));
                }
                check_len(self.mean_re.len(), frf.n_channels())?;
            }
        }
        self.count += 1;
        let n = self.count as f64;
        for (c, ch) in frf.channels().iter().enumerate() {
            for (l, z) in ch.iter().enumerate() {
                let dr = z.re - self.mean_re[c][l];
                self.mean_re[c][l] += dr / n;
                self.m2_re[c][l] += dr * (z.re - self.mean_re[c][l]);
                let di = z.im - self.mean_im[c][l];
                self.mean_im[c][l] += di / n;
                self.m2_im[c][l] += di * (z.im - self.mean_im[c][l]);
                let a = z.norm();
                self.min_abs[c][l] = self.min_abs[c][l].min(a);
                self.max_abs[c][l] = self.max_abs[c][l].max(a);
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> Result<EnsembleMoments> {
        let grid = self.grid.clone().ok_or(Error::EmptyEnsemble)?;
        let denom = if self.count > 1 { (self.count - 1) as f64 } else { f64::INFINITY };
        let zip = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>, f: &dyn Fn(f64, f64) -> Complex64| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(&u, &v)| f(u, v)).collect())
                .collect()
        };
        Ok(EnsembleMoments {
            grid,
            count: self.count,
            mean: zip(&self.mean_re, &self.mean_im, &|u, v| Complex64::new(u, v)),
            std: zip(&self.m2_re, &self.m2_im, &|u, v| {
                Complex64::new((u / denom).sqrt(), (v / denom).sqrt())
            }),
            min_abs: self.min_abs.clone(),
            max_abs: self.max_abs.clone(),
        })
    }
}

pub fn ensemble_moments(frfs: &[FrfSet]) -> Result<EnsembleMoments> {
    let mut acc = MomentAccumulator::new();
    for f in frfs {
        acc.push(f)?;
    }
    acc.moments()
}

/// Mean and standard-deviation errors of `approx` against `exact`.
pub fn moment_errors(exact: &EnsembleMoments, approx: &EnsembleMoments) -> Result<(f64, f64)> {
    Ok((
        rms_error_channels(&exact.mean, &approx.mean)?,
        rms_error_channels(&exact.std, &approx.std)?,
    ))
}
