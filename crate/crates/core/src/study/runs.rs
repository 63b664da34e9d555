use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::metrics::{frf_errors, moment_errors, rms_error_channels, EnsembleMoments, MomentAccumulator};
use super::sampling::{lhs_sample, mc_sample};
use crate::chaos::InputTransform;
use crate::dynsys::{modal_damping_ratios, FrfSet};
use crate::error::{Error, Result};
use crate::sigproc::{extract_selected_frequencies, peak_position, SelectedFrequencies};
use crate::surrogate::{FrfSurrogate, FullModel, SurrogateSettings};

/// Points evaluated in parallel between two ordered reductions.
const CHUNK: usize = 256;

/// Comparison of the surrogate with the full model at one validation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    /// Error of every channel, percent.
    pub errors: Vec<f64>,
    /// Error over all channels stacked, percent.
    pub overall: f64,
    pub peaks_true: Vec<f64>,
    pub peaks_pred: Vec<f64>,
    pub selected_true: Vec<f64>,
    pub selected_pred: Vec<f64>,
    /// Largest `|H|` around each resonance, channel-major.
    pub amplitude_true: Vec<f64>,
    pub amplitude_pred: Vec<f64>,
    /// Modal damping ratios of the full model, ascending frequency.
    pub damping_ratios: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub points: Vec<Vec<f64>>,
    /// `None` where the surrogate could not predict; see `failures`.
    pub records: Vec<Option<PointRecord>>,
    pub failures: Vec<(usize, String)>,
    pub reference: EnsembleMoments,
    pub surrogate: EnsembleMoments,
    pub mean_error: f64,
    pub std_error: f64,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

impl ValidationReport {
    fn ok(&self) -> impl Iterator<Item = &PointRecord> {
        self.records.iter().flatten()
    }

    /// Per-channel errors of every successfully predicted point, pooled.
    pub fn channel_errors(&self) -> Vec<f64> {
        self.ok().flat_map(|r| r.errors.iter().copied()).collect()
    }

    pub fn median_channel_error(&self) -> f64 {
        median(&mut self.channel_errors())
    }

    pub fn max_channel_error(&self) -> f64 {
        self.channel_errors().into_iter().fold(f64::NAN, f64::max)
    }

    /// `|pred − true| / true` for every resonance of every point.
    pub fn peak_relative_errors(&self) -> Vec<f64> {
        self.ok()
            .flat_map(|r| r.peaks_true.iter().zip(&r.peaks_pred).map(|(t, p)| (p - t).abs() / t))
            .collect()
    }

    pub fn median_peak_error(&self) -> f64 {
        median(&mut self.peak_relative_errors())
    }

    /// Least-squares slope of predicted against true frequency, per resonance.
    pub fn peak_slopes(&self) -> Vec<f64> {
        let n_peaks = self.ok().next().map(|r| r.peaks_true.len()).unwrap_or(0);
        (0..n_peaks)
            .map(|i| {
                let t: Vec<f64> = self.ok().map(|r| r.peaks_true[i]).collect();
                let p: Vec<f64> = self.ok().map(|r| r.peaks_pred[i]).collect();
                ols_slope(&t, &p)
            })
            .collect()
    }

    /// Sample mean of each modal damping ratio.
    pub fn mean_damping_ratios(&self) -> Vec<f64> {
        let recs: Vec<&PointRecord> = self.ok().collect();
        let n_modes = recs.first().map(|r| r.damping_ratios.len()).unwrap_or(0);
        (0..n_modes)
            .map(|i| recs.iter().map(|r| r.damping_ratios[i]).sum::<f64>() / recs.len() as f64)
            .collect()
    }

    /// Index of the point with the largest overall error and of the one
    /// closest to the median.
    pub fn worst_and_typical(&self) -> Option<(usize, usize)> {
        let mut ranked: Vec<(usize, f64)> = self
            .records
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| (i, r.overall)))
            .collect();
        if ranked.is_empty() {
            return None;
        }
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        Some((ranked[ranked.len() - 1].0, ranked[ranked.len() / 2].0))
    }
}

fn band_max(frf: &[Complex64], grid: &[f64], lo: f64, hi: f64) -> f64 {
    grid.iter()
        .zip(frf)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
}

fn resonance_amplitudes(frf: &FrfSet, selected: &SelectedFrequencies) -> Vec<f64> {
    let grid = frf.grid().values();
    let mut out = Vec::new();
    for (c, row) in selected.rows().iter().enumerate() {
        for i in 0..selected.n_peaks() {
            let p = peak_position(i);
            out.push(band_max(&frf.channels()[c], grid, row[p - 1], row[p + 1]));
        }
    }
    out
}

fn compare(surrogate: &FrfSurrogate, exact: &FrfSet, poles: &[Complex64], x: &[f64]) -> Result<(PointRecord, FrfSet)> {
    let sel_true = extract_selected_frequencies(exact, poles)?;
    let sel_pred = surrogate.predict_selected_frequencies(x)?;
    if sel_true.n_peaks() != sel_pred.n_peaks() {
        return Err(Error::ModeCount {
            realization: 0,
            expected: sel_pred.n_selected(),
            found: sel_true.n_selected(),
        });
    }
    let pred = surrogate.predict_frf(x)?;
    let mut zeta: Vec<(f64, f64)> = poles
        .iter()
        .filter(|p| p.im > 0.0)
        .map(|p| (p.im, modal_damping_ratios(std::slice::from_ref(p))[0]))
        .collect();
    zeta.sort_by(|a, b| a.0.total_cmp(&b.0));
    let record = PointRecord {
        errors: frf_errors(exact, &pred)?,
        overall: rms_error_channels(exact.channels(), pred.channels())?,
        peaks_true: sel_true.peaks(),
        peaks_pred: sel_pred.peaks(),
        selected_true: sel_true.vectorize(),
        selected_pred: sel_pred.vectorize(),
        amplitude_true: resonance_amplitudes(exact, &sel_true),
        amplitude_pred: resonance_amplitudes(&pred, &sel_true),
        damping_ratios: zeta.into_iter().map(|z| z.1).collect(),
    };
    Ok((record, pred))
}

/// Compares surrogate and full model at `points`; both ensembles' moments are
/// accumulated in point order, so results do not depend on thread count.
pub fn validate(surrogate: &FrfSurrogate, model: &dyn FullModel, points: &[Vec<f64>]) -> Result<ValidationReport> {
    if points.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut exact_acc = MomentAccumulator::new();
    let mut pred_acc = MomentAccumulator::new();
    let mut records = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (chunk_idx, chunk) in points.chunks(CHUNK).enumerate() {
        type Evaluated = Result<(FrfSet, Result<(PointRecord, FrfSet)>)>;
        let results: Vec<Evaluated> = chunk
            .par_iter()
            .map(|x| {
                let (exact, poles) = model.evaluate(x)?;
                let cmp = compare(surrogate, &exact, &poles, x);
                Ok((exact, cmp))
            })
            .collect();
        for (j, res) in results.into_iter().enumerate() {
            let (exact, cmp) = res?;
            exact_acc.push(&exact)?;
            match cmp {
                Ok((rec, pred)) => {
                    pred_acc.push(&pred)?;
                    records.push(Some(rec));
                }
                Err(e) if e.kind() == crate::ErrorKind::Numeric => {
                    failures.push((chunk_idx * CHUNK + j, e.to_string()));
                    records.push(None);
                }
                Err(e) => return Err(e),
            }
        }
    }
    let reference = exact_acc.moments()?;
    let surrogate_moments = pred_acc.moments()?;
    let (mean_error, std_error) = moment_errors(&reference, &surrogate_moments)?;
    Ok(ValidationReport {
        points: points.to_vec(),
        records,
        failures,
        reference,
        surrogate: surrogate_moments,
        mean_error,
        std_error,
    })
}

/// Full-model moments over a sample, and snapshots after the first `n`
/// members for every `n` in `prefixes`.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pub moments: EnsembleMoments,
    pub prefixes: Vec<(usize, EnsembleMoments)>,
}

pub fn reference_moments(model: &dyn FullModel, points: &[Vec<f64>], prefixes: &[usize]) -> Result<ReferenceSet> {
    let mut acc = MomentAccumulator::new();
    let mut wanted: Vec<usize> = prefixes.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut snaps = Vec::new();
    for chunk in points.chunks(CHUNK) {
        let sims: Vec<FrfSet> = chunk
            .par_iter()
            .map(|x| model.evaluate(x).map(|s| s.0))
            .collect::<Result<_>>()?;
        for s in &sims {
            acc.push(s)?;
            if wanted.binary_search(&acc.count()).is_ok() {
                snaps.push((acc.count(), acc.moments()?));
            }
        }
    }
    Ok(ReferenceSet {
        moments: acc.moments()?,
        prefixes: snaps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub ed_size: usize,
    pub pce_mean_error: f64,
    pub pce_std_error: f64,
    pub mc_mean_error: f64,
    pub mc_std_error: f64,
    pub stage2_models: usize,
    /// Largest selected truncation degree over all fitted PCEs.
    pub max_degree: u32,
    pub failures: usize,
}

/// For each design size: builds a surrogate on an LHS design, compares its
/// moments over a Monte Carlo reference sample with the reference moments,
/// next to the plain estimator using the first `N` reference members.
pub fn convergence_study(
    transform: &InputTransform,
    model: &dyn FullModel,
    settings: &SurrogateSettings,
    ed_sizes: &[usize],
    reference_size: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let largest = ed_sizes.iter().copied().max().ok_or_else(|| Error::Config("no design sizes given".into()))?;
    if reference_size < largest {
        return Err(Error::Config(format!(
            "reference size {reference_size} is smaller than the largest design size {largest}"
        )));
    }
    let points = mc_sample(transform, reference_size, derive_seed(seed, "reference"));
    let reference = reference_moments(model, &points, ed_sizes)?;
    let mut rows = Vec::with_capacity(ed_sizes.len());
    for &n in ed_sizes {
        let ed = lhs_sample(transform, n, derive_seed(seed, &format!("ed-{n}")));
        let surrogate = FrfSurrogate::build(transform, &ed, model, None, settings)?;
        let mut acc = MomentAccumulator::new();
        let mut failures = 0;
        for chunk in points.chunks(CHUNK) {
            let preds: Vec<Result<FrfSet>> = chunk.par_iter().map(|x| surrogate.predict_frf(x)).collect();
            for p in preds {
                match p {
                    Ok(f) => acc.push(&f)?,
                    Err(e) if e.kind() == crate::ErrorKind::Numeric => failures += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        let (pce_mean_error, pce_std_error) = moment_errors(&reference.moments, &acc.moments()?)?;
        let mc = &reference
            .prefixes
            .iter()
            .find(|(k, _)| *k == n)
            .expect("snapshot for every design size")
            .1;
        let (mc_mean_error, mc_std_error) = moment_errors(&reference.moments, mc)?;
        rows.push(ConvergenceRow {
            ed_size: n,
            pce_mean_error,
            pce_std_error,
            mc_mean_error,
            mc_std_error,
            stage2_models: surrogate.stage2_model_count(),
            max_degree: surrogate.fitted_models().iter().map(|m| m.diagnostics().degree).max().unwrap_or(0),
            failures,
        });
    }
    Ok(rows)
}
