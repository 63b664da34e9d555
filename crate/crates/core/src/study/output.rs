//! CSV and JSON writers for study results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::metrics::EnsembleMoments;
use super::runs::{ConvergenceRow, ValidationReport};
use crate::dynsys::FrfSet;
use crate::error::{Error, Result};

/// File name stem shared by every artifact of one run, e.g. `2dof_seed1_n40`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTag {
    pub case: String,
    pub seed: u64,
    pub ed_size: usize,
}

impl RunTag {
    pub fn stem(&self) -> String {
        format!("{}_seed{}_n{}", self.case, self.seed, self.ed_size)
    }

    pub fn path(&self, dir: &Path, what: &str, ext: &str) -> PathBuf {
        dir.join(format!("{}_{}.{}", self.stem(), what, ext))
    }
}

/// One row per frequency: ω, then Re, Im, |H| and arg H of every channel of
/// every labelled FRF. All FRFs must share the grid of the first.
pub fn write_frf_table(path: &Path, frfs: &[(&str, &FrfSet)]) -> Result<()> {
    let Some((_, first)) = frfs.first() else {
        return Err(Error::EmptyEnsemble);
    };
    let grid = first.grid();
    if frfs.iter().any(|(_, f)| f.grid() != grid) {
        return Err(Error::InvalidGrid("FRFs written to one table must share a grid".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["omega".to_string()];
    for (label, frf) in frfs {
        let prefix = if label.is_empty() { String::new() } else { format!("{label}_") };
        for o in 0..frf.n_outputs() {
            for i in 0..frf.n_inputs() {
                for part in ["re", "im", "abs", "arg"] {
                    header.push(format!("{prefix}h{}_{}_{part}", o + 1, i + 1));
                }
            }
        }
    }
    w.write_record(&header)?;
    for (j, omega) in grid.values().iter().enumerate() {
        let mut row = vec![omega.to_string()];
        for (_, frf) in frfs {
            for ch in frf.channels() {
                let z = ch[j];
                row.extend([z.re, z.im, z.norm(), z.arg()].iter().map(f64::to_string));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard deviation curves of both ensembles, magnitude and phase.
pub fn write_moments(path: &Path, reference: &EnsembleMoments, surrogate: &EnsembleMoments) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "channel",
        "omega",
        "ref_mean_abs",
        "ref_mean_arg",
        "ref_std_abs",
        "ref_std_arg",
        "ref_min_abs",
        "ref_max_abs",
        "pce_mean_abs",
        "pce_mean_arg",
        "pce_std_abs",
        "pce_std_arg",
        "pce_min_abs",
        "pce_max_abs",
    ])?;
    for c in 0..reference.mean.len() {
        for (j, omega) in reference.grid.values().iter().enumerate() {
            let (rm, rs) = (reference.mean[c][j], reference.std[c][j]);
            let (pm, ps) = (surrogate.mean[c][j], surrogate.std[c][j]);
            w.serialize((
                c,
                omega,
                rm.norm(),
                rm.arg(),
                rs.norm(),
                rs.arg(),
                reference.min_abs[c][j],
                reference.max_abs[c][j],
                pm.norm(),
                pm.arg(),
                ps.norm(),
                ps.arg(),
                surrogate.min_abs[c][j],
                surrogate.max_abs[c][j],
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-point errors; failed predictions keep their row with the reason.
pub fn write_validation_errors(path: &Path, report: &ValidationReport) -> Result<()> {
    let n_ch = report.reference.mean.len();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["point".to_string(), "overall".to_string()];
    header.extend((0..n_ch).map(|c| format!("channel{c}")));
    header.push("failure".into());
    w.write_record(&header)?;
    let mut failures = report.failures.iter();
    for (i, rec) in report.records.iter().enumerate() {
        let mut row = vec![i.to_string()];
        match rec {
            Some(r) => {
                row.push(r.overall.to_string());
                row.extend(r.errors.iter().map(f64::to_string));
                row.push(String::new());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), n_ch + 1));
                let reason = failures.find(|(k, _)| *k == i).map(|(_, m)| m.clone()).unwrap_or_default();
                row.push(reason);
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// True against predicted selected frequencies, flattened channel-major.
pub fn write_selected_frequencies(path: &Path, report: &ValidationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point", "entry", "true", "predicted"])?;
    for (i, rec) in report.records.iter().enumerate() {
        if let Some(r) = rec {
            for (e, (t, p)) in r.selected_true.iter().zip(&r.selected_pred).enumerate() {
                w.serialize((i, e, t, p))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Resonance amplitudes of both models, for histograms.
pub fn write_amplitudes(path: &Path, report: &ValidationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["point", "channel", "mode", "true", "predicted"])?;
    for (i, rec) in report.records.iter().enumerate() {
        if let Some(r) = rec {
            let n_modes = r.peaks_true.len();
            for (k, (t, p)) in r.amplitude_true.iter().zip(&r.amplitude_pred).enumerate() {
                w.serialize((i, k / n_modes, k % n_modes, t, p))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON, newline-terminated.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Scalar results of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub points: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub median_channel_error: f64,
    pub max_channel_error: f64,
    pub median_peak_error: f64,
    pub peak_slopes: Vec<f64>,
    pub mean_damping_ratios: Vec<f64>,
    pub worst_point: Option<usize>,
    pub typical_point: Option<usize>,
}

impl ValidationSummary {
    pub fn from_report(report: &ValidationReport) -> Self {
        let wt = report.worst_and_typical();
        Self {
            points: report.points.len(),
            failures: report.failures.len(),
            mean_error: report.mean_error,
            std_error: report.std_error,
            median_channel_error: report.median_channel_error(),
            max_channel_error: report.max_channel_error(),
            median_peak_error: report.median_peak_error(),
            peak_slopes: report.peak_slopes(),
            mean_damping_ratios: report.mean_damping_ratios(),
            worst_point: wt.map(|w| w.0),
            typical_point: wt.map(|w| w.1),
        }
    }
}

/// Writes every per-point table of a validation run; returns the paths.
pub fn write_validation(dir: &Path, tag: &RunTag, report: &ValidationReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths = vec![
        tag.path(dir, "errors", "csv"),
        tag.path(dir, "selected", "csv"),
        tag.path(dir, "amplitudes", "csv"),
        tag.path(dir, "moments", "csv"),
        tag.path(dir, "summary", "json"),
    ];
    write_validation_errors(&paths[0], report)?;
    write_selected_frequencies(&paths[1], report)?;
    write_amplitudes(&paths[2], report)?;
    write_moments(&paths[3], &report.reference, &report.surrogate)?;
    write_json(&paths[4], &ValidationSummary::from_report(report))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{lhs_sample, mc_sample, two_dof, validate, SystemModel};
    use crate::surrogate::FrfSurrogate;

    #[test]
    fn tag_names() {
        let tag = RunTag { case: "2dof".into(), seed: 7, ed_size: 40 };
        assert_eq!(tag.stem(), "2dof_seed7_n40");
        assert_eq!(tag.path(Path::new("o"), "errors", "csv"), Path::new("o/2dof_seed7_n40_errors.csv"));
    }

    #[test]
    fn validation_tables_have_one_row_per_point() {
        let case = two_dof();
        let t = case.inputs.transform().unwrap();
        let model = SystemModel { system: &case.system, grid: &case.grid };
        let s = FrfSurrogate::build(&t, &lhs_sample(&t, 12, 1), &model, None, &case.settings).unwrap();
        let report = validate(&s, &model, &mc_sample(&t, 5, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let tag = RunTag { case: case.name.clone(), seed: 1, ed_size: 12 };
        let paths = write_validation(dir.path(), &tag, &report).unwrap();
        let errors = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(errors.lines().count(), 1 + 5);
        assert!(errors.starts_with("point,overall,channel0,channel1,failure"));
        let moments = fs::read_to_string(&paths[3]).unwrap();
        assert_eq!(moments.lines().count(), 1 + 2 * case.grid.len());
        let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths[4]).unwrap()).unwrap();
        assert_eq!(summary["points"], 5);
    }

    #[test]
    fn frf_table_is_wide() {
        let case = two_dof();
        let model = SystemModel { system: &case.system, grid: &case.grid };
        use crate::surrogate::FullModel;
        let (frf, _) = model.evaluate(&case.inputs.nominal()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_frf_table(&path, &[("", &frf)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 2501);
        assert!(text.starts_with("omega,h1_1_re,h1_1_im,h1_1_abs,h1_1_arg,h2_1_re"));
        assert!(write_frf_table(&path, &[]).is_err());
    }
}
