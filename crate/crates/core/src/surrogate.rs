//! Two-stage FRF surrogate: PCEs of the selected frequencies, and PCEs of the
//! principal-component scores of the frequency-warped trajectories.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{fit_adaptive_named, AdaptiveSettings, InputTransform, PceModel};
use crate::dynsys::{simulate, FrequencyGrid, FrfSet, MechModel};
use crate::error::{Error, Result};
use crate::reduce::{fit_pca, PcaReduction};
use crate::sigproc::{
    extract_selected_frequencies, fit_transform, interpolate_complex, peak_position,
    preprocess_ensemble, valley_position, Interpolation, SelectedFrequencies, VecLayout,
};

pub const BUNDLE_FORMAT: &str = "frfpce-surrogate";
pub const BUNDLE_VERSION: u32 = 1;

/// Full model evaluated at the experimental design.
pub trait FullModel: Sync {
    /// FRFs on a fixed grid together with the system poles.
    fn evaluate(&self, x: &[f64]) -> Result<(FrfSet, Vec<Complex64>)>;
}

/// Full model built from a parameter-to-mechanics map.
pub struct MechanicalModel<F> {
    pub build: F,
    pub grid: FrequencyGrid,
}

impl<F> FullModel for MechanicalModel<F>
where
    F: Fn(&[f64]) -> Result<MechModel> + Sync,
{
    fn evaluate(&self, x: &[f64]) -> Result<(FrfSet, Vec<Complex64>)> {
        simulate(&(self.build)(x)?, &self.grid)
    }
}

/// How the reference trajectory is chosen among the design points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceChoice {
    /// Design point closest to the input mean in standard space.
    Central,
    Index(usize),
}

impl Default for ReferenceChoice {
    fn default() -> Self {
        ReferenceChoice::Index(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    pub reference: ReferenceChoice,
    pub energy_real: f64,
    pub energy_imag: f64,
    pub stage1: AdaptiveSettings,
    pub stage2: AdaptiveSettings,
    pub interpolation: Interpolation,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            reference: ReferenceChoice::default(),
            energy_real: 0.99,
            energy_imag: 0.99,
            stage1: AdaptiveSettings::default(),
            stage2: AdaptiveSettings::default(),
            interpolation: Interpolation::default(),
        }
    }
}

/// Stage-1 models. Resonances are shared by all channels and fitted once;
/// the grid endpoints are deterministic and stored as constant models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFrequencyModels {
    pub start: PceModel,
    pub end: PceModel,
    pub peaks: Vec<PceModel>,
    /// `valleys[channel][i]` sits between resonances `i` and `i + 1`.
    pub valleys: Vec<Vec<PceModel>>,
}

impl SelectedFrequencyModels {
    fn all(&self) -> impl Iterator<Item = &PceModel> {
        [&self.start, &self.end]
            .into_iter()
            .chain(self.peaks.iter())
            .chain(self.valleys.iter().flatten())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentModels {
    pub pca: PcaReduction,
    pub models: Vec<PceModel>,
}

impl ComponentModels {
    fn predict_block(&self, x: &[f64]) -> Result<Vec<f64>> {
        let scores: Vec<f64> = self.models.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
        self.pca.reconstruct_row(&scores)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfSurrogate {
    format: String,
    version: u32,
    transform: InputTransform,
    n_outputs: usize,
    n_inputs: usize,
    layout: VecLayout,
    interpolation: Interpolation,
    reference_point: Vec<f64>,
    reference_selected: SelectedFrequencies,
    reference_grid: FrequencyGrid,
    output_grid: FrequencyGrid,
    stage1: SelectedFrequencyModels,
    real: ComponentModels,
    imag: ComponentModels,
    settings: SurrogateSettings,
}

/// Simulations of the experimental design, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DesignData {
    pub frfs: Vec<FrfSet>,
    pub selected: Vec<SelectedFrequencies>,
    pub reference_index: usize,
}

fn pick_reference(transform: &InputTransform, points: &[Vec<f64>], choice: ReferenceChoice) -> Result<usize> {
    match choice {
        ReferenceChoice::Index(i) if i < points.len() => Ok(i),
        ReferenceChoice::Index(i) => Err(Error::Config(format!(
            "reference index {i} out of range for {} design points",
            points.len()
        ))),
        ReferenceChoice::Central => {
            let mut best = (0, f64::INFINITY);
            for (k, x) in points.iter().enumerate() {
                let r: f64 = transform.to_standard(x)?.iter().map(|z| z * z).sum();
                if r < best.1 {
                    best = (k, r);
                }
            }
            Ok(best.0)
        }
    }
}

impl FrfSurrogate {
    /// Evaluates the full model on the design in parallel, then fits both stages.
    pub fn build(
        transform: &InputTransform,
        points: &[Vec<f64>],
        model: &dyn FullModel,
        output_grid: Option<FrequencyGrid>,
        settings: &SurrogateSettings,
    ) -> Result<Self> {
        check_design(points)?;
        let sims: Vec<(FrfSet, Vec<Complex64>)> =
            points.par_iter().map(|x| model.evaluate(x)).collect::<Result<_>>()?;
        Self::build_from_simulations(transform, points, sims, output_grid, settings).map(|(s, _)| s)
    }

    pub fn build_from_simulations(
        transform: &InputTransform,
        points: &[Vec<f64>],
        simulations: Vec<(FrfSet, Vec<Complex64>)>,
        output_grid: Option<FrequencyGrid>,
        settings: &SurrogateSettings,
    ) -> Result<(Self, DesignData)> {
        check_design(points)?;
        if simulations.len() != points.len() {
            return Err(Error::DimensionMismatch {
                what: "simulation count",
                expected: points.len(),
                found: simulations.len(),
            });
        }
        if !(settings.energy_real > 0.0 && settings.energy_real <= 1.0)
            || !(settings.energy_imag > 0.0 && settings.energy_imag <= 1.0)
        {
            return Err(Error::Config("energy fractions must lie in (0, 1]".into()));
        }
        let selected: Vec<SelectedFrequencies> = simulations
            .par_iter()
            .map(|(frf, poles)| extract_selected_frequencies(frf, poles))
            .collect::<Result<_>>()?;
        let frfs: Vec<FrfSet> = simulations.into_iter().map(|(f, _)| f).collect();
        let reference_index = pick_reference(transform, points, settings.reference)?;
        let pre = preprocess_ensemble(&frfs, &selected, reference_index, settings.interpolation)?;

        let n_peaks = pre.reference_selected.n_peaks();
        let n_ch = pre.layout.n_channels;
        let mut responses = Vec::new();
        let mut names = Vec::new();
        for i in 0..n_peaks {
            responses.push(selected.iter().map(|s| s.rows()[0][peak_position(i)]).collect());
            names.push(format!("resonance {i}"));
        }
        for c in 0..n_ch {
            for i in 0..n_peaks.saturating_sub(1) {
                responses.push(selected.iter().map(|s| s.rows()[c][valley_position(i)]).collect());
                names.push(format!("valley {i} of channel {c}"));
            }
        }
        let mut fitted =
            fit_adaptive_named(transform, points, &responses, &names, &settings.stage1)?.into_iter();
        let peaks: Vec<PceModel> = fitted.by_ref().take(n_peaks).collect();
        let valleys: Vec<Vec<PceModel>> = (0..n_ch)
            .map(|_| fitted.by_ref().take(n_peaks.saturating_sub(1)).collect())
            .collect();
        let grid = pre.reference_grid.clone();
        let n = points.len();
        let stage1 = SelectedFrequencyModels {
            start: PceModel::constant(transform.clone(), grid.first(), n),
            end: PceModel::constant(transform.clone(), grid.last(), n),
            peaks,
            valleys,
        };

        let (real, imag) = rayon::join(
            || fit_block(transform, points, &pre.real, settings.energy_real, "real", &settings.stage2),
            || fit_block(transform, points, &pre.imag, settings.energy_imag, "imaginary", &settings.stage2),
        );
        let output_grid = output_grid.unwrap_or_else(|| grid.clone());
        let surrogate = Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            transform: transform.clone(),
            n_outputs: frfs[0].n_outputs(),
            n_inputs: frfs[0].n_inputs(),
            layout: pre.layout,
            interpolation: settings.interpolation,
            reference_point: points[reference_index].clone(),
            reference_selected: pre.reference_selected.clone(),
            reference_grid: grid,
            output_grid,
            stage1,
            real: real?,
            imag: imag?,
            settings: settings.clone(),
        };
        let data = DesignData {
            frfs,
            selected,
            reference_index,
        };
        Ok((surrogate, data))
    }

    pub fn transform(&self) -> &InputTransform {
        &self.transform
    }

    pub fn layout(&self) -> VecLayout {
        self.layout
    }

    pub fn reference_point(&self) -> &[f64] {
        &self.reference_point
    }

    pub fn reference_selected(&self) -> &SelectedFrequencies {
        &self.reference_selected
    }

    pub fn reference_grid(&self) -> &FrequencyGrid {
        &self.reference_grid
    }

    pub fn output_grid(&self) -> &FrequencyGrid {
        &self.output_grid
    }

    pub fn settings(&self) -> &SurrogateSettings {
        &self.settings
    }

    pub fn stage1(&self) -> &SelectedFrequencyModels {
        &self.stage1
    }

    pub fn real_block(&self) -> &ComponentModels {
        &self.real
    }

    pub fn imag_block(&self) -> &ComponentModels {
        &self.imag
    }

    pub fn n_peaks(&self) -> usize {
        self.reference_selected.n_peaks()
    }

    /// Number of selected-frequency entries predicted per evaluation
    /// (`n_channels · n_sf`), counting shared resonances once per channel.
    pub fn stage1_entry_count(&self) -> usize {
        self.layout.n_channels * self.reference_selected.n_selected()
    }

    /// Distinct stage-1 models, endpoints included.
    pub fn stage1_model_count(&self) -> usize {
        self.stage1.all().count()
    }

    pub fn stage2_model_count(&self) -> usize {
        self.real.models.len() + self.imag.models.len()
    }

    /// Every fitted PCE of both stages, constants excluded.
    pub fn fitted_models(&self) -> Vec<&PceModel> {
        self.stage1
            .peaks
            .iter()
            .chain(self.stage1.valleys.iter().flatten())
            .chain(self.real.models.iter())
            .chain(self.imag.models.iter())
            .collect()
    }

    pub fn predict_selected_frequencies(&self, x: &[f64]) -> Result<SelectedFrequencies> {
        let start = self.stage1.start.predict(x)?;
        let end = self.stage1.end.predict(x)?;
        let peaks: Vec<f64> = self.stage1.peaks.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(self.layout.n_channels);
        for (c, valley_models) in self.stage1.valleys.iter().enumerate() {
            let mut row = vec![0.0; self.reference_selected.n_selected()];
            let last = row.len() - 1;
            row[0] = start;
            row[last] = end;
            for (i, &p) in peaks.iter().enumerate() {
                row[peak_position(i)] = p;
            }
            for (i, m) in valley_models.iter().enumerate() {
                row[valley_position(i)] = m.predict(x)?;
            }
            if !row.iter().all(|v| v.is_finite()) || row.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidPrediction(format!(
                    "predicted selected frequencies of channel {c} are not strictly increasing: {row:?}"
                )));
            }
            rows.push(row);
        }
        SelectedFrequencies::new(rows, self.n_peaks())
    }

    /// Scaled-frequency trajectories on the reference grid, before unwarping.
    pub fn predict_scaled(&self, x: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let re = self.real.predict_block(x)?;
        let im = self.imag.predict_block(x)?;
        self.layout.from_blocks(&re, &im)
    }

    pub fn predict_frf(&self, x: &[f64]) -> Result<FrfSet> {
        let scaled = self.predict_scaled(x)?;
        let selected = self.predict_selected_frequencies(x)?;
        self.unwarp(&scaled, &selected)
    }

    fn unwarp(&self, scaled: &[Vec<Complex64>], selected: &SelectedFrequencies) -> Result<FrfSet> {
        let channels = scaled
            .iter()
            .enumerate()
            .map(|(c, traj)| {
                let map = fit_transform(&selected.rows()[c], &self.reference_selected.rows()[c])?;
                let nu: Vec<f64> = self
                    .output_grid
                    .values()
                    .iter()
                    .map(|&w| map.eval(w))
                    .collect::<Result<_>>()?;
                interpolate_complex(self.reference_grid.values(), traj, &nu, self.interpolation)
            })
            .collect::<Result<Vec<_>>>()?;
        FrfSet::new(channels, self.output_grid.clone(), self.n_outputs, self.n_inputs)
    }

    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<Vec<FrfSet>> {
        points.par_iter().map(|x| self.predict_frf(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: BundleHeader = serde_json::from_str(text)?;
        if header.format != BUNDLE_FORMAT {
            return Err(Error::Config(format!("not a surrogate bundle (format `{}`)", header.format)));
        }
        if header.version != BUNDLE_VERSION {
            return Err(Error::Config(format!(
                "unsupported bundle version {} (expected {BUNDLE_VERSION})",
                header.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    /// Writes the bundle through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("bundle")
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Deserialize)]
struct BundleHeader {
    format: String,
    version: u32,
}

fn check_design(points: &[Vec<f64>]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::InsufficientDesign {
            found: points.len(),
            required: 3,
        });
    }
    Ok(())
}

fn fit_block(
    transform: &InputTransform,
    points: &[Vec<f64>],
    data: &DMatrix<f64>,
    energy: f64,
    label: &str,
    settings: &AdaptiveSettings,
) -> Result<ComponentModels> {
    let pca = fit_pca(data, energy)?;
    let scores = pca.project(data)?;
    let responses: Vec<Vec<f64>> = (0..pca.n_components())
        .map(|j| scores.column(j).iter().copied().collect())
        .collect();
    let names: Vec<String> = (0..responses.len()).map(|j| format!("{label} component {j}")).collect();
    let models = fit_adaptive_named(transform, points, &responses, &names, settings)?;
    Ok(ComponentModels { pca, models })
}
