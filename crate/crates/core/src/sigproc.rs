//! Selected frequencies (resonances and inter-peak valleys) and the
//! continuous piecewise-linear frequency warp that aligns them across
//! realizations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{damped_frequencies, FrequencyGrid, FrfSet};
use crate::error::{Error, Result};

/// Relative slack accepted when a query sits on the boundary of a mapped span.
const SPAN_TOL: f64 = 1e-12;

/// One row of selected frequencies per channel:
/// `[ω_1, ω_p1, ω_m1, ω_p2, ..., ω_pn, ω_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFrequencies {
    rows: Vec<Vec<f64>>,
    n_peaks: usize,
}

impl SelectedFrequencies {
    pub fn new(rows: Vec<Vec<f64>>, n_peaks: usize) -> Result<Self> {
        let n_sf = row_length(n_peaks);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_sf {
                return Err(Error::DimensionMismatch {
                    what: "selected-frequency row length",
                    expected: n_sf,
                    found: row.len(),
                });
            }
            if !strictly_increasing(row) {
                return Err(Error::InvalidKnots(format!(
                    "selected frequencies of channel {i} are not strictly increasing"
                )));
            }
        }
        Ok(Self { rows, n_peaks })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_peaks(&self) -> usize {
        self.n_peaks
    }

    /// Row length `n_sf`.
    pub fn n_selected(&self) -> usize {
        row_length(self.n_peaks)
    }

    /// Resonance frequencies, shared by every row.
    pub fn peaks(&self) -> Vec<f64> {
        (0..self.n_peaks).map(|i| self.rows[0][peak_position(i)]).collect()
    }

    /// Antiresonance frequencies of one channel.
    pub fn valleys(&self, channel: usize) -> Vec<f64> {
        (0..self.n_peaks.saturating_sub(1))
            .map(|i| self.rows[channel][valley_position(i)])
            .collect()
    }

    /// Rows concatenated channel by channel.
    pub fn vectorize(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

pub fn row_length(n_peaks: usize) -> usize {
    2 * n_peaks + 1
}

/// Index of resonance `i` within a row.
pub fn peak_position(i: usize) -> usize {
    1 + 2 * i
}

/// Index of the valley between resonances `i` and `i + 1` within a row.
pub fn valley_position(i: usize) -> usize {
    2 + 2 * i
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

/// Builds the selected-frequency matrix of one realization.
///
/// Resonances are the damped pole frequencies strictly inside the grid span.
/// Each valley is the argmin of `|H|` over the grid points strictly between
/// two consecutive resonances, refined with a parabola through `log|H|` at the
/// discrete minimum and its two neighbours.
pub fn extract_selected_frequencies(frf: &FrfSet, poles: &[Complex64]) -> Result<SelectedFrequencies> {
    let grid = frf.grid().values();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let peaks: Vec<f64> = damped_frequencies(poles)
        .into_iter()
        .filter(|&w| w > lo && w < hi)
        .collect();
    if peaks.is_empty() {
        return Err(Error::NoResonance { lo, hi });
    }
    let mut intervals = Vec::with_capacity(peaks.len() - 1);
    for (index, pair) in peaks.windows(2).enumerate() {
        let start = grid.partition_point(|&w| w <= pair[0]);
        let end = grid.partition_point(|&w| w < pair[1]);
        let points = end.saturating_sub(start);
        if points < 3 {
            return Err(Error::Resolution {
                index,
                lo: pair[0],
                hi: pair[1],
                points,
            });
        }
        intervals.push((start, end));
    }

    let rows = frf
        .channels()
        .iter()
        .map(|channel| {
            let mag: Vec<f64> = channel.iter().map(|z| z.norm()).collect();
            let mut row = Vec::with_capacity(row_length(peaks.len()));
            row.push(lo);
            for (i, &p) in peaks.iter().enumerate() {
                row.push(p);
                if let Some(&(start, end)) = intervals.get(i) {
                    let m = (start..end)
                        .min_by(|&a, &b| mag[a].total_cmp(&mag[b]))
                        .expect("interval holds at least 3 points");
                    let refined = refine_valley(grid, &mag, m);
                    row.push(refined.clamp(grid[start], grid[end - 1]));
                }
            }
            row.push(hi);
            row
        })
        .collect();
    SelectedFrequencies::new(rows, peaks.len())
}

fn refine_valley(grid: &[f64], mag: &[f64], m: usize) -> f64 {
    if m == 0 || m + 1 >= grid.len() {
        return grid[m];
    }
    let (x0, x1, x2) = (grid[m - 1], grid[m], grid[m + 1]);
    if mag[m - 1] <= 0.0 || mag[m] <= 0.0 || mag[m + 1] <= 0.0 {
        return x1;
    }
    let (y0, y1, y2) = (mag[m - 1].ln(), mag[m].ln(), mag[m + 1].ln());
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    // den < 0 means the parabola opens downwards
    if !(den.abs() > 0.0) || !num.is_finite() {
        return x1;
    }
    let x = x1 - 0.5 * num / den;
    if x.is_finite() && x > x0 && x < x2 {
        x
    } else {
        x1
    }
}

/// Continuous, strictly increasing piecewise-linear map through
/// `(source[j], target[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearMap {
    source: Vec<f64>,
    target: Vec<f64>,
}

impl PiecewiseLinearMap {
    pub fn new(source: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::InvalidKnots(format!(
                "knot lists differ in length ({} vs {})",
                source.len(),
                target.len()
            )));
        }
        if source.len() < 2 {
            return Err(Error::InvalidKnots("need at least two knots".into()));
        }
        if !strictly_increasing(&source) || !strictly_increasing(&target) {
            return Err(Error::InvalidKnots("knots must be strictly increasing".into()));
        }
        Ok(Self { source, target })
    }

    pub fn source_knots(&self) -> &[f64] {
        &self.source
    }

    pub fn target_knots(&self) -> &[f64] {
        &self.target
    }

    pub fn n_segments(&self) -> usize {
        self.source.len() - 1
    }

    /// Slope of segment `j`.
    pub fn slope(&self, j: usize) -> f64 {
        (self.target[j] - self.target[j + 1]) / (self.source[j] - self.source[j + 1])
    }

    /// Intercept of segment `j`, chosen so that both segment ends map exactly.
    pub fn intercept(&self, j: usize) -> f64 {
        self.target[j + 1] - self.slope(j) * self.source[j + 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.source[0], self.source[self.source.len() - 1])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = SPAN_TOL * lo.abs().max(hi.abs());
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::Extrapolation { value: x, lo, hi });
        }
        let j = self
            .source
            .partition_point(|&s| s <= x)
            .clamp(1, self.source.len() - 1)
            - 1;
        if x == self.source[j] {
            return Ok(self.target[j]);
        }
        let t = (x - self.source[j]) / (self.source[j + 1] - self.source[j]);
        Ok(self.target[j] + t * (self.target[j + 1] - self.target[j]))
    }

    pub fn inverse(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// Map sending the knots of `source_row` onto those of `reference_row`.
pub fn fit_transform(source_row: &[f64], reference_row: &[f64]) -> Result<PiecewiseLinearMap> {
    PiecewiseLinearMap::new(source_row.to_vec(), reference_row.to_vec())
}

pub fn invert_map(map: &PiecewiseLinearMap) -> PiecewiseLinearMap {
    map.inverse()
}

/// Rule used to resample complex FRF samples; real and imaginary parts are
/// always interpolated independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Linear,
    /// Natural cubic spline through all samples.
    #[default]
    CubicSpline,
}

fn check_span(xs: &[f64], targets: &[f64]) -> Result<()> {
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let slack = SPAN_TOL * lo.abs().max(hi.abs());
    match targets.iter().find(|&&t| !(t >= lo - slack && t <= hi + slack)) {
        Some(&t) => Err(Error::Extrapolation { value: t, lo, hi }),
        None => Ok(()),
    }
}

/// Segment index `j` with `xs[j] <= t < xs[j + 1]`, clamped to valid segments.
fn segment(xs: &[f64], t: f64, hint: usize) -> usize {
    let last = xs.len() - 2;
    let mut j = hint.min(last);
    if t >= xs[j] && (j == last || t < xs[j + 1]) {
        return j;
    }
    if j < last && t >= xs[j + 1] && (j + 1 == last || t < xs[j + 2]) {
        j += 1;
        return j;
    }
    xs.partition_point(|&x| x <= t).saturating_sub(1).min(last)
}

/// Interpolates complex samples `(xs, ys)` at `targets` (any order, but sorted
/// targets are resolved in linear time).
pub fn interpolate_complex(
    xs: &[f64],
    ys: &[Complex64],
    targets: &[f64],
    rule: Interpolation,
) -> Result<Vec<Complex64>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "interpolation samples",
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidGrid("need at least two samples".into()));
    }
    check_span(xs, targets)?;
    let curvature = match rule {
        Interpolation::CubicSpline if xs.len() >= 3 => Some(natural_spline_curvature(xs, ys)),
        _ => None,
    };
    let mut j = 0usize;
    Ok(targets
        .iter()
        .map(|&t| {
            j = segment(xs, t, j);
            let h = xs[j + 1] - xs[j];
            let b = ((t - xs[j]) / h).clamp(0.0, 1.0);
            let a = 1.0 - b;
            let linear = ys[j] * a + ys[j + 1] * b;
            match &curvature {
                Some(m) => linear + (m[j] * (a * a * a - a) + m[j + 1] * (b * b * b - b)) * (h * h / 6.0),
                None => linear,
            }
        })
        .collect())
}

/// Second derivatives of the natural cubic spline through `(xs, ys)`.
fn natural_spline_curvature(xs: &[f64], ys: &[Complex64]) -> Vec<Complex64> {
    let n = xs.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n];
    // Thomas algorithm on the interior equations
    let mut diag = vec![0.0; n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i] = 2.0 * (h0 + h1);
        rhs[i] = ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0) * 6.0;
        if i > 1 {
            let w = h0 / diag[i - 1];
            diag[i] -= w * h0;
            rhs[i] = rhs[i] - rhs[i - 1] * w;
        }
    }
    for i in (1..n - 1).rev() {
        let h1 = xs[i + 1] - xs[i];
        let upper = if i + 1 < n - 1 { m[i + 1] * h1 } else { Complex64::new(0.0, 0.0) };
        m[i] = (rhs[i] - upper) / diag[i];
    }
    m
}

/// Re-indexes `channel` (sampled on `grid`) to `ν = map(ω)` and resamples it
/// onto `reference_grid`.
pub fn warp_frf(
    channel: &[Complex64],
    grid: &FrequencyGrid,
    map: &PiecewiseLinearMap,
    reference_grid: &FrequencyGrid,
    rule: Interpolation,
) -> Result<Vec<Complex64>> {
    if channel.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "channel length",
            expected: grid.len(),
            found: channel.len(),
        });
    }
    if grid.values() == reference_grid.values() && map.source == map.target {
        return Ok(channel.to_vec());
    }
    let scaled: Vec<f64> = grid
        .values()
        .iter()
        .map(|&w| map.eval(w))
        .collect::<Result<_>>()?;
    interpolate_complex(&scaled, channel, reference_grid.values(), rule)
}

/// FRF channels resampled on the common scaled-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFrfSet {
    pub channels: Vec<Vec<Complex64>>,
    pub reference_grid: FrequencyGrid,
}

/// Layout used to flatten complex channels into real vectors: channel-major,
/// then frequency; the real block precedes the imaginary block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VecLayout {
    pub n_channels: usize,
    pub n_points: usize,
}

impl VecLayout {
    /// Width of one (real or imaginary) block.
    pub fn block_width(&self) -> usize {
        self.n_channels * self.n_points
    }

    pub fn index(&self, channel: usize, point: usize) -> usize {
        channel * self.n_points + point
    }

    pub fn real_block(&self, channels: &[Vec<Complex64>]) -> Vec<f64> {
        channels.iter().flatten().map(|z| z.re).collect()
    }

    pub fn imag_block(&self, channels: &[Vec<Complex64>]) -> Vec<f64> {
        channels.iter().flatten().map(|z| z.im).collect()
    }

    pub fn vectorize(&self, channels: &[Vec<Complex64>]) -> Result<Vec<f64>> {
        self.check(channels)?;
        let mut v = self.real_block(channels);
        v.extend(self.imag_block(channels));
        Ok(v)
    }

    pub fn unvectorize(&self, v: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let w = self.block_width();
        if v.len() != 2 * w {
            return Err(Error::DimensionMismatch {
                what: "vectorized FRF length",
                expected: 2 * w,
                found: v.len(),
            });
        }
        self.from_blocks(&v[..w], &v[w..])
    }

    pub fn from_blocks(&self, real: &[f64], imag: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let w = self.block_width();
        if real.len() != w || imag.len() != w {
            return Err(Error::DimensionMismatch {
                what: "FRF block width",
                expected: w,
                found: real.len().max(imag.len()),
            });
        }
        Ok((0..self.n_channels)
            .map(|c| {
                (0..self.n_points)
                    .map(|l| {
                        let k = self.index(c, l);
                        Complex64::new(real[k], imag[k])
                    })
                    .collect()
            })
            .collect())
    }

    fn check(&self, channels: &[Vec<Complex64>]) -> Result<()> {
        if channels.len() != self.n_channels {
            return Err(Error::DimensionMismatch {
                what: "channel count",
                expected: self.n_channels,
                found: channels.len(),
            });
        }
        if let Some(ch) = channels.iter().find(|c| c.len() != self.n_points) {
            return Err(Error::DimensionMismatch {
                what: "channel length",
                expected: self.n_points,
                found: ch.len(),
            });
        }
        Ok(())
    }
}

/// Outputs of the warping preprocessing of an experimental design.
#[derive(Debug, Clone)]
pub struct PreprocessedEnsemble {
    /// `N_ED × (n_channels · n_sf)`, rows are vectorized selected frequencies.
    pub selected_table: DMatrix<f64>,
    /// `N_ED × (n_channels · n_ω)` real parts of the warped trajectories.
    pub real: DMatrix<f64>,
    /// Same layout, imaginary parts.
    pub imag: DMatrix<f64>,
    pub reference_index: usize,
    pub reference_selected: SelectedFrequencies,
    pub reference_grid: FrequencyGrid,
    pub layout: VecLayout,
}

impl PreprocessedEnsemble {
    pub fn scaled(&self, k: usize) -> ScaledFrfSet {
        let real: Vec<f64> = self.real.row(k).iter().copied().collect();
        let imag: Vec<f64> = self.imag.row(k).iter().copied().collect();
        ScaledFrfSet {
            channels: self
                .layout
                .from_blocks(&real, &imag)
                .expect("block widths match the layout"),
            reference_grid: self.reference_grid.clone(),
        }
    }
}

pub fn preprocess_ensemble(
    frfs: &[FrfSet],
    selected: &[SelectedFrequencies],
    reference_index: usize,
    rule: Interpolation,
) -> Result<PreprocessedEnsemble> {
    if frfs.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if frfs.len() != selected.len() {
        return Err(Error::DimensionMismatch {
            what: "selected-frequency sets",
            expected: frfs.len(),
            found: selected.len(),
        });
    }
    if reference_index >= frfs.len() {
        return Err(Error::Config(format!(
            "reference index {reference_index} out of range for {} realizations",
            frfs.len()
        )));
    }
    let reference = &frfs[reference_index];
    let reference_grid = reference.grid().clone();
    let reference_selected = selected[reference_index].clone();
    let n_sf = reference_selected.n_selected();
    let n_ch = reference.n_channels();
    for (k, (frf, sf)) in frfs.iter().zip(selected).enumerate() {
        if frf.grid() != &reference_grid {
            return Err(Error::InvalidGrid(format!(
                "realization {k} uses a different frequency grid"
            )));
        }
        if frf.n_channels() != n_ch || sf.rows().len() != n_ch {
            return Err(Error::DimensionMismatch {
                what: "channel count",
                expected: n_ch,
                found: frf.n_channels().min(sf.rows().len()),
            });
        }
        if sf.n_selected() != n_sf {
            return Err(Error::ModeCount {
                realization: k,
                expected: n_sf,
                found: sf.n_selected(),
            });
        }
    }

    let layout = VecLayout {
        n_channels: n_ch,
        n_points: reference_grid.len(),
    };
    let warped: Vec<Vec<Vec<Complex64>>> = frfs
        .par_iter()
        .zip(selected.par_iter())
        .map(|(frf, sf)| {
            frf.channels()
                .iter()
                .zip(sf.rows().iter().zip(reference_selected.rows()))
                .map(|(channel, (row, ref_row))| {
                    let map = fit_transform(row, ref_row)?;
                    warp_frf(channel, frf.grid(), &map, &reference_grid, rule)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let n = frfs.len();
    let w = layout.block_width();
    let mut real = DMatrix::zeros(n, w);
    let mut imag = DMatrix::zeros(n, w);
    for (k, channels) in warped.iter().enumerate() {
        for (c, ch) in channels.iter().enumerate() {
            for (l, z) in ch.iter().enumerate() {
                real[(k, layout.index(c, l))] = z.re;
                imag[(k, layout.index(c, l))] = z.im;
            }
        }
    }
    let mut selected_table = DMatrix::zeros(n, n_ch * n_sf);
    for (k, sf) in selected.iter().enumerate() {
        for (j, v) in sf.vectorize().into_iter().enumerate() {
            selected_table[(k, j)] = v;
        }
    }
    Ok(PreprocessedEnsemble {
        selected_table,
        real,
        imag,
        reference_index,
        reference_selected,
        reference_grid,
        layout,
    })
}
