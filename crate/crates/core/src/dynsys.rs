//! Second-order mechanical models, their first-order state-space form, and
//! frequency response evaluation.
//!
//! The state vector is `x = [q; q̇]`, so the system matrix reads
//!
//! ```text
//!     A = [   0        I    ]      B = [    0     ]
//!         [ -M⁻¹K   -M⁻¹V  ]          [ M⁻¹ P_u  ]
//! ```
//!
//! FRF channels are flattened output-major: channel `o * n_u + i` maps
//! input `i` to output `o`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_MASS_CONDITION: f64 = 1e14;

/// Mass, damping and stiffness matrices together with force and output maps.
#[derive(Debug, Clone)]
pub struct MechModel {
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    input_map: DMatrix<f64>,
    output_map: DMatrix<f64>,
    throughput: DMatrix<f64>,
}

fn check_symmetric(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "{name} matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

impl MechModel {
    pub fn new(
        mass: DMatrix<f64>,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        input_map: DMatrix<f64>,
        output_map: DMatrix<f64>,
        throughput: DMatrix<f64>,
    ) -> Result<Self> {
        let n = mass.nrows();
        if n == 0 {
            return Err(Error::InvalidModel("model has no degrees of freedom".into()));
        }
        for (name, m) in [("mass", &mass), ("damping", &damping), ("stiffness", &stiffness)] {
            if m.shape() != (n, n) {
                return Err(Error::InvalidModel(format!(
                    "{name} matrix is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} matrix has non-finite entries")));
            }
            check_symmetric(name, m)?;
        }
        let n_u = input_map.ncols();
        let n_y = output_map.nrows();
        if input_map.nrows() != n || n_u == 0 {
            return Err(Error::InvalidModel(format!(
                "input map must be {n}xn_u with n_u >= 1, got {}x{}",
                input_map.nrows(),
                n_u
            )));
        }
        if output_map.ncols() != 2 * n || n_y == 0 {
            return Err(Error::InvalidModel(format!(
                "output map must be n_yx{} with n_y >= 1, got {}x{}",
                2 * n,
                n_y,
                output_map.ncols()
            )));
        }
        if throughput.shape() != (n_y, n_u) {
            return Err(Error::InvalidModel(format!(
                "throughput must be {n_y}x{n_u}, got {}x{}",
                throughput.nrows(),
                throughput.ncols()
            )));
        }
        if mass.clone().cholesky().is_none() {
            return Err(Error::InvalidModel("mass matrix is not positive definite".into()));
        }
        Ok(Self {
            mass,
            damping,
            stiffness,
            input_map,
            output_map,
            throughput,
        })
    }

    /// Model whose outputs are the displacements of the listed DOFs and whose
    /// inputs are unit forces on the listed DOFs.
    pub fn with_displacement_outputs(
        mass: DMatrix<f64>,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        force_dofs: &[usize],
        output_dofs: &[usize],
    ) -> Result<Self> {
        let n = mass.nrows();
        let input_map = selection_columns(n, force_dofs)?;
        let mut output_map = DMatrix::zeros(output_dofs.len(), 2 * n);
        for (row, &dof) in output_dofs.iter().enumerate() {
            if dof >= n {
                return Err(Error::InvalidModel(format!("output DOF {dof} out of range (n = {n})")));
            }
            output_map[(row, dof)] = 1.0;
        }
        let throughput = DMatrix::zeros(output_dofs.len(), force_dofs.len());
        Self::new(mass, damping, stiffness, input_map, output_map, throughput)
    }

    pub fn dofs(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_map.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_map.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    pub fn output_map(&self) -> &DMatrix<f64> {
        &self.output_map
    }
}

fn selection_columns(n: usize, dofs: &[usize]) -> Result<DMatrix<f64>> {
    let mut p = DMatrix::zeros(n, dofs.len());
    for (col, &dof) in dofs.iter().enumerate() {
        if dof >= n {
            return Err(Error::InvalidModel(format!("force DOF {dof} out of range (n = {n})")));
        }
        p[(dof, col)] = 1.0;
    }
    Ok(p)
}

/// First-order realization `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
}

pub fn assemble_state_space(model: &MechModel) -> Result<StateSpace> {
    let n = model.dofs();
    let sv = model.mass.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_MASS_CONDITION {
        return Err(Error::NonInvertibleMass { condition });
    }
    let lu = model.mass.clone().lu();
    let solve = |rhs: &DMatrix<f64>| {
        lu.solve(rhs)
            .ok_or(Error::NonInvertibleMass { condition })
    };
    let minv_k = solve(&model.stiffness)?;
    let minv_v = solve(&model.damping)?;
    let minv_p = solve(&model.input_map)?;

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-minv_k));
    a.view_mut((n, n), (n, n)).copy_from(&(-minv_v));
    let mut b = DMatrix::zeros(2 * n, model.n_inputs());
    b.view_mut((n, 0), (n, model.n_inputs())).copy_from(&minv_p);
    Ok(StateSpace {
        a,
        b,
        c: model.output_map.clone(),
        d: model.throughput.clone(),
    })
}

/// Strictly increasing angular frequencies in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    values: Vec<f64>,
    equidistant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyUnit {
    Hz,
    #[serde(rename = "rad/s", alias = "rad")]
    RadPerSec,
}

impl FrequencyUnit {
    pub fn to_rad_per_sec(self, v: f64) -> f64 {
        match self {
            FrequencyUnit::Hz => 2.0 * std::f64::consts::PI * v,
            FrequencyUnit::RadPerSec => v,
        }
    }
}

impl FrequencyGrid {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 frequencies, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite frequency".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        let h0 = values[1] - values[0];
        // rounding of the stored abscissae is tolerated on top of the relative bound
        let slack = 4.0 * f64::EPSILON * values[values.len() - 1].abs();
        let equidistant = values
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h0).abs() <= 1e-12 * h0 + slack);
        Ok(Self {
            values,
            equidistant,
        })
    }

    /// Equidistant grid `start, start + step, ...` up to and including `stop`
    /// when it falls on the lattice (within a 1e-9 step fraction).
    pub fn from_range(start: f64, stop: f64, step: f64, unit: FrequencyUnit) -> Result<Self> {
        if !(step > 0.0) || !(stop > start) {
            return Err(Error::InvalidGrid(format!(
                "need start < stop and step > 0 (got {start}, {stop}, {step})"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| unit.to_rad_per_sec(start + i as f64 * step))
            .collect();
        let mut grid = Self::from_values(values)?;
        grid.equidistant = true;
        Ok(grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_equidistant(&self) -> bool {
        self.equidistant
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Complex FRF amplitudes of every input/output pair over a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrfSet {
    channels: Vec<Vec<Complex64>>,
    grid: FrequencyGrid,
    n_outputs: usize,
    n_inputs: usize,
}

impl FrfSet {
    pub fn new(
        channels: Vec<Vec<Complex64>>,
        grid: FrequencyGrid,
        n_outputs: usize,
        n_inputs: usize,
    ) -> Result<Self> {
        if channels.len() != n_outputs * n_inputs {
            return Err(Error::DimensionMismatch {
                what: "FRF channel count",
                expected: n_outputs * n_inputs,
                found: channels.len(),
            });
        }
        for ch in &channels {
            if ch.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    what: "FRF channel length",
                    expected: grid.len(),
                    found: ch.len(),
                });
            }
            if ch.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numeric("FRF contains NaN or Inf".into()));
            }
        }
        Ok(Self {
            channels,
            grid,
            n_outputs,
            n_inputs,
        })
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn channel(&self, output: usize, input: usize) -> &[Complex64] {
        &self.channels[output * self.n_inputs + input]
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }
}

/// Evaluates `C (jωI - A)⁻¹ B + D` at every grid frequency through an LU
/// factorization of the resolvent.
pub fn evaluate_frf(ss: &StateSpace, grid: &FrequencyGrid) -> Result<FrfSet> {
    let n_states = ss.n_states();
    let n_u = ss.n_inputs();
    let n_y = ss.n_outputs();
    let a = ss.a.map(|v| Complex64::new(v, 0.0));
    let b = ss.b.map(|v| Complex64::new(v, 0.0));
    let c = ss.c.map(|v| Complex64::new(v, 0.0));
    let d = ss.d.map(|v| Complex64::new(v, 0.0));

    let per_freq: Vec<DMatrix<Complex64>> = grid
        .values()
        .par_iter()
        .map(|&omega| {
            let mut resolvent = -&a;
            for i in 0..n_states {
                resolvent[(i, i)] += Complex64::new(0.0, omega);
            }
            let z = resolvent
                .lu()
                .solve(&b)
                .ok_or(Error::SingularResolvent { omega })?;
            let h = &c * z + &d;
            if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::SingularResolvent { omega });
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;

    let mut channels = vec![Vec::with_capacity(grid.len()); n_y * n_u];
    for h in &per_freq {
        for o in 0..n_y {
            for i in 0..n_u {
                channels[o * n_u + i].push(h[(o, i)]);
            }
        }
    }
    FrfSet::new(channels, grid.clone(), n_y, n_u)
}

/// Eigenvalues of `A`, sorted by ascending `|Im|` (then by `Im`).
pub fn system_poles(ss: &StateSpace) -> Result<Vec<Complex64>> {
    let schur = ss
        .a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    let mut poles: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if poles.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    poles.sort_by(|x, y| {
        x.im.abs()
            .total_cmp(&y.im.abs())
            .then(x.im.total_cmp(&y.im))
            .then(x.re.total_cmp(&y.re))
    });
    Ok(poles)
}

/// Damped natural frequencies `|Im(λ)|` of the oscillatory poles, ascending,
/// one per conjugate pair.
pub fn damped_frequencies(poles: &[Complex64]) -> Vec<f64> {
    let mut w: Vec<f64> = poles.iter().filter(|p| p.im > 0.0).map(|p| p.im).collect();
    w.sort_by(f64::total_cmp);
    w
}

/// Modal damping ratios `-Re(λ)/|λ|` of the oscillatory poles, ordered like
/// [`damped_frequencies`].
pub fn modal_damping_ratios(poles: &[Complex64]) -> Vec<f64> {
    let mut p: Vec<Complex64> = poles.iter().filter(|p| p.im > 0.0).copied().collect();
    p.sort_by(|x, y| x.im.total_cmp(&y.im));
    p.iter().map(|p| -p.re / p.norm()).collect()
}

/// Direct displacement FRF `C_q (K - ω²M + jωV)⁻¹ P_u`; used as a cross-check
/// of the state-space route.
pub fn direct_displacement_frf(model: &MechModel, omega: f64) -> Result<DMatrix<Complex64>> {
    let n = model.dofs();
    let dyn_stiffness = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            model.stiffness[(i, j)] - omega * omega * model.mass[(i, j)],
            omega * model.damping[(i, j)],
        )
    });
    let p = model.input_map.map(|v| Complex64::new(v, 0.0));
    let q = dyn_stiffness
        .lu()
        .solve(&p)
        .ok_or(Error::SingularResolvent { omega })?;
    let cq = model
        .output_map
        .columns(0, n)
        .map(|v| Complex64::new(v, 0.0));
    Ok(cq * q)
}

/// Convenience: state-space assembly, pole computation and FRF evaluation.
pub fn simulate(model: &MechModel, grid: &FrequencyGrid) -> Result<(FrfSet, Vec<Complex64>)> {
    let ss = assemble_state_space(model)?;
    let frf = evaluate_frf(&ss, grid)?;
    let poles = system_poles(&ss)?;
    Ok((frf, poles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_oscillator(c: f64, k: f64) -> MechModel {
        MechModel::with_displacement_outputs(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, k),
            &[0],
            &[0],
        )
        .unwrap()
    }

    pub(crate) fn two_dof(k: f64) -> MechModel {
        let m = DMatrix::identity(2, 2);
        let kk = DMatrix::from_row_slice(2, 2, &[2.0 * k, -k, -k, k]);
        let v = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        MechModel::with_displacement_outputs(m, v, kk, &[0], &[0, 1]).unwrap()
    }

    #[test]
    fn unit_oscillator_state_matrix() {
        let ss = assemble_state_space(&unit_oscillator(0.0, 1.0)).unwrap();
        assert_eq!(ss.a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(ss.b, DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn two_dof_lower_left_block() {
        let ss = assemble_state_space(&two_dof(15000.0)).unwrap();
        let ll = ss.a.view((2, 0), (2, 2)).into_owned();
        assert_eq!(ll, DMatrix::from_row_slice(2, 2, &[-30000.0, 15000.0, 15000.0, -15000.0]));
        let ur = ss.a.view((0, 2), (2, 2)).into_owned();
        assert_eq!(ur, DMatrix::identity(2, 2));
        assert!(ss.a.view((0, 0), (2, 2)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaled_mass_inverse() {
        let model = MechModel::with_displacement_outputs(
            DMatrix::identity(2, 2) * 2.0,
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            &[0],
            &[0],
        )
        .unwrap();
        let ss = assemble_state_space(&model).unwrap();
        let ll = ss.a.view((2, 0), (2, 2)).into_owned();
        assert_relative_eq!(ll, DMatrix::identity(2, 2) * -0.5, epsilon = 1e-15);
    }

    #[test]
    fn ill_conditioned_mass_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-15]);
        let model = MechModel::with_displacement_outputs(
            m,
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            &[0],
            &[0],
        )
        .unwrap();
        assert!(matches!(
            assemble_state_space(&model),
            Err(Error::NonInvertibleMass { .. })
        ));
    }

    #[test]
    fn invalid_models() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(MechModel::with_displacement_outputs(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            asym,
            &[0],
            &[0]
        )
        .is_err());
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(MechModel::with_displacement_outputs(
            not_pd,
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            &[0],
            &[0]
        )
        .is_err());
        assert!(MechModel::with_displacement_outputs(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            &[],
            &[0]
        )
        .is_err());
    }

    #[test]
    fn unit_oscillator_frf() {
        let ss = assemble_state_space(&unit_oscillator(0.0, 1.0)).unwrap();
        let grid = FrequencyGrid::from_values(vec![2.0, 3.0]).unwrap();
        let frf = evaluate_frf(&ss, &grid).unwrap();
        assert_relative_eq!(frf.channels()[0][0].re, -1.0 / 3.0, epsilon = 1e-14);
        assert!(frf.channels()[0][0].im.abs() < 1e-14);
        assert_relative_eq!(frf.channels()[0][1].re, -1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn static_flexibility() {
        let ss = assemble_state_space(&two_dof(15000.0)).unwrap();
        let grid = FrequencyGrid::from_values(vec![1e-6, 2e-6]).unwrap();
        let frf = evaluate_frf(&ss, &grid).unwrap();
        // K⁻¹ e1 = [1/k, 1/k]
        assert_relative_eq!(frf.channel(0, 0)[0].re, 1.0 / 15000.0, max_relative = 1e-8);
        assert_relative_eq!(frf.channel(1, 0)[0].re, 1.0 / 15000.0, max_relative = 1e-8);
    }

    #[test]
    fn undamped_pole_is_singular() {
        let ss = assemble_state_space(&unit_oscillator(0.0, 1.0)).unwrap();
        let grid = FrequencyGrid::from_values(vec![0.5, 1.0]).unwrap();
        match evaluate_frf(&ss, &grid) {
            Err(Error::SingularResolvent { omega }) => assert_eq!(omega, 1.0),
            other => panic!("expected singular resolvent, got {other:?}"),
        }
    }

    #[test]
    fn paper_grid_point_count() {
        let grid = FrequencyGrid::from_range(10.0, 35.0, 0.01, FrequencyUnit::Hz).unwrap();
        assert_eq!(grid.len(), 2501);
        assert!(grid.is_equidistant());
        assert_relative_eq!(grid.last(), 2.0 * std::f64::consts::PI * 35.0, max_relative = 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::from_values(vec![1.0]).is_err());
        assert!(FrequencyGrid::from_values(vec![1.0, 1.0]).is_err());
        assert!(!FrequencyGrid::from_values(vec![1.0, 2.0, 4.0]).unwrap().is_equidistant());
        assert!(FrequencyGrid::from_range(2.0, 1.0, 0.1, FrequencyUnit::Hz).is_err());
    }

    #[test]
    fn poles_of_simple_systems() {
        let ss = assemble_state_space(&unit_oscillator(0.0, 1.0)).unwrap();
        let p = system_poles(&ss).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-12 && z.re.abs() < 1e-12));

        let ss = assemble_state_space(&unit_oscillator(1.0, 15000.0)).unwrap();
        let p = system_poles(&ss).unwrap();
        for z in &p {
            assert_relative_eq!(z.re, -0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_dof_poles_match_analytic_eigenvalues() {
        let ss = assemble_state_space(&two_dof(15000.0)).unwrap();
        let poles = system_poles(&ss).unwrap();
        let w = damped_frequencies(&poles);
        let s5 = 5f64.sqrt();
        let w1 = (15000.0 * (3.0 - s5) / 2.0).sqrt();
        let w2 = (15000.0 * (3.0 + s5) / 2.0).sqrt();
        // light damping shifts the damped frequency by ζ²/2
        assert_relative_eq!(w[0], w1, max_relative = 1e-5);
        assert_relative_eq!(w[1], w2, max_relative = 1e-4);
        assert!((w[0] - 75.69).abs() < 0.01 && (w[1] - 198.17).abs() < 0.01);
        assert!(poles.iter().all(|p| p.re < 0.0));
    }

    #[test]
    fn state_space_matches_direct_formula_and_reciprocity() {
        let model = {
            let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0]);
            let k = DMatrix::from_row_slice(
                3,
                3,
                &[400.0, -150.0, 0.0, -150.0, 300.0, -100.0, 0.0, -100.0, 100.0],
            );
            let v = &k * 1e-3 + &m * 0.05;
            MechModel::with_displacement_outputs(m, v, k, &[0, 2], &[0, 2]).unwrap()
        };
        let ss = assemble_state_space(&model).unwrap();
        let grid = FrequencyGrid::from_range(0.5, 30.0, 0.37, FrequencyUnit::RadPerSec).unwrap();
        let frf = evaluate_frf(&ss, &grid).unwrap();
        for (l, &w) in grid.values().iter().enumerate() {
            let direct = direct_displacement_frf(&model, w).unwrap();
            for o in 0..2 {
                for i in 0..2 {
                    let a = frf.channel(o, i)[l];
                    let b = direct[(o, i)];
                    assert!((a - b).norm() <= 1e-10 * b.norm(), "ω={w} ({o},{i})");
                }
            }
            let h01 = frf.channel(0, 1)[l];
            let h10 = frf.channel(1, 0)[l];
            assert!((h01 - h10).norm() <= 1e-10 * h01.norm());
        }
    }
}
