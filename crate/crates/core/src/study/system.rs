use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynsys::{simulate, FrequencyGrid, FrfSet, MechModel};
use crate::error::{Error, Result};
use crate::surrogate::FullModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Mass,
    Damping,
    Stiffness,
}

/// Adds `x[parameter] · pattern` to one of the system matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub parameter: usize,
    pub matrix: MatrixKind,
    pub pattern: DMatrix<f64>,
}

/// Pattern of a spring or dashpot between two DOFs (`None` is ground).
pub fn link_pattern(n: usize, a: usize, b: Option<usize>) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    p[(a, a)] += 1.0;
    if let Some(b) = b {
        p[(b, b)] += 1.0;
        p[(a, b)] -= 1.0;
        p[(b, a)] -= 1.0;
    }
    p
}

/// Pattern of a lumped mass on one DOF.
pub fn point_pattern(n: usize, a: usize) -> DMatrix<f64> {
    link_pattern(n, a, None)
}

/// Mechanical system whose matrices depend affinely on the random inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSystem {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub contributions: Vec<Contribution>,
    pub force_dofs: Vec<usize>,
    pub output_dofs: Vec<usize>,
}

impl ParametricSystem {
    pub fn dofs(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_parameters(&self) -> usize {
        self.contributions.iter().map(|c| c.parameter + 1).max().unwrap_or(0)
    }

    pub fn assemble(&self, x: &[f64]) -> Result<MechModel> {
        let mut m = self.mass.clone();
        let mut v = self.damping.clone();
        let mut k = self.stiffness.clone();
        for c in &self.contributions {
            let value = *x.get(c.parameter).ok_or(Error::DimensionMismatch {
                what: "parameter count",
                expected: c.parameter + 1,
                found: x.len(),
            })?;
            let target = match c.matrix {
                MatrixKind::Mass => &mut m,
                MatrixKind::Damping => &mut v,
                MatrixKind::Stiffness => &mut k,
            };
            if target.shape() != c.pattern.shape() {
                return Err(Error::InvalidModel("contribution pattern has the wrong shape".into()));
            }
            *target += &c.pattern * value;
        }
        MechModel::with_displacement_outputs(m, v, k, &self.force_dofs, &self.output_dofs)
    }
}

/// [`ParametricSystem`] simulated on a fixed grid.
pub struct SystemModel<'a> {
    pub system: &'a ParametricSystem,
    pub grid: &'a FrequencyGrid,
}

impl FullModel for SystemModel<'_> {
    fn evaluate(&self, x: &[f64]) -> Result<(FrfSet, Vec<Complex64>)> {
        simulate(&self.system.assemble(x)?, self.grid)
    }
}
