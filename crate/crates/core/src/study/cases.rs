//! Built-in two- and six-degree-of-freedom benchmark systems.

use nalgebra::DMatrix;

use super::sampling::{Family, RandomInputSpec, RandomParameter};
use super::system::{link_pattern, point_pattern, Contribution, MatrixKind, ParametricSystem};
use crate::chaos::AdaptiveSettings;
use crate::dynsys::{FrequencyGrid, FrequencyUnit};
use crate::error::Result;
use crate::surrogate::SurrogateSettings;

/// A complete, reproducible benchmark: inputs, system, grid and fit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub name: String,
    pub inputs: RandomInputSpec,
    pub system: ParametricSystem,
    pub grid: FrequencyGrid,
    pub settings: SurrogateSettings,
    pub ed_size: usize,
}

fn param(name: &str, family: Family, mean: f64, cov: f64) -> RandomParameter {
    RandomParameter {
        name: name.into(),
        family,
        mean,
        cov,
    }
}

/// Two unit masses in a chain, both springs equal to one Gaussian stiffness
/// `k ~ N(15000, (0.05·15000)²)`, unit dashpots, force on the first mass.
pub fn two_dof() -> CaseStudy {
    let n = 2;
    let damping = link_pattern(n, 0, None) + link_pattern(n, 0, Some(1));
    let system = ParametricSystem {
        mass: DMatrix::identity(n, n),
        damping,
        stiffness: DMatrix::zeros(n, n),
        contributions: vec![
            Contribution { parameter: 0, matrix: MatrixKind::Stiffness, pattern: link_pattern(n, 0, None) },
            Contribution { parameter: 0, matrix: MatrixKind::Stiffness, pattern: link_pattern(n, 0, Some(1)) },
        ],
        force_dofs: vec![0],
        output_dofs: vec![0, 1],
    };
    CaseStudy {
        name: "2dof".into(),
        inputs: RandomInputSpec {
            parameters: vec![param("k", Family::Gaussian, 15000.0, 0.05)],
        },
        system,
        grid: FrequencyGrid::from_range(10.0, 35.0, 0.01, FrequencyUnit::Hz).expect("valid grid"),
        settings: SurrogateSettings {
            energy_real: 0.99,
            energy_imag: 0.99,
            ..Default::default()
        },
        ed_size: 40,
    }
}

pub const SIX_DOF_MASSES: [f64; 6] = [50.0, 35.0, 12.0, 33.0, 100.0, 45.0];
pub const SIX_DOF_STIFFNESSES: [f64; 10] = [3000.0, 1725.0, 1200.0, 2200.0, 1320.0, 1330.0, 1500.0, 2625.0, 1800.0, 850.0];
/// Spring end points (0-based DOF, `None` is ground), in parameter order.
pub const SIX_DOF_LINKS: [(usize, Option<usize>); 10] = [
    (0, None),
    (0, Some(1)),
    (0, Some(2)),
    (0, Some(5)),
    (1, Some(5)),
    (2, Some(5)),
    (5, Some(3)),
    (5, Some(4)),
    (4, None),
    (3, None),
];

/// Grid step of the six-DOF study, rad/s.
pub const SIX_DOF_STEP: f64 = 0.01 * std::f64::consts::PI;

/// Six masses and ten springs, all lognormal; deterministic damping
/// `damping_scale · diag(mean masses)`; force on mass 6, all displacements out.
pub fn six_dof(damping_scale: f64) -> Result<CaseStudy> {
    six_dof_with_step(damping_scale, SIX_DOF_STEP)
}

pub fn six_dof_with_step(damping_scale: f64, step: f64) -> Result<CaseStudy> {
    let n = 6;
    let mut contributions = Vec::new();
    let mut parameters = Vec::new();
    for (i, &m) in SIX_DOF_MASSES.iter().enumerate() {
        contributions.push(Contribution {
            parameter: parameters.len(),
            matrix: MatrixKind::Mass,
            pattern: point_pattern(n, i),
        });
        parameters.push(param(&format!("m{}", i + 1), Family::Lognormal, m, 0.05));
    }
    for (j, (&k, &(a, b))) in SIX_DOF_STIFFNESSES.iter().zip(&SIX_DOF_LINKS).enumerate() {
        contributions.push(Contribution {
            parameter: parameters.len(),
            matrix: MatrixKind::Stiffness,
            pattern: link_pattern(n, a, b),
        });
        parameters.push(param(&format!("k{}", j + 1), Family::Lognormal, k, 0.1));
    }
    let mean_mass = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&SIX_DOF_MASSES));
    let system = ParametricSystem {
        mass: DMatrix::zeros(n, n),
        damping: mean_mass * damping_scale,
        stiffness: DMatrix::zeros(n, n),
        contributions,
        force_dofs: vec![5],
        output_dofs: (0..n).collect(),
    };
    Ok(CaseStudy {
        name: if damping_scale == 0.1 { "6dof".into() } else { format!("6dof-d{damping_scale}") },
        inputs: RandomInputSpec::new(parameters)?,
        system,
        grid: FrequencyGrid::from_range(1.0, 25.0, step, FrequencyUnit::RadPerSec)?,
        settings: SurrogateSettings {
            energy_real: 0.999,
            energy_imag: 0.999,
            stage1: AdaptiveSettings { q_norm: 0.7, max_rank: 2, ..Default::default() },
            stage2: AdaptiveSettings { q_norm: 0.7, max_rank: 2, ..Default::default() },
            ..Default::default()
        },
        ed_size: 400,
    })
}
