//! Discretization of the plate and every MoM operator derived from it.

pub mod cholesky;
pub mod container;
pub mod efie;
pub mod excitation;
pub mod farfield;
pub mod material;
pub mod mesh;
pub mod meshfile;
pub mod quadrature;
pub mod spherical;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use cholesky::cholesky_loss;
pub use container::{load_operators, save_operators, write_atomic, ContainerError};
pub use efie::{assemble_efie, assemble_efie_multi, EfieOptions};
pub use excitation::{assemble_excitation, ExcitationSpec};
pub use farfield::{farfield_row, farfield_rows};
pub use material::{assemble_lumped, assemble_material, LumpedPort, Resistivity};
pub use mesh::{build_mesh, Mesh, PlateSpec, Vec3};
pub use quadrature::TriangleRule;
pub use spherical::{default_l_max, spherical_projection};

use crate::{C0, C64};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid plate: {0}")]
    InvalidPlate(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid port: {0}")]
    InvalidPort(String),
    #[error("invalid excitation: {0}")]
    InvalidExcitation(String),
    #[error("polarization not orthogonal to direction (d·e = {0:e})")]
    NonOrthogonalPolarization(f64),
    #[error("DOF {dof} out of range (N_dof = {n_dof})")]
    DofOutOfRange { dof: usize, n_dof: usize },
    #[error("matrix is indefinite: eigenvalues span [{min_eigenvalue:e}, {max_eigenvalue:e}]")]
    Indefinite { min_eigenvalue: f64, max_eigenvalue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `W = ω ∂X/∂ω` by central differences at `ω(1 ± δ)`, with its magnetic and
/// electric parts `Xm = (W + X0)/2` and `Xe = (W - X0)/2`.
pub fn energy_split(
    x_minus: &DMatrix<f64>,
    x0: &DMatrix<f64>,
    x_plus: &DMatrix<f64>,
    delta: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let w = (x_plus - x_minus) / (2.0 * delta);
    let xm = (&w + x0) * 0.5;
    let xe = (&w - x0) * 0.5;
    (w, xm, xe)
}

/// Stored-energy matrices at wavenumber `k`.
pub fn stored_energy_matrices(
    mesh: &Mesh,
    k: f64,
    delta: f64,
    opts: &EfieOptions,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), OperatorError> {
    check_delta(delta)?;
    let z = assemble_efie_multi(mesh, &[k * (1.0 - delta), k, k * (1.0 + delta)], opts);
    let im = |m: &DMatrix<C64>| m.map(|c| c.im);
    Ok(energy_split(&im(&z[0]), &im(&z[1]), &im(&z[2]), delta))
}

fn check_delta(delta: f64) -> Result<(), OperatorError> {
    if delta > 0.0 && delta < 0.1 {
        Ok(())
    } else {
        Err(OperatorError::InvalidParameter(format!("finite-difference step must lie in (0, 0.1), got {delta}")))
    }
}

/// Everything needed to assemble an [`OperatorSet`] for one frequency.
#[derive(Clone, Debug)]
pub struct AssemblyConfig {
    pub k: f64,
    pub excitation: ExcitationSpec,
    pub resistivity: Resistivity,
    pub ports: Vec<LumpedPort>,
    pub delta: f64,
    pub l_max: usize,
    pub farfield_dirs: Vec<(Vec3, Vec3)>,
    pub efie: EfieOptions,
}

impl AssemblyConfig {
    /// Lossless plate fed by a delta gap at its centre edge.
    pub fn for_plate(spec: &PlateSpec, mesh: &Mesh) -> Self {
        let gap = mesh.nearest_dof([0.0, 0.0, 0.0]).unwrap_or(0);
        Self {
            k: spec.wavenumber(),
            excitation: ExcitationSpec::delta_gap(gap),
            resistivity: Resistivity::Uniform(0.0),
            ports: Vec::new(),
            delta: 1e-4,
            l_max: default_l_max(spec.ka),
            farfield_dirs: vec![([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]), ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0])],
            efie: EfieOptions::default(),
        }
    }
}

/// Dense operators of one shape-independent discretization at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSet {
    pub k: f64,
    pub z0: DMatrix<C64>,
    pub zrho: DMatrix<f64>,
    /// Diagonal of the lumped-element matrix.
    pub zl: DVector<C64>,
    pub v: DVector<C64>,
    pub w: DMatrix<f64>,
    pub xm: DMatrix<f64>,
    pub xe: DMatrix<f64>,
    pub u1: DMatrix<f64>,
    pub l_chol: DMatrix<f64>,
    pub f_rows: DMatrix<C64>,
    pub f_dirs: Vec<(Vec3, Vec3)>,
    /// Edges driven by the delta-gap source (empty for plane-wave excitation).
    pub gap_dofs: Vec<usize>,
}

impl OperatorSet {
    pub fn assemble(mesh: &Mesh, cfg: &AssemblyConfig) -> Result<Self, OperatorError> {
        if !(cfg.k > 0.0 && cfg.k.is_finite()) {
            return Err(OperatorError::InvalidParameter(format!("wavenumber must be positive, got {}", cfg.k)));
        }
        check_delta(cfg.delta)?;
        if cfg.l_max == 0 {
            return Err(OperatorError::InvalidParameter("l_max must be at least 1".into()));
        }
        let n = mesh.dof_count();
        let k = cfg.k;
        let mut z = assemble_efie_multi(mesh, &[k * (1.0 - cfg.delta), k, k * (1.0 + cfg.delta)], &cfg.efie);
        let z0 = z.swap_remove(1);
        let im = |m: &DMatrix<C64>| m.map(|c| c.im);
        let (w, xm, xe) = energy_split(&im(&z[0]), &im(&z0), &im(&z[1]), cfg.delta);
        let zrho = assemble_material(mesh, &cfg.resistivity)?;
        let zl = assemble_lumped(&cfg.ports, k * C0, n)?;
        let v = assemble_excitation(mesh, &cfg.excitation, k)?;
        let u1 = spherical_projection(mesh, k, cfg.l_max, &cfg.efie.rule);
        let l_chol = cholesky_loss(&zrho)?;
        let f_rows = farfield_rows(mesh, k, &cfg.farfield_dirs, &cfg.efie.rule)?;
        Ok(Self {
            k,
            z0,
            zrho,
            zl,
            v,
            w,
            xm,
            xe,
            u1,
            l_chol,
            f_rows,
            f_dirs: cfg.farfield_dirs.clone(),
            gap_dofs: cfg.excitation.gap_dofs().to_vec(),
        })
    }

    pub fn n_dof(&self) -> usize {
        self.z0.nrows()
    }

    pub fn omega(&self) -> f64 {
        self.k * C0
    }

    pub fn r0(&self) -> DMatrix<f64> {
        self.z0.map(|c| c.re)
    }

    pub fn x0(&self) -> DMatrix<f64> {
        self.z0.map(|c| c.im)
    }

    /// Full system matrix `Z0 + Zρ + Z_L`.
    pub fn system_matrix(&self) -> DMatrix<C64> {
        let mut z = self.z0.clone();
        for (zz, r) in z.iter_mut().zip(self.zrho.iter()) {
            *zz += C64::new(*r, 0.0);
        }
        for i in 0..self.n_dof() {
            z[(i, i)] += self.zl[i];
        }
        z
    }

    /// Ohmic plus lumped resistive losses, `Zρ + Re Z_L`.
    pub fn loss_matrix(&self) -> DMatrix<f64> {
        let mut r = self.zrho.clone();
        for i in 0..self.n_dof() {
            r[(i, i)] += self.zl[i].re;
        }
        r
    }

    /// Row of `F` whose direction and polarization match within `1e-9`.
    pub fn farfield_index(&self, d: Vec3, e: Vec3) -> Option<usize> {
        let close = |a: Vec3, b: Vec3| (0..3).all(|i| (a[i] - b[i]).abs() < 1e-9);
        self.f_dirs.iter().position(|(dd, ee)| close(*dd, d) && close(*ee, e))
    }
}
