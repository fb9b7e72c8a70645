//! First Laplace eigenvalues: closed-form registry values for homogeneous
//! spaces, and numerical values on triangle meshes with a cotangent
//! discretization, including antipodal quotients of centrally symmetric meshes.

pub mod eigen;
pub mod laplacian;
pub mod mesh;
pub mod registry;

use serde::Serialize;
use thiserror::Error;

pub use eigen::{smallest_positive_eigenpair, SolverOptions, ZERO_MODE};
pub use laplacian::{build_mesh_laplacian, CsrMatrix, MeshOperators};
pub use mesh::{antipodal_quotient, parse_off, write_off, MeshFile, TriMesh};
pub use registry::{lambda1_closed_form, Covering, CurvatureModel, Lambda1, Registry, SpaceDescriptor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("face {0} references a missing vertex")]
    InvalidFace(usize),
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("edge ({a}, {b}) is shared by {count} faces, expected 2")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("identification pair ({a}, {b}) references a missing vertex")]
    InvalidIdentification { a: usize, b: usize },
    #[error("mesh already carries an identification")]
    AlreadyIdentified,
    #[error("vertex {0} has no antipodal partner")]
    NotCentrallySymmetric(usize),
    #[error("face {0} has no antipodal partner face")]
    AsymmetricFace(usize),
    #[error("grid with {0} cells per side is too coarse")]
    GridTooCoarse(usize),
    #[error("eigensolver did not converge within {0} iterations")]
    SolverFailure(usize),
    #[error("no first eigenvalue registered for {0}")]
    UnknownSpectrum(String),
    #[error("space {0} is not registered")]
    UnknownSpace(String),
    #[error("invalid space descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("inputs are not linked by a covering: {0}")]
    MismatchedPair(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralResult {
    pub lambda1: f64,
    /// Eigenfunction per degree of freedom, `vᵀMv = 1`.
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
    pub solver_iterations: usize,
    /// (vertex count, face count) of the input mesh.
    pub mesh_size: (usize, usize),
    pub dof_count: usize,
    /// Vertex → degree of freedom map when the mesh carries an identification.
    #[serde(skip)]
    pub identification: Option<Vec<usize>>,
}

/// λ₁ of a closed triangle mesh (or of its quotient when identified).
pub fn lambda1_mesh(m: &TriMesh, opts: &SolverOptions) -> Result<SpectralResult, SpectralError> {
    let ops = build_mesh_laplacian(m)?;
    let pair = smallest_positive_eigenpair(&ops, opts)?;
    Ok(SpectralResult {
        lambda1: pair.value,
        eigenvector: pair.vector,
        solver_iterations: pair.iterations,
        mesh_size: (m.vertices().len(), m.faces().len()),
        dof_count: m.dof_count(),
        identification: m.identification().map(<[usize]>::to_vec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullbackReport {
    pub lambda1_cover: f64,
    pub lambda1_base: f64,
    /// `λ₁(base) ≥ λ₁(cover) − tol`.
    pub eigenvalue_order: bool,
    /// Rayleigh quotient on the cover of the lifted base eigenfunction.
    pub lifted_rayleigh: f64,
    /// `|lifted_rayleigh − λ₁(base)|`.
    pub rayleigh_deviation: f64,
    /// `‖K u − λ₁(base) M u‖ / ‖M u‖` for the lifted function `u` on the cover.
    pub lifted_residual: f64,
    pub tol: f64,
}

impl PullbackReport {
    pub fn holds(&self) -> bool {
        self.eigenvalue_order && self.rayleigh_deviation <= self.tol
    }
}

/// Lifts the base eigenfunction to the cover through the identification
/// (constant on each fiber) and checks that it is an eigenfunction of the
/// cover with the base eigenvalue, hence `λ₁(base) ≥ λ₁(cover)`.
pub fn verify_pullback(
    cover_mesh: &TriMesh,
    cover: &SpectralResult,
    base: &SpectralResult,
    tol: f64,
) -> Result<PullbackReport, SpectralError> {
    if cover.identification.is_some() || cover_mesh.identification().is_some() {
        return Err(SpectralError::MismatchedPair(
            "cover mesh must not be identified".into(),
        ));
    }
    let Some(classes) = &base.identification else {
        return Err(SpectralError::MismatchedPair(
            "base carries no identification map".into(),
        ));
    };
    if classes.len() != cover_mesh.vertices().len()
        || cover.dof_count != cover_mesh.vertices().len()
        || classes.iter().any(|&c| c >= base.eigenvector.len())
    {
        return Err(SpectralError::MismatchedPair(
            "size mismatch between cover and base".into(),
        ));
    }
    let ops = build_mesh_laplacian(cover_mesh)?;
    let lifted: Vec<f64> = classes.iter().map(|&c| base.eigenvector[c]).collect();
    let rayleigh = ops.rayleigh_quotient(&lifted);
    Ok(PullbackReport {
        lambda1_cover: cover.lambda1,
        lambda1_base: base.lambda1,
        eigenvalue_order: base.lambda1 >= cover.lambda1 - tol,
        lifted_rayleigh: rayleigh,
        rayleigh_deviation: (rayleigh - base.lambda1).abs(),
        lifted_residual: ops.relative_residual(&lifted, base.lambda1),
        tol,
    })
}

/// Registry form of the pullback check: `λ₁(base) ≥ λ₁(cover) − tol` for a
/// registered covering.
pub fn verify_pullback_registry(
    cover: &SpaceDescriptor,
    base: &SpaceDescriptor,
    tol: f64,
) -> Result<bool, SpectralError> {
    if !cover.covers(base) {
        return Err(SpectralError::MismatchedPair(format!(
            "{} does not cover {}",
            cover.name, base.name
        )));
    }
    Ok(lambda1_closed_form(base)? >= lambda1_closed_form(cover)? - tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_icosphere_and_quotient() {
        let m = TriMesh::icosphere(2);
        let opts = SolverOptions::default();
        let cover = lambda1_mesh(&m, &opts).unwrap();
        let q = antipodal_quotient(&m).unwrap();
        let base = lambda1_mesh(&q, &opts).unwrap();
        assert!((cover.lambda1 - 2.0).abs() < 0.1, "{}", cover.lambda1);
        assert!((base.lambda1 - 6.0).abs() < 0.5, "{}", base.lambda1);
        let report = verify_pullback(&m, &cover, &base, 1e-6).unwrap();
        assert!(report.holds(), "{report:?}");
        assert!(report.rayleigh_deviation < 1e-8);
        assert!(report.lifted_residual < 1e-4);
    }

    #[test]
    fn pullback_detects_violation_and_mismatch() {
        let m = TriMesh::icosphere(1);
        let opts = SolverOptions::default();
        let cover = lambda1_mesh(&m, &opts).unwrap();
        let base = lambda1_mesh(&antipodal_quotient(&m).unwrap(), &opts).unwrap();
        let fake = SpectralResult {
            lambda1: cover.lambda1 * 0.5,
            ..base.clone()
        };
        let report = verify_pullback(&m, &cover, &fake, 1e-6).unwrap();
        assert!(!report.eigenvalue_order);
        assert!(!report.holds());
        assert!(matches!(
            verify_pullback(&m, &cover, &cover, 1e-6),
            Err(SpectralError::MismatchedPair(_))
        ));
    }

    #[test]
    fn registry_pullback() {
        let r = Registry::builtin();
        let s2 = r.get("sphere:2").unwrap();
        let rp2 = r.get("rp:2").unwrap();
        assert!(verify_pullback_registry(s2, rp2, 1e-9).unwrap());
        assert!(matches!(
            verify_pullback_registry(rp2, s2, 1e-9),
            Err(SpectralError::MismatchedPair(_))
        ));
    }

    #[test]
    fn solver_budget_exhaustion_is_reported() {
        let m = TriMesh::icosphere(2);
        let opts = SolverOptions {
            max_iterations: Some(5),
            ..SolverOptions::default()
        };
        assert!(matches!(lambda1_mesh(&m, &opts), Err(SpectralError::SolverFailure(_))));
    }
}
