//! Pointwise algebraic curvature tensors.
//!
//! A [`CurvatureTensor`] stores the (0,4) array `R[i][j][k][l]` of one tangent
//! space in an orthonormal basis. The sign convention is
//!
//! ```text
//! K(X∧Y) = R(X, Y, Y, X) / (|X|²|Y|² − ⟨X,Y⟩²)
//! R(X, Y, Z, W) = c0 (⟨X,W⟩⟨Y,Z⟩ − ⟨X,Z⟩⟨Y,W⟩)   (space form of curvature c0)
//! ```
//!
//! so the unit sphere has `K ≡ +1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{orthonormality_defect, random_symmetric};

/// Default tolerance for the algebraic symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Tolerance on `FᵀF = I` for frames and subspace bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Gram determinant below which two vectors are treated as not spanning a plane.
pub const DEGENERATE_GRAM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryFamily {
    Antisymmetry,
    PairSymmetry,
    FirstBianchi,
}

impl fmt::Display for SymmetryFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymmetryFamily::Antisymmetry => "antisymmetry",
            SymmetryFamily::PairSymmetry => "pair symmetry",
            SymmetryFamily::FirstBianchi => "first Bianchi identity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension {0} is too small, need n >= 2")]
    DimensionError(usize),
    #[error("component array has {len} entries, not n^4 for any n")]
    ShapeError { len: usize },
    #[error("{family} violated: max deviation {max_deviation:e}")]
    SymmetryViolation { family: SymmetryFamily, max_deviation: f64 },
    #[error("vectors do not span a plane (Gram determinant {gram:e})")]
    DegeneratePlane { gram: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("subspace rank {0} is out of range")]
    RankError(usize),
    #[error("columns are not orthonormal (max defect {0:e})")]
    NotOrthonormal(f64),
}

/// Raw deviations of an input array from each symmetry family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SymmetryDeviation {
    pub antisymmetry: f64,
    pub pair_symmetry: f64,
    pub first_bianchi: f64,
}

/// Algebraic curvature tensor at a point. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    n: usize,
    components: Vec<f64>,
}

#[inline]
fn idx(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    ((i * n + j) * n + k) * n + l
}

fn dimension_of(len: usize) -> Option<usize> {
    let n = (len as f64).powf(0.25).round() as usize;
    (n.pow(4) == len).then_some(n)
}

fn deviations(n: usize, c: &[f64]) -> SymmetryDeviation {
    let mut d = SymmetryDeviation::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = c[idx(n, i, j, k, l)];
                    d.antisymmetry = d
                        .antisymmetry
                        .max((r + c[idx(n, j, i, k, l)]).abs())
                        .max((r + c[idx(n, i, j, l, k)]).abs());
                    d.pair_symmetry = d.pair_symmetry.max((r - c[idx(n, k, l, i, j)]).abs());
                    let cyc = r + c[idx(n, i, k, l, j)] + c[idx(n, i, l, j, k)];
                    d.first_bianchi = d.first_bianchi.max(cyc.abs());
                }
            }
        }
    }
    d
}

/// Projects an arbitrary array onto the space of algebraic curvature tensors:
/// average over the 8-element group generated by the index swaps, then remove
/// the totally antisymmetric part (one third of the cyclic sum).
fn symmetrize(n: usize, c: &[f64]) -> Vec<f64> {
    let mut avg = vec![0.0; c.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let s = c[idx(n, i, j, k, l)] - c[idx(n, j, i, k, l)] - c[idx(n, i, j, l, k)]
                        + c[idx(n, j, i, l, k)]
                        + c[idx(n, k, l, i, j)]
                        - c[idx(n, l, k, i, j)]
                        - c[idx(n, k, l, j, i)]
                        + c[idx(n, l, k, j, i)];
                    avg[idx(n, i, j, k, l)] = s / 8.0;
                }
            }
        }
    }
    let mut out = vec![0.0; c.len()];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let cyc = avg[idx(n, i, j, k, l)] + avg[idx(n, i, k, l, j)] + avg[idx(n, i, l, j, k)];
                    out[idx(n, i, j, k, l)] = avg[idx(n, i, j, k, l)] - cyc / 3.0;
                }
            }
        }
    }
    out
}

impl CurvatureTensor {
    /// Validates a flat `n⁴` array (row-major in `i, j, k, l`) and returns the
    /// orbit-symmetrized tensor. Deviations are measured on the raw input and
    /// compared against `tol · max(1, max |R|)`.
    pub fn from_components(components: Vec<f64>, tol: f64) -> Result<Self, TensorError> {
        let n = dimension_of(components.len()).ok_or(TensorError::ShapeError { len: components.len() })?;
        if n < 2 {
            return Err(TensorError::DimensionError(n));
        }
        let scale = components.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let dev = deviations(n, &components);
        let bound = tol * scale;
        for (family, value) in [
            (SymmetryFamily::Antisymmetry, dev.antisymmetry),
            (SymmetryFamily::PairSymmetry, dev.pair_symmetry),
            (SymmetryFamily::FirstBianchi, dev.first_bianchi),
        ] {
            if !(value <= bound) {
                return Err(TensorError::SymmetryViolation {
                    family,
                    max_deviation: value,
                });
            }
        }
        Ok(Self {
            n,
            components: symmetrize(n, &components),
        })
    }

    /// Same as [`from_components`](Self::from_components) for a nested `[n][n][n][n]` array.
    pub fn from_nested(nested: &[Vec<Vec<Vec<f64>>>], tol: f64) -> Result<Self, TensorError> {
        let n = nested.len();
        let mut flat = Vec::with_capacity(n.pow(4));
        for a in nested {
            if a.len() != n {
                return Err(TensorError::ShapeError { len: a.len() });
            }
            for b in a {
                if b.len() != n {
                    return Err(TensorError::ShapeError { len: b.len() });
                }
                for c in b {
                    if c.len() != n {
                        return Err(TensorError::ShapeError { len: c.len() });
                    }
                    flat.extend_from_slice(c);
                }
            }
        }
        if n < 2 {
            return Err(TensorError::DimensionError(n));
        }
        Self::from_components(flat, tol)
    }

    /// Space-form tensor `c0 (⟨X,W⟩⟨Y,Z⟩ − ⟨X,Z⟩⟨Y,W⟩)`.
    pub fn constant_curvature(n: usize, c0: f64) -> Result<Self, TensorError> {
        if n < 2 {
            return Err(TensorError::DimensionError(n));
        }
        let mut components = vec![0.0; n.pow(4)];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                // δ_il δ_jk − δ_ik δ_jl, nonzero only for {k,l} = {i,j}
                components[idx(n, i, j, j, i)] = c0;
                components[idx(n, i, j, i, j)] = -c0;
            }
        }
        Ok(Self { n, components })
    }

    pub fn flat(n: usize) -> Result<Self, TensorError> {
        Self::constant_curvature(n, 0.0)
    }

    /// Random algebraic curvature tensor: a Gaussian combination of
    /// Kulkarni–Nomizu squares `A ⊙ A` of random symmetric matrices, which
    /// span the space of curvature tensors.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, TensorError> {
        if n < 2 {
            return Err(TensorError::DimensionError(n));
        }
        let terms = n * (n + 1) / 2 + 2;
        let mut components = vec![0.0; n.pow(4)];
        for _ in 0..terms {
            let w: f64 = rng.sample(rand_distr::StandardNormal);
            let a = random_symmetric(n, rng);
            let a = a / (n as f64).sqrt();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let kn = a[(i, l)] * a[(j, k)] - a[(i, k)] * a[(j, l)];
                            components[idx(n, i, j, k, l)] += w * kn;
                        }
                    }
                }
            }
        }
        Self::from_components(components, SYMMETRY_TOL)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.components[idx(self.n, i, j, k, l)]
    }

    /// Flat row-major component array.
    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Nested `[n][n][n][n]` copy of the components, the shape used in tensor files.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| (0..n).map(|l| self.get(i, j, k, l)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<(), TensorError> {
        if len != self.n {
            return Err(TensorError::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }

    /// Full contraction `R(x, y, z, w)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if y[j] == 0.0 {
                    continue;
                }
                let xy = x[i] * y[j];
                for k in 0..n {
                    let base = idx(n, i, j, k, 0);
                    let mut inner = 0.0;
                    for l in 0..n {
                        inner += self.components[base + l] * w[l];
                    }
                    total += xy * z[k] * inner;
                }
            }
        }
        total
    }

    /// Jacobi operator matrix `S(v)_{il} = Σ_{jk} R_{ijkl} v_j v_k`, so that
    /// `R(w, v, v, z) = wᵀ S(v) z`. Symmetric by pair symmetry.
    pub fn jacobi_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if v[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let vjk = v[j] * v[k];
                    if vjk == 0.0 {
                        continue;
                    }
                    let base = idx(n, i, j, k, 0);
                    for l in 0..n {
                        s[(i, l)] += self.components[base + l] * vjk;
                    }
                }
            }
        }
        s
    }

    /// Sectional curvature of the plane spanned by `x` and `y`.
    pub fn sectional_curvature(&self, x: &[f64], y: &[f64]) -> Result<f64, TensorError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let xx: f64 = x.iter().map(|a| a * a).sum();
        let yy: f64 = y.iter().map(|a| a * a).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let gram = xx * yy - xy * xy;
        if !(gram > DEGENERATE_GRAM) {
            return Err(TensorError::DegeneratePlane { gram });
        }
        Ok(self.evaluate(x, y, y, x) / gram)
    }

    /// `τ = Σ_{i<j} K(e_i ∧ e_j)` over the columns of `frame`.
    pub fn scalar_curvature(&self, frame: &Frame) -> Result<f64, TensorError> {
        self.check_len(frame.dim())?;
        Ok(self.sum_over_columns(frame.matrix()))
    }

    /// Scalar curvature of the subspace spanned by `subspace`'s basis.
    pub fn subspace_scalar_curvature(&self, subspace: &Subspace) -> Result<f64, TensorError> {
        self.check_len(subspace.ambient_dim())?;
        Ok(self.sum_over_columns(subspace.basis()))
    }

    /// Sum of `R(e_a, e_b, e_b, e_a)` over column pairs of an orthonormal matrix.
    fn sum_over_columns(&self, basis: &DMatrix<f64>) -> f64 {
        let cols: Vec<Vec<f64>> = basis.column_iter().map(|c| c.iter().copied().collect()).collect();
        let mut total = 0.0;
        for a in 0..cols.len() {
            for b in (a + 1)..cols.len() {
                total += self.evaluate(&cols[a], &cols[b], &cols[b], &cols[a]);
            }
        }
        total
    }

    /// Scalar curvature in the coordinate basis (the tensor is stored in an orthonormal one).
    pub fn scalar_curvature_standard(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += self.get(i, j, j, i);
            }
        }
        total
    }

    /// Components of the same tensor expressed in the orthonormal frame given
    /// by the columns of `q`: `R'_{abcd} = Σ R_{ijkl} q_{ia} q_{jb} q_{kc} q_{ld}`.
    pub fn in_frame(&self, q: &DMatrix<f64>) -> Result<Self, TensorError> {
        self.check_len(q.nrows())?;
        self.check_len(q.ncols())?;
        let n = self.n;
        // contract one index at a time
        let mut cur = self.components.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; cur.len()];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let v = cur[idx(n, i, j, k, l)];
                            if v == 0.0 {
                                continue;
                            }
                            for a in 0..n {
                                let (target, coef) = match slot {
                                    0 => (idx(n, a, j, k, l), q[(i, a)]),
                                    1 => (idx(n, i, a, k, l), q[(j, a)]),
                                    2 => (idx(n, i, j, a, l), q[(k, a)]),
                                    _ => (idx(n, i, j, k, a), q[(l, a)]),
                                };
                                next[target] += v * coef;
                            }
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(Self { n, components: cur })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n,
            components: self.components.iter().map(|v| v * a).collect(),
        }
    }

    /// Ricci curvature `Ric(v, v)` of a unit vector, the sum of `K(v ∧ e)` over
    /// an orthonormal complement.
    pub fn ricci(&self, v: &[f64]) -> f64 {
        self.jacobi_matrix(v).trace()
    }

    pub fn max_deviation(&self) -> SymmetryDeviation {
        deviations(self.n, &self.components)
    }
}

/// Orthonormal basis of a tangent space, stored as the columns of an orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame(DMatrix<f64>);

impl Frame {
    pub fn new(m: DMatrix<f64>) -> Result<Self, TensorError> {
        if m.nrows() != m.ncols() {
            return Err(TensorError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let defect = orthonormality_defect(&m);
        if !(defect <= ORTHONORMAL_TOL) {
            return Err(TensorError::NotOrthonormal(defect));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.0.column(i).into_owned()
    }
}

/// Subspace of dimension `r ≥ 2` given by an orthonormal `n × r` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self, TensorError> {
        let (n, r) = basis.shape();
        if r < 2 || r > n {
            return Err(TensorError::RankError(r));
        }
        let defect = orthonormality_defect(&basis);
        if !(defect <= ORTHONORMAL_TOL) {
            return Err(TensorError::NotOrthonormal(defect));
        }
        Ok(Self { basis })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }
}

/// Tensor file contents: explicit components or a named model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorFile {
    Components {
        n: usize,
        components: Vec<Vec<Vec<Vec<f64>>>>,
    },
    Model {
        n: usize,
        model: TensorModel,
        c0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorModel {
    Constant,
}

impl TensorFile {
    pub fn into_tensor(self, tol: f64) -> Result<CurvatureTensor, TensorError> {
        match self {
            TensorFile::Components { n, components } => {
                let t = CurvatureTensor::from_nested(&components, tol)?;
                if t.dim() != n {
                    return Err(TensorError::DimensionMismatch {
                        expected: n,
                        found: t.dim(),
                    });
                }
                Ok(t)
            }
            TensorFile::Model {
                n,
                model: TensorModel::Constant,
                c0,
            } => CurvatureTensor::constant_curvature(n, c0),
        }
    }
}
